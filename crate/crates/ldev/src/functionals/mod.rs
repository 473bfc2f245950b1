//! Smooth functionals on the unit cube with certified derivative bounds.
//!
//! A [`Functional`] packages evaluation, gradient, and three certified
//! constants: `a >= sup|f|`, per-coordinate `b_i >= sup|df/dx_i|`, and
//! pairwise `c_ij >= sup|d2f/dx_i dx_j|`. The constants are stored as
//! structured rules rather than dense tables, because for edge functionals
//! the coordinate count is N(N-1)/2 and the pair matrix has only a few
//! distinct values. Budget evaluators consume the rules through
//! [`BudgetSums`], which carries every aggregate the error terms need,
//! computed in closed form per rule.

pub mod ap3;
pub mod ergm;
pub mod graphs;
pub mod tilt;
pub mod toy;

use crate::entropy::Bernoulli;
use crate::{Error, Kahan, Result};

/// Per-coordinate bound rule for |df/dx_i|.
#[derive(Clone, Debug)]
pub enum CoordRule {
    Uniform(f64),
    PerCoord(Vec<f64>),
}

impl CoordRule {
    pub fn value(&self, i: usize) -> f64 {
        match self {
            CoordRule::Uniform(b) => *b,
            CoordRule::PerCoord(v) => v[i],
        }
    }

    pub fn scale(&self, s: f64) -> CoordRule {
        let s = s.abs();
        match self {
            CoordRule::Uniform(b) => CoordRule::Uniform(b * s),
            CoordRule::PerCoord(v) => CoordRule::PerCoord(v.iter().map(|b| b * s).collect()),
        }
    }

    fn moments(&self, n: usize) -> (f64, f64, f64) {
        match self {
            CoordRule::Uniform(b) => {
                let nf = n as f64;
                (nf * b, nf * b * b, nf * b.powi(4))
            }
            CoordRule::PerCoord(v) => {
                assert_eq!(v.len(), n, "per-coordinate rule length mismatch");
                let s1 = crate::ksum(v.iter().copied());
                let s2 = crate::ksum(v.iter().map(|b| b * b));
                let s4 = crate::ksum(v.iter().map(|b| b.powi(4)));
                (s1, s2, s4)
            }
        }
    }
}

/// Pairwise bound rule for |d2f/dx_i dx_j|, symmetric with a meaningful
/// diagonal. Variants cover every functional family in the crate.
#[derive(Clone, Debug)]
pub enum PairRule {
    Zero,
    /// Constant diagonal and off-diagonal values.
    Uniform { diag: f64, off: f64 },
    /// Coordinates are unordered vertex pairs of a graph on `n_vertices`
    /// nodes; the bound depends only on whether the two pairs share a
    /// vertex (union of size 2 or 3) or are disjoint (size 4).
    EdgeClass { n_vertices: usize, shared: f64, disjoint: f64 },
    /// Cyclic structure: c_ij = class[(j - i) mod n]. The class vector must
    /// satisfy class[d] = class[n - d] for symmetry.
    Circulant { class: Vec<f64> },
    /// Explicit symmetric matrix, row-major. Small systems only.
    Dense { n: usize, vals: Vec<f64> },
    /// scale * base_ij + rank_one * b_i * b_j; `b` must be the same
    /// coordinate rule whose products appear in the rank-one part.
    Affine { scale: f64, base: Box<PairRule>, rank_one: f64, b: CoordRule },
}

impl PairRule {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        match self {
            PairRule::Zero => 0.0,
            PairRule::Uniform { diag, off } => {
                if i == j {
                    *diag
                } else {
                    *off
                }
            }
            PairRule::EdgeClass { n_vertices, shared, disjoint } => {
                let (a, b) = graphs::pair_from_index(*n_vertices, i);
                let (c, d) = graphs::pair_from_index(*n_vertices, j);
                let mut set = [a, b, c, d];
                set.sort_unstable();
                let mut distinct = 1;
                for w in set.windows(2) {
                    if w[1] != w[0] {
                        distinct += 1;
                    }
                }
                if distinct <= 3 {
                    *shared
                } else {
                    *disjoint
                }
            }
            PairRule::Circulant { class } => {
                let n = class.len();
                class[(j % n + n - i % n) % n]
            }
            PairRule::Dense { n, vals } => vals[i * n + j],
            PairRule::Affine { scale, base, rank_one, b } => {
                scale * base.value(i, j) + rank_one * b.value(i) * b.value(j)
            }
        }
    }

    pub fn scale(&self, s: f64) -> PairRule {
        let s = s.abs();
        match self {
            PairRule::Zero => PairRule::Zero,
            PairRule::Uniform { diag, off } => PairRule::Uniform { diag: diag * s, off: off * s },
            PairRule::EdgeClass { n_vertices, shared, disjoint } => PairRule::EdgeClass {
                n_vertices: *n_vertices,
                shared: shared * s,
                disjoint: disjoint * s,
            },
            PairRule::Circulant { class } => {
                PairRule::Circulant { class: class.iter().map(|c| c * s).collect() }
            }
            PairRule::Dense { n, vals } => {
                PairRule::Dense { n: *n, vals: vals.iter().map(|c| c * s).collect() }
            }
            PairRule::Affine { scale, base, rank_one, b } => PairRule::Affine {
                scale: scale * s,
                base: base.clone(),
                rank_one: rank_one * s,
                b: b.clone(),
            },
        }
    }
}

/// Certified derivative bounds for a functional.
#[derive(Clone, Debug)]
pub struct DerivBounds {
    /// sup |f| over the cube.
    pub a: f64,
    /// Per-coordinate bound on the first partials.
    pub b: CoordRule,
    /// Pairwise bound on the second partials.
    pub c: PairRule,
}

impl DerivBounds {
    pub fn scale(&self, s: f64) -> DerivBounds {
        DerivBounds { a: self.a * s.abs(), b: self.b.scale(s), c: self.c.scale(s) }
    }

    pub fn sums(&self, n: usize) -> BudgetSums {
        BudgetSums::from_rules(n, self.a, &self.b, &self.c)
    }
}

/// Every aggregate of (a, b, c) the error budgets consume. Sums over pairs
/// run over all ordered (i, j) including the diagonal.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct BudgetSums {
    pub n: usize,
    pub a: f64,
    /// sum_i b_i
    pub sum_b: f64,
    /// sum_i b_i^2
    pub sum_b2: f64,
    /// sum_i b_i^4
    pub sum_b4: f64,
    /// sum_i c_ii
    pub sum_cii: f64,
    /// sum_i c_ii^2
    pub sum_cii2: f64,
    /// sum_i c_ii b_i^2
    pub sum_cii_b2: f64,
    /// sum_{i,j} c_ij
    pub sum_c: f64,
    /// sum_{i,j} c_ij^2
    pub sum_c2: f64,
    /// sum_{i,j} b_i c_ij
    pub sum_b_c: f64,
    /// sum_{i,j} b_i b_j c_ij
    pub sum_bb_c: f64,
}

/// Largest n for which falling back to explicit O(n^2) loops is acceptable.
const LOOP_FALLBACK_LIMIT: usize = 20_000;

fn coord_rules_equal(x: &CoordRule, y: &CoordRule, n: usize) -> bool {
    match (x, y) {
        (CoordRule::Uniform(a), CoordRule::Uniform(b)) => a == b,
        (CoordRule::PerCoord(a), CoordRule::PerCoord(b)) => a == b,
        _ => (0..n).all(|i| x.value(i) == y.value(i)),
    }
}

impl BudgetSums {
    pub fn from_rules(n: usize, a: f64, b: &CoordRule, c: &PairRule) -> BudgetSums {
        let (sum_b, sum_b2, sum_b4) = b.moments(n);
        let mut out = BudgetSums {
            n,
            a,
            sum_b,
            sum_b2,
            sum_b4,
            sum_cii: 0.0,
            sum_cii2: 0.0,
            sum_cii_b2: 0.0,
            sum_c: 0.0,
            sum_c2: 0.0,
            sum_b_c: 0.0,
            sum_bb_c: 0.0,
        };
        match (b, c) {
            (_, PairRule::Zero) => {}
            (CoordRule::Uniform(bv), PairRule::Uniform { diag, off }) => {
                let nf = n as f64;
                out.sum_cii = nf * diag;
                out.sum_cii2 = nf * diag * diag;
                out.sum_cii_b2 = nf * diag * bv * bv;
                out.sum_c = nf * diag + nf * (nf - 1.0) * off;
                out.sum_c2 = nf * diag * diag + nf * (nf - 1.0) * off * off;
                out.sum_b_c = bv * out.sum_c;
                out.sum_bb_c = bv * bv * out.sum_c;
            }
            (CoordRule::Uniform(bv), PairRule::EdgeClass { n_vertices, shared, disjoint }) => {
                let nn = *n_vertices;
                assert_eq!(n, nn * (nn - 1) / 2, "edge-class rule dimension mismatch");
                let nf = n as f64;
                // per coordinate: itself (union size 2), 2(N-2) neighbors
                // sharing a vertex (size 3), the rest disjoint (size 4)
                let near = 2.0 * (nn as f64 - 2.0);
                let far = nf - 1.0 - near;
                out.sum_cii = nf * shared;
                out.sum_cii2 = nf * shared * shared;
                out.sum_cii_b2 = nf * shared * bv * bv;
                out.sum_c = nf * ((1.0 + near) * shared + far * disjoint);
                out.sum_c2 = nf * ((1.0 + near) * shared * shared + far * disjoint * disjoint);
                out.sum_b_c = bv * out.sum_c;
                out.sum_bb_c = bv * bv * out.sum_c;
            }
            (CoordRule::Uniform(bv), PairRule::Circulant { class }) => {
                assert_eq!(class.len(), n, "circulant rule dimension mismatch");
                let nf = n as f64;
                let cls_sum = crate::ksum(class.iter().copied());
                let cls_sq = crate::ksum(class.iter().map(|c| c * c));
                out.sum_cii = nf * class[0];
                out.sum_cii2 = nf * class[0] * class[0];
                out.sum_cii_b2 = nf * class[0] * bv * bv;
                out.sum_c = nf * cls_sum;
                out.sum_c2 = nf * cls_sq;
                out.sum_b_c = bv * out.sum_c;
                out.sum_bb_c = bv * bv * out.sum_c;
            }
            // the recursion expresses every cross sum through the rank-one
            // rule rb, so it is only valid when the queried coordinate rule
            // is that same rule; otherwise fall through to the loop path
            (bq, PairRule::Affine { scale, base, rank_one, b: rb })
                if coord_rules_equal(bq, rb, n) =>
            {
                let inner = BudgetSums::from_rules(n, a, rb, base);
                let (s, r) = (*scale, *rank_one);
                out.sum_cii = s * inner.sum_cii + r * inner.sum_b2;
                out.sum_cii2 = s * s * inner.sum_cii2
                    + 2.0 * s * r * inner.sum_cii_b2
                    + r * r * inner.sum_b4;
                out.sum_cii_b2 = s * inner.sum_cii_b2 + r * inner.sum_b4;
                out.sum_c = s * inner.sum_c + r * inner.sum_b * inner.sum_b;
                out.sum_c2 = s * s * inner.sum_c2
                    + 2.0 * s * r * inner.sum_bb_c
                    + r * r * inner.sum_b2 * inner.sum_b2;
                out.sum_b_c = s * inner.sum_b_c + r * inner.sum_b2 * inner.sum_b;
                out.sum_bb_c = s * inner.sum_bb_c + r * inner.sum_b2 * inner.sum_b2;
            }
            _ => {
                assert!(
                    n <= LOOP_FALLBACK_LIMIT,
                    "no closed form for this rule combination at n = {n}"
                );
                let (mut cii, mut cii2, mut ciib2) = (Kahan::new(), Kahan::new(), Kahan::new());
                let (mut sc, mut sc2) = (Kahan::new(), Kahan::new());
                let (mut sbc, mut sbbc) = (Kahan::new(), Kahan::new());
                for i in 0..n {
                    let bi = b.value(i);
                    let d = c.value(i, i);
                    cii.add(d);
                    cii2.add(d * d);
                    ciib2.add(d * bi * bi);
                    for j in 0..n {
                        let v = c.value(i, j);
                        sc.add(v);
                        sc2.add(v * v);
                        sbc.add(bi * v);
                        sbbc.add(bi * b.value(j) * v);
                    }
                }
                out.sum_cii = cii.value();
                out.sum_cii2 = cii2.value();
                out.sum_cii_b2 = ciib2.value();
                out.sum_c = sc.value();
                out.sum_c2 = sc2.value();
                out.sum_b_c = sbc.value();
                out.sum_bb_c = sbbc.value();
            }
        }
        out
    }
}

/// A smooth function on `[0,1]^n` with certified derivative bounds.
///
/// `eval` and `grad` treat the input as a polynomial-like expression and do
/// not validate the domain; the bounds are only claimed over the cube.
pub trait Functional: Send + Sync {
    fn dim(&self) -> usize;
    fn name(&self) -> String;
    fn eval(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    fn deriv_bounds(&self) -> DerivBounds;

    /// Discrete derivative: f with x_i set to 1 minus f with x_i set to 0.
    /// Independent of the current value of x_i.
    fn delta(&self, x: &[f64], i: usize) -> f64 {
        let mut z = x.to_vec();
        z[i] = 1.0;
        let hi = self.eval(&z);
        z[i] = 0.0;
        hi - self.eval(&z)
    }

    /// Whether `delta` is substantially cheaper than two full evaluations.
    fn cheap_delta(&self) -> bool {
        false
    }

    /// All discrete derivatives at once.
    fn delta_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|i| self.delta(x, i)).collect()
    }

    /// Exact mean of f under the product Bernoulli(p) measure on {0,1}^n,
    /// when a closed form is available.
    fn mean_under(&self, p: Bernoulli) -> Option<f64> {
        let _ = p;
        None
    }
}

/// f scaled by a constant. Bounds, gradients, and means scale with it.
pub struct Scaled<F: Functional> {
    pub inner: F,
    pub factor: f64,
}

impl<F: Functional> Scaled<F> {
    pub fn new(inner: F, factor: f64) -> Self {
        Self { inner, factor }
    }
}

impl<F: Functional> Functional for Scaled<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn name(&self) -> String {
        format!("{}*{}", self.factor, self.inner.name())
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.factor * self.inner.eval(x)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.inner.grad(x);
        for v in &mut g {
            *v *= self.factor;
        }
        g
    }

    fn deriv_bounds(&self) -> DerivBounds {
        self.inner.deriv_bounds().scale(self.factor)
    }

    fn delta(&self, x: &[f64], i: usize) -> f64 {
        self.factor * self.inner.delta(x, i)
    }

    fn cheap_delta(&self) -> bool {
        self.inner.cheap_delta()
    }

    fn mean_under(&self, p: Bernoulli) -> Option<f64> {
        self.inner.mean_under(p).map(|m| self.factor * m)
    }
}

/// Validate that a point has the functional's dimension and lies in the
/// closed cube. Solvers call this at their boundaries, not in inner loops.
pub fn check_cube_point(f: &dyn Functional, x: &[f64]) -> Result<()> {
    if x.len() != f.dim() {
        return Err(Error::Domain(format!(
            "point has {} coordinates, functional {} expects {}",
            x.len(),
            f.name(),
            f.dim()
        )));
    }
    for (i, &v) in x.iter().enumerate() {
        if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
            return Err(Error::Domain(format!("coordinate {i} = {v} outside [0,1]")));
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::Functional;

    /// Central finite-difference gradient, h chosen away from the boundary.
    pub fn fd_grad(f: &dyn Functional, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut hi = x.to_vec();
                let mut lo = x.to_vec();
                hi[i] += h;
                lo[i] -= h;
                (f.eval(&hi) - f.eval(&lo)) / (2.0 * h)
            })
            .collect()
    }

    /// Mixed second difference d2f/dx_i dx_j.
    pub fn fd_second(f: &dyn Functional, x: &[f64], i: usize, j: usize, h: f64) -> f64 {
        if i == j {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[i] += h;
            lo[i] -= h;
            (f.eval(&hi) - 2.0 * f.eval(x) + f.eval(&lo)) / (h * h)
        } else {
            let mut pp = x.to_vec();
            let mut pm = x.to_vec();
            let mut mp = x.to_vec();
            let mut mm = x.to_vec();
            pp[i] += h;
            pp[j] += h;
            pm[i] += h;
            pm[j] -= h;
            mp[i] -= h;
            mp[j] += h;
            mm[i] -= h;
            mm[j] -= h;
            (f.eval(&pp) - f.eval(&pm) - f.eval(&mp) + f.eval(&mm)) / (4.0 * h * h)
        }
    }
}
