//! Weighted combinations of subgraph counts on a common vertex set.

use super::graphs::{EdgeFunctional, Graph};
use super::{CoordRule, DerivBounds, Functional, PairRule};
use crate::entropy::Bernoulli;
use crate::{Error, Result};

/// f(x) = sum_r beta_r * T_r(x), every T_r a homomorphism density count
/// on the same N vertices.
pub struct ErgmFunctional {
    n_vertices: usize,
    terms: Vec<(EdgeFunctional, f64)>,
}

impl ErgmFunctional {
    /// Zero-weight terms are dropped; every pattern must share `n_vertices`.
    pub fn new(n_vertices: usize, patterns: Vec<(Graph, f64)>) -> Result<Self> {
        let mut terms = Vec::new();
        for (g, beta) in patterns {
            if beta == 0.0 {
                continue;
            }
            if !beta.is_finite() {
                return Err(Error::Domain("non-finite weight".into()));
            }
            terms.push((EdgeFunctional::new(g, n_vertices)?, beta));
        }
        if terms.is_empty() {
            return Err(Error::Domain("no nonzero terms".into()));
        }
        Ok(Self { n_vertices, terms })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn terms(&self) -> &[(EdgeFunctional, f64)] {
        &self.terms
    }

    /// 1 + sum_r |beta_r|, the scale every error term of the family is
    /// expressed in.
    pub fn weight_scale(&self) -> f64 {
        1.0 + crate::ksum(self.terms.iter().map(|(_, b)| b.abs()))
    }
}

impl Functional for ErgmFunctional {
    fn dim(&self) -> usize {
        self.n_vertices * (self.n_vertices - 1) / 2
    }

    fn name(&self) -> String {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(f, b)| format!("{b}*{}", f.graph().describe()))
            .collect();
        format!("ergm(N={}; {})", self.n_vertices, parts.join(" + "))
    }

    fn eval(&self, x: &[f64]) -> f64 {
        crate::ksum(self.terms.iter().map(|(f, b)| b * f.eval(x)))
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (f, b) in &self.terms {
            let g = f.grad(x);
            for (o, gi) in out.iter_mut().zip(g) {
                *o += b * gi;
            }
        }
        out
    }

    fn deriv_bounds(&self) -> DerivBounds {
        let mut a = 0.0;
        let mut b_sum = 0.0;
        let mut shared = 0.0;
        let mut disjoint = 0.0;
        for (f, beta) in &self.terms {
            let w = beta.abs();
            let db = f.deriv_bounds();
            a += w * db.a;
            b_sum += w * db.b.value(0);
            match db.c {
                PairRule::EdgeClass { shared: s, disjoint: d, .. } => {
                    shared += w * s;
                    disjoint += w * d;
                }
                _ => unreachable!("edge functionals use the edge-class rule"),
            }
        }
        DerivBounds {
            a,
            b: CoordRule::Uniform(b_sum),
            c: PairRule::EdgeClass { n_vertices: self.n_vertices, shared, disjoint },
        }
    }

    fn mean_under(&self, p: Bernoulli) -> Option<f64> {
        let mut total = 0.0;
        for (f, b) in &self.terms {
            total += b * f.mean_under(p)?;
        }
        Some(total)
    }
}
