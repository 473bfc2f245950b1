//! Rate-function and free-energy variational solvers.
//!
//! The constrained problem minimizes the product relative entropy over the
//! cube subject to a functional threshold; the unconstrained one maximizes
//! the free-energy objective f - I. Both landscapes are nonconvex, so every
//! solve runs a battery of starts and reports the spread across them rather
//! than pretending a single descent certifies anything. Certified one-sided
//! bounds come from the grid oracle, the dual scan, and the explicit planted
//! constructions; the solvers themselves are honest upper bounds (constrained
//! case, after a feasibility polish) or lower bounds (mean-field case).

use crate::entropy::{self, Bernoulli};
use crate::functionals::ap3::Ap3;
use crate::functionals::graphs::{index_of_pair, EdgeFunctional};
use crate::functionals::Functional;
use crate::oracle;
use crate::{Error, Result};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Iterates are kept this far inside the cube so entropy gradients stay
/// finite; the objective changes by O(clamp) which is far below reporting
/// precision.
const CLAMP: f64 = 1e-12;

/// Residual below which a run is reported as converged.
const CONVERGED_TOL: f64 = 1e-6;

/// A constrained tail query: minimize the relative entropy over points
/// with f(x) >= t n.
pub struct RateQuery<'a> {
    pub functional: &'a dyn Functional,
    pub p: Bernoulli,
    /// Per-coordinate threshold; the constraint is f(x) >= t * dim.
    pub t: f64,
}

impl<'a> RateQuery<'a> {
    pub fn new(functional: &'a dyn Functional, p: Bernoulli, t: f64) -> Result<Self> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("threshold must be finite, got {t}")));
        }
        Ok(Self { functional, p, t })
    }

    /// Threshold expressed as a ratio u > 1 against the exact mean:
    /// t = u E[f(Y)] / n.
    pub fn from_ratio(functional: &'a dyn Functional, p: Bernoulli, u: f64) -> Result<Self> {
        if !(u > 1.0) || !u.is_finite() {
            return Err(Error::Domain(format!("ratio must exceed 1, got {u}")));
        }
        let mean = functional.mean_under(p).ok_or_else(|| {
            Error::Domain(format!(
                "{} has no closed-form mean; pass an explicit threshold",
                functional.name()
            ))
        })?;
        Self::new(functional, p, u * mean / functional.dim() as f64)
    }

    pub fn threshold_total(&self) -> f64 {
        self.t * self.functional.dim() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Infeasible,
}

/// Outcome of one multistart solve.
#[derive(Clone, Debug, Serialize)]
pub struct VariationalResult {
    pub value: f64,
    pub optimizer: Vec<f64>,
    pub status: SolveStatus,
    /// Constrained solves report the projected-gradient residual of the
    /// Lagrangian; mean-field solves report the fixed-point residual
    /// max_i |x_i - sigma(delta_i f(x))|.
    pub kkt_residual: f64,
    /// Best-to-worst gap across starts; a large spread flags a landscape
    /// where single-start values are not trustworthy.
    pub multistart_spread: f64,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    /// Target residual for the inner iterations.
    pub tol: f64,
    pub seed: u64,
    pub random_starts: usize,
    /// Caller-supplied warm starts, e.g. planted constructions.
    pub extra_starts: Vec<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_outer: 40,
            max_inner: 400,
            tol: 1e-9,
            seed: 7,
            random_starts: 16,
            extra_starts: Vec::new(),
        }
    }
}

fn clamp_interior(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(CLAMP, 1.0 - CLAMP);
    }
}

fn random_starts(n: usize, opts: &SolveOptions) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    (0..opts.random_starts)
        .map(|_| (0..n).map(|_| 0.02 + 0.96 * rng.random::<f64>()).collect())
        .collect()
}

fn rate_value(x: &[f64], p: Bernoulli) -> f64 {
    entropy::rel_entropy_vec(x, p).expect("iterate stays in the cube")
}

fn rate_grad(x: &[f64], p: Bernoulli, out: &mut [f64]) {
    let lp = p.logit();
    for (g, &v) in out.iter_mut().zip(x) {
        *g = entropy::logit(v) - lp;
    }
}

struct RateRun {
    x: Vec<f64>,
    value: f64,
    kkt: f64,
    feasible: bool,
}

/// One augmented-Lagrangian descent from a single start, followed by a
/// feasibility polish toward the all-ones point (feasible by the outer
/// pre-check) and a KKT measurement at the polished point.
fn rate_descent(
    f: &dyn Functional,
    p: Bernoulli,
    tn: f64,
    start: &[f64],
    opts: &SolveOptions,
) -> RateRun {
    let n = f.dim();
    let mut x = start.to_vec();
    clamp_interior(&mut x);
    let mut lam = 0.0f64;
    let mut mu = 1.0f64;
    let mut grad = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut prev_violation = f64::INFINITY;
    let mut step = 1.0f64;

    let objective = |x: &[f64], lam: f64, mu: f64| -> f64 {
        let h = tn - f.eval(x);
        let shifted = (h + lam / mu).max(0.0);
        rate_value(x, p) + 0.5 * mu * shifted * shifted
    };

    for _outer in 0..opts.max_outer {
        for _inner in 0..opts.max_inner {
            let h = tn - f.eval(&x);
            let shifted = (h + lam / mu).max(0.0);
            rate_grad(&x, p, &mut grad);
            if shifted > 0.0 {
                let gf = f.grad(&x);
                for (g, gi) in grad.iter_mut().zip(&gf) {
                    *g -= mu * shifted * gi;
                }
            }
            // projected-gradient stationarity at unit step
            let stat = x
                .iter()
                .zip(&grad)
                .map(|(&v, &g)| ((v - g).clamp(CLAMP, 1.0 - CLAMP) - v).abs())
                .fold(0.0f64, f64::max);
            if stat <= opts.tol {
                break;
            }
            // Armijo backtracking along the projected direction
            let base = objective(&x, lam, mu);
            step = (step * 2.0).min(1e3);
            let mut accepted = false;
            for _ in 0..60 {
                let mut decrease = 0.0;
                for i in 0..n {
                    trial[i] = (x[i] - step * grad[i]).clamp(CLAMP, 1.0 - CLAMP);
                    decrease += grad[i] * (x[i] - trial[i]);
                }
                if objective(&trial, lam, mu) <= base - 1e-4 * decrease {
                    x.copy_from_slice(&trial);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let violation = (tn - f.eval(&x)).max(0.0);
        lam = (lam + mu * violation).max(0.0);
        if violation <= 1e-12 * n as f64 {
            break;
        }
        if violation > 0.5 * prev_violation {
            mu = (mu * 4.0).min(1e14);
        }
        prev_violation = violation;
    }

    // polish up: blend toward all-ones until the constraint holds exactly
    if f.eval(&x) < tn {
        let blend = |s: f64, x: &[f64]| -> Vec<f64> {
            x.iter().map(|&v| (1.0 - s) * v + s * (1.0 - CLAMP)).collect()
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        if f.eval(&blend(1.0, &x)) >= tn {
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if f.eval(&blend(mid, &x)) >= tn {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            x = blend(hi, &x);
        }
    }

    // polish down: pull back toward the zero-entropy point while staying
    // feasible; entropy convexity makes this a strict improvement
    let base: Vec<f64> = vec![p.p(); n];
    if f.eval(&x) > tn && f.eval(&base) < tn {
        let blend = |s: f64, x: &[f64]| -> Vec<f64> {
            x.iter()
                .zip(&base)
                .map(|(&v, &b)| (1.0 - s) * v + s * b)
                .collect()
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if f.eval(&blend(mid, &x)) >= tn {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        x = blend(lo, &x);
    }

    let feasible = f.eval(&x) >= tn - 1e-8 * n as f64;
    let kkt = rate_kkt_residual(f, p, tn, &x);
    RateRun { value: rate_value(&x, p), x, kkt, feasible }
}

/// Projected-gradient residual of I - lambda f with the multiplier
/// estimated by least squares on the free coordinates; coordinates at the
/// clamped bounds only count one-sided violations.
fn rate_kkt_residual(f: &dyn Functional, p: Bernoulli, tn: f64, x: &[f64]) -> f64 {
    let n = f.dim();
    let mut gi = vec![0.0; n];
    rate_grad(x, p, &mut gi);
    let gf = f.grad(x);
    let active = f.eval(x) - tn <= 1e-6 * (1.0 + tn.abs());
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        if x[i] > 2.0 * CLAMP && x[i] < 1.0 - 2.0 * CLAMP {
            num += gi[i] * gf[i];
            den += gf[i] * gf[i];
        }
    }
    let lam = if active && den > 0.0 { (num / den).max(0.0) } else { 0.0 };
    let mut worst = 0.0f64;
    for i in 0..n {
        let g = gi[i] - lam * gf[i];
        let viol = if x[i] <= 2.0 * CLAMP {
            (-g).max(0.0)
        } else if x[i] >= 1.0 - 2.0 * CLAMP {
            g.max(0.0)
        } else {
            g.abs()
        };
        worst = worst.max(viol);
    }
    worst
}

/// Upper-biased estimate of the constrained rate: the relative entropy of
/// the best feasible point found across all starts. Infeasibility of the
/// threshold (even the all-ones point misses it) is reported through the
/// status, with value infinity.
pub fn solve_rate(q: &RateQuery, opts: &SolveOptions) -> Result<VariationalResult> {
    let f = q.functional;
    let n = f.dim();
    let tn = q.threshold_total();
    let ones = vec![1.0 - CLAMP; n];
    if f.eval(&ones) < tn {
        return Ok(VariationalResult {
            value: f64::INFINITY,
            optimizer: vec![1.0; n],
            status: SolveStatus::Infeasible,
            kkt_residual: 0.0,
            multistart_spread: 0.0,
        });
    }
    let base = vec![q.p.p(); n];
    if f.eval(&base) >= tn {
        return Ok(VariationalResult {
            value: 0.0,
            optimizer: base,
            status: SolveStatus::Converged,
            kkt_residual: 0.0,
            multistart_spread: 0.0,
        });
    }
    let mut starts: Vec<Vec<f64>> = vec![base, ones];
    for s in &opts.extra_starts {
        crate::functionals::check_cube_point(f, s)?;
        starts.push(s.clone());
    }
    starts.extend(random_starts(n, opts));

    let runs: Vec<RateRun> = starts
        .par_iter()
        .map(|s| rate_descent(f, q.p, tn, s, opts))
        .collect();
    let feasible: Vec<&RateRun> = runs.iter().filter(|r| r.feasible).collect();
    // all-ones is feasible and survives the polish, so this cannot be empty
    let best = feasible
        .iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("the all-ones start always yields a feasible run");
    let worst_value = feasible.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
    Ok(VariationalResult {
        value: best.value,
        optimizer: best.x.clone(),
        status: if best.kkt <= CONVERGED_TOL { SolveStatus::Converged } else { SolveStatus::MaxIter },
        kkt_residual: best.kkt,
        multistart_spread: worst_value - best.value,
    })
}

/// Two-sided grid certificate for the constrained rate.
#[derive(Clone, Debug, Serialize)]
pub struct GridRateBound {
    /// Least relative entropy over feasible grid points; a genuine upper
    /// bound because each grid point is a feasible witness.
    pub upper: f64,
    /// Certified lower bound: every cube point lives in some grid cell, the
    /// functional moves by at most (h/2) sum b_i within a cell, and the
    /// entropy is bounded below by its cell minimum.
    pub lower: f64,
    pub minimizer: Option<Vec<f64>>,
    pub resolution: usize,
    pub points: u64,
}

/// Exhaustive scan of the uniform grid with `resolution` subdivisions per
/// coordinate. Cost (resolution+1)^n functional evaluations, guarded by
/// `budget`.
pub fn grid_oracle_rate(q: &RateQuery, resolution: usize, budget: u64) -> Result<GridRateBound> {
    if resolution == 0 {
        return Err(Error::Domain("resolution must be at least 1".into()));
    }
    let f = q.functional;
    let n = f.dim();
    let levels = resolution as u64 + 1;
    let total = (levels as u128).checked_pow(n as u32).ok_or(Error::Budget {
        op: "grid rate oracle",
        needed: f64::INFINITY,
        limit: budget as f64,
    })?;
    if total > budget as u128 {
        return Err(Error::Budget { op: "grid rate oracle", needed: total as f64, limit: budget as f64 });
    }
    let total = total as u64;
    let tn = q.threshold_total();
    let h = 1.0 / resolution as f64;
    let slack = 0.5 * h * f.deriv_bounds().sums(n).sum_b;

    // per-level tables: coordinate value, entropy, entropy cell minimum
    let vals: Vec<f64> = (0..levels).map(|g| (g as f64 * h).min(1.0)).collect();
    let ip: Vec<f64> = vals
        .iter()
        .map(|&v| entropy::rel_entropy(v, q.p).expect("grid point in [0,1]"))
        .collect();
    let cell_min: Vec<f64> = vals
        .iter()
        .map(|&v| {
            let lo = (v - 0.5 * h).max(0.0);
            let hi = (v + 0.5 * h).min(1.0);
            entropy::rel_entropy(q.p.p().clamp(lo, hi), q.p).expect("clamped point in [0,1]")
        })
        .collect();

    const GRID_CHUNK: u64 = 1 << 14;
    let chunks = total.div_ceil(GRID_CHUNK);
    // per chunk: (best feasible entropy, its index, best relaxed cell bound)
    let merged = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * GRID_CHUNK;
            let hi = (lo + GRID_CHUNK).min(total);
            let mut x = vec![0.0f64; n];
            let mut best_upper = (f64::INFINITY, u64::MAX);
            let mut best_lower = f64::INFINITY;
            for idx in lo..hi {
                let mut rest = idx;
                let mut entropy_sum = 0.0;
                let mut cell_sum = 0.0;
                for xi in x.iter_mut() {
                    let d = (rest % levels) as usize;
                    rest /= levels;
                    *xi = vals[d];
                    entropy_sum += ip[d];
                    cell_sum += cell_min[d];
                }
                let fx = f.eval(&x);
                if fx >= tn && (entropy_sum, idx) < best_upper {
                    best_upper = (entropy_sum, idx);
                }
                if fx >= tn - slack && cell_sum < best_lower {
                    best_lower = cell_sum;
                }
            }
            (best_upper, best_lower)
        })
        .reduce(
            || ((f64::INFINITY, u64::MAX), f64::INFINITY),
            |a, b| (if a.0 <= b.0 { a.0 } else { b.0 }, a.1.min(b.1)),
        );

    let ((upper, upper_idx), lower) = merged;
    let minimizer = (upper_idx != u64::MAX).then(|| {
        let mut rest = upper_idx;
        (0..n)
            .map(|_| {
                let d = (rest % levels) as usize;
                rest /= levels;
                vals[d]
            })
            .collect()
    });
    Ok(GridRateBound { upper, lower, minimizer, resolution, points: total })
}

struct MeanFieldRun {
    x: Vec<f64>,
    value: f64,
    residual: f64,
}

fn mean_field_objective(f: &dyn Functional, x: &[f64]) -> f64 {
    f.eval(x) - entropy::neg_entropy_vec(x).expect("iterate stays in the cube")
}

fn fixed_point_residual(x: &[f64], target: &[f64]) -> f64 {
    x.iter().zip(target).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max)
}

fn mean_field_descent(f: &dyn Functional, start: &[f64], opts: &SolveOptions) -> MeanFieldRun {
    let n = f.dim();
    let mut x = start.to_vec();
    clamp_interior(&mut x);
    let mut eta = 1.0f64;
    let mut prev_res = f64::INFINITY;
    let mut worsened = 0u32;
    let max_fp = opts.max_inner.saturating_mul(10);
    let mut residual = f64::INFINITY;
    for _ in 0..max_fp {
        let target: Vec<f64> = f.delta_vec(&x).into_iter().map(entropy::sigmoid).collect();
        residual = fixed_point_residual(&x, &target);
        if residual <= opts.tol {
            break;
        }
        // oscillation shows up as a residual that stops decreasing
        if residual > prev_res * (1.0 - 1e-12) {
            worsened += 1;
            if worsened >= 2 {
                eta = (eta * 0.5).max(1.0 / 64.0);
                worsened = 0;
            }
        } else {
            worsened = 0;
        }
        prev_res = residual;
        for (xi, ti) in x.iter_mut().zip(&target) {
            *xi = ((1.0 - eta) * *xi + eta * ti).clamp(CLAMP, 1.0 - CLAMP);
        }
    }

    if residual > opts.tol {
        // ascent in logit coordinates; the chain rule factor x(1-x) keeps
        // steps finite near the boundary
        let mut z: Vec<f64> = x.iter().map(|&v| entropy::logit(v)).collect();
        let z_cap = entropy::logit(1.0 - CLAMP);
        let mut step = 1.0f64;
        for _ in 0..opts.max_inner {
            let gf = f.grad(&x);
            let gz: Vec<f64> = (0..n)
                .map(|i| (gf[i] - entropy::logit(x[i])) * x[i] * (1.0 - x[i]))
                .collect();
            let base = mean_field_objective(f, &x);
            step = (step * 2.0).min(1e3);
            let mut accepted = false;
            for _ in 0..60 {
                let zt: Vec<f64> = (0..n).map(|i| (z[i] + step * gz[i]).clamp(-z_cap, z_cap)).collect();
                let xt: Vec<f64> = zt.iter().map(|&v| entropy::sigmoid(v).clamp(CLAMP, 1.0 - CLAMP)).collect();
                let gain: f64 = (0..n).map(|i| gz[i] * (zt[i] - z[i])).sum();
                if mean_field_objective(f, &xt) >= base + 1e-4 * gain {
                    z = zt;
                    x = xt;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let target: Vec<f64> = f.delta_vec(&x).into_iter().map(entropy::sigmoid).collect();
        residual = fixed_point_residual(&x, &target);
    }

    MeanFieldRun { value: mean_field_objective(f, &x), x, residual }
}

/// Lower-biased estimate of the free-energy value sup (f - I): the best
/// stationary point of the damped conditional-mean iteration across starts,
/// with a logit-space ascent fallback when the fixed point stalls.
pub fn solve_mean_field(f: &dyn Functional, opts: &SolveOptions) -> Result<VariationalResult> {
    let n = f.dim();
    if n == 0 {
        return Err(Error::Domain("functional has no coordinates".into()));
    }
    let mut starts: Vec<Vec<f64>> = vec![vec![0.5; n], vec![0.1; n], vec![0.9; n]];
    for s in &opts.extra_starts {
        crate::functionals::check_cube_point(f, s)?;
        starts.push(s.clone());
    }
    starts.extend(random_starts(n, opts));

    let runs: Vec<MeanFieldRun> = starts
        .par_iter()
        .map(|s| mean_field_descent(f, s, opts))
        .collect();
    let best = runs
        .iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least the deterministic starts ran");
    let worst = runs.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    Ok(VariationalResult {
        value: best.value,
        optimizer: best.x.clone(),
        status: if best.residual <= CONVERGED_TOL { SolveStatus::Converged } else { SolveStatus::MaxIter },
        kkt_residual: best.residual,
        multistart_spread: best.value - worst,
    })
}

/// Adjacent-pair audit of solved rate values against the threshold-shift
/// envelope phi(t - delta) >= phi(t) - (delta/(t0 - t))^(1/m) n log(1/p)
/// and against monotonicity in t.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnvelopeReport {
    /// Smallest envelope margin over adjacent pairs; nonnegative means no
    /// violation at all.
    pub worst_margin: f64,
    /// Pairs whose margin falls below -tolerance.
    pub violations: usize,
    /// Smallest forward difference of the rate samples; negative values
    /// beyond tolerance flag a monotonicity failure.
    pub worst_monotone_margin: f64,
    pub pairs: usize,
}

/// `samples` are (threshold, solved rate) pairs; `m` is the monomial degree
/// of the functional (edges of the pattern, three for progressions) and
/// `t0` the per-coordinate value at the all-ones point.
pub fn rate_lipschitz_envelope(
    samples: &[(f64, f64)],
    m: u32,
    t0: f64,
    p: Bernoulli,
    n: usize,
    tol: f64,
) -> EnvelopeReport {
    let mut pts: Vec<(f64, f64)> = samples.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let scale = n as f64 * (1.0 / p.p()).ln();
    let mut worst = f64::INFINITY;
    let mut worst_mono = f64::INFINITY;
    let mut violations = 0;
    let mut pairs = 0;
    for w in pts.windows(2) {
        let (ta, phi_a) = w[0];
        let (tb, phi_b) = w[1];
        if !phi_a.is_finite() || !phi_b.is_finite() {
            continue;
        }
        pairs += 1;
        worst_mono = worst_mono.min(phi_b - phi_a);
        let delta = tb - ta;
        if t0 - tb <= 0.0 {
            continue; // envelope slope diverges at the attainable edge
        }
        let margin = phi_a - phi_b + (delta / (t0 - tb)).powf(1.0 / m as f64) * scale;
        if margin < worst {
            worst = margin;
        }
        if margin < -tol {
            violations += 1;
        }
    }
    EnvelopeReport { worst_margin: worst, violations, worst_monotone_margin: worst_mono, pairs }
}

/// An explicit feasible point and the exact entropy it pays.
#[derive(Clone, Debug, Serialize)]
pub struct PlantedBound {
    pub point: Vec<f64>,
    /// Exact relative entropy of the construction; a certified upper bound
    /// on the rate at this threshold.
    pub value: f64,
    /// Closed-form cap implied by the construction size alone.
    pub cap: f64,
    /// Functional value attained at the construction.
    pub attained: f64,
    /// Clique size or interval length.
    pub planted: usize,
}

/// Plant a clique on the first r vertices, r = ceil(s^(1/k) N) + k with s
/// the threshold rescaled to the N^k tuple-count normalization; background
/// stays at p. Pays exactly C(r,2) log(1/p) entropy, capped by
/// r^2 log(1/p) / 2.
pub fn planted_clique_upper(f: &EdgeFunctional, p: Bernoulli, t: f64) -> Result<PlantedBound> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("threshold must be nonnegative, got {t}")));
    }
    let nn = f.n_vertices();
    let k = f.graph().vertex_count();
    let n = f.dim();
    // eval is T / N^(k-2), so f >= t n means T >= s N^k with this s;
    // the 1e-9 absorbs roundoff when the product lands on an integer
    let s = t * n as f64 / (nn * nn) as f64;
    let r = (s.powf(1.0 / k as f64) * nn as f64 - 1e-9).ceil().max(0.0) as usize + k;
    if r > nn {
        return Err(Error::Infeasible(format!(
            "clique construction needs {r} vertices but the host has {nn}"
        )));
    }
    let mut point = vec![p.p(); n];
    for i in 0..r {
        for j in (i + 1)..r {
            point[index_of_pair(nn, i, j)] = 1.0;
        }
    }
    let attained = f.eval(&point);
    let tn = t * n as f64;
    if attained < tn - 1e-9 {
        return Err(Error::Infeasible(format!(
            "planted clique attains {attained:.6} below the threshold {tn:.6}"
        )));
    }
    let log_inv_p = (1.0 / p.p()).ln();
    Ok(PlantedBound {
        point,
        value: (r * (r - 1) / 2) as f64 * log_inv_p,
        cap: 0.5 * (r * r) as f64 * log_inv_p,
        attained,
        planted: r,
    })
}

/// Plant an all-ones interval of length ceil(3 sqrt(t) n) at the start of
/// the cycle; background stays at p. Pays exactly L log(1/p) entropy.
pub fn planted_interval_upper_ap3(n: usize, p: Bernoulli, t: f64) -> Result<PlantedBound> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("threshold must be nonnegative, got {t}")));
    }
    // the 1e-9 absorbs roundoff when the product lands on an integer
    let len = (3.0 * t.sqrt() * n as f64 - 1e-9).ceil().max(0.0) as usize;
    if len > n {
        return Err(Error::Infeasible(format!(
            "interval construction needs {len} coordinates but the cycle has {n}"
        )));
    }
    let mut point = vec![p.p(); n];
    for v in point.iter_mut().take(len) {
        *v = 1.0;
    }
    let f = Ap3::new(n);
    let attained = f.eval(&point);
    let tn = t * n as f64;
    if attained < tn - 1e-9 {
        return Err(Error::Infeasible(format!(
            "planted interval attains {attained:.6} below the threshold {tn:.6}"
        )));
    }
    let value = len as f64 * (1.0 / p.p()).ln();
    Ok(PlantedBound { point, value, cap: value, attained, planted: len })
}

/// Certified lower bound on the rate from the exponential-moment dual.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DualBound {
    pub value: f64,
    pub lambda: f64,
}

/// Scan lambda >= 0 for the best value of lambda t n - log E_p[exp(lambda f)].
///
/// Sound whenever the product-measure expectation of f at any cube point
/// dominates f itself: exact for multilinear functionals, and an inequality
/// in the right direction for counting functionals whose monomials all have
/// nonnegative coefficients. Cost: one full enumeration per scan point.
pub fn dual_rate_lower_bound(
    f: &dyn Functional,
    p: Bernoulli,
    t: f64,
    budget: u64,
) -> Result<DualBound> {
    let tn = t * f.dim() as f64;
    // one scan builds the value histogram; every lambda probe after that
    // is a sum over distinct values instead of a fresh enumeration
    let hist = oracle::enumerate_value_histogram(f, p, budget, 1 << 20)?;
    let obj = |lambda: f64| -> Result<f64> {
        let log_mgf = match &hist {
            Some(h) => oracle::histogram_log_mgf(h, lambda),
            None => oracle::enumerate_log_mgf(f, p, lambda, budget)?,
        };
        Ok(lambda * tn - log_mgf)
    };
    // the objective is concave; expand until past the peak, then golden-section
    let mut hi = 1.0f64;
    let mut best_probe = obj(0.0)?;
    for _ in 0..14 {
        let v = obj(hi)?;
        if v < best_probe {
            break;
        }
        best_probe = v;
        hi *= 2.0;
    }
    let (mut a, mut b) = (0.0f64, hi);
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = obj(x1)?;
    let mut f2 = obj(x2)?;
    for _ in 0..48 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = obj(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = obj(x1)?;
        }
    }
    let lambda = 0.5 * (a + b);
    // the rate is nonnegative, and any lambda gives a valid bound
    Ok(DualBound { value: obj(lambda)?.max(0.0), lambda })
}

/// Reference threshold factor min(delta^(2/3)/2, delta/3); the branches
/// cross at delta = 27/8.
pub fn lz_closed_form(delta: f64) -> f64 {
    assert!(delta > 0.0, "factor defined for positive delta");
    (delta.cbrt().powi(2) / 2.0).min(delta / 3.0)
}

/// Full reference curve for the upper-tail exponent of triangle counts:
/// factor times N^2 p^2 log(1/p).
pub fn lz_overlay(delta: f64, n_vertices: usize, p: Bernoulli) -> f64 {
    let nf = n_vertices as f64;
    lz_closed_form(delta) * nf * nf * p.p() * p.p() * (1.0 / p.p()).ln()
}

/// Margin of the product inequality prod(a_i + b(1-a_i)) >=
/// (1 - b^r) prod(a_i) + b^r; nonnegative on [0,1]^r x [0,1].
pub fn superposition_check(a: &[f64], b: f64) -> Result<f64> {
    if !((0.0..=1.0).contains(&b)) {
        return Err(Error::Domain(format!("expected b in [0,1], got {b}")));
    }
    let mut lhs = 1.0f64;
    let mut prod = 1.0f64;
    for (i, &ai) in a.iter().enumerate() {
        if !((0.0..=1.0).contains(&ai)) {
            return Err(Error::Domain(format!("coordinate {i} = {ai} outside [0,1]")));
        }
        lhs *= ai + b * (1.0 - ai);
        prod *= ai;
    }
    let br = b.powi(a.len() as i32);
    Ok(lhs - ((1.0 - br) * prod + br))
}

fn golden_max(mut a: f64, mut b: f64, iters: usize, g: impl Fn(f64) -> f64) -> (f64, f64) {
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut g1 = g(x1);
    let mut g2 = g(x2);
    for _ in 0..iters {
        if g1 < g2 {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + inv_phi * (b - a);
            g2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - inv_phi * (b - a);
            g1 = g(x1);
        }
    }
    let x = 0.5 * (a + b);
    (x, g(x))
}

/// Exhaustive symmetric scan of the mean-field objective for the pairwise
/// mean-field model: maximize J(n-1)u^2/2 - n (u log u + (1-u) log(1-u))
/// over u. Valid as a global reference for nonnegative coupling, where the
/// averaging argument makes some maximizer symmetric.
pub fn curie_weiss_mean_field_scan(n: usize, coupling: f64, resolution: usize) -> (f64, f64) {
    let nf = n as f64;
    let value = |u: f64| {
        let u = u.clamp(CLAMP, 1.0 - CLAMP);
        0.5 * coupling * (nf - 1.0) * u * u
            - nf * entropy::neg_entropy(u).expect("u in [0,1]")
    };
    let mut best = (0.5, value(0.5));
    for g in 0..=resolution {
        let u = g as f64 / resolution as f64;
        let v = value(u);
        if v > best.1 {
            best = (u, v);
        }
    }
    let h = 1.0 / resolution as f64;
    let (u, v) = golden_max((best.0 - h).max(0.0), (best.0 + h).min(1.0), 120, value);
    if v > best.1 { (u, v) } else { best }
}

/// Exhaustive symmetric scan of the constrained rate for the pairwise
/// mean-field model with nonnegative coupling: minimize n I_p(u) over u
/// with J(n-1)u^2/2 >= t n. Convexity of the entropy and the averaging
/// argument make the symmetric reduction exact. Returns infinity when even
/// u = 1 misses the threshold.
pub fn curie_weiss_rate_scan(
    n: usize,
    coupling: f64,
    p: Bernoulli,
    t: f64,
    resolution: usize,
) -> (f64, f64) {
    let nf = n as f64;
    let tn = t * nf;
    let attains = |u: f64| 0.5 * coupling * (nf - 1.0) * u * u >= tn;
    if tn <= 0.0 {
        return (p.p(), 0.0);
    }
    if coupling <= 0.0 || !attains(1.0) {
        return (1.0, f64::INFINITY);
    }
    // the feasible region is u >= u_min; the entropy is unimodal with its
    // minimum at p, so the boundary candidate max(u_min, p) is exact and
    // the grid scan can only confirm it
    let u_min = (2.0 * tn / (coupling * (nf - 1.0))).sqrt().min(1.0);
    let u_star = u_min.max(p.p());
    let mut best = (u_star, nf * entropy::rel_entropy(u_star, p).expect("u in [0,1]"));
    for g in 0..=resolution {
        let u = g as f64 / resolution as f64;
        if !attains(u) {
            continue;
        }
        let v = nf * entropy::rel_entropy(u, p).expect("u in [0,1]");
        if v < best.1 {
            best = (u, v);
        }
    }
    best
}
