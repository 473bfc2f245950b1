//! Explicit error budgets for tail and free-energy sandwiches.
//!
//! Every formula here is an exact arithmetic evaluation of a displayed
//! bound: the tail complexity and smoothness terms, the lower-tail slack,
//! the free-energy correction terms, and the closed-form trend rates. The
//! closed forms run off the aggregate sums in [`BudgetSums`]; the [`direct`]
//! submodule recomputes the same quantities by explicit per-pair loops in a
//! different summation order, so the two paths check each other.

use crate::entropy::Bernoulli;
use crate::functionals::BudgetSums;
use crate::{Error, Result};
use num_rational::Ratio;
use serde::Serialize;

/// Parameters of one upper-tail budget evaluation.
///
/// `k_rate` is the per-coordinate rate level used by the soft indicator. It
/// must dominate the true constrained minimum divided by n; any certified
/// upper bound keeps every budget term on the conservative side because all
/// of them are nondecreasing in this value.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailBudgetParams {
    pub p: Bernoulli,
    pub t: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub k_rate: f64,
}

impl TailBudgetParams {
    pub fn new(p: Bernoulli, t: f64, delta: f64, epsilon: f64, k_rate: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!("delta must be positive and finite, got {delta}")));
        }
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::Domain(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        if !(k_rate >= 0.0) || !k_rate.is_finite() {
            return Err(Error::Domain(format!("rate level must be nonnegative and finite, got {k_rate}")));
        }
        Ok(Self { p, t, delta, epsilon, k_rate })
    }

    /// |log p| + |log(1-p)|.
    pub fn log_weight(&self) -> f64 {
        self.p.abs_log_sum()
    }

    /// Slope applied to the first-derivative bounds: 2K/delta.
    pub fn kappa(&self) -> f64 {
        2.0 * self.k_rate / self.delta
    }

    /// Coefficient of the rank-one part of the pair bounds: 6K/(n delta^2).
    pub fn rank_coeff(&self, n: usize) -> f64 {
        6.0 * self.k_rate / (n as f64 * self.delta * self.delta)
    }

    /// nK + n|log p| + n|log(1-p)|.
    pub fn alpha(&self, n: usize) -> f64 {
        n as f64 * (self.k_rate + self.log_weight())
    }

    /// Resolution at which the gradient net must be built for the
    /// complexity term: delta*epsilon/(4K). `None` in the degenerate
    /// K = 0 regime, where the net contributes nothing.
    pub fn net_resolution(&self) -> Option<f64> {
        (self.k_rate > 0.0).then(|| self.delta * self.epsilon / (4.0 * self.k_rate))
    }
}

/// Sums over the inflated derivative bounds beta_i = kappa b_i + |log p| +
/// |log(1-p)| and gamma_ij = kappa c_ij + (6K/(n delta^2)) b_i b_j. Pair
/// sums run over all ordered pairs including the diagonal.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailAggregates {
    pub alpha: f64,
    /// sum_i beta_i^2
    pub beta2: f64,
    /// sum_i gamma_ii
    pub gamma_diag: f64,
    /// sum_i gamma_ii^2
    pub gamma_diag2: f64,
    /// sum_{i,j} gamma_ij^2
    pub gamma2: f64,
    /// sum_{i,j} beta_i beta_j gamma_ij
    pub beta_beta_gamma: f64,
    /// sum_{i,j} beta_i gamma_ij
    pub beta_gamma: f64,
}

/// Expand the tail-level sums from the plain derivative sums in closed
/// form. Linear and quadratic expansions in (kappa, rank coefficient,
/// log weight); exact for every rule shape.
pub fn tail_aggregates(params: &TailBudgetParams, sums: &BudgetSums) -> TailAggregates {
    let n = sums.n as f64;
    let kp = params.kappa();
    let cw = params.log_weight();
    let r = params.rank_coeff(sums.n);
    // sum_i (kappa b_i + cw) b_i, reused by the rank-one blocks
    let beta_dot_b = kp * sums.sum_b2 + cw * sums.sum_b;
    TailAggregates {
        alpha: params.alpha(sums.n),
        beta2: kp * kp * sums.sum_b2 + 2.0 * kp * cw * sums.sum_b + n * cw * cw,
        gamma_diag: kp * sums.sum_cii + r * sums.sum_b2,
        gamma_diag2: kp * kp * sums.sum_cii2 + 2.0 * kp * r * sums.sum_cii_b2 + r * r * sums.sum_b4,
        gamma2: kp * kp * sums.sum_c2 + 2.0 * kp * r * sums.sum_bb_c + r * r * sums.sum_b2 * sums.sum_b2,
        beta_beta_gamma: kp * (kp * kp * sums.sum_bb_c + 2.0 * kp * cw * sums.sum_b_c + cw * cw * sums.sum_c)
            + r * beta_dot_b * beta_dot_b,
        beta_gamma: kp * kp * sums.sum_b_c + kp * cw * sums.sum_c + r * beta_dot_b * sums.sum_b,
    }
}

/// Itemized complexity term of the upper-tail budget.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComplexityBreakdown {
    /// (1/4) (n sum beta_i^2)^{1/2} epsilon
    pub gradient_eps: f64,
    /// 3 n epsilon
    pub plateau: f64,
    /// log(4K ((1/n) sum b_i^2)^{1/2} / (delta epsilon)); zero in the
    /// degenerate regime K = 0 or all b_i = 0, where the budget is vacuous.
    pub log_ratio: f64,
    /// log of the gradient-net size at resolution delta*epsilon/(4K);
    /// supplied by the caller, zero in the degenerate regime.
    pub net_log: f64,
    pub total: f64,
}

pub fn tail_complexity_term(
    params: &TailBudgetParams,
    sums: &BudgetSums,
    net_size_log: f64,
) -> ComplexityBreakdown {
    let n = sums.n as f64;
    let agg = tail_aggregates(params, sums);
    let gradient_eps = 0.25 * (n * agg.beta2).sqrt() * params.epsilon;
    let plateau = 3.0 * n * params.epsilon;
    let degenerate = params.k_rate == 0.0 || sums.sum_b2 == 0.0;
    let log_ratio = if degenerate {
        0.0
    } else {
        (4.0 * params.k_rate * (sums.sum_b2 / n).sqrt() / (params.delta * params.epsilon)).ln()
    };
    let net_log = if degenerate { 0.0 } else { net_size_log };
    ComplexityBreakdown {
        gradient_eps,
        plateau,
        log_ratio,
        net_log,
        total: gradient_eps + plateau + log_ratio + net_log,
    }
}

/// Itemized smoothness term of the upper-tail budget.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SmoothnessBreakdown {
    /// 4 (sum(alpha gamma_ii + beta_i^2) + (1/4) sum(alpha gamma_ij^2 +
    /// beta_i beta_j gamma_ij + 4 beta_i gamma_ij))^{1/2}
    pub quadratic: f64,
    /// (1/4) (sum beta_i^2)^{1/2} (sum gamma_ii^2)^{1/2}
    pub cross: f64,
    /// 3 sum gamma_ii
    pub diagonal: f64,
    pub log_two: f64,
    pub total: f64,
}

pub fn tail_smoothness_from(agg: &TailAggregates) -> SmoothnessBreakdown {
    let inner = agg.alpha * agg.gamma_diag
        + agg.beta2
        + 0.25 * (agg.alpha * agg.gamma2 + agg.beta_beta_gamma + 4.0 * agg.beta_gamma);
    let quadratic = 4.0 * inner.sqrt();
    let cross = 0.25 * agg.beta2.sqrt() * agg.gamma_diag2.sqrt();
    let diagonal = 3.0 * agg.gamma_diag;
    let log_two = std::f64::consts::LN_2;
    SmoothnessBreakdown { quadratic, cross, diagonal, log_two, total: quadratic + cross + diagonal + log_two }
}

pub fn tail_smoothness_term(params: &TailBudgetParams, sums: &BudgetSums) -> SmoothnessBreakdown {
    tail_smoothness_from(&tail_aggregates(params, sums))
}

/// Slack pair for the lower side of the tail sandwich:
/// eps0 = (4 + |log(p/(1-p))|)/sqrt(n), delta0 = (2/n) sqrt(sum(a c_ii + b_i^2)).
pub fn tail_lower_slack(sums: &BudgetSums, p: Bernoulli) -> (f64, f64) {
    let n = sums.n as f64;
    let eps0 = (4.0 + p.logit().abs()) / n.sqrt();
    let delta0 = 2.0 / n * (sums.a * sums.sum_cii + sums.sum_b2).sqrt();
    (eps0, delta0)
}

/// Fully assembled two-sided budget for one tail event.
///
/// `phi_lower_cert` must be a certified lower bound on the rate at t-delta
/// and `phi_upper` an achieved (hence upper-bounding) rate value at
/// t+delta0; those directions are what keep both ends of the interval
/// valid. `phi_upper` may be infinite when the shifted event is empty.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TailSandwich {
    pub n: usize,
    pub params: TailBudgetParams,
    pub complexity: ComplexityBreakdown,
    pub smoothness: SmoothnessBreakdown,
    pub eps0: f64,
    pub delta0: f64,
    pub phi_lower_cert: f64,
    pub phi_upper: f64,
    /// Lower end of the certified interval for log P.
    pub lower: f64,
    /// Upper end of the certified interval for log P.
    pub upper: f64,
}

pub fn tail_sandwich(
    params: &TailBudgetParams,
    sums: &BudgetSums,
    net_size_log: f64,
    phi_lower_cert: f64,
    phi_upper: f64,
) -> Result<TailSandwich> {
    if !(phi_lower_cert >= 0.0) || !phi_lower_cert.is_finite() {
        return Err(Error::Domain(format!(
            "certified lower rate must be finite and nonnegative, got {phi_lower_cert}"
        )));
    }
    if !(phi_upper >= 0.0) {
        return Err(Error::Domain(format!("upper rate must be nonnegative, got {phi_upper}")));
    }
    let complexity = tail_complexity_term(params, sums, net_size_log);
    let smoothness = tail_smoothness_term(params, sums);
    let (eps0, delta0) = tail_lower_slack(sums, params.p);
    let lower = -phi_upper - eps0 * sums.n as f64 - std::f64::consts::LN_2;
    let upper = -phi_lower_cert + complexity.total + smoothness.total;
    if lower > upper {
        return Err(Error::Infeasible(format!(
            "inconsistent rate certificates: interval [{lower}, {upper}] is empty"
        )));
    }
    Ok(TailSandwich {
        n: sums.n,
        params: *params,
        complexity,
        smoothness,
        eps0,
        delta0,
        phi_lower_cert,
        phi_upper,
        lower,
        upper,
    })
}

/// Itemized free-energy budget: upper correction terms and lower slack
/// around sup(f - I).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FreeEnergyBudget {
    /// (1/4) (n sum b_i^2)^{1/2} epsilon
    pub gradient_eps: f64,
    /// 3 n epsilon
    pub plateau: f64,
    /// log of the gradient-net size at resolution epsilon.
    pub net_log: f64,
    /// 4 (sum(a c_ii + b_i^2) + (1/4) sum(a c_ij^2 + b_i b_j c_ij + 4 b_i c_ij))^{1/2}
    pub quadratic: f64,
    /// (1/4) (sum b_i^2)^{1/2} (sum c_ii^2)^{1/2}
    pub cross: f64,
    /// 3 sum c_ii
    pub diagonal: f64,
    pub log_two: f64,
    /// Sum of all upper correction terms.
    pub upper_total: f64,
    /// (1/2) sum c_ii; the lower bound is sup(f - I) minus this.
    pub lower_slack: f64,
}

pub fn free_energy_upper_terms(sums: &BudgetSums, epsilon: f64, net_size_log: f64) -> FreeEnergyBudget {
    let n = sums.n as f64;
    let gradient_eps = 0.25 * (n * sums.sum_b2).sqrt() * epsilon;
    let plateau = 3.0 * n * epsilon;
    let inner = sums.a * sums.sum_cii
        + sums.sum_b2
        + 0.25 * (sums.a * sums.sum_c2 + sums.sum_bb_c + 4.0 * sums.sum_b_c);
    let quadratic = 4.0 * inner.sqrt();
    let cross = 0.25 * sums.sum_b2.sqrt() * sums.sum_cii2.sqrt();
    let diagonal = 3.0 * sums.sum_cii;
    let log_two = std::f64::consts::LN_2;
    FreeEnergyBudget {
        gradient_eps,
        plateau,
        net_log: net_size_log,
        quadratic,
        cross,
        diagonal,
        log_two,
        upper_total: gradient_eps + plateau + net_size_log + quadratic + cross + diagonal + log_two,
        lower_slack: free_energy_lower_slack(sums),
    }
}

/// (1/2) sum_i c_ii. Hamiltonians with no diagonal curvature (pair models
/// with zero self-coupling) get a zero-slack lower bound.
pub fn free_energy_lower_slack(sums: &BudgetSums) -> f64 {
    0.5 * sums.sum_cii
}

/// The six trend exponents attached to a pattern graph with k vertices,
/// m edges and maximum degree Delta, kept as exact rationals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrendExponents {
    pub b1: Ratio<i64>,
    pub b2: Ratio<i64>,
    pub b3: Ratio<i64>,
    pub big_b1: Ratio<i64>,
    pub big_b2: Ratio<i64>,
    pub big_b3: Ratio<i64>,
}

pub fn graphthm_exponents(k: usize, m: usize, max_degree: usize) -> Result<TrendExponents> {
    if m < 1 || k < 2 {
        return Err(Error::Domain(format!("need at least one edge and two vertices, got k={k}, m={m}")));
    }
    let (k, m, d) = (k as i64, m as i64, max_degree as i64);
    let denom = 5 + 8 * m;
    Ok(TrendExponents {
        b1: Ratio::from_integer(1),
        b2: Ratio::new(1, 2 * m),
        b3: Ratio::from_integer(d),
        big_b1: Ratio::new(9 + 8 * m, denom),
        big_b2: Ratio::new(1, denom),
        big_b3: Ratio::from_integer(d) - Ratio::new(16 * m, k * denom),
    })
}

/// Shape-only error rates for the progression-count tail, with all unknown
/// absolute constants set to one. Trend diagnostics, never pass/fail.
pub fn arith_error_rates(n: usize, p: f64) -> (f64, f64) {
    let nf = n as f64;
    let lower = nf.powf(-1.0 / 6.0) * p.powi(-6) * nf.ln();
    let upper = nf.powf(-1.0 / 29.0) * p.powf(-162.0 / 29.0) * nf.ln().powf(33.0 / 29.0);
    (lower, upper)
}

/// Shape-only interval for log Z / N^2 minus its mean-field value in the
/// exponential graph family, with absolute constants set to one.
/// `weight` is the 1 + sum of |coefficients| aggregate.
pub fn ergm_bound(weight: f64, n_vertices: usize) -> Result<(f64, f64)> {
    if !(weight >= 1.0) || !weight.is_finite() {
        return Err(Error::Domain(format!("weight aggregate must be >= 1, got {weight}")));
    }
    if n_vertices < 2 {
        return Err(Error::Domain(format!("need at least two vertices, got {n_vertices}")));
    }
    let nf = n_vertices as f64;
    let lo = -weight / nf;
    let hi = weight.powf(1.6) * nf.powf(-0.2) * nf.ln().powf(0.2) * (1.0 + weight.ln() / nf.ln())
        + weight * weight / nf.sqrt();
    Ok((lo, hi))
}

/// Bounded-difference tail bound exp(-2 s^2 / sum b_i^2) on
/// P(f(Y) >= E f(Y) + s), using the first-derivative bounds as coordinate
/// ranges. Returns 0 for a constant function with s > 0 and a trivial 1
/// when s <= 0.
pub fn bounded_difference_tail(sums: &BudgetSums, s: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    if sums.sum_b2 == 0.0 {
        return 0.0;
    }
    (-2.0 * s * s / sums.sum_b2).exp()
}

/// Reference evaluators: explicit per-index loops over the bound rules,
/// plain left-to-right accumulation. Quadratic in n, intended for audits
/// against the closed forms.
pub mod direct {
    use super::TailBudgetParams;
    use crate::functionals::DerivBounds;

    fn beta(params: &TailBudgetParams, bounds: &DerivBounds, i: usize) -> f64 {
        params.kappa() * bounds.b.value(i) + params.log_weight()
    }

    fn gamma(params: &TailBudgetParams, bounds: &DerivBounds, n: usize, i: usize, j: usize) -> f64 {
        params.kappa() * bounds.c.value(i, j) + params.rank_coeff(n) * bounds.b.value(i) * bounds.b.value(j)
    }

    pub fn tail_complexity_term(
        params: &TailBudgetParams,
        bounds: &DerivBounds,
        n: usize,
        net_size_log: f64,
    ) -> f64 {
        let nf = n as f64;
        let mut beta2 = 0.0;
        let mut b2 = 0.0;
        for i in 0..n {
            let bi = beta(params, bounds, i);
            beta2 += bi * bi;
            b2 += bounds.b.value(i) * bounds.b.value(i);
        }
        let mut total = 0.25 * (nf * beta2).sqrt() * params.epsilon + 3.0 * nf * params.epsilon;
        if params.k_rate > 0.0 && b2 > 0.0 {
            total += (4.0 * params.k_rate * (b2 / nf).sqrt() / (params.delta * params.epsilon)).ln();
            total += net_size_log;
        }
        total
    }

    pub fn tail_smoothness_term(params: &TailBudgetParams, bounds: &DerivBounds, n: usize) -> f64 {
        let alpha = params.alpha(n);
        let mut diag = 0.0;
        let mut diag2 = 0.0;
        let mut beta2 = 0.0;
        for i in 0..n {
            let g = gamma(params, bounds, n, i, i);
            diag += g;
            diag2 += g * g;
            let bi = beta(params, bounds, i);
            beta2 += bi * bi;
        }
        // outer loop over the second index on purpose: different order
        // than the closed-form expansion
        let mut pair = 0.0;
        for j in 0..n {
            let bj = beta(params, bounds, j);
            for i in 0..n {
                let g = gamma(params, bounds, n, i, j);
                let bi = beta(params, bounds, i);
                pair += alpha * g * g + bi * bj * g + 4.0 * bi * g;
            }
        }
        let inner = alpha * diag + beta2 + 0.25 * pair;
        4.0 * inner.sqrt() + 0.25 * beta2.sqrt() * diag2.sqrt() + 3.0 * diag + std::f64::consts::LN_2
    }

    pub fn free_energy_upper_terms(
        bounds: &DerivBounds,
        n: usize,
        epsilon: f64,
        net_size_log: f64,
    ) -> f64 {
        let nf = n as f64;
        let mut b2 = 0.0;
        let mut diag = 0.0;
        let mut diag2 = 0.0;
        for i in 0..n {
            let bi = bounds.b.value(i);
            b2 += bi * bi;
            let cii = bounds.c.value(i, i);
            diag += cii;
            diag2 += cii * cii;
        }
        let mut pair = 0.0;
        for j in 0..n {
            for i in 0..n {
                let cij = bounds.c.value(i, j);
                pair += bounds.a * cij * cij
                    + bounds.b.value(i) * bounds.b.value(j) * cij
                    + 4.0 * bounds.b.value(i) * cij;
            }
        }
        let inner = bounds.a * diag + b2 + 0.25 * pair;
        0.25 * (nf * b2).sqrt() * epsilon
            + 3.0 * nf * epsilon
            + net_size_log
            + 4.0 * inner.sqrt()
            + 0.25 * b2.sqrt() * diag2.sqrt()
            + 3.0 * diag
            + std::f64::consts::LN_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy;
    use crate::functionals::ap3::Ap3;
    use crate::functionals::graphs::{EdgeFunctional, Graph};
    use crate::functionals::tilt::TiltedTail;
    use crate::functionals::toy::{CurieWeiss, Linear, TableFunctional};
    use crate::functionals::Functional;
    use approx::assert_abs_diff_eq;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    #[test]
    fn zero_aggregates_leave_only_log_two() {
        let agg = TailAggregates {
            alpha: 123.0,
            beta2: 0.0,
            gamma_diag: 0.0,
            gamma_diag2: 0.0,
            gamma2: 0.0,
            beta_beta_gamma: 0.0,
            beta_gamma: 0.0,
        };
        let s = tail_smoothness_from(&agg);
        assert_eq!(s.total, std::f64::consts::LN_2);
    }

    #[test]
    fn doubling_the_net_adds_exactly_log_two() {
        let p = Bernoulli::new(0.3).unwrap();
        let params = TailBudgetParams::new(p, 0.5, 0.05, 0.05, 0.8).unwrap();
        let sums = CurieWeiss::new(15, 1.0).deriv_bounds().sums(15);
        let base = tail_complexity_term(&params, &sums, 7.0);
        let doubled = tail_complexity_term(&params, &sums, 7.0 + std::f64::consts::LN_2);
        assert_abs_diff_eq!(doubled.total - base.total, std::f64::consts::LN_2, epsilon = 1e-12);
    }

    #[test]
    fn complexity_grows_with_epsilon_at_fixed_net() {
        let p = Bernoulli::new(0.3).unwrap();
        let sums = CurieWeiss::new(15, 1.0).deriv_bounds().sums(15);
        let mut last = f64::NEG_INFINITY;
        for eps in [0.02, 0.05, 0.1, 0.2] {
            let params = TailBudgetParams::new(p, 0.5, 0.05, eps, 0.8).unwrap();
            let c = tail_complexity_term(&params, &sums, 5.0);
            // the log ratio decreases in eps but the linear terms dominate
            // on this instance
            assert!(c.total > last);
            last = c.total;
        }
    }

    #[test]
    fn budget_terms_are_monotone_in_the_rate_level() {
        let p = Bernoulli::new(0.3).unwrap();
        let sums = EdgeFunctional::new(Graph::triangle(), 6).unwrap().deriv_bounds().sums(15);
        let lo = TailBudgetParams::new(p, 0.5, 0.05, 0.05, 0.4).unwrap();
        let hi = TailBudgetParams::new(p, 0.5, 0.05, 0.05, 0.52).unwrap();
        assert!(
            tail_complexity_term(&hi, &sums, 3.0).total >= tail_complexity_term(&lo, &sums, 3.0).total
        );
        assert!(tail_smoothness_term(&hi, &sums).total >= tail_smoothness_term(&lo, &sums).total);
    }

    #[test]
    fn lower_slack_formulas() {
        // symmetric p kills the logit part
        let sums = CurieWeiss::new(16, 1.0).deriv_bounds().sums(16);
        let (eps0, _) = tail_lower_slack(&sums, Bernoulli::new(0.5).unwrap());
        assert_abs_diff_eq!(eps0, 4.0 / 4.0, epsilon = 1e-15);
        // a = 0, b = 0 kills delta0
        let flat = Linear::new(vec![0.0; 9]).deriv_bounds().sums(9);
        let (_, delta0) = tail_lower_slack(&flat, Bernoulli::new(0.3).unwrap());
        assert_eq!(delta0, 0.0);
    }

    #[test]
    fn closed_form_and_direct_evaluators_agree() {
        let p = Bernoulli::new(0.3).unwrap();
        let cases: Vec<(Box<dyn Functional>, usize)> = vec![
            (Box::new(EdgeFunctional::new(Graph::triangle(), 6).unwrap()), 15),
            (Box::new(Ap3::new(12)), 12),
            (Box::new(CurieWeiss::new(15, 1.3)), 15),
            (Box::new(Linear::new((0..9).map(|i| 0.1 * i as f64 - 0.3).collect())), 9),
        ];
        for (f, n) in &cases {
            let bounds = f.deriv_bounds();
            let sums = bounds.sums(*n);
            let params = TailBudgetParams::new(p, 0.5, 0.05, 0.05, 0.8).unwrap();
            let c_closed = tail_complexity_term(&params, &sums, 11.0).total;
            let c_direct = direct::tail_complexity_term(&params, &bounds, *n, 11.0);
            assert!(rel_close(c_closed, c_direct, 1e-9), "{}: {c_closed} vs {c_direct}", f.name());
            let s_closed = tail_smoothness_term(&params, &sums).total;
            let s_direct = direct::tail_smoothness_term(&params, &bounds, *n);
            assert!(rel_close(s_closed, s_direct, 1e-9), "{}: {s_closed} vs {s_direct}", f.name());
            let f_closed = free_energy_upper_terms(&sums, 0.07, 4.0).upper_total;
            let f_direct = direct::free_energy_upper_terms(&bounds, *n, 0.07, 4.0);
            assert!(rel_close(f_closed, f_direct, 1e-9), "{}: {f_closed} vs {f_direct}", f.name());
        }
    }

    #[test]
    fn direct_evaluators_cover_dense_and_tilted_rules() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let n = 8;
        let f = TableFunctional::random(n, 2.0, &mut rng).unwrap();
        let p = Bernoulli::new(0.4).unwrap();
        let params = TailBudgetParams::new(p, 0.4, 0.08, 0.06, 0.5).unwrap();
        let bounds = f.deriv_bounds();
        let sums = bounds.sums(n);
        assert!(rel_close(
            tail_smoothness_term(&params, &sums).total,
            direct::tail_smoothness_term(&params, &bounds, n),
            1e-9
        ));
        // the soft-indicator wrapper produces the affine pair rule; its
        // sums must also match the loop path
        let tilted = TiltedTail::new(&f, p, 0.4, 0.08, 0.5).unwrap();
        let tb = tilted.deriv_bounds();
        let ts = tb.sums(n);
        assert!(rel_close(
            free_energy_upper_terms(&ts, 0.05, 2.0).upper_total,
            direct::free_energy_upper_terms(&tb, n, 0.05, 2.0),
            1e-9
        ));
    }

    #[test]
    fn sandwich_contains_the_exact_binomial_tail() {
        // linear f = sum x_i: the rate at level s is exactly n*I(s||p)
        let n = 14;
        let f = Linear::new(vec![1.0; n]);
        let p = Bernoulli::new(0.3).unwrap();
        let t = 0.5;
        let sums = f.deriv_bounds().sums(n);
        let phi_t = n as f64 * entropy::rel_entropy(t, p).unwrap();
        let params = TailBudgetParams::new(p, t, 0.05, 0.05, phi_t / n as f64).unwrap();
        let (_, delta0) = tail_lower_slack(&sums, p);
        let phi_lower = n as f64 * entropy::rel_entropy(t - 0.05, p).unwrap();
        let phi_upper = n as f64 * entropy::rel_entropy((t + delta0).min(1.0), p).unwrap();
        // a singleton net suffices for a constant gradient
        let sw = tail_sandwich(&params, &sums, 0.0, phi_lower, phi_upper).unwrap();
        let exact = crate::oracle::enumerate_tail(&f, p, t, crate::oracle::DEFAULT_STATE_BUDGET)
            .unwrap()
            .log_prob;
        assert!(sw.lower <= exact && exact <= sw.upper, "{} not in [{}, {}]", exact, sw.lower, sw.upper);
    }

    #[test]
    fn inconsistent_certificates_are_rejected() {
        let n = 10;
        let sums = Linear::new(vec![1.0; n]).deriv_bounds().sums(n);
        let p = Bernoulli::new(0.3).unwrap();
        let params = TailBudgetParams::new(p, 0.5, 0.05, 0.05, 0.2).unwrap();
        // a certified lower rate far above the upper-slot rate empties
        // the interval even after the budget terms pad the upper end
        match tail_sandwich(&params, &sums, 0.0, 1.0e5, 0.1) {
            Err(Error::Infeasible(_)) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
        // negative rate certificates are domain errors
        assert!(tail_sandwich(&params, &sums, 0.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn free_energy_budget_of_a_gradient_free_function() {
        let sums = Linear::new(vec![0.0; 10]).deriv_bounds().sums(10);
        let b = free_energy_upper_terms(&sums, 0.04, 3.5);
        assert_abs_diff_eq!(
            b.upper_total,
            3.0 * 10.0 * 0.04 + 3.5 + std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        assert_eq!(b.lower_slack, 0.0);
    }

    #[test]
    fn pair_models_without_self_coupling_get_zero_lower_slack() {
        let sums = CurieWeiss::new(20, 2.0).deriv_bounds().sums(20);
        assert_eq!(free_energy_lower_slack(&sums), 0.0);
    }

    #[test]
    fn trend_exponents_are_exact_rationals() {
        // triangle: k = 3, m = 3, max degree 2
        let e = graphthm_exponents(3, 3, 2).unwrap();
        assert_eq!(e.b1, Ratio::from_integer(1));
        assert_eq!(e.b2, Ratio::new(1, 6));
        assert_eq!(e.b3, Ratio::from_integer(2));
        assert_eq!(e.big_b1, Ratio::new(33, 29));
        assert_eq!(e.big_b2, Ratio::new(1, 29));
        assert_eq!(e.big_b3, Ratio::from_integer(2) - Ratio::new(48, 87));
        // single edge: k = 2, m = 1, max degree 1
        let e = graphthm_exponents(2, 1, 1).unwrap();
        assert_eq!(e.b2, Ratio::new(1, 2));
        assert_eq!(e.b3, Ratio::from_integer(1));
        // the third upper exponent always tracks the maximum degree
        for (k, m, d) in [(4, 4, 2), (4, 6, 3), (5, 4, 2)] {
            let e = graphthm_exponents(k, m, d).unwrap();
            assert_eq!(e.b3, Ratio::from_integer(d as i64));
        }
    }

    #[test]
    fn shape_rates_decay_in_n() {
        // the upper rate's power of log n crests near n = e^33, so the
        // decay is asymptotic; compare two points past the crest
        let (l1, u1) = arith_error_rates(1_000_000_000_000_000, 0.5);
        let (l2, u2) = arith_error_rates(1_000_000_000_000_000_000, 0.5);
        assert!(l2 < l1 && u2 < u1, "({l1}, {u1}) vs ({l2}, {u2})");
    }

    #[test]
    fn unit_weight_reduces_the_graph_family_bound() {
        let n = 100;
        let (lo, hi) = ergm_bound(1.0, n).unwrap();
        let nf = n as f64;
        assert_abs_diff_eq!(lo, -1.0 / nf, epsilon = 1e-15);
        assert_abs_diff_eq!(
            hi,
            nf.powf(-0.2) * nf.ln().powf(0.2) + nf.powf(-0.5),
            epsilon = 1e-15
        );
    }

    #[test]
    fn bounded_difference_bound_dominates_exact_binomial_tails() {
        let n = 20;
        let f = Linear::new(vec![1.0; n]);
        let sums = f.deriv_bounds().sums(n);
        let p = 0.4;
        let mean = n as f64 * p;
        for s in [0.5, 1.0, 2.0, 4.0] {
            let bound = bounded_difference_tail(&sums, s);
            // exact P(Bin(n, p) >= mean + s)
            let mut tail = 0.0;
            for k in 0..=n {
                if k as f64 >= mean + s {
                    let mut logc = 0.0;
                    for j in 0..k {
                        logc += ((n - j) as f64).ln() - ((j + 1) as f64).ln();
                    }
                    tail += (logc + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()).exp();
                }
            }
            assert!(bound >= tail, "s={s}: bound {bound} below exact {tail}");
        }
        assert_eq!(bounded_difference_tail(&sums, 0.0), 1.0);
    }

    #[test]
    fn bounded_difference_bound_dominates_a_sampled_tail() {
        let f = Ap3::new(50);
        let p = Bernoulli::new(0.5).unwrap();
        let mean = f.mean_under(p).unwrap();
        let s = 0.2 * mean;
        let sums = f.deriv_bounds().sums(50);
        let bound = bounded_difference_tail(&sums, s);
        let mc = crate::oracle::iid_monte_carlo_tail(&f, p, (mean + s) / 50.0, 20_000, 9).unwrap();
        assert!(bound >= mc.estimate + 3.0 * mc.std_error);
    }
}
