//! Exact enumeration and Monte Carlo ground truth on the binary cube.
//!
//! Enumeration walks all 2^n states in Gray-code order so that consecutive
//! states differ in one coordinate; functionals with a cheap discrete
//! derivative are updated incrementally, everything else is re-evaluated
//! per state. The walk is partitioned by high bits into fixed chunks, and
//! chunk results are merged in index order, so values are independent of
//! the thread schedule.

use crate::entropy::{self, Bernoulli};
use crate::functionals::{BudgetSums, Functional};
use crate::{Error, Kahan, Result};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Default cap on enumerated states (2^25).
pub const DEFAULT_STATE_BUDGET: u64 = 1 << 25;

/// Low bits enumerated inside one chunk; high bits select the chunk.
const CHUNK_LOW_BITS: u32 = 14;

fn check_enumerable(n: usize, budget: u64) -> Result<()> {
    if n >= 63 || (1u64 << n) > budget {
        return Err(Error::Budget {
            op: "state enumeration",
            needed: 2f64.powi(n as i32),
            limit: budget as f64,
        });
    }
    Ok(())
}

/// Walk one chunk of the cube in Gray-code order, calling `step` with
/// (state mask, f value) for every state. `high` supplies the fixed top
/// bits; `low_bits` is the number of enumerated low bits.
fn walk_chunk<A>(
    f: &dyn Functional,
    high: u64,
    low_bits: u32,
    acc: &mut A,
    step: &(impl Fn(&mut A, u64, f64) + Sync),
) {
    let n = f.dim();
    let base = high << low_bits;
    let mut x = vec![0.0f64; n];
    for (i, xi) in x.iter_mut().enumerate() {
        if base >> i & 1 == 1 {
            *xi = 1.0;
        }
    }
    let incremental = f.cheap_delta();
    let mut value = f.eval(&x);
    step(acc, base, value);
    let mut gray = 0u64;
    for k in 1u64..(1u64 << low_bits) {
        let bit = k.trailing_zeros() as usize;
        gray ^= 1 << bit;
        let now_one = gray >> bit & 1 == 1;
        if incremental {
            let d = f.delta(&x, bit);
            value += if now_one { d } else { -d };
            x[bit] = if now_one { 1.0 } else { 0.0 };
        } else {
            x[bit] = if now_one { 1.0 } else { 0.0 };
            value = f.eval(&x);
        }
        step(acc, base | gray, value);
    }
}

/// Fold over all 2^n states. Chunks run in parallel; `merge` combines
/// chunk accumulators in ascending chunk order.
fn scan_fold<A: Send>(
    f: &dyn Functional,
    budget: u64,
    init: impl Fn() -> A + Sync,
    step: impl Fn(&mut A, u64, f64) + Sync,
    merge: impl Fn(A, A) -> A,
) -> Result<A> {
    let n = f.dim();
    check_enumerable(n, budget)?;
    let low_bits = (n as u32).min(CHUNK_LOW_BITS);
    let chunks = 1u64 << (n as u32 - low_bits);
    if chunks == 1 {
        let mut acc = init();
        walk_chunk(f, 0, low_bits, &mut acc, &step);
        return Ok(acc);
    }
    let parts: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|h| {
            let mut acc = init();
            walk_chunk(f, h, low_bits, &mut acc, &step);
            acc
        })
        .collect();
    let mut it = parts.into_iter();
    let first = it.next().expect("at least one chunk");
    Ok(it.fold(first, merge))
}

/// log sum_x e^{f(x)} over all binary states.
pub fn enumerate_free_energy(f: &dyn Functional, budget: u64) -> Result<f64> {
    log_sum_states(f, budget, |_, v| v)
}

/// log E_p[e^{h(f(Y))}] for Y a vector of n i.i.d. Bernoulli(p) entries.
pub fn enumerate_log_mean_exp(
    f: &dyn Functional,
    p: Bernoulli,
    h: impl Fn(f64) -> f64 + Sync,
    budget: u64,
) -> Result<f64> {
    let n = f.dim() as f64;
    let (lp, lq) = (p.p().ln(), (1.0 - p.p()).ln());
    log_sum_states(f, budget, move |mask, v| {
        let ones = mask.count_ones() as f64;
        h(v) + ones * lp + (n - ones) * lq
    })
}

/// log E_p[e^{lambda f(Y)}].
pub fn enumerate_log_mgf(f: &dyn Functional, p: Bernoulli, lambda: f64, budget: u64) -> Result<f64> {
    enumerate_log_mean_exp(f, p, move |v| lambda * v, budget)
}

/// Probability-weighted histogram of the values f takes under the product
/// measure: (value, total probability) pairs sorted by value. One scan
/// here replaces a scan per moment query, which is what makes repeated
/// MGF probes (dual scans, tilted diagnostics) affordable.
///
/// Returns None when f takes more than `max_distinct` values, at which
/// point the histogram stops being cheaper than rescanning. Grouping is
/// by exact bit pattern, so values that differ in the last ulp land in
/// separate bins; that costs size, never correctness.
pub fn enumerate_value_histogram(
    f: &dyn Functional,
    p: Bernoulli,
    budget: u64,
    max_distinct: usize,
) -> Result<Option<Vec<(f64, f64)>>> {
    use std::collections::BTreeMap;
    let n = f.dim();
    // mass of a state with k ones
    let (lp, lq) = (p.p().ln(), (1.0 - p.p()).ln());
    let mass: Vec<f64> =
        (0..=n).map(|k| (k as f64 * lp + (n - k) as f64 * lq).exp()).collect();
    // None marks an accumulator past the cap; merge propagates it
    let folded = scan_fold(
        f,
        budget,
        || Some(BTreeMap::<u64, f64>::new()),
        |acc, mask, v| {
            if let Some(map) = acc {
                *map.entry(v.to_bits()).or_insert(0.0) += mass[mask.count_ones() as usize];
                if map.len() > max_distinct {
                    *acc = None;
                }
            }
        },
        |a, b| match (a, b) {
            (Some(mut x), Some(y)) => {
                for (k, w) in y {
                    *x.entry(k).or_insert(0.0) += w;
                }
                if x.len() > max_distinct {
                    None
                } else {
                    Some(x)
                }
            }
            _ => None,
        },
    )?;
    Ok(folded.map(|map| {
        let mut out: Vec<(f64, f64)> =
            map.into_iter().map(|(bits, w)| (f64::from_bits(bits), w)).collect();
        out.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite values"));
        out
    }))
}

/// log E_p[e^{lambda f}] from a value histogram, stable for large lambda.
pub fn histogram_log_mgf(hist: &[(f64, f64)], lambda: f64) -> f64 {
    let mut shift = f64::NEG_INFINITY;
    for &(v, w) in hist {
        shift = shift.max(lambda * v + w.ln());
    }
    if shift == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = Kahan::new();
    for &(v, w) in hist {
        sum.add((lambda * v + w.ln() - shift).exp());
    }
    shift + sum.value().ln()
}

/// Stable two-pass log-sum-exp of `exponent(mask, f(x))` over all states.
fn log_sum_states(
    f: &dyn Functional,
    budget: u64,
    exponent: impl Fn(u64, f64) -> f64 + Sync,
) -> Result<f64> {
    let shift = scan_fold(
        f,
        budget,
        || f64::NEG_INFINITY,
        |m, mask, v| *m = m.max(exponent(mask, v)),
        f64::max,
    )?;
    if shift == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let sum = scan_fold(
        f,
        budget,
        Kahan::new,
        |k, mask, v| k.add((exponent(mask, v) - shift).exp()),
        |mut a, b| {
            a.add(b.value());
            a
        },
    )?;
    Ok(shift + sum.value().ln())
}

/// Exact upper-tail of f under the product Bernoulli measure.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct TailEnumeration {
    /// log P(f(Y) >= t n); negative infinity when no state qualifies.
    pub log_prob: f64,
    /// Number of qualifying states.
    pub hits: u64,
    /// Total states enumerated.
    pub states: u64,
}

impl TailEnumeration {
    pub fn prob(&self) -> f64 {
        self.log_prob.exp()
    }
}

/// Enumerate P(f(Y) >= tn) exactly. Qualifying states are bucketed by
/// popcount, whose counts are exact integers, so the final log-probability
/// is a small stable log-sum-exp over n+1 buckets.
pub fn enumerate_tail(f: &dyn Functional, p: Bernoulli, t: f64, budget: u64) -> Result<TailEnumeration> {
    let n = f.dim();
    let threshold = t * n as f64;
    let counts = scan_fold(
        f,
        budget,
        || vec![0u64; n + 1],
        |c, mask, v| {
            if v >= threshold {
                c[mask.count_ones() as usize] += 1;
            }
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        },
    )?;
    let hits: u64 = counts.iter().sum();
    let (lp, lq) = (p.p().ln(), (1.0 - p.p()).ln());
    let mut shift = f64::NEG_INFINITY;
    for (k, &c) in counts.iter().enumerate() {
        if c > 0 {
            shift = shift.max((c as f64).ln() + k as f64 * lp + (n - k) as f64 * lq);
        }
    }
    let log_prob = if hits == 0 {
        f64::NEG_INFINITY
    } else {
        let mut s = Kahan::new();
        for (k, &c) in counts.iter().enumerate() {
            if c > 0 {
                let e = (c as f64).ln() + k as f64 * lp + (n - k) as f64 * lq;
                s.add((e - shift).exp());
            }
        }
        shift + s.value().ln()
    };
    Ok(TailEnumeration { log_prob, hits, states: 1u64 << n })
}

/// Coordinatewise Gibbs conditional mean: sigma(Delta_i f(x)).
pub fn glauber_conditional_mean(f: &dyn Functional, x: &[f64]) -> Vec<f64> {
    f.delta_vec(x).into_iter().map(entropy::sigmoid).collect()
}

/// Right-hand side of the value-discrepancy bound for the measure ∝ e^f:
/// sum(a c_ii + b_i^2) + (1/4) sum(a c_ij^2 + b_i b_j c_ij).
pub fn mean_field_rhs_value(s: &BudgetSums) -> f64 {
    s.a * s.sum_cii + s.sum_b2 + 0.25 * (s.a * s.sum_c2 + s.sum_bb_c)
}

/// Right-hand side of the gradient-coupling bound:
/// sum b_i^2 + (1/4) sum b_i (b_j + 4) c_ij.
pub fn mean_field_rhs_gradient(s: &BudgetSums) -> f64 {
    s.sum_b2 + 0.25 * s.sum_bb_c + s.sum_b_c
}

/// Enumerated mean-field discrepancies for the Gibbs measure ∝ e^{f(x)}
/// on binary states, plus the certified right-hand sides they must obey.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct MeanFieldAudit {
    /// E[(f(X) - f(X_hat))^2]
    pub e_d2: f64,
    /// E[(sum_i (X_i - X_hat_i) Delta_i f(X))^2]
    pub e_g2: f64,
    pub rhs_value: f64,
    pub rhs_gradient: f64,
}

pub fn mean_field_discrepancy(f: &dyn Functional, budget: u64) -> Result<MeanFieldAudit> {
    let n = f.dim();
    check_enumerable(n, budget)?;
    let shift = scan_fold(f, budget, || f64::NEG_INFINITY, |m, _, v| *m = m.max(v), f64::max)?;
    // accumulate (Z, Z*D^2, Z*G^2) relative to the shifted weights
    let sums = scan_fold(
        f,
        budget,
        || [Kahan::new(); 3],
        |acc, mask, v| {
            let w = (v - shift).exp();
            let mut x = vec![0.0f64; n];
            for (i, xi) in x.iter_mut().enumerate() {
                if mask >> i & 1 == 1 {
                    *xi = 1.0;
                }
            }
            let deltas = f.delta_vec(&x);
            let hat: Vec<f64> = deltas.iter().map(|&d| entropy::sigmoid(d)).collect();
            let d = v - f.eval(&hat);
            let g = crate::ksum(x.iter().zip(&hat).zip(&deltas).map(|((xi, hi), di)| (xi - hi) * di));
            acc[0].add(w);
            acc[1].add(w * d * d);
            acc[2].add(w * g * g);
        },
        |mut a, b| {
            for (x, y) in a.iter_mut().zip(b) {
                x.add(y.value());
            }
            a
        },
    )?;
    let z = sums[0].value();
    let s = f.deriv_bounds().sums(n);
    Ok(MeanFieldAudit {
        e_d2: sums[1].value() / z,
        e_g2: sums[2].value() / z,
        rhs_value: mean_field_rhs_value(&s),
        rhs_gradient: mean_field_rhs_gradient(&s),
    })
}

/// Monte Carlo tail estimate.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct McTail {
    pub estimate: f64,
    pub std_error: f64,
    pub hits: u64,
    pub samples: u64,
    /// Effective sample size of the weighted hit terms; equals `hits` for
    /// the unweighted estimator.
    pub ess: f64,
    /// One-sided 95% upper bound (rule of three), reported when no sample
    /// hit the event; the point estimate 0 is then not evidence of P = 0.
    pub upper_if_zero: Option<f64>,
    /// Set when the effective sample size is too small to trust the
    /// normal-theory standard error.
    pub low_ess: bool,
}

const MC_CHUNK: u64 = 1 << 12;

fn mc_chunks(samples: u64) -> Vec<(u64, u64)> {
    // (stream id, samples in chunk); fixed chunking independent of threads
    let mut out = Vec::new();
    let mut done = 0;
    let mut stream = 0;
    while done < samples {
        let take = MC_CHUNK.min(samples - done);
        out.push((stream, take));
        done += take;
        stream += 1;
    }
    out
}

/// Plain i.i.d. frequency estimate of P(f(Y) >= tn).
pub fn iid_monte_carlo_tail(
    f: &dyn Functional,
    p: Bernoulli,
    t: f64,
    samples: u64,
    seed: u64,
) -> Result<McTail> {
    if samples < 1_000 {
        return Err(Error::Domain(format!("sample budget {samples} is below the minimum 1000")));
    }
    let n = f.dim();
    let threshold = t * n as f64;
    let hits: u64 = mc_chunks(samples)
        .into_par_iter()
        .map(|(stream, count)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let mut x = vec![0.0f64; n];
            let mut h = 0u64;
            for _ in 0..count {
                for xi in x.iter_mut() {
                    *xi = if rng.random::<f64>() < p.p() { 1.0 } else { 0.0 };
                }
                if f.eval(&x) >= threshold {
                    h += 1;
                }
            }
            h
        })
        .sum();
    let est = hits as f64 / samples as f64;
    let std_error = (est * (1.0 - est) / samples as f64).sqrt();
    Ok(McTail {
        estimate: est,
        std_error,
        hits,
        samples,
        ess: hits as f64,
        upper_if_zero: (hits == 0).then_some(3.0 / samples as f64),
        low_ess: false,
    })
}

/// Importance-sampling tail estimate: draw Y' with independent coordinate
/// probabilities `tilt`, weight each hit by the likelihood ratio
/// e^{g(x, p) - g(x, tilt)} with g the cross entropy. Unbiased for the
/// same tail probability; variance collapses when the tilt sits near the
/// dominant feasible states.
pub fn tilted_monte_carlo_tail(
    f: &dyn Functional,
    p: Bernoulli,
    t: f64,
    tilt: &[f64],
    samples: u64,
    seed: u64,
) -> Result<McTail> {
    if samples < 1_000 {
        return Err(Error::Domain(format!("sample budget {samples} is below the minimum 1000")));
    }
    let n = f.dim();
    if tilt.len() != n {
        return Err(Error::Domain(format!("tilt has {} coordinates, expected {n}", tilt.len())));
    }
    if tilt.iter().any(|&z| !(z > 0.0 && z < 1.0)) {
        return Err(Error::Domain("tilt coordinates must lie strictly inside (0,1)".into()));
    }
    let threshold = t * n as f64;
    let p_vec = vec![p.p(); n];
    // per-chunk: (sum w, sum w^2, hits)
    let parts: Vec<(f64, f64, u64)> = mc_chunks(samples)
        .into_par_iter()
        .map(|(stream, count)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let mut x = vec![0.0f64; n];
            let (mut sw, mut sw2) = (Kahan::new(), Kahan::new());
            let mut h = 0u64;
            for _ in 0..count {
                for (xi, zi) in x.iter_mut().zip(tilt) {
                    *xi = if rng.random::<f64>() < *zi { 1.0 } else { 0.0 };
                }
                if f.eval(&x) >= threshold {
                    let log_w = entropy::cross_entropy(&x, &p_vec).unwrap()
                        - entropy::cross_entropy(&x, tilt).unwrap();
                    let w = log_w.exp();
                    h += 1;
                    sw.add(w);
                    sw2.add(w * w);
                }
            }
            (sw.value(), sw2.value(), h)
        })
        .collect();
    let mut sw = Kahan::new();
    let mut sw2 = Kahan::new();
    let mut hits = 0u64;
    for (a, b, h) in parts {
        sw.add(a);
        sw2.add(b);
        hits += h;
    }
    let bf = samples as f64;
    let est = sw.value() / bf;
    // sample variance of the weighted indicator terms
    let var = (sw2.value() / bf - est * est).max(0.0) / bf;
    let ess = if sw2.value() > 0.0 { sw.value() * sw.value() / sw2.value() } else { 0.0 };
    Ok(McTail {
        estimate: est,
        std_error: var.sqrt(),
        hits,
        samples,
        ess,
        upper_if_zero: (hits == 0).then_some(3.0 / samples as f64),
        low_ess: ess < 10.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::graphs::{EdgeFunctional, Graph};
    use crate::functionals::toy::{CurieWeiss, Linear, TableFunctional};
    use crate::functionals::DerivBounds;
    use approx::assert_abs_diff_eq;

    /// Wrapper that hides the cheap discrete derivative, forcing the
    /// enumeration walk onto the re-evaluation path.
    struct ForceSlow<F: Functional>(F);

    impl<F: Functional> Functional for ForceSlow<F> {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn name(&self) -> String {
            format!("slow({})", self.0.name())
        }
        fn eval(&self, x: &[f64]) -> f64 {
            self.0.eval(x)
        }
        fn grad(&self, x: &[f64]) -> Vec<f64> {
            self.0.grad(x)
        }
        fn deriv_bounds(&self) -> DerivBounds {
            self.0.deriv_bounds()
        }
    }

    #[test]
    fn free_energy_of_flat_and_linear_functions() {
        let zero = Linear::new(vec![0.0; 11]);
        assert_abs_diff_eq!(
            enumerate_free_energy(&zero, DEFAULT_STATE_BUDGET).unwrap(),
            11.0 * 2.0f64.ln(),
            epsilon = 1e-12
        );
        let c = 0.8;
        let lin = Linear::new(vec![c; 13]);
        assert_abs_diff_eq!(
            enumerate_free_energy(&lin, DEFAULT_STATE_BUDGET).unwrap(),
            13.0 * (1.0 + c.exp()).ln(),
            epsilon = 1e-11
        );
    }

    #[test]
    fn free_energy_shifts_exactly_with_constants() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let table: Vec<f64> = (0..1 << 8).map(|_| rng.random::<f64>()).collect();
        let f1 = TableFunctional::new(8, table.clone()).unwrap();
        let shifted: Vec<f64> = table.iter().map(|v| v + 3.25).collect();
        let f2 = TableFunctional::new(8, shifted).unwrap();
        let a = enumerate_free_energy(&f1, DEFAULT_STATE_BUDGET).unwrap();
        let b = enumerate_free_energy(&f2, DEFAULT_STATE_BUDGET).unwrap();
        assert_abs_diff_eq!(b - a, 3.25, epsilon = 1e-12);
    }

    #[test]
    fn incremental_and_reevaluation_walks_agree() {
        let f = CurieWeiss::new(12, 1.0);
        assert!(f.cheap_delta());
        let fast = enumerate_free_energy(&f, DEFAULT_STATE_BUDGET).unwrap();
        let slow = enumerate_free_energy(&ForceSlow(CurieWeiss::new(12, 1.0)), DEFAULT_STATE_BUDGET).unwrap();
        assert_abs_diff_eq!(fast, slow, epsilon = 1e-10);
    }

    #[test]
    fn enumeration_respects_the_state_budget() {
        let f = CurieWeiss::new(30, 1.0);
        match enumerate_free_energy(&f, DEFAULT_STATE_BUDGET) {
            Err(Error::Budget { .. }) => {}
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn tail_of_linear_function_is_binomial() {
        let n = 12;
        let f = Linear::new(vec![1.0; n]);
        let p = Bernoulli::new(0.3).unwrap();
        // t = 1 keeps only the all-ones state
        let r = enumerate_tail(&f, p, 1.0, DEFAULT_STATE_BUDGET).unwrap();
        assert_eq!(r.hits, 1);
        assert_abs_diff_eq!(r.log_prob, n as f64 * 0.3f64.ln(), epsilon = 1e-12);
        // vacuous threshold keeps everything
        let r = enumerate_tail(&f, p, -0.5, DEFAULT_STATE_BUDGET).unwrap();
        assert_eq!(r.hits, 1 << n);
        assert_abs_diff_eq!(r.log_prob, 0.0, epsilon = 1e-12);
        // above the maximum: empty event, exact zero probability
        let r = enumerate_tail(&f, p, 1.1, DEFAULT_STATE_BUDGET).unwrap();
        assert_eq!(r.hits, 0);
        assert_eq!(r.log_prob, f64::NEG_INFINITY);
    }

    #[test]
    fn tail_matches_direct_summation_on_a_random_table() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let n = 10;
        let f = TableFunctional::random(n, 4.0, &mut rng).unwrap();
        let p = Bernoulli::new(0.45).unwrap();
        let t = 0.21;
        let r = enumerate_tail(&f, p, t, DEFAULT_STATE_BUDGET).unwrap();
        let mut direct = 0.0;
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let x: Vec<f64> = (0..n).map(|i| (mask >> i & 1) as f64).collect();
            if f.eval(&x) >= t * n as f64 {
                hits += 1;
                let k = mask.count_ones() as f64;
                direct += 0.45f64.powf(k) * 0.55f64.powf(n as f64 - k);
            }
        }
        assert_eq!(r.hits, hits);
        assert_abs_diff_eq!(r.prob(), direct, epsilon = 1e-13);
    }

    #[test]
    fn log_mgf_factorizes_for_linear_functions() {
        let n = 14;
        let c = 0.6;
        let f = Linear::new(vec![c; n]);
        let p = Bernoulli::new(0.25).unwrap();
        let lam = 1.7;
        let got = enumerate_log_mgf(&f, p, lam, DEFAULT_STATE_BUDGET).unwrap();
        let expect = n as f64 * (0.75 + 0.25 * (lam * c).exp()).ln();
        assert_abs_diff_eq!(got, expect, epsilon = 1e-11);
    }

    #[test]
    fn conditional_means_match_the_enumerated_measure() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let n = 8;
        let f = TableFunctional::random(n, 2.0, &mut rng).unwrap();
        // measure proportional to e^f on binary states
        let weights: Vec<f64> = (0u64..(1 << n))
            .map(|mask| {
                let x: Vec<f64> = (0..n).map(|i| (mask >> i & 1) as f64).collect();
                f.eval(&x).exp()
            })
            .collect();
        for _ in 0..50 {
            let mask: u64 = rng.random_range(0..1 << n);
            let x: Vec<f64> = (0..n).map(|i| (mask >> i & 1) as f64).collect();
            let hat = glauber_conditional_mean(&f, &x);
            for i in 0..n {
                let m1 = mask | (1 << i);
                let m0 = mask & !(1 << i);
                let direct = weights[m1 as usize] / (weights[m1 as usize] + weights[m0 as usize]);
                assert_abs_diff_eq!(hat[i], direct, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn flat_function_has_zero_discrepancy() {
        let f = Linear::new(vec![0.0; 10]);
        let audit = mean_field_discrepancy(&f, DEFAULT_STATE_BUDGET).unwrap();
        assert_abs_diff_eq!(audit.e_d2, 0.0, epsilon = 1e-24);
        assert_abs_diff_eq!(audit.e_g2, 0.0, epsilon = 1e-24);
        assert_eq!(audit.rhs_value, 0.0);
        assert_eq!(audit.rhs_gradient, 0.0);
    }

    #[test]
    fn discrepancy_bounds_hold_on_small_instances() {
        let cw = CurieWeiss::new(12, 1.5);
        let a = mean_field_discrepancy(&cw, DEFAULT_STATE_BUDGET).unwrap();
        assert!(a.e_d2 <= a.rhs_value, "{} > {}", a.e_d2, a.rhs_value);
        assert!(a.e_g2 <= a.rhs_gradient, "{} > {}", a.e_g2, a.rhs_gradient);

        let lin = Linear::new(vec![0.7, -0.3, 1.1, 0.4, -0.9, 0.2, 0.5, -0.6]);
        let a = mean_field_discrepancy(&lin, DEFAULT_STATE_BUDGET).unwrap();
        // linear case: the conditional mean is constant, both couplings
        // bounded by sum b_i^2 alone
        assert!(a.e_d2 <= a.rhs_value);
        assert!(a.e_g2 <= a.rhs_gradient);

        let tri = EdgeFunctional::new(Graph::triangle(), 5).unwrap();
        let a = mean_field_discrepancy(&tri, DEFAULT_STATE_BUDGET).unwrap();
        assert!(a.e_d2 <= a.rhs_value);
        assert!(a.e_g2 <= a.rhs_gradient);
    }

    #[test]
    fn soft_indicator_dominates_the_tail() {
        use crate::functionals::tilt::TiltedTail;
        let f = CurieWeiss::new(12, 1.0);
        let p = Bernoulli::new(0.35).unwrap();
        for t in [0.3, 0.45, 0.6] {
            let tail = enumerate_tail(&f, p, t, DEFAULT_STATE_BUDGET).unwrap();
            let g = TiltedTail::new(&f, p, t, 0.1, 1.0).unwrap();
            // log E_p[e^{n psi(f/n)}] must dominate log P(f >= tn)
            let soft = enumerate_log_mean_exp(&f, p, |v| 12.0 * g.psi(v / 12.0), DEFAULT_STATE_BUDGET)
                .unwrap();
            assert!(
                soft >= tail.log_prob - 1e-12,
                "t={t}: soft {soft} below tail {}",
                tail.log_prob
            );
        }
    }

    #[test]
    fn iid_estimator_is_exact_on_sure_events() {
        let f = Linear::new(vec![1.0; 10]);
        let p = Bernoulli::new(0.4).unwrap();
        let r = iid_monte_carlo_tail(&f, p, -0.1, 5_000, 7).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert_eq!(r.std_error, 0.0);
        assert_eq!(r.hits, 5_000);
    }

    #[test]
    fn iid_estimator_matches_enumeration_within_three_sigma() {
        let f = CurieWeiss::new(12, 1.0);
        let p = Bernoulli::new(0.5).unwrap();
        let t = 0.35;
        let exact = enumerate_tail(&f, p, t, DEFAULT_STATE_BUDGET).unwrap().prob();
        let mut ok = 0;
        for seed in 0..10 {
            let r = iid_monte_carlo_tail(&f, p, t, 20_000, seed).unwrap();
            if (r.estimate - exact).abs() <= 3.0 * r.std_error.max(1e-12) {
                ok += 1;
            }
        }
        assert!(ok >= 9, "only {ok}/10 seeds inside three sigma");
    }

    #[test]
    fn iid_estimator_is_deterministic_given_the_seed() {
        let f = CurieWeiss::new(10, 1.0);
        let p = Bernoulli::new(0.4).unwrap();
        let a = iid_monte_carlo_tail(&f, p, 0.3, 10_000, 42).unwrap();
        let b = iid_monte_carlo_tail(&f, p, 0.3, 10_000, 42).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.hits, b.hits);
    }

    #[test]
    fn zero_hit_runs_report_a_rule_of_three_bound() {
        let f = Linear::new(vec![1.0; 20]);
        let p = Bernoulli::new(0.05).unwrap();
        let r = iid_monte_carlo_tail(&f, p, 1.0, 2_000, 3).unwrap();
        assert_eq!(r.hits, 0);
        assert_eq!(r.estimate, 0.0);
        assert_abs_diff_eq!(r.upper_if_zero.unwrap(), 3.0 / 2000.0, epsilon = 1e-15);
    }

    #[test]
    fn untilted_importance_sampler_reduces_to_frequencies() {
        let f = CurieWeiss::new(10, 1.0);
        let p = Bernoulli::new(0.4).unwrap();
        let tilt = vec![0.4; 10];
        let r = tilted_monte_carlo_tail(&f, p, 0.3, &tilt, 5_000, 11).unwrap();
        // likelihood ratios are identically one
        assert_abs_diff_eq!(r.estimate, r.hits as f64 / 5_000.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.ess, r.hits as f64, epsilon = 1e-9);
    }

    #[test]
    fn importance_weights_integrate_to_one() {
        // sum over all states of P_tilt(x) * w(x) = 1
        let n = 10;
        let p = Bernoulli::new(0.3).unwrap();
        let tilt: Vec<f64> = (0..n).map(|i| 0.2 + 0.06 * i as f64).collect();
        let p_vec = vec![p.p(); n];
        let mut total = Kahan::new();
        for mask in 0u64..(1 << n) {
            let x: Vec<f64> = (0..n).map(|i| (mask >> i & 1) as f64).collect();
            let log_tilt_prob = entropy::cross_entropy(&x, &tilt).unwrap();
            let log_w = entropy::cross_entropy(&x, &p_vec).unwrap() - log_tilt_prob;
            total.add((log_tilt_prob + log_w).exp());
        }
        assert_abs_diff_eq!(total.value(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn tilted_estimator_matches_enumeration_and_cuts_variance() {
        let tri = EdgeFunctional::new(Graph::triangle(), 5).unwrap();
        let n = tri.dim();
        let p = Bernoulli::new(0.3).unwrap();
        let t = 1.5 * tri.mean_under(p).unwrap() / n as f64;
        let exact = enumerate_tail(&tri, p, t, DEFAULT_STATE_BUDGET).unwrap().prob();
        // tilt toward the event: bias every edge upward
        let tilt = vec![0.55; n];
        let budget = 20_000;
        let tilted = tilted_monte_carlo_tail(&tri, p, t, &tilt, budget, 5).unwrap();
        let iid = iid_monte_carlo_tail(&tri, p, t, budget, 5).unwrap();
        assert!((tilted.estimate - exact).abs() <= 3.0 * tilted.std_error);
        assert!((iid.estimate - exact).abs() <= 4.0 * iid.std_error.max(1e-6));
        assert!(
            tilted.std_error < iid.std_error,
            "tilted {} vs iid {}",
            tilted.std_error,
            iid.std_error
        );
    }

    #[test]
    fn value_histogram_carries_the_full_measure() {
        let tri = EdgeFunctional::new(Graph::triangle(), 5).unwrap();
        let p = Bernoulli::new(0.35).unwrap();
        let hist = enumerate_value_histogram(&tri, p, DEFAULT_STATE_BUDGET, 1 << 20)
            .unwrap()
            .expect("well under the cap");
        let total: f64 = hist.iter().map(|&(_, w)| w).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert!(hist.windows(2).all(|w| w[0].0 < w[1].0), "values sorted and distinct");
        // counting functional on 10 edges: value set stays small
        assert!(hist.len() <= 1 << 10);
    }

    #[test]
    fn histogram_mgf_agrees_with_direct_enumeration() {
        let f = CurieWeiss::new(12, 1.4);
        let p = Bernoulli::new(0.45).unwrap();
        let hist = enumerate_value_histogram(&f, p, DEFAULT_STATE_BUDGET, 1 << 20)
            .unwrap()
            .unwrap();
        for lambda in [0.0, 0.3, 1.0, 4.0, -2.0] {
            let direct = enumerate_log_mgf(&f, p, lambda, DEFAULT_STATE_BUDGET).unwrap();
            assert_abs_diff_eq!(histogram_log_mgf(&hist, lambda), direct, epsilon = 1e-10);
        }
    }

    #[test]
    fn histogram_reports_overflow_instead_of_growing() {
        let f = CurieWeiss::new(10, 1.0);
        let p = Bernoulli::new(0.5).unwrap();
        let hist = enumerate_value_histogram(&f, p, DEFAULT_STATE_BUDGET, 3).unwrap();
        assert!(hist.is_none());
    }
}
