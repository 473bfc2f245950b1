//! Three-term progression density on the cyclic group Z_n:
//!
//! ```text
//! f(x) = (1/n) * sum over i, j in Z_n of x_i x_{i+j} x_{i+2j}
//! ```
//!
//! The j = 0 diagonal and, for even n, the j = n/2 stratum produce repeated
//! indices, so f is a genuine cubic rather than a multilinear form. All
//! monomial coefficients are +1/n, which makes every derivative bound tight
//! at the all-ones point; the pairwise bounds below are exact multiplicity
//! counts, not order-of-magnitude estimates.

use super::{CoordRule, DerivBounds, Functional, PairRule};
use crate::entropy::Bernoulli;

pub struct Ap3 {
    n: usize,
    /// c_class[d] = exact bound on |d2f / dx_k dx_{k+d}|, shift-invariant.
    c_class: Vec<f64>,
}

impl Ap3 {
    pub fn new(n: usize) -> Self {
        assert!(n >= 3, "progression functional needs n >= 3");
        // bucket[d] counts ordered slot pairs (s, t), s != t, over all n^2
        // triples (i, i+j, i+2j) with position difference P[t] - P[s] = d;
        // the second partial against the pair (k, k+d) at all-ones is
        // bucket[d] / n^2 and dominates every other point of the cube
        let mut bucket = vec![0u64; n];
        for a in 0..n {
            for j in 0..n {
                let p = [a, (a + j) % n, (a + 2 * j) % n];
                for s in 0..3 {
                    for t in 0..3 {
                        if s != t {
                            bucket[(p[t] + n - p[s]) % n] += 1;
                        }
                    }
                }
            }
        }
        let n2 = (n * n) as f64;
        let c_class = bucket.into_iter().map(|b| b as f64 / n2).collect();
        Self { n, c_class }
    }

    pub fn pair_bound_class(&self) -> &[f64] {
        &self.c_class
    }
}

impl Functional for Ap3 {
    fn dim(&self) -> usize {
        self.n
    }

    fn name(&self) -> String {
        format!("ap3(n={})", self.n)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for i in 0..n {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for j in 0..n {
                row += x[(i + j) % n] * x[(i + 2 * j) % n];
            }
            total += xi * row;
        }
        total / n as f64
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..n {
                    s += x[(i + j) % n] * x[(i + 2 * j) % n];
                    s += x[(i + n - j % n) % n] * x[(i + j) % n];
                    s += x[(i + 2 * n - 2 * (j % n)) % n] * x[(i + n - j % n) % n];
                }
                s / n as f64
            })
            .collect()
    }

    fn deriv_bounds(&self) -> DerivBounds {
        DerivBounds {
            a: self.n as f64,
            b: CoordRule::Uniform(3.0),
            c: PairRule::Circulant { class: self.c_class.clone() },
        }
    }

    fn delta(&self, x: &[f64], i: usize) -> f64 {
        // f is cubic in x_i: delta = (linear coeff) + (square coeff) +
        // (cube coeff). The linear coefficient is the gradient entry with
        // x_i zeroed; the higher ones come from the j = 0 triple and, for
        // even n, the j = n/2 pair collapse.
        let n = self.n;
        let at = |idx: usize| if idx % n == i { 0.0 } else { x[idx % n] };
        let mut lin = 0.0;
        for j in 0..n {
            lin += at(i + j) * at(i + 2 * j);
            lin += at(i + n - j) * at(i + j);
            lin += at(i + 2 * n - 2 * j) * at(i + n - j);
        }
        let mut d = (lin + 1.0) / n as f64;
        if n % 2 == 0 {
            d += x[(i + n / 2) % n] / n as f64;
        }
        d
    }

    fn cheap_delta(&self) -> bool {
        true
    }

    fn mean_under(&self, p: Bernoulli) -> Option<f64> {
        // triples by distinct-index count: j = 0 gives n singletons, even n
        // adds n index pairs at j = n/2, the rest have three distinct
        let n = self.n as f64;
        let p1 = p.p();
        let pairs = if self.n % 2 == 0 { n } else { 0.0 };
        let triples = n * n - n - pairs;
        Some((n * p1 + pairs * p1 * p1 + triples * p1 * p1 * p1) / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::testutil::{fd_grad, fd_second};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn singleton_indicator_value() {
        // only the (i, j) = (0, 0) triple survives
        let f = Ap3::new(5);
        let mut x = vec![0.0; 5];
        x[0] = 1.0;
        assert_abs_diff_eq!(f.eval(&x), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn all_ones_value_is_n() {
        for n in [5, 6, 9] {
            let f = Ap3::new(n);
            assert_abs_diff_eq!(f.eval(&vec![1.0; n]), n as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [5usize, 6, 8, 9] {
            let f = Ap3::new(n);
            for _ in 0..5 {
                let x: Vec<f64> = (0..n).map(|_| 0.1 + 0.8 * rng.random::<f64>()).collect();
                let g = f.grad(&x);
                let fd = fd_grad(&f, &x, 1e-5);
                for (a, b) in g.iter().zip(&fd) {
                    assert!((a - b).abs() <= 1e-5 * (1.0 + b.abs()), "n={n}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn delta_matches_two_point_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for n in [5usize, 6, 8, 11] {
            let f = Ap3::new(n);
            for _ in 0..5 {
                let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                for i in 0..n {
                    let mut hi = x.clone();
                    hi[i] = 1.0;
                    let mut lo = x.clone();
                    lo[i] = 0.0;
                    let expect = f.eval(&hi) - f.eval(&lo);
                    assert_abs_diff_eq!(f.delta(&x, i), expect, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn cyclic_and_reflection_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for n in [7usize, 8] {
            let f = Ap3::new(n);
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let v = f.eval(&x);
            let rot: Vec<f64> = (0..n).map(|i| x[(i + 3) % n]).collect();
            assert_abs_diff_eq!(f.eval(&rot), v, epsilon = 1e-12);
            let refl: Vec<f64> = (0..n).map(|i| x[(n - i) % n]).collect();
            assert_abs_diff_eq!(f.eval(&refl), v, epsilon = 1e-12);
        }
    }

    #[test]
    fn pair_bounds_dominate_exhaustive_second_differences() {
        // mixed partials are polynomial of low degree, so central
        // differences are exact up to rounding; check at interior points
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for n in [8usize, 9] {
            let f = Ap3::new(n);
            let class = f.pair_bound_class().to_vec();
            for _ in 0..3 {
                let x: Vec<f64> = (0..n).map(|_| 0.2 + 0.6 * rng.random::<f64>()).collect();
                for k in 0..n {
                    for l in 0..n {
                        let d = (l + n - k) % n;
                        let sd = fd_second(&f, &x, k, l, 1e-4).abs();
                        assert!(
                            sd <= class[d] + 1e-6,
                            "n={n} pair ({k},{l}): {sd} > {}",
                            class[d]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn pair_bounds_attained_at_all_ones() {
        for n in [8usize, 9, 16] {
            let f = Ap3::new(n);
            let x = vec![1.0; n];
            let class = f.pair_bound_class().to_vec();
            for d in 0..n {
                let sd = fd_second(&f, &x, 0, d, 1e-3).abs();
                let tol = 1e-5 * (1.0 + class[d]);
                if d == 0 {
                    // diagonal entry of the rule bounds the own-coordinate
                    // second partial
                    assert!((sd - class[0]).abs() <= tol, "n={n}: {sd} vs {}", class[0]);
                } else {
                    assert!((sd - class[d]).abs() <= tol, "n={n} d={d}: {sd} vs {}", class[d]);
                }
            }
        }
    }

    #[test]
    fn known_class_values() {
        // odd n: 6/n off the diagonal, 6/n at it; even n picks up the
        // j = n/2 collapse
        let f = Ap3::new(9);
        let class = f.pair_bound_class();
        assert_abs_diff_eq!(class[0], 6.0 / 9.0, epsilon = 1e-12);
        for d in 1..9 {
            assert_abs_diff_eq!(class[d], 6.0 / 9.0, epsilon = 1e-12);
        }
        let g = Ap3::new(8);
        let gc = g.pair_bound_class();
        // even n: the j = 0 and j = n/2 strata both collapse indices, so
        // the diagonal and the half-turn class rise to 8/n
        assert_abs_diff_eq!(gc[0], 8.0 / 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gc[4], 8.0 / 8.0, epsilon = 1e-12);
        // odd differences lose the doubled-step channel entirely
        assert_abs_diff_eq!(gc[1], 4.0 / 8.0, epsilon = 1e-12);
    }

    #[test]
    fn mean_matches_enumeration() {
        let p = Bernoulli::new(0.3).unwrap();
        for n in [5usize, 6] {
            let f = Ap3::new(n);
            let mut mean = 0.0;
            for mask in 0u32..(1 << n) {
                let x: Vec<f64> = (0..n).map(|i| ((mask >> i) & 1) as f64).collect();
                let ones = mask.count_ones() as f64;
                let prob = p.p().powf(ones) * (1.0 - p.p()).powf(n as f64 - ones);
                mean += prob * f.eval(&x);
            }
            assert_abs_diff_eq!(f.mean_under(p).unwrap(), mean, epsilon = 1e-10);
        }
    }

    #[test]
    fn monotone_in_each_coordinate() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let f = Ap3::new(7);
        let x: Vec<f64> = (0..7).map(|_| rng.random::<f64>()).collect();
        for i in 0..7 {
            let mut hi = x.clone();
            hi[i] = (x[i] + 0.3).min(1.0);
            assert!(f.eval(&hi) >= f.eval(&x) - 1e-12);
        }
    }
}
