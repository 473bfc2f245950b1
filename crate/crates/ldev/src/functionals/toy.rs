//! Small reference functionals.
//!
//! The mean-field pair sum and the linear form have gradients that are
//! essentially one-dimensional, which makes them the cheap end of the
//! complexity spectrum. The nearest-neighbor chain sits at the opposite
//! end and is kept around as the standard stress case: its gradient range
//! genuinely needs exponentially many representatives, so no small net
//! exists and the bounds that depend on one stay weak.

use super::{CoordRule, DerivBounds, Functional, PairRule};
use crate::entropy::Bernoulli;
use crate::{Error, Result};

/// f(x) = (coupling / n) * sum_{i<j} x_i x_j.
pub struct CurieWeiss {
    n: usize,
    coupling: f64,
}

impl CurieWeiss {
    pub fn new(n: usize, coupling: f64) -> Self {
        assert!(n >= 2);
        Self { n, coupling }
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }
}

impl Functional for CurieWeiss {
    fn dim(&self) -> usize {
        self.n
    }

    fn name(&self) -> String {
        format!("curie_weiss(n={}, J={})", self.n, self.coupling)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let s: f64 = crate::ksum(x.iter().copied());
        let s2: f64 = crate::ksum(x.iter().map(|v| v * v));
        self.coupling * (s * s - s2) / (2.0 * self.n as f64)
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let s: f64 = crate::ksum(x.iter().copied());
        x.iter().map(|&v| self.coupling * (s - v) / self.n as f64).collect()
    }

    fn deriv_bounds(&self) -> DerivBounds {
        let nf = self.n as f64;
        let j = self.coupling.abs();
        DerivBounds {
            a: j * (nf - 1.0) / 2.0,
            b: CoordRule::Uniform(j * (nf - 1.0) / nf),
            c: PairRule::Uniform { diag: 0.0, off: j / nf },
        }
    }

    fn delta(&self, x: &[f64], i: usize) -> f64 {
        let s: f64 = x.iter().sum();
        self.coupling * (s - x[i]) / self.n as f64
    }

    fn cheap_delta(&self) -> bool {
        true
    }

    fn mean_under(&self, p: Bernoulli) -> Option<f64> {
        let nf = self.n as f64;
        Some(self.coupling * (nf - 1.0) / 2.0 * p.p() * p.p())
    }
}

/// f(x) = coupling * sum_i x_i x_{i+1}, open chain.
pub struct ChainPairs {
    n: usize,
    coupling: f64,
}

impl ChainPairs {
    pub fn new(n: usize, coupling: f64) -> Self {
        assert!((2..=4096).contains(&n), "chain keeps an explicit pair table; n = {n} is out of range");
        Self { n, coupling }
    }
}

impl Functional for ChainPairs {
    fn dim(&self) -> usize {
        self.n
    }

    fn name(&self) -> String {
        format!("chain(n={}, J={})", self.n, self.coupling)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.coupling * crate::ksum(x.windows(2).map(|w| w[0] * w[1]))
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let left = if i > 0 { x[i - 1] } else { 0.0 };
                let right = if i + 1 < n { x[i + 1] } else { 0.0 };
                self.coupling * (left + right)
            })
            .collect()
    }

    fn deriv_bounds(&self) -> DerivBounds {
        let n = self.n;
        let j = self.coupling.abs();
        let b: Vec<f64> = (0..n)
            .map(|i| if i == 0 || i == n - 1 { j } else { 2.0 * j })
            .collect();
        let mut vals = vec![0.0; n * n];
        for i in 0..n - 1 {
            vals[i * n + i + 1] = j;
            vals[(i + 1) * n + i] = j;
        }
        DerivBounds {
            a: j * (n as f64 - 1.0),
            b: CoordRule::PerCoord(b),
            c: PairRule::Dense { n, vals },
        }
    }

    fn delta(&self, x: &[f64], i: usize) -> f64 {
        let left = if i > 0 { x[i - 1] } else { 0.0 };
        let right = if i + 1 < self.n { x[i + 1] } else { 0.0 };
        self.coupling * (left + right)
    }

    fn cheap_delta(&self) -> bool {
        true
    }

    fn mean_under(&self, p: Bernoulli) -> Option<f64> {
        Some(self.coupling * (self.n as f64 - 1.0) * p.p() * p.p())
    }
}

/// f(x) = sum_i coeffs_i x_i.
pub struct Linear {
    coeffs: Vec<f64>,
}

impl Linear {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty());
        Self { coeffs }
    }
}

impl Functional for Linear {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn name(&self) -> String {
        format!("linear(n={})", self.coeffs.len())
    }

    fn eval(&self, x: &[f64]) -> f64 {
        crate::ksum(self.coeffs.iter().zip(x).map(|(c, v)| c * v))
    }

    fn grad(&self, _x: &[f64]) -> Vec<f64> {
        self.coeffs.clone()
    }

    fn deriv_bounds(&self) -> DerivBounds {
        DerivBounds {
            a: crate::ksum(self.coeffs.iter().map(|c| c.abs())),
            b: CoordRule::PerCoord(self.coeffs.iter().map(|c| c.abs()).collect()),
            c: PairRule::Zero,
        }
    }

    fn delta(&self, _x: &[f64], i: usize) -> f64 {
        self.coeffs[i]
    }

    fn cheap_delta(&self) -> bool {
        true
    }

    fn mean_under(&self, p: Bernoulli) -> Option<f64> {
        Some(p.p() * crate::ksum(self.coeffs.iter().copied()))
    }
}

/// Multilinear extension of an arbitrary table on the binary cube. The
/// generic random instance for audits; exact bounds are scanned from the
/// table at construction.
pub struct TableFunctional {
    n: usize,
    table: Vec<f64>,
    bounds: DerivBounds,
}

impl TableFunctional {
    pub fn new(n: usize, table: Vec<f64>) -> Result<Self> {
        if n == 0 || n > 16 {
            return Err(Error::Domain(format!("table functional supports 1..=16 coordinates, got {n}")));
        }
        if table.len() != 1 << n {
            return Err(Error::Domain(format!(
                "table needs {} entries for n = {n}, got {}",
                1usize << n,
                table.len()
            )));
        }
        // a multilinear function and all its partials attain extremes at
        // vertices, so scanning the table certifies the bounds exactly
        let a = table.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut b = vec![0.0f64; n];
        for i in 0..n {
            let bit = 1usize << i;
            for m in 0..table.len() {
                if m & bit == 0 {
                    b[i] = b[i].max((table[m | bit] - table[m]).abs());
                }
            }
        }
        let mut c = vec![0.0f64; n * n];
        for i in 0..n {
            let bi = 1usize << i;
            for j in i + 1..n {
                let bj = 1usize << j;
                let mut worst = 0.0f64;
                for m in 0..table.len() {
                    if m & bi == 0 && m & bj == 0 {
                        let dd = table[m | bi | bj] - table[m | bi] - table[m | bj] + table[m];
                        worst = worst.max(dd.abs());
                    }
                }
                c[i * n + j] = worst;
                c[j * n + i] = worst;
            }
        }
        let bounds = DerivBounds {
            a,
            b: CoordRule::PerCoord(b),
            c: PairRule::Dense { n, vals: c },
        };
        Ok(Self { n, table, bounds })
    }

    pub fn random(n: usize, scale: f64, rng: &mut impl rand::Rng) -> Result<Self> {
        let table = (0..1usize << n).map(|_| scale * rng.random::<f64>()).collect();
        Self::new(n, table)
    }

    fn binary_mask(x: &[f64]) -> Option<usize> {
        let mut m = 0usize;
        for (i, &v) in x.iter().enumerate() {
            if v == 1.0 {
                m |= 1 << i;
            } else if v != 0.0 {
                return None;
            }
        }
        Some(m)
    }

    /// Fold the table down over all coordinates: repeated convex pairing
    /// leaves the multilinear extension value.
    fn fold(&self, x: &[f64]) -> f64 {
        let mut buf = self.table.clone();
        let mut len = buf.len();
        for (i, &xi) in x.iter().enumerate() {
            let _ = i;
            len /= 2;
            for m in 0..len {
                // after k folds the layout is pairs over the next bit
                buf[m] = (1.0 - xi) * buf[2 * m] + xi * buf[2 * m + 1];
            }
        }
        debug_assert_eq!(len, 1);
        buf[0]
    }
}

impl Functional for TableFunctional {
    fn dim(&self) -> usize {
        self.n
    }

    fn name(&self) -> String {
        format!("table(n={})", self.n)
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match Self::binary_mask(x) {
            Some(m) => self.table[m],
            None => self.fold(x),
        }
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.delta(x, i)).collect()
    }

    fn deriv_bounds(&self) -> DerivBounds {
        self.bounds.clone()
    }

    fn delta(&self, x: &[f64], i: usize) -> f64 {
        let bit = 1usize << i;
        if let Some(m) = Self::binary_mask(x) {
            return self.table[m | bit] - self.table[m & !bit];
        }
        let mut hi = x.to_vec();
        hi[i] = 1.0;
        let mut lo = x.to_vec();
        lo[i] = 0.0;
        self.fold(&hi) - self.fold(&lo)
    }

    fn cheap_delta(&self) -> bool {
        true
    }

    fn mean_under(&self, p: Bernoulli) -> Option<f64> {
        Some(self.fold(&vec![p.p(); self.n]))
    }
}
