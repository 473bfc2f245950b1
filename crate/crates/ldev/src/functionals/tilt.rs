//! Smooth soft-indicator tilt: turns the tail event {f >= tn} into a free
//! energy by multiplying the product measure with e^{n*psi(f/n)}, where psi
//! ramps from -K up to 0 across the window [t-delta, t].

use super::{CoordRule, DerivBounds, Functional, PairRule};
use crate::entropy::Bernoulli;
use crate::{Error, Result};

/// C^2 ramp: -1 on (-inf,-1], 0 on [0,inf), quintic in between.
pub fn smooth_step(y: f64) -> f64 {
    if y <= -1.0 {
        -1.0
    } else if y >= 0.0 {
        0.0
    } else {
        let u = y + 1.0;
        ((6.0 * u - 15.0) * u + 10.0) * u * u * u - 1.0
    }
}

/// First derivative of [`smooth_step`]; bounded by 2 (true max 30/16).
pub fn smooth_step_d1(y: f64) -> f64 {
    if !(-1.0..0.0).contains(&y) {
        return 0.0;
    }
    let u = y + 1.0;
    30.0 * u * u * (1.0 - u) * (1.0 - u)
}

/// Second derivative of [`smooth_step`]; bounded by 6 (true max 10/sqrt(3)).
pub fn smooth_step_d2(y: f64) -> f64 {
    if !(-1.0..0.0).contains(&y) {
        return 0.0;
    }
    let u = y + 1.0;
    60.0 * u * (1.0 - u) * (1.0 - 2.0 * u)
}

/// Slope bound for [`smooth_step`].
pub const STEP_D1_BOUND: f64 = 2.0;
/// Curvature bound for [`smooth_step`].
pub const STEP_D2_BOUND: f64 = 6.0;

/// g(x) = n*psi(f(x)/n) + sum_i (x_i log p + (1-x_i) log(1-p)) with
/// psi(s) = K * step((s-t)/delta).
///
/// On {f >= tn} the tilt vanishes and e^{g(x)} is exactly the product
/// probability of x; below t-delta the tilt sits at the constant -K.
pub struct TiltedTail<'a> {
    inner: &'a dyn Functional,
    p: Bernoulli,
    t: f64,
    delta: f64,
    k_rate: f64,
    log_p: f64,
    log_q: f64,
}

impl<'a> TiltedTail<'a> {
    pub fn new(inner: &'a dyn Functional, p: Bernoulli, t: f64, delta: f64, k_rate: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("tilt window delta = {delta} must be positive")));
        }
        if !(k_rate >= 0.0 && k_rate.is_finite()) {
            return Err(Error::Domain(format!("tilt depth K = {k_rate} must be nonnegative")));
        }
        Ok(Self {
            inner,
            p,
            t,
            delta,
            k_rate,
            log_p: p.p().ln(),
            log_q: (1.0 - p.p()).ln(),
        })
    }

    pub fn psi(&self, s: f64) -> f64 {
        self.k_rate * smooth_step((s - self.t) / self.delta)
    }

    pub fn psi_d1(&self, s: f64) -> f64 {
        self.k_rate / self.delta * smooth_step_d1((s - self.t) / self.delta)
    }

    /// 2K/delta, the slope scale of the tilt.
    pub fn kappa(&self) -> f64 {
        STEP_D1_BOUND * self.k_rate / self.delta
    }

    pub fn inner(&self) -> &dyn Functional {
        self.inner
    }
}

impl Functional for TiltedTail<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn name(&self) -> String {
        format!(
            "tilt({}; t={}, delta={}, K={}, p={})",
            self.inner.name(),
            self.t,
            self.delta,
            self.k_rate,
            self.p.p()
        )
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let n = self.dim() as f64;
        let ones = crate::ksum(x.iter().copied());
        let base = self.p.logit() * ones + n * self.log_q;
        n * self.psi(self.inner.eval(x) / n) + base
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim() as f64;
        let slope = self.psi_d1(self.inner.eval(x) / n);
        let shift = self.log_p - self.log_q;
        if slope == 0.0 {
            return vec![shift; self.dim()];
        }
        let mut g = self.inner.grad(x);
        for v in &mut g {
            *v = slope * *v + shift;
        }
        g
    }

    fn deriv_bounds(&self) -> DerivBounds {
        let n = self.dim() as f64;
        let inner = self.inner.deriv_bounds();
        let cp = self.p.abs_log_sum();
        let kappa = self.kappa();
        let curvature = STEP_D2_BOUND * self.k_rate / (n * self.delta * self.delta);
        let beta = match &inner.b {
            CoordRule::Uniform(b) => CoordRule::Uniform(kappa * b + cp),
            CoordRule::PerCoord(v) => {
                CoordRule::PerCoord(v.iter().map(|b| kappa * b + cp).collect())
            }
        };
        DerivBounds {
            a: n * (self.k_rate + cp),
            b: beta,
            c: PairRule::Affine {
                scale: kappa,
                base: Box::new(inner.c),
                rank_one: curvature,
                b: inner.b,
            },
        }
    }
}
