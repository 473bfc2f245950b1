//! Relative entropy on the unit interval and its vector extensions.
//!
//! Everything downstream measures cost in nats against a Bernoulli(p) base
//! measure. The conventions `0 log 0 = 0` and `0 log(0/q) = 0` are applied
//! exactly, so boundary points carry finite, closed-form values:
//! `I_p(0) = log(1/(1-p))` and `I_p(1) = log(1/p)`.

use crate::{Error, Kahan, Result};

/// Base-measure success probability, restricted to the open interval (0, 1).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
#[serde(transparent)]
pub struct Bernoulli(f64);

impl Bernoulli {
    pub fn new(p: f64) -> Result<Self> {
        if p.is_finite() && p > 0.0 && p < 1.0 {
            Ok(Self(p))
        } else {
            Err(Error::Domain(format!("base probability must lie in (0,1), got {p}")))
        }
    }

    #[inline]
    pub fn p(self) -> f64 {
        self.0
    }

    /// log p + log(1-p) magnitudes summed; shows up in budget constants.
    #[inline]
    pub fn abs_log_sum(self) -> f64 {
        self.0.ln().abs() + (1.0 - self.0).ln().abs()
    }

    /// log(p/(1-p)).
    #[inline]
    pub fn logit(self) -> f64 {
        (self.0 / (1.0 - self.0)).ln()
    }
}

fn check_unit(u: f64) -> Result<f64> {
    if u.is_finite() && (0.0..=1.0).contains(&u) {
        Ok(u)
    } else {
        Err(Error::Domain(format!("expected a value in [0,1], got {u}")))
    }
}

/// u log(u/q) with the zero convention applied exactly.
#[inline]
fn xlog_ratio(u: f64, q: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u * (u / q).ln()
    }
}

/// Relative entropy of Bernoulli(u) with respect to Bernoulli(p):
/// `u log(u/p) + (1-u) log((1-u)/(1-p))`.
pub fn rel_entropy(u: f64, p: Bernoulli) -> Result<f64> {
    let u = check_unit(u)?;
    Ok(xlog_ratio(u, p.p()) + xlog_ratio(1.0 - u, 1.0 - p.p()))
}

/// Coordinate sum of [`rel_entropy`] over a point of the cube.
pub fn rel_entropy_vec(xs: &[f64], p: Bernoulli) -> Result<f64> {
    let mut acc = Kahan::new();
    for &u in xs {
        acc.add(rel_entropy(u, p)?);
    }
    Ok(acc.value())
}

/// Negative Shannon entropy `u log u + (1-u) log(1-u)`, in [-log 2, 0].
pub fn neg_entropy(u: f64) -> Result<f64> {
    let u = check_unit(u)?;
    Ok(xlog_ratio(u, 1.0) + xlog_ratio(1.0 - u, 1.0))
}

/// Coordinate sum of [`neg_entropy`].
pub fn neg_entropy_vec(xs: &[f64]) -> Result<f64> {
    let mut acc = Kahan::new();
    for &u in xs {
        acc.add(neg_entropy(u)?);
    }
    Ok(acc.value())
}

/// Cross pairing `sum_i x_i log y_i + (1-x_i) log(1-y_i)`.
///
/// Returns `-inf` exactly when some coordinate puts mass where `y` has none
/// (`x_i > 0, y_i = 0` or `x_i < 1, y_i = 1`). Both arguments must lie in
/// the closed cube.
pub fn cross_entropy(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Domain(format!(
            "cross_entropy length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let mut acc = Kahan::new();
    for (&xi, &yi) in x.iter().zip(y) {
        let xi = check_unit(xi)?;
        let yi = check_unit(yi)?;
        let pos = if xi == 0.0 { 0.0 } else { xi * yi.ln() };
        let neg = if xi == 1.0 { 0.0 } else { (1.0 - xi) * (1.0 - yi).ln() };
        if pos == f64::NEG_INFINITY || neg == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        acc.add(pos + neg);
    }
    Ok(acc.value())
}

/// d/du of [`rel_entropy`]: `log(u(1-p)/((1-u)p))`. Signals the boundary
/// blow-up as `-inf` at 0 and `+inf` at 1.
pub fn rel_entropy_deriv(u: f64, p: Bernoulli) -> Result<f64> {
    let u = check_unit(u)?;
    if u == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    if u == 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok((u / (1.0 - u)).ln() - p.logit())
}

/// log(u/(1-u)); inverse of [`sigmoid`].
#[inline]
pub fn logit(u: f64) -> f64 {
    (u / (1.0 - u)).ln()
}

/// 1/(1+e^{-z}), evaluated stably for large |z|.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
