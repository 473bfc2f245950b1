//! Frequency-side covering nets for circulant coordinate systems.
//!
//! Progression-count gradients are Lipschitz in the sup distance between
//! normalized discrete Fourier transforms. Rounding the transform on a
//! coarse grid therefore yields a gradient net whose size depends only on
//! how many coefficients survive the rounding. As in the spectral case,
//! every certificate is measured rather than assumed.

use crate::functionals::ap3::Ap3;
use crate::functionals::Functional;
use crate::{ksum, Error, Result};
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Normalized transform with the unitary kernel exp(2 pi i j k / n) /
/// sqrt(n). Round trip with [`idft`] is the identity.
pub fn dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    if n == 0 {
        return buf;
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Inverse of [`dft`], kernel exp(-2 pi i j k / n) / sqrt(n).
pub fn idft(xhat: &[Complex64]) -> Vec<Complex64> {
    let n = xhat.len();
    let mut buf = xhat.to_vec();
    if n == 0 {
        return buf;
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Real part of the inverse transform, for spectra with conjugate
/// symmetry where the imaginary part vanishes to rounding error.
pub fn idft_real(xhat: &[Complex64]) -> Vec<f64> {
    idft(xhat).into_iter().map(|v| v.re).collect()
}

/// Constant in the gradient Lipschitz bound
/// sum_i (f_i(x) - f_i(y))^2 <= C sqrt(n) max_j |x_j - y_j| over
/// transforms: 36 from the term count for odd lengths, with a further
/// factor 4 for even lengths where distinct frequency constraints can
/// collapse pairwise.
pub fn fourier_gradient_constant(n: usize) -> f64 {
    if n % 2 == 1 {
        36.0
    } else {
        144.0
    }
}

/// Measured margin of the Lipschitz property for progression-count
/// gradients: C sqrt(n) max_j |dft(x)_j - dft(y)_j| minus the summed
/// squared gradient differences.
pub fn fourier_gradient_bound_check(f: &Ap3, x: &[f64], y: &[f64]) -> Result<f64> {
    crate::functionals::check_cube_point(f, x)?;
    crate::functionals::check_cube_point(f, y)?;
    let n = f.dim();
    let gx = f.grad(x);
    let gy = f.grad(y);
    let lhs = ksum(gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)));
    let xhat = dft(x);
    let yhat = dft(y);
    let sup = xhat
        .iter()
        .zip(&yhat)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0f64, f64::max);
    Ok(fourier_gradient_constant(n) * (n as f64).sqrt() * sup - lhs)
}

/// Quantization scale multiplier: the rounding pitch is
/// c_quant * epsilon^2 * sqrt(n).
pub const DEFAULT_C_QUANT: f64 = 0.05;

/// Certificate for one frequency-rounding pass.
#[derive(Clone, Debug)]
pub struct FourierNetCertificate {
    /// Rounded cube point, the real inverse of the quantized spectrum
    /// clipped back to [0,1].
    pub representative_point: Vec<f64>,
    pub representative_gradient: Vec<f64>,
    /// Measured summed squared gradient differences.
    pub fidelity: f64,
    /// n epsilon^2.
    pub claimed_bound: f64,
    /// Rounding pitch that produced the certificate.
    pub gamma: f64,
    pub c_quant_used: f64,
    /// Surviving coefficients and the counting bound 4 n / gamma^2.
    pub support: usize,
    pub support_bound: f64,
    pub size_log_bound: f64,
    pub retries: u32,
}

impl FourierNetCertificate {
    pub fn passes(&self) -> bool {
        self.fidelity <= self.claimed_bound && (self.support as f64) <= self.support_bound
    }

    pub fn report(&self) -> super::CertificateReport {
        super::CertificateReport {
            fidelity: self.fidelity,
            claimed_bound: self.claimed_bound,
            size_log_bound: self.size_log_bound,
            retries: self.retries,
            pass: self.passes(),
        }
    }
}

/// Log of the guaranteed net size at support budget s = 4 n / gamma^2:
/// choosing the support and a grid value per surviving coefficient gives
/// s (log n + 2 log(2 sqrt(n)/gamma + 1)).
pub fn fourier_net_size_log(n: usize, gamma: f64) -> f64 {
    let s = 4.0 * n as f64 / (gamma * gamma);
    let levels = 2.0 * (n as f64).sqrt() / gamma + 1.0;
    s * ((n as f64).ln() + 2.0 * levels.ln())
}

const FOURIER_RETRIES: u32 = 6;

fn round_spectrum(xhat: &[Complex64], gamma: f64) -> Vec<Complex64> {
    // sign-symmetric rounding preserves conjugate symmetry, so the
    // inverse stays real for real input
    xhat.iter()
        .map(|v| {
            Complex64::new(
                (v.re / gamma).round() * gamma,
                (v.im / gamma).round() * gamma,
            )
        })
        .collect()
}

/// Round a cube point through its transform at pitch gamma =
/// c_quant epsilon^2 sqrt(n) and certify the gradient distance n eps^2
/// by direct measurement. Failures halve c_quant and retry.
pub fn fourier_round(f: &Ap3, epsilon: f64, x: &[f64], c_quant: f64) -> Result<FourierNetCertificate> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Domain(format!("tolerance must be positive, got {epsilon}")));
    }
    if !(c_quant > 0.0) || !c_quant.is_finite() {
        return Err(Error::Domain(format!("quantization multiplier must be positive, got {c_quant}")));
    }
    crate::functionals::check_cube_point(f, x)?;
    let n = f.dim();
    let claimed = n as f64 * epsilon * epsilon;
    let gx = f.grad(x);
    let xhat = dft(x);
    let mut c = c_quant;
    let mut last = f64::INFINITY;
    for attempt in 0..=FOURIER_RETRIES {
        let gamma = c * epsilon * epsilon * (n as f64).sqrt();
        let rounded = round_spectrum(&xhat, gamma);
        let support = rounded.iter().filter(|v| v.re != 0.0 || v.im != 0.0).count();
        let y: Vec<f64> = idft_real(&rounded)
            .into_iter()
            .map(|v| v.clamp(0.0, 1.0))
            .collect();
        let gy = f.grad(&y);
        let fidelity = ksum(gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)));
        if fidelity <= claimed {
            return Ok(FourierNetCertificate {
                representative_point: y,
                representative_gradient: gy,
                fidelity,
                claimed_bound: claimed,
                gamma,
                c_quant_used: c,
                support,
                support_bound: 4.0 * n as f64 / (gamma * gamma),
                size_log_bound: fourier_net_size_log(n, gamma),
                retries: attempt,
            });
        }
        last = fidelity;
        c *= 0.5;
    }
    Err(Error::Certificate { measured: last, claimed, retries: FOURIER_RETRIES })
}
