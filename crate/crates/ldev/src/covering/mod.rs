//! Constructive gradient-covering nets with measured certificates.
//!
//! The theory only needs two things from a net: its size as a number (it
//! enters the budgets through a logarithm) and a representative within
//! tolerance of any query point. Nets are therefore never materialized;
//! each operation quantizes its input, measures the achieved fidelity
//! directly, and returns a certificate. A failed measurement refines the
//! quantization and retries a bounded number of times, so every returned
//! certificate is self-verifying.

pub mod fourier;

use crate::functionals::ergm::ErgmFunctional;
use crate::functionals::graphs::{EdgeFunctional, EdgeVector};
use crate::functionals::Functional;
use crate::{ksum, Error, Result};
use nalgebra::DMatrix;
use serde::Serialize;

/// Quantization layout behind one spectral rounding pass.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpectralNetParams {
    pub tau: f64,
    /// Number of grid levels, floor(17 / tau^2).
    pub l: u64,
    /// Grid pitch 1/l.
    pub delta: f64,
    pub n_vertices: usize,
}

impl SpectralNetParams {
    pub fn new(tau: f64, n_vertices: usize) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Domain(format!("tolerance must lie in (0,1), got {tau}")));
        }
        if n_vertices == 0 {
            return Err(Error::Domain("matrix side must be positive".into()));
        }
        let ratio = 17.0 / (tau * tau);
        // tau < 1 forces at least 17 levels
        let l = if ratio >= u64::MAX as f64 { u64::MAX } else { ratio.floor() as u64 };
        Ok(Self { tau, l, delta: 1.0 / l as f64, n_vertices })
    }

    /// Singular components kept by the truncation, l - 1 capped at N.
    pub fn kept_rank(&self) -> usize {
        usize::try_from(self.l - 1).unwrap_or(usize::MAX).min(self.n_vertices)
    }
}

/// Log of the guaranteed covering-net size at operator-norm resolution
/// N tau: 34 (N/tau^2) log(51/tau^2).
pub fn spectral_net_size_log(tau: f64, n_vertices: usize) -> f64 {
    34.0 * (n_vertices as f64 / (tau * tau)) * (51.0 / (tau * tau)).ln()
}

/// Log-size of the fallback gradient net that quantizes the cube itself.
///
/// Rounding every coordinate to a grid of pitch q moves the gradient by at
/// most (q/2) sqrt(sum_ij c_ij^2) per coordinate root-sum, so pitch
/// 2 resolution / sqrt(sum c^2) guarantees squared gradient distance
/// n resolution^2. The count is (levels)^n with levels = ceil(1/q) + 1.
/// Dimension-exponential, but at small n this is far below the
/// structure-aware bounds, and it applies to any functional with finite
/// pair bounds.
pub fn cube_net_size_log(sums: &crate::functionals::BudgetSums, resolution: f64) -> Result<f64> {
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(Error::Domain(format!("net resolution must be positive, got {resolution}")));
    }
    if sums.sum_c2 == 0.0 {
        // flat curvature: the gradient is constant, one representative covers
        return Ok(0.0);
    }
    let pitch = 2.0 * resolution / sums.sum_c2.sqrt();
    let levels = if pitch >= 1.0 { 2.0 } else { (1.0 / pitch).ceil() + 1.0 };
    Ok(sums.n as f64 * levels.ln())
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let sv = m.clone().singular_values();
    sv.iter().copied().fold(0.0f64, f64::max)
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let sv = m.clone().singular_values();
    let mut out: Vec<f64> = sv.iter().copied().collect();
    out.sort_by(|a, b| b.partial_cmp(a).unwrap());
    out
}

/// Independent estimate of the operator norm by power iteration on
/// M^t M, for auditing the decomposition-based value.
pub fn power_iteration_norm(m: &DMatrix<f64>, iterations: usize) -> f64 {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let mt = m.transpose();
    // deterministic start with unequal weights so no eigenvector of a
    // structured matrix is exactly orthogonal to it
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt());
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..iterations {
        let w = &mt * (m * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm;
        v = w / norm;
    }
    lambda.sqrt()
}

/// Outcome of one rounding pass: the representative, the measured
/// approximation error, and the bound the certificate claims.
#[derive(Clone, Debug)]
pub struct NetCertificate<T> {
    pub representative: T,
    pub fidelity: f64,
    pub claimed_bound: f64,
    pub size_log_bound: f64,
    pub retries: u32,
}

impl<T> NetCertificate<T> {
    pub fn passes(&self) -> bool {
        self.fidelity <= self.claimed_bound
    }

    pub fn report(&self) -> CertificateReport {
        CertificateReport {
            fidelity: self.fidelity,
            claimed_bound: self.claimed_bound,
            size_log_bound: self.size_log_bound,
            retries: self.retries,
            pass: self.passes(),
        }
    }
}

/// Serializable summary of a certificate, without the representative.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CertificateReport {
    pub fidelity: f64,
    pub claimed_bound: f64,
    pub size_log_bound: f64,
    pub retries: u32,
    pub pass: bool,
}

fn quantize(v: f64, grid: f64) -> f64 {
    (v / grid).round() * grid
}

const SPECTRAL_RETRIES: u32 = 6;

/// Round a matrix with entries in [0,1] onto a quantized low-rank
/// representative and certify the operator-norm distance N tau by direct
/// measurement. The truncated decomposition keeps l - 1 components;
/// singular values are quantized at pitch delta after scaling by 1/N and
/// singular vectors at pitch delta/sqrt(N) per coordinate. A failed
/// measurement halves the pitch and retries.
pub fn spectral_round(m: &DMatrix<f64>, tau: f64) -> Result<NetCertificate<DMatrix<f64>>> {
    let nr = m.nrows();
    if nr != m.ncols() {
        return Err(Error::Domain(format!("expected a square matrix, got {}x{}", nr, m.ncols())));
    }
    if m.iter().any(|v| !(*v >= 0.0 && *v <= 1.0)) {
        return Err(Error::Domain("matrix entries must lie in [0,1]".into()));
    }
    let params = SpectralNetParams::new(tau, nr)?;
    let nf = nr as f64;
    let claimed = nf * tau;
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let rank = params.kept_rank();
    let mut measured = f64::INFINITY;
    for attempt in 0..=SPECTRAL_RETRIES {
        let pitch = params.delta / 2f64.powi(attempt as i32);
        let vec_pitch = pitch / nf.sqrt();
        let mut w = DMatrix::zeros(nr, nr);
        for i in 0..rank {
            let y = quantize(svd.singular_values[i] / nf, pitch);
            if y == 0.0 {
                continue;
            }
            let z = u.column(i).map(|c| quantize(c, vec_pitch));
            let wv = v_t.row(i).map(|c| quantize(c, vec_pitch));
            w += nf * y * z * wv;
        }
        measured = operator_norm(&(m - &w));
        if measured <= claimed {
            return Ok(NetCertificate {
                representative: w,
                fidelity: measured,
                claimed_bound: claimed,
                size_log_bound: spectral_net_size_log(tau, nr),
                retries: attempt,
            });
        }
    }
    Err(Error::Certificate { measured, claimed, retries: SPECTRAL_RETRIES })
}

/// Operator-norm resolution the edge-gradient net needs:
/// epsilon^2 / (64 m^2 k^2).
pub fn edge_net_tau(pattern_edges: usize, pattern_vertices: usize, epsilon: f64) -> f64 {
    let m = pattern_edges as f64;
    let k = pattern_vertices as f64;
    epsilon * epsilon / (64.0 * m * m * k * k)
}

/// Certificate for a gradient net query: the rounded point, its gradient,
/// and the measured squared gradient distance against the claimed n eps^2.
#[derive(Clone, Debug)]
pub struct GradientNetCertificate {
    /// Rounded cube point whose gradient represents the query's net cell.
    pub representative_point: Vec<f64>,
    pub representative_gradient: Vec<f64>,
    /// Measured sum of squared gradient differences.
    pub fidelity: f64,
    /// n epsilon^2.
    pub claimed_bound: f64,
    /// Measured operator-norm distance between the query and the rounded
    /// point, and the bound it must satisfy (2 N tau).
    pub op_distance: f64,
    pub op_bound: f64,
    pub size_log_bound: f64,
    pub retries: u32,
}

impl GradientNetCertificate {
    pub fn passes(&self) -> bool {
        self.fidelity <= self.claimed_bound && self.op_distance <= self.op_bound
    }

    pub fn report(&self) -> CertificateReport {
        CertificateReport {
            fidelity: self.fidelity,
            claimed_bound: self.claimed_bound,
            size_log_bound: self.size_log_bound,
            retries: self.retries,
            pass: self.passes(),
        }
    }
}

const GRADIENT_RETRIES: u32 = 4;

/// Round an edge configuration so that the pattern-count gradient at the
/// representative is within the certified distance of the gradient at x.
/// Internally rounds the adjacency matrix spectrally at resolution
/// epsilon^2/(64 m^2 k^2), pulls the representative back to a valid edge
/// vector, and measures both the operator distance and the gradient
/// distance; failures refine the internal resolution.
pub fn subgraph_gradient_net(
    f: &EdgeFunctional,
    epsilon: f64,
    x: &[f64],
) -> Result<GradientNetCertificate> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Domain(format!("tolerance must be positive, got {epsilon}")));
    }
    crate::functionals::check_cube_point(f, x)?;
    let n = f.dim();
    let nn = f.n_vertices();
    let (k, m) = (f.graph().vertex_count(), f.graph().edge_count());
    let tau = edge_net_tau(m, k, epsilon);
    let claimed_grad = n as f64 * epsilon * epsilon;
    let op_bound = 2.0 * nn as f64 * tau;
    let gx = f.grad(x);
    let mx = EdgeVector::from_vals(nn, x.to_vec())?.to_matrix();
    let mut inner_tau = tau;
    let mut last = (f64::INFINITY, f64::INFINITY);
    for attempt in 0..=GRADIENT_RETRIES {
        let rounded = spectral_round(&mx, inner_tau)?;
        let y_edges = EdgeVector::from_matrix_clipped(&rounded.representative)?;
        let my = y_edges.to_matrix();
        let op_distance = operator_norm(&(&mx - &my));
        let gy = f.grad(y_edges.vals());
        let fidelity = ksum(gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)));
        if op_distance <= op_bound && fidelity <= claimed_grad {
            return Ok(GradientNetCertificate {
                representative_point: y_edges.vals().to_vec(),
                representative_gradient: gy,
                fidelity,
                claimed_bound: claimed_grad,
                op_distance,
                op_bound,
                size_log_bound: spectral_net_size_log(tau, nn),
                retries: attempt,
            });
        }
        last = (fidelity, op_distance);
        inner_tau *= 0.5;
    }
    Err(Error::Certificate { measured: last.0.max(last.1), claimed: claimed_grad, retries: GRADIENT_RETRIES })
}

/// Margin of the operator-norm Lipschitz property for pattern-count
/// gradients: 8 m^2 k^2 N ||M(x) - M(y)||_op minus the summed squared
/// gradient differences. Nonnegative for every pair of edge vectors.
pub fn op_norm_lipschitz_margin(f: &EdgeFunctional, x: &[f64], y: &[f64]) -> Result<f64> {
    crate::functionals::check_cube_point(f, x)?;
    crate::functionals::check_cube_point(f, y)?;
    let nn = f.n_vertices();
    let (k, m) = (f.graph().vertex_count() as f64, f.graph().edge_count() as f64);
    let gx = f.grad(x);
    let gy = f.grad(y);
    let lhs = ksum(gx.iter().zip(&gy).map(|(a, b)| (a - b) * (a - b)));
    let mx = EdgeVector::from_vals(nn, x.to_vec())?.to_matrix();
    let my = EdgeVector::from_vals(nn, y.to_vec())?.to_matrix();
    let rhs = 8.0 * m * m * k * k * nn as f64 * operator_norm(&(mx - my));
    Ok(rhs - lhs)
}

/// Combined certificate for a weighted family of pattern counts: each
/// term is rounded at its own slice of the tolerance and the weighted
/// gradient sum is certified against the family gradient.
#[derive(Clone, Debug)]
pub struct ProductNetCertificate {
    pub per_term: Vec<CertificateReport>,
    /// Weighted representative gradient sum_r beta_r grad_r(y_r).
    pub representative_gradient: Vec<f64>,
    pub fidelity: f64,
    pub claimed_bound: f64,
    /// Sum of the per-term size logs.
    pub size_log_bound: f64,
}

impl ProductNetCertificate {
    pub fn passes(&self) -> bool {
        self.fidelity <= self.claimed_bound
    }
}

/// Build the product net for a weighted pattern family at tolerance
/// epsilon: term r is certified at epsilon/(|beta_r| l), and the combined
/// representative d = sum_r beta_r grad_r(y_r) is certified directly
/// against the family gradient at x.
pub fn ergm_product_net(h: &ErgmFunctional, epsilon: f64, x: &[f64]) -> Result<ProductNetCertificate> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Domain(format!("tolerance must be positive, got {epsilon}")));
    }
    let n = h.dim();
    if x.len() != n {
        return Err(Error::Domain(format!("expected {n} edge coordinates, got {}", x.len())));
    }
    let l = h.terms().len();
    let mut combined = vec![0.0f64; n];
    let mut per_term = Vec::with_capacity(l);
    let mut size_log = 0.0;
    for (f, beta) in h.terms() {
        let eps_r = epsilon / (beta.abs() * l as f64);
        let cert = subgraph_gradient_net(f, eps_r, x)?;
        for (c, g) in combined.iter_mut().zip(&cert.representative_gradient) {
            *c += beta * g;
        }
        size_log += cert.size_log_bound;
        per_term.push(cert.report());
    }
    let gx = h.grad(x);
    let fidelity = ksum(gx.iter().zip(&combined).map(|(a, b)| (a - b) * (a - b)));
    Ok(ProductNetCertificate {
        per_term,
        representative_gradient: combined,
        fidelity,
        claimed_bound: n as f64 * epsilon * epsilon,
        size_log_bound: size_log,
    })
}
