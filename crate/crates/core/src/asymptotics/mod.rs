//! Sandwich covariance of the MDPDE, standard errors and intervals, the
//! Example-1 efficiency formulas, and influence functions.

mod example1;
mod influence;

pub use example1::{are_example1, example1_sigma, example1_v1, example1_v2};
pub use influence::{influence_function, sensitivity, InfluenceReport, SensitivityMethod, EXHAUSTIVE_LIMIT};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::chain::{stationary_distribution, validate_stochastic};
use crate::dpd::DpdEstimate;
use crate::error::{Error, Result};
use crate::models::{log_hessian_or_fd, score_matrix, support_by_row, ParametricFamily};

/// Condition number of Ψ above which the report is flagged near-singular.
pub const CONDITION_WARNING: f64 = 1e12;

/// Multinomial covariance Λ of the empirical transition estimates over the
/// support cells: block-diagonal by row, block i = (diag(π_i) − π_i π_iᵀ)/π_io.
pub fn lambda_matrix(pi: &DMatrix<f64>, pi_init: &DVector<f64>, support: &[(usize, usize)]) -> Result<DMatrix<f64>> {
    validate_stochastic(pi)?;
    if pi_init.len() != pi.nrows() {
        return Err(Error::Dimension("stationary weights and transition matrix disagree on K".into()));
    }
    let c = support.len();
    let mut lambda = DMatrix::zeros(c, c);
    for (r, &(i, j)) in support.iter().enumerate() {
        let w = pi_init[i];
        if w <= 0.0 {
            return Err(Error::UnreachableState { row: i + 1 });
        }
        for (s, &(k, l)) in support.iter().enumerate() {
            if k != i {
                continue;
            }
            let delta = if j == l { pi[(i, j)] } else { 0.0 };
            lambda[(r, s)] = (delta - pi[(i, j)] * pi[(i, l)]) / w;
        }
    }
    Ok(lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMode {
    /// Evaluated at the model, π = p(θ).
    ModelSpecific,
    /// Evaluated at a transition matrix outside the model (typically π̂).
    ModelRobust,
}

/// Λ, B_α, Ψ_α, Ω_α and Σ_α = Ψ⁻¹ΩΨ⁻¹ at one (π, θ).
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticReport {
    /// Λ over the support; blocks of rows with zero weight are left zero.
    pub lambda: DMatrix<f64>,
    /// diag(B_α) = p_ij^{1−α}/π_io; `None` where π_io = 0.
    pub b_alpha_diag: Vec<Option<f64>>,
    pub psi: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub se: Option<Vec<f64>>,
    pub mode: VarianceMode,
    pub condition_number: f64,
    pub near_singular: bool,
}

impl AsymptoticReport {
    /// Standard errors sqrt(σ_ii / n) for an effective sample size n.
    pub fn with_sample_size(mut self, n: f64) -> Self {
        self.se = Some(self.sigma.diagonal().iter().map(|&s| (s.max(0.0) / n).sqrt()).collect());
        self
    }
}

/// Stationary weights at θ: the family's closed form when available,
/// otherwise the generic linear solve.
pub fn model_stationary(family: &dyn ParametricFamily, theta: &[f64]) -> Result<DVector<f64>> {
    match family.stationary(theta) {
        Some(pi) => pi,
        None => Ok(stationary_distribution(&family.matrix(theta)?)?.pi),
    }
}

/// Matrices at the model: π = p(θ) and its stationary law.
pub fn model_matrices_at(family: &dyn ParametricFamily, theta: &[f64], alpha: f64) -> Result<AsymptoticReport> {
    let pi = family.matrix(theta)?;
    let pi_init = model_stationary(family, theta)?;
    model_matrices(family, theta, &pi, &pi_init, alpha)
}

/// Ψ_α = JᵀB⁻¹J + Σ π_io p^α [αψψᵀ + ∂ψ/∂θ](p − π) and
/// Ω_α = JᵀB⁻¹ΛB⁻¹J at (π, π_o, θ). The correction term in Ψ vanishes when
/// π = p(θ), which is what the mode records.
pub fn model_matrices(
    family: &dyn ParametricFamily,
    theta: &[f64],
    pi: &DMatrix<f64>,
    pi_init: &DVector<f64>,
    alpha: f64,
) -> Result<AsymptoticReport> {
    if alpha < 0.0 {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    validate_stochastic(pi)?;
    let k = family.num_states();
    if pi.nrows() != k || pi_init.len() != k {
        return Err(Error::Dimension(format!("transition data have K={}, family has K={k}", pi.nrows())));
    }
    family.check_theta(theta)?;
    let t = family.clamp_interior(theta);
    let (probs, psi_cells) = score_matrix(family, &t)?;
    let jac = family.jacobian(&t)?;
    let support = family.support();
    let d = family.dim();
    let c = support.len();

    let model = family.matrix(theta)?;
    let at_model = (&model - pi).abs().max() <= 1e-12;
    let mode = if at_model { VarianceMode::ModelSpecific } else { VarianceMode::ModelRobust };

    // B⁻¹J, row by row: π_io p^{α−1} ∂p/∂θ
    let mut binv_j = DMatrix::zeros(c, d);
    let mut b_alpha_diag = Vec::with_capacity(c);
    for (r, &(i, _)) in support.iter().enumerate() {
        let w = pi_init[i];
        let p = probs[r];
        b_alpha_diag.push((w > 0.0).then(|| p.powf(1.0 - alpha) / w));
        let scale = w * p.powf(alpha - 1.0);
        for v in 0..d {
            binv_j[(r, v)] = scale * jac[(r, v)];
        }
    }

    let mut psi = jac.transpose() * &binv_j;
    if !at_model {
        let hess = log_hessian_or_fd(family, &t)?;
        for (r, &(i, j)) in support.iter().enumerate() {
            let w = pi_init[i];
            if w <= 0.0 {
                continue;
            }
            let p = probs[r];
            let s = psi_cells.row(r).transpose();
            let term = (&s * s.transpose()) * alpha + &hess[r];
            psi += term * (w * p.powf(alpha) * (p - pi[(i, j)]));
        }
    }

    // Λ and Ω; rows with zero weight contribute nothing to Ω
    let mut lambda = DMatrix::zeros(c, c);
    let mut omega = DMatrix::zeros(d, d);
    for (i, cells) in support_by_row(family).into_iter().enumerate() {
        let w = pi_init[i];
        if cells.is_empty() || w <= 0.0 {
            continue;
        }
        let n = cells.len();
        let mut block = DMatrix::zeros(n, n);
        for (a, &(ra, ja)) in cells.iter().enumerate() {
            for (b, &(rb, jb)) in cells.iter().enumerate() {
                let delta = if ja == jb { pi[(i, ja)] } else { 0.0 };
                block[(a, b)] = (delta - pi[(i, ja)] * pi[(i, jb)]) / w;
                lambda[(ra, rb)] = block[(a, b)];
            }
        }
        let rows = DMatrix::from_fn(n, d, |a, v| binv_j[(cells[a].0, v)]);
        omega += rows.transpose() * block * rows;
    }
    let omega = symmetrize(&omega);

    let svd = psi.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= 1e-14 * smax {
        return Err(Error::SingularPsi(format!(
            "smallest singular value {smin:.3e} vs largest {smax:.3e}; J(θ) has rank below d"
        )));
    }
    let condition_number = smax / smin;
    let psi_inv = psi
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SingularPsi("Ψ could not be inverted".into()))?;
    let sigma = symmetrize(&(&psi_inv * &omega * psi_inv.transpose()));
    Ok(AsymptoticReport {
        lambda,
        b_alpha_diag,
        psi,
        omega,
        sigma,
        se: None,
        mode,
        condition_number,
        near_singular: condition_number > CONDITION_WARNING,
    })
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// A two-sided interval for one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

/// Normal intervals θ̂_i ± z_{ζ/2} ŝ_i at confidence `level`; with
/// `simultaneous` the error rate ζ is split evenly over the d coordinates.
pub fn confidence_intervals(
    estimate: &DpdEstimate,
    report: &AsymptoticReport,
    level: f64,
    simultaneous: bool,
) -> Result<Vec<Interval>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must be in (0,1), got {level}")));
    }
    let se = report
        .se
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("report has no standard errors; supply a sample size".into()))?;
    let d = estimate.theta_hat.len();
    if se.len() != d {
        return Err(Error::Dimension(format!("{} standard errors for {d} parameters", se.len())));
    }
    let zeta = if simultaneous { (1.0 - level) / d as f64 } else { 1.0 - level };
    let z = normal_quantile(1.0 - zeta / 2.0);
    Ok(estimate
        .theta_hat
        .iter()
        .zip(se)
        .map(|(&t, &s)| Interval { lower: t - z * s, upper: t + z * s })
        .collect())
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}
