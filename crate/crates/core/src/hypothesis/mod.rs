//! Wald-type tests built on the MDPDE and the chi-square utilities they use.

mod chi2;

pub use chi2::{chi2_cdf, chi2_quantile, noncentral_chi2_cdf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::asymptotics::{model_matrices_at, AsymptoticReport};
use crate::dpd::DpdEstimate;
use crate::error::{Error, Result};
use crate::models::{bernoulli_laplace_theta, multi_binomial_walk};

/// Significance levels reported with every test.
pub const DEFAULT_LEVELS: [f64; 3] = [0.01, 0.05, 0.10];

type VecFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type MatFn = dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync;

/// Restrictions h(θ) = 0 with Jacobian H(θ) = ∂h/∂θ (d×r).
pub struct Constraint {
    r: usize,
    h: Box<VecFn>,
    jac: Option<Box<MatFn>>,
}

impl Constraint {
    /// H(θ) by central differences with step 1e-6·max(1, |θ_u|).
    pub fn new(r: usize, h: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self { r, h: Box::new(h), jac: None }
    }

    pub fn with_jacobian(mut self, jac: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        self.jac = Some(Box::new(jac));
        self
    }

    /// The simple null θ = θ₀.
    pub fn simple(theta0: Vec<f64>) -> Self {
        let d = theta0.len();
        let t0 = theta0.clone();
        Self::new(d, move |t| t.iter().zip(&t0).map(|(a, b)| a - b).collect())
            .with_jacobian(move |_| DMatrix::identity(d, d))
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn h(&self, theta: &[f64]) -> Result<DVector<f64>> {
        let v = (self.h)(theta);
        if v.len() != self.r {
            return Err(Error::Dimension(format!("h returned {} values, expected r={}", v.len(), self.r)));
        }
        Ok(DVector::from_vec(v))
    }

    pub fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        if let Some(j) = &self.jac {
            let m = j(theta);
            if m.shape() != (theta.len(), self.r) {
                return Err(Error::Dimension(format!("H is {:?}, expected {}x{}", m.shape(), theta.len(), self.r)));
            }
            return Ok(m);
        }
        let d = theta.len();
        let mut m = DMatrix::zeros(d, self.r);
        for u in 0..d {
            let step = 1e-6 * theta[u].abs().max(1.0);
            let mut tp = theta.to_vec();
            let mut tm = theta.to_vec();
            tp[u] += step;
            tm[u] -= step;
            let diff = (self.h(&tp)? - self.h(&tm)?) / (2.0 * step);
            m.row_mut(u).copy_from(&diff.transpose());
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub level: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldResult {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub alpha_tuning: f64,
    pub reject_at: Vec<Decision>,
    pub noncentrality: Option<f64>,
}

impl WaldResult {
    fn new(statistic: f64, df: usize, alpha_tuning: f64) -> Result<Self> {
        let statistic = statistic.max(0.0);
        let p_value = (1.0 - chi2_cdf(statistic, df as f64)?).clamp(0.0, 1.0);
        let reject_at = DEFAULT_LEVELS.iter().map(|&level| Decision { level, reject: p_value < level }).collect();
        Ok(Self { statistic, df, p_value, alpha_tuning, reject_at, noncentrality: None })
    }

    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

fn quadratic_form(v: &DVector<f64>, m: &DMatrix<f64>, what: &str) -> Result<f64> {
    let ch = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{what} is not positive definite")))?;
    Ok(v.dot(&ch.solve(v)))
}

/// Σ* = HᵀΣH at θ.
pub fn sigma_star(constraint: &Constraint, theta: &[f64], sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let h = constraint.jacobian(theta)?;
    Ok(h.transpose() * sigma * h)
}

/// W = T·h(θ̂)ᵀ[HᵀΣH]⁻¹h(θ̂), asymptotically χ²_r under the null.
pub fn wald_composite(
    estimate: &DpdEstimate,
    report: &AsymptoticReport,
    constraint: &Constraint,
    t: f64,
) -> Result<WaldResult> {
    let theta = &estimate.theta_hat;
    if constraint.r() > theta.len() {
        return Err(Error::InvalidArgument(format!("r={} restrictions exceed d={}", constraint.r(), theta.len())));
    }
    let hv = constraint.h(theta)?;
    let star = sigma_star(constraint, theta, &report.sigma)?;
    let w = if hv.iter().all(|&v| v == 0.0) { 0.0 } else { t * quadratic_form(&hv, &star, "HᵀΣH")? };
    WaldResult::new(w, constraint.r(), estimate.alpha)
}

/// δ = dᵀHΣ*⁻¹Hᵀd for a local drift θ₀ + d/√T.
pub fn noncentrality(constraint: &Constraint, theta0: &[f64], drift: &[f64], sigma: &DMatrix<f64>) -> Result<f64> {
    let h = constraint.jacobian(theta0)?;
    let star = h.transpose() * sigma * &h;
    let v = h.transpose() * DVector::from_column_slice(drift);
    quadratic_form(&v, &star, "HᵀΣH")
}

/// Asymptotic power at `level` against a contiguous alternative with
/// noncentrality δ.
pub fn asymptotic_power(delta: f64, df: usize, level: f64) -> Result<f64> {
    let crit = chi2_quantile(1.0 - level, df as f64)?;
    Ok(1.0 - noncentral_chi2_cdf(crit, df as f64, delta)?)
}

/// Model-specific matrices of the multi-binomial walk at the
/// Bernoulli–Laplace null θ_i = (K − i)/(K − 1).
pub fn bernoulli_laplace_report(k: usize, alpha: f64) -> Result<AsymptoticReport> {
    let family = multi_binomial_walk(k)?;
    model_matrices_at(&family, &bernoulli_laplace_theta(k), alpha)
}

/// W = T Σ_i (θ̂_i − (K − i)/(K − 1))² / σ_ii with K − 2 degrees of freedom,
/// `report` being evaluated at the null.
pub fn wald_bernoulli_laplace(estimate: &DpdEstimate, report: &AsymptoticReport, t: f64, k: usize) -> Result<WaldResult> {
    let theta0 = bernoulli_laplace_theta(k);
    if estimate.theta_hat.len() != theta0.len() || report.sigma.nrows() != theta0.len() {
        return Err(Error::Dimension(format!("Bernoulli–Laplace test with K={k} needs {} parameters", theta0.len())));
    }
    let mut w = 0.0;
    for (u, (a, b)) in estimate.theta_hat.iter().zip(&theta0).enumerate() {
        let s = report.sigma[(u, u)];
        if !(s > 0.0) {
            return Err(Error::Singular(format!("variance of coordinate {} is {s}", u + 2)));
        }
        w += (a - b).powi(2) / s;
    }
    WaldResult::new(t * w, k - 2, estimate.alpha)
}

/// W = T₁T₂ Δᵀ[T₂Σ₁ + T₁Σ₂]⁻¹Δ with Δ = θ̂¹ − θ̂², asymptotically χ²_d.
pub fn two_sample(
    est1: &DpdEstimate,
    est2: &DpdEstimate,
    rep1: &AsymptoticReport,
    rep2: &AsymptoticReport,
    t1: f64,
    t2: f64,
) -> Result<WaldResult> {
    let d = est1.theta_hat.len();
    if est2.theta_hat.len() != d || rep1.sigma.nrows() != d || rep2.sigma.nrows() != d {
        return Err(Error::Dimension("the two samples disagree on the parameter dimension".into()));
    }
    if est1.alpha != est2.alpha {
        return Err(Error::InvalidArgument("the two estimates use different alpha".into()));
    }
    if !(t1 >= 1.0 && t2 >= 1.0) {
        return Err(Error::InvalidArgument("sample sizes must be at least 1".into()));
    }
    let delta = DVector::from_iterator(d, est1.theta_hat.iter().zip(&est2.theta_hat).map(|(a, b)| a - b));
    let w = if delta.iter().all(|&v| v == 0.0) {
        0.0
    } else {
        let combined = &rep1.sigma * t2 + &rep2.sigma * t1;
        t1 * t2 * quadratic_form(&delta, &combined, "T₂Σ₁ + T₁Σ₂")?
    };
    WaldResult::new(w, d, est1.alpha)
}

/// Second-order influence function of the Wald functional at the null,
/// 2·IFᵀ H Σ*⁻¹ Hᵀ IF; its first-order influence function is zero.
pub fn test_if2(constraint: &Constraint, theta0: &[f64], if_vector: &[f64], sigma_star: &DMatrix<f64>) -> Result<f64> {
    let h = constraint.jacobian(theta0)?;
    let v = h.transpose() * DVector::from_column_slice(if_vector);
    if v.iter().all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    Ok(2.0 * quadratic_form(&v, sigma_star, "Σ*")?)
}

#[cfg(test)]
mod tests;
