//! Density power divergence, the MDPDE objective and its estimating function.

pub mod solver;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::chain::EmpiricalTransition;
use crate::error::{Error, Result};
use crate::models::ParametricFamily;
use solver::{minimize, minimize_scalar, Objective, SolverConfig};

const SIMPLEX_TOL: f64 = 1e-10;

fn check_simplex(v: &[f64], what: &str) -> Result<()> {
    if v.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidArgument(format!("{what} sums to {s}, expected 1")));
    }
    Ok(())
}

/// d_α(g, f) between probability vectors; the KL divergence at α = 0.
pub fn dpd_divergence(g: &[f64], f: &[f64], alpha: f64) -> Result<f64> {
    if g.len() != f.len() {
        return Err(Error::Dimension(format!("g has {} entries, f has {}", g.len(), f.len())));
    }
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    check_simplex(g, "g")?;
    check_simplex(f, "f")?;
    if g == f {
        return Ok(0.0);
    }
    let mut total = 0.0;
    if alpha == 0.0 {
        for (&gj, &fj) in g.iter().zip(f) {
            if gj > 0.0 {
                if fj == 0.0 {
                    return Err(Error::KldUndefined);
                }
                total += gj * (gj / fj).ln();
            }
        }
    } else {
        for (&gj, &fj) in g.iter().zip(f) {
            total += fj.powf(1.0 + alpha) - (1.0 + 1.0 / alpha) * fj.powf(alpha) * gj + gj.powf(1.0 + alpha) / alpha;
        }
    }
    Ok(total.max(0.0))
}

/// Tuning parameter and solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpdConfig {
    pub alpha: f64,
    pub tol_grad: f64,
    pub tol_step: f64,
    pub max_iter: usize,
    pub multistart: usize,
}

impl Default for DpdConfig {
    fn default() -> Self {
        Self { alpha: 0.0, tol_grad: 1e-8, tol_step: 1e-10, max_iter: 200, multistart: 9 }
    }
}

impl DpdConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self { alpha, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !(self.tol_grad > 0.0 && self.tol_step > 0.0) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_iter == 0 || self.multistart == 0 {
            return Err(Error::InvalidArgument("max_iter and multistart must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn solver(&self) -> SolverConfig {
        SolverConfig {
            tol_grad: self.tol_grad,
            tol_step: self.tol_step,
            max_iter: self.max_iter,
            multistart: self.multistart,
        }
    }
}

/// Fitted MDPDE with convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpdEstimate {
    pub theta_hat: Vec<f64>,
    pub alpha: f64,
    pub objective_value: f64,
    /// ‖U(θ̂)‖_∞ over coordinates not held at a bound by the data.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub at_boundary: Vec<bool>,
    /// Cells with empirical mass that the model gives probability zero.
    pub off_support_cells: usize,
}

/// Cells with positive empirical mass outside the family's support.
pub fn off_support_cells(family: &dyn ParametricFamily, emp: &EmpiricalTransition) -> usize {
    let k = family.num_states();
    let mut on = vec![false; k * k];
    for &(i, j) in family.support() {
        on[i * k + j] = true;
    }
    let mut n = 0;
    for i in 0..k {
        if emp.pi_init_hat[i] <= 0.0 {
            continue;
        }
        for j in 0..k {
            if emp.pi_hat[(i, j)] > 0.0 && !on[i * k + j] {
                n += 1;
            }
        }
    }
    n
}

fn check_inputs(family: &dyn ParametricFamily, emp: &EmpiricalTransition) -> Result<()> {
    let k = family.num_states();
    if emp.num_states() != k || emp.pi_hat.nrows() != k {
        return Err(Error::Dimension(format!("data have K={}, family has K={k}", emp.num_states())));
    }
    Ok(())
}

/// H_α(θ). For α > 0 this is (1+α)⁻¹ Σ_i π̂_io Σ_{j∈C_i} [p^{1+α} − (1+1/α) p^α π̂_ij];
/// at α = 0 it is −Σ_i π̂_io Σ_j π̂_ij log p_ij, the per-transition negative
/// log-likelihood.
pub fn objective(family: &dyn ParametricFamily, emp: &EmpiricalTransition, theta: &[f64], alpha: f64) -> Result<f64> {
    check_inputs(family, emp)?;
    if alpha < 0.0 {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    if alpha == 0.0 {
        let off = off_support_cells(family, emp);
        if off > 0 {
            return Err(Error::OutsideSupport { cells: off });
        }
    }
    let probs = family.support_probs(theta)?;
    Ok(objective_from_probs(family.support(), &probs, emp, alpha))
}

pub(crate) fn objective_from_probs(support: &[(usize, usize)], probs: &[f64], emp: &EmpiricalTransition, alpha: f64) -> f64 {
    let mut total = 0.0;
    if alpha == 0.0 {
        for (&(i, j), &p) in support.iter().zip(probs) {
            let w = emp.pi_init_hat[i] * emp.pi_hat[(i, j)];
            if w > 0.0 {
                if p <= 0.0 {
                    return f64::INFINITY;
                }
                total -= w * p.ln();
            }
        }
        total
    } else {
        let c = 1.0 + 1.0 / alpha;
        for (&(i, j), &p) in support.iter().zip(probs) {
            let w = emp.pi_init_hat[i];
            if w > 0.0 {
                let pa = p.powf(alpha);
                total += w * (pa * p - c * pa * emp.pi_hat[(i, j)]);
            }
        }
        total / (1.0 + alpha)
    }
}

/// U_α(θ) = Σ_i π̂_io Σ_j ψ_ij (p_ij − π̂_ij) p_ij^α, evaluated at θ pulled
/// inside Θ. This is the gradient of `objective`.
pub fn estimating_function(
    family: &dyn ParametricFamily,
    emp: &EmpiricalTransition,
    theta: &[f64],
    alpha: f64,
) -> Result<Vec<f64>> {
    check_inputs(family, emp)?;
    family.check_theta(theta)?;
    let t = family.clamp_interior(theta);
    let probs = family.support_probs(&t)?;
    let jac = family.jacobian(&t)?;
    Ok(estimating_from(family.support(), &probs, &jac, emp, alpha))
}

pub(crate) fn estimating_from(
    support: &[(usize, usize)],
    probs: &[f64],
    jac: &DMatrix<f64>,
    emp: &EmpiricalTransition,
    alpha: f64,
) -> Vec<f64> {
    let d = jac.ncols();
    let mut u = vec![0.0; d];
    for (r, (&(i, j), &p)) in support.iter().zip(probs).enumerate() {
        let w = emp.pi_init_hat[i];
        if w <= 0.0 || p <= 0.0 {
            continue;
        }
        // ψ p^α (p − π̂) = J p^{α−1} (p − π̂)
        let factor = w * p.powf(alpha - 1.0) * (p - emp.pi_hat[(i, j)]);
        for v in 0..d {
            u[v] += jac[(r, v)] * factor;
        }
    }
    u
}

/// The MDPDE objective over one dataset, as seen by the solver.
pub struct StationaryObjective<'a> {
    pub family: &'a dyn ParametricFamily,
    pub emp: &'a EmpiricalTransition,
    pub alpha: f64,
}

impl Objective for StationaryObjective<'_> {
    fn dim(&self) -> usize {
        self.family.dim()
    }

    fn bounds(&self) -> &[(f64, f64)] {
        self.family.bounds()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        match self.family.support_probs(theta) {
            Ok(p) => objective_from_probs(self.family.support(), &p, self.emp, self.alpha),
            Err(_) => f64::INFINITY,
        }
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        estimating_function(self.family, self.emp, theta, self.alpha).unwrap_or_else(|_| vec![f64::NAN; self.dim()])
    }
}

/// One coordinate of a separable family, others held fixed.
struct CoordinateSlice<'a> {
    inner: &'a StationaryObjective<'a>,
    base: Vec<f64>,
    u: usize,
}

impl CoordinateSlice<'_> {
    fn at(&self, t: f64) -> Vec<f64> {
        let mut th = self.base.clone();
        th[self.u] = t;
        th
    }
}

fn prepare(family: &dyn ParametricFamily, emp: &EmpiricalTransition, config: &DpdConfig) -> Result<usize> {
    config.validate()?;
    check_inputs(family, emp)?;
    let off = off_support_cells(family, emp);
    if off > 0 && config.alpha == 0.0 {
        return Err(Error::OutsideSupport { cells: off });
    }
    let has_data = family.support().iter().any(|&(i, _)| emp.pi_init_hat[i] > 0.0);
    if !has_data {
        return Err(Error::InvalidArgument("no visited row carries model support".into()));
    }
    Ok(off)
}

/// Minimizes H_α over Θ.
///
/// Separable families are fitted one coordinate at a time; everything else
/// goes through the multistart box solver. Non-convergence is reported in the
/// result, never hidden.
pub fn estimate(family: &dyn ParametricFamily, emp: &EmpiricalTransition, config: &DpdConfig) -> Result<DpdEstimate> {
    let off = prepare(family, emp, config)?;
    let obj = StationaryObjective { family, emp, alpha: config.alpha };
    let solver = config.solver();
    let d = family.dim();
    if family.separable() && d > 1 {
        let base: Vec<f64> = family.bounds().iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
        let mut theta = base.clone();
        let mut at_boundary = vec![false; d];
        let mut iterations = 0;
        let mut converged = true;
        for u in 0..d {
            let slice = CoordinateSlice { inner: &obj, base: base.clone(), u };
            let (lo, hi) = family.bounds()[u];
            let m = minimize_scalar(
                |t| slice.inner.value(&slice.at(t)),
                |t| slice.inner.gradient(&slice.at(t))[u],
                lo,
                hi,
                &solver,
            );
            theta[u] = m.theta[0];
            at_boundary[u] = m.at_boundary[0];
            iterations += m.iterations;
            converged &= m.converged;
        }
        return Ok(finish(&obj, theta, at_boundary, iterations, converged, off, config));
    }
    let m = minimize(&obj, &solver);
    Ok(finish(&obj, m.theta, m.at_boundary, m.iterations, m.converged, off, config))
}

fn finish(
    obj: &dyn Objective,
    theta: Vec<f64>,
    at_boundary: Vec<bool>,
    iterations: usize,
    converged: bool,
    off_support_cells: usize,
    config: &DpdConfig,
) -> DpdEstimate {
    let u = obj.gradient(&theta);
    let residual_norm = u
        .iter()
        .zip(&at_boundary)
        .filter(|(_, &b)| !b)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max);
    DpdEstimate {
        objective_value: obj.value(&theta),
        theta_hat: theta,
        alpha: config.alpha,
        residual_norm,
        iterations,
        converged,
        at_boundary,
        off_support_cells,
    }
}

/// Minimizes an arbitrary objective under the same solver contract as
/// `estimate`.
pub fn minimize_objective(obj: &dyn Objective, config: &DpdConfig) -> Result<DpdEstimate> {
    config.validate()?;
    let m = minimize(obj, &config.solver());
    Ok(finish(obj, m.theta, m.at_boundary, m.iterations, m.converged, 0, config))
}

/// Fits the coordinate of a separable family that governs `row` to a single
/// observed row distribution, minimizing d_α(observed, p_row(θ)).
pub fn estimate_per_row(
    family: &dyn ParametricFamily,
    observed_row: &[f64],
    row_index: usize,
    config: &DpdConfig,
) -> Result<DpdEstimate> {
    config.validate()?;
    let k = family.num_states();
    if observed_row.len() != k {
        return Err(Error::Dimension(format!("row has {} entries, expected K={k}", observed_row.len())));
    }
    if row_index >= k {
        return Err(Error::StateOutOfRange { state: row_index + 1, position: 0, k });
    }
    check_simplex(observed_row, "observed row")?;
    let u = family
        .row_parameter(row_index)
        .or_else(|| (family.dim() == 1).then_some(0))
        .ok_or_else(|| Error::Unsupported(format!("row {row_index} is not governed by a single coordinate")))?;
    let mut pi_hat = DMatrix::zeros(k, k);
    pi_hat.row_mut(row_index).copy_from_slice(observed_row);
    let mut pi_init = DVector::zeros(k);
    pi_init[row_index] = 1.0;
    let mut visited = vec![false; k];
    visited[row_index] = true;
    let emp = EmpiricalTransition { pi_hat, pi_init_hat: pi_init, visited, total: 1.0 };
    let est = estimate(family, &emp, config)?;
    Ok(DpdEstimate {
        theta_hat: vec![est.theta_hat[u]],
        at_boundary: vec![est.at_boundary[u]],
        residual_norm: if est.at_boundary[u] { 0.0 } else { est.residual_norm },
        ..est
    })
}
