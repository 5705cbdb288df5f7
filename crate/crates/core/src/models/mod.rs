//! Parametric transition families p_ij(θ).
//!
//! A family describes a K×K transition matrix over a fixed support set C
//! (cells with positive probability at interior θ), listed row-major. All
//! state indices are 0-based.

mod families;
mod monomial;

pub use families::{
    bernoulli_laplace, bernoulli_laplace_theta, binomial_walk, credit_clubbed, greenwood,
    multi_binomial_walk, reflecting_walk, FamilyId, CREDIT_STATES,
};
pub use monomial::{Cell, FamilyKind, MonomialFamily};

use nalgebra::{DMatrix, DVector};

use crate::chain::TransitionCounts;
use crate::error::{Error, Result};

/// Distance kept from the edges of Θ when evaluating derivatives.
pub const BOUNDARY_DELTA: f64 = 1e-9;

pub trait ParametricFamily: Send + Sync {
    fn name(&self) -> String;

    fn num_states(&self) -> usize;

    fn dim(&self) -> usize;

    /// Closed box Θ, one interval per coordinate.
    fn bounds(&self) -> &[(f64, f64)];

    /// Support cells (i, j), row-major.
    fn support(&self) -> &[(usize, usize)];

    /// p_ij(θ) for each support cell, in support order.
    fn support_probs(&self, theta: &[f64]) -> Result<Vec<f64>>;

    /// c×d matrix of ∂p_ij/∂θ_u over the support.
    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>>;

    fn matrix(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let k = self.num_states();
        let probs = self.support_probs(theta)?;
        let mut p = DMatrix::zeros(k, k);
        for (&(i, j), v) in self.support().iter().zip(probs) {
            p[(i, j)] = v;
        }
        Ok(p)
    }

    /// Per-cell d×d matrices ∂ψ_ij/∂θ, where ψ_ij = ∂ log p_ij.
    fn log_hessian(&self, _theta: &[f64]) -> Option<Result<Vec<DMatrix<f64>>>> {
        None
    }

    /// Closed-form stationary law, when one is known.
    fn stationary(&self, _theta: &[f64]) -> Option<Result<DVector<f64>>> {
        None
    }

    /// Closed-form maximum likelihood estimate from transition tallies.
    fn closed_form_mle(&self, _counts: &TransitionCounts) -> Option<Result<Vec<f64>>> {
        None
    }

    /// True when each row depends on at most one coordinate and every
    /// coordinate can be fitted on its own.
    fn separable(&self) -> bool {
        false
    }

    /// Coordinate governing `row` in a separable family.
    fn row_parameter(&self, _row: usize) -> Option<usize> {
        None
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        let bounds = self.bounds();
        if theta.len() != bounds.len() {
            return Err(Error::Dimension(format!(
                "{} expects {} parameter(s), got {}",
                self.name(),
                bounds.len(),
                theta.len()
            )));
        }
        for (index, (&value, &(lo, hi))) in theta.iter().zip(bounds).enumerate() {
            if !(lo..=hi).contains(&value) {
                return Err(Error::ParameterOutOfBounds { index, value, lo, hi });
            }
        }
        Ok(())
    }

    /// θ pulled at least `BOUNDARY_DELTA` inside Θ.
    fn clamp_interior(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(self.bounds())
            .map(|(&t, &(lo, hi))| t.clamp(lo + BOUNDARY_DELTA, hi - BOUNDARY_DELTA))
            .collect()
    }
}

/// Score vectors ψ_ij(θ) = ∇p_ij/p_ij, one row per support cell.
pub fn score_matrix(family: &dyn ParametricFamily, theta: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let probs = family.support_probs(theta)?;
    let mut psi = family.jacobian(theta)?;
    for (r, &p) in probs.iter().enumerate() {
        let mut row = psi.row_mut(r);
        row /= p;
    }
    Ok((probs, psi))
}

/// ∂ψ/∂θ per support cell: the family's own when provided, else central
/// differences of ψ with step 1e-5·max(1, |θ_u|).
pub fn log_hessian_or_fd(family: &dyn ParametricFamily, theta: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    if let Some(h) = family.log_hessian(theta) {
        return h;
    }
    let d = family.dim();
    let c = family.support().len();
    let mut out = vec![DMatrix::zeros(d, d); c];
    for u in 0..d {
        let h = 1e-5 * theta[u].abs().max(1.0);
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[u] += h;
        minus[u] -= h;
        let plus = family.clamp_interior(&plus);
        let minus = family.clamp_interior(&minus);
        let span = plus[u] - minus[u];
        let (_, psi_p) = score_matrix(family, &plus)?;
        let (_, psi_m) = score_matrix(family, &minus)?;
        for (r, m) in out.iter_mut().enumerate() {
            for v in 0..d {
                m[(v, u)] = (psi_p[(r, v)] - psi_m[(r, v)]) / span;
            }
        }
    }
    // symmetrize: exact Hessians of log p are symmetric
    for m in out.iter_mut() {
        let t = m.transpose();
        *m = (&*m + t) * 0.5;
    }
    Ok(out)
}

/// Support cells grouped by row: `rows[i]` lists (support index, column).
pub fn support_by_row(family: &dyn ParametricFamily) -> Vec<Vec<(usize, usize)>> {
    let mut rows = vec![Vec::new(); family.num_states()];
    for (r, &(i, j)) in family.support().iter().enumerate() {
        rows[i].push((r, j));
    }
    rows
}
