//! Time-dependent transition laws p(t; θ) fitted across n sequences of a
//! common length, with the per-time empirical estimates π̂_ij(t), π̂_io(t).

use nalgebra::DMatrix;

use super::pooled::SequenceBundle;
use crate::chain::{EmpiricalTransition, TransitionCounts};
use crate::dpd::solver::Objective;
use crate::dpd::{estimating_from, minimize_objective, objective_from_probs, DpdConfig, DpdEstimate};
use crate::error::{Error, Result};
use crate::models::ParametricFamily;

/// p(t; θ) over a support that does not change with t. `t` indexes the
/// transition from X_t to X_{t+1}, starting at 0.
pub trait TimeFamily: Send + Sync {
    fn name(&self) -> String;
    fn num_states(&self) -> usize;
    fn dim(&self) -> usize;
    fn bounds(&self) -> &[(f64, f64)];
    fn support(&self) -> &[(usize, usize)];
    /// Number of transitions the family is defined for, if it is tied to one.
    fn horizon(&self) -> Option<usize> {
        None
    }
    fn support_probs(&self, t: usize, theta: &[f64]) -> Result<Vec<f64>>;
    fn jacobian(&self, t: usize, theta: &[f64]) -> Result<DMatrix<f64>>;
}

/// A stationary family used at every time point.
pub struct ConstantInTime<'a>(pub &'a dyn ParametricFamily);

impl TimeFamily for ConstantInTime<'_> {
    fn name(&self) -> String {
        self.0.name()
    }
    fn num_states(&self) -> usize {
        self.0.num_states()
    }
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn bounds(&self) -> &[(f64, f64)] {
        self.0.bounds()
    }
    fn support(&self) -> &[(usize, usize)] {
        self.0.support()
    }
    fn support_probs(&self, _t: usize, theta: &[f64]) -> Result<Vec<f64>> {
        self.0.support_probs(theta)
    }
    fn jacobian(&self, _t: usize, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.0.jacobian(theta)
    }
}

/// θ(t) moving linearly from θ_start at t = 0 to θ_end at t = horizon − 1;
/// the parameter vector is (θ_start, θ_end). Convex combinations stay in a box
/// Θ, so p(t; ·) is always evaluated inside the base family's domain.
pub struct InterpolatedFamily<'a> {
    base: &'a dyn ParametricFamily,
    horizon: usize,
    bounds: Vec<(f64, f64)>,
}

impl<'a> InterpolatedFamily<'a> {
    pub fn new(base: &'a dyn ParametricFamily, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        let mut bounds = base.bounds().to_vec();
        bounds.extend_from_slice(base.bounds());
        Ok(Self { base, horizon, bounds })
    }

    fn weight(&self, t: usize) -> f64 {
        if self.horizon == 1 {
            0.0
        } else {
            t as f64 / (self.horizon - 1) as f64
        }
    }

    /// θ(t) for a parameter vector (θ_start, θ_end).
    pub fn theta_at(&self, t: usize, theta: &[f64]) -> Result<Vec<f64>> {
        let d = self.base.dim();
        if theta.len() != 2 * d {
            return Err(Error::Dimension(format!("expected {} parameters, got {}", 2 * d, theta.len())));
        }
        let s = self.weight(t);
        Ok((0..d).map(|u| (1.0 - s) * theta[u] + s * theta[d + u]).collect())
    }
}

impl TimeFamily for InterpolatedFamily<'_> {
    fn name(&self) -> String {
        format!("{} (linear in t)", self.base.name())
    }
    fn num_states(&self) -> usize {
        self.base.num_states()
    }
    fn dim(&self) -> usize {
        2 * self.base.dim()
    }
    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
    fn support(&self) -> &[(usize, usize)] {
        self.base.support()
    }
    fn horizon(&self) -> Option<usize> {
        Some(self.horizon)
    }
    fn support_probs(&self, t: usize, theta: &[f64]) -> Result<Vec<f64>> {
        self.base.support_probs(&self.theta_at(t, theta)?)
    }
    fn jacobian(&self, t: usize, theta: &[f64]) -> Result<DMatrix<f64>> {
        let j = self.base.jacobian(&self.theta_at(t, theta)?)?;
        let s = self.weight(t);
        let d = self.base.dim();
        Ok(DMatrix::from_fn(j.nrows(), 2 * d, |r, u| if u < d { (1.0 - s) * j[(r, u)] } else { s * j[(r, u - d)] }))
    }
}

/// Per-time empirical estimates from sequences of a common length.
pub fn time_slices(bundle: &SequenceBundle) -> Result<Vec<EmpiricalTransition>> {
    let lengths = bundle.lengths();
    let len = lengths[0];
    if lengths.iter().any(|&l| l != len) {
        return Err(Error::InvalidArgument("time-dependent fitting needs sequences of a common length".into()));
    }
    if len < 2 {
        return Err(Error::NoTransitions);
    }
    (0..len - 1)
        .map(|t| {
            let mut c = TransitionCounts::zeros(bundle.num_states());
            for s in bundle.sequences() {
                c.add(s.states()[t], s.states()[t + 1], 1);
            }
            c.empirical()
        })
        .collect()
}

struct Nonstationary<'a> {
    family: &'a dyn TimeFamily,
    slices: &'a [EmpiricalTransition],
    alpha: f64,
}

impl Objective for Nonstationary<'_> {
    fn dim(&self) -> usize {
        self.family.dim()
    }

    fn bounds(&self) -> &[(f64, f64)] {
        self.family.bounds()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let mut total = 0.0;
        for (t, slice) in self.slices.iter().enumerate() {
            match self.family.support_probs(t, theta) {
                Ok(p) => total += objective_from_probs(self.family.support(), &p, slice, self.alpha),
                Err(_) => return f64::INFINITY,
            }
        }
        total
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut g = vec![0.0; d];
        for (t, slice) in self.slices.iter().enumerate() {
            let (Ok(p), Ok(j)) = (self.family.support_probs(t, theta), self.family.jacobian(t, theta)) else {
                return vec![f64::NAN; d];
            };
            for (gu, v) in g.iter_mut().zip(estimating_from(self.family.support(), &p, &j, slice, self.alpha)) {
                *gu += v;
            }
        }
        g
    }
}

fn off_support(family: &dyn TimeFamily, slices: &[EmpiricalTransition]) -> usize {
    let k = family.num_states();
    let mut on = vec![false; k * k];
    for &(i, j) in family.support() {
        on[i * k + j] = true;
    }
    slices
        .iter()
        .map(|s| {
            (0..k * k)
                .filter(|&c| !on[c] && s.pi_init_hat[c / k] > 0.0 && s.pi_hat[(c / k, c % k)] > 0.0)
                .count()
        })
        .sum()
}

fn prepare(bundle: &SequenceBundle, family: &dyn TimeFamily, alpha: f64) -> Result<(Vec<EmpiricalTransition>, usize)> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    if bundle.num_states() != family.num_states() {
        return Err(Error::Dimension(format!(
            "data have K={}, family has K={}",
            bundle.num_states(),
            family.num_states()
        )));
    }
    let slices = time_slices(bundle)?;
    if let Some(h) = family.horizon() {
        if h != slices.len() {
            return Err(Error::Dimension(format!("family covers {h} transitions, data have {}", slices.len())));
        }
    }
    let off = off_support(family, &slices);
    if off > 0 && alpha == 0.0 {
        return Err(Error::OutsideSupport { cells: off });
    }
    Ok((slices, off))
}

/// H_{n,α}(θ) = Σ_t of the stationary objective built from π̂(t) and p(t; θ).
pub fn nonstationary_objective(bundle: &SequenceBundle, family: &dyn TimeFamily, theta: &[f64], alpha: f64) -> Result<f64> {
    let (slices, _) = prepare(bundle, family, alpha)?;
    if theta.len() != family.dim() {
        return Err(Error::Dimension(format!("expected {} parameters, got {}", family.dim(), theta.len())));
    }
    Ok(Nonstationary { family, slices: &slices, alpha }.value(theta))
}

/// Gradient of `nonstationary_objective`.
pub fn nonstationary_gradient(
    bundle: &SequenceBundle,
    family: &dyn TimeFamily,
    theta: &[f64],
    alpha: f64,
) -> Result<Vec<f64>> {
    let (slices, _) = prepare(bundle, family, alpha)?;
    Ok(Nonstationary { family, slices: &slices, alpha }.gradient(theta))
}

/// Point estimate minimizing H_{n,α}; no variance is attached.
pub fn nonstationary_estimate(bundle: &SequenceBundle, family: &dyn TimeFamily, config: &DpdConfig) -> Result<DpdEstimate> {
    let (slices, _) = prepare(bundle, family, config.alpha)?;
    nonstationary_fit(family, &slices, config)
}

/// Minimizes H_{n,α} over given per-time estimates, one per transition.
pub fn nonstationary_fit(family: &dyn TimeFamily, slices: &[EmpiricalTransition], config: &DpdConfig) -> Result<DpdEstimate> {
    config.validate()?;
    let k = family.num_states();
    if slices.iter().any(|s| s.num_states() != k) {
        return Err(Error::Dimension(format!("every time slice must have K={k}")));
    }
    if let Some(h) = family.horizon() {
        if h != slices.len() {
            return Err(Error::Dimension(format!("family covers {h} transitions, data have {}", slices.len())));
        }
    }
    let off = off_support(family, slices);
    if off > 0 && config.alpha == 0.0 {
        return Err(Error::OutsideSupport { cells: off });
    }
    let mut est = minimize_objective(&Nonstationary { family, slices, alpha: config.alpha }, config)?;
    est.off_support_cells = off;
    Ok(est)
}
