//! Closed-form asymptotic variance of the binomial-walk MDPDE.
//!
//! Ψ_α = 4[1 − p_1o − p_Ko] V₁ and Ω_α = 4[1 − p_1o − p_Ko] V₂, so
//! Σ_α = [1 − p_1o − p_Ko]⁻¹ V₂ / (4 V₁²).

use crate::error::{Error, Result};
use crate::models::{binomial_walk, ParametricFamily};

fn check(theta: f64, alpha: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("theta must lie in (0,1), got {theta}")));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    Ok(())
}

pub fn example1_v1(theta: f64, alpha: f64) -> Result<f64> {
    check(theta, alpha)?;
    let (t, s, a) = (theta, 1.0 - theta, alpha);
    Ok(s.powf(2.0 * a) + t.powf(2.0 * a) + 2f64.powf(a - 1.0) * t.powf(a - 1.0) * s.powf(a - 1.0) * (1.0 - 2.0 * t).powi(2))
}

pub fn example1_v2(theta: f64, alpha: f64) -> Result<f64> {
    check(theta, alpha)?;
    let (t, s, a) = (theta, 1.0 - theta, alpha);
    let u = 1.0 - 2.0 * t;
    Ok(s.powf(4.0 * a) * t * (2.0 - t)
        + t.powf(4.0 * a) * (1.0 - t * t)
        + 2.0 * t.powf(2.0 * a + 1.0) * s.powf(2.0 * a + 1.0)
        + 2f64.powf(a + 1.0) * t.powf(a) * s.powf(3.0 * a + 1.0) * u
        - 2f64.powf(a + 1.0) * t.powf(3.0 * a + 1.0) * s.powf(a) * u
        + 2f64.powf(2.0 * a - 1.0) * t.powf(2.0 * a - 1.0) * s.powf(2.0 * a - 1.0) * u * u * (1.0 - 2.0 * t + 2.0 * t * t))
}

fn scaled_variance(theta: f64, alpha: f64) -> Result<f64> {
    let v1 = example1_v1(theta, alpha)?;
    Ok(example1_v2(theta, alpha)? / (4.0 * v1 * v1))
}

/// Σ_α of √T θ̂_α for the binomial walk on K states at the model.
pub fn example1_sigma(theta: f64, alpha: f64, k: usize) -> Result<f64> {
    let family = binomial_walk(k)?;
    let pi = family.stationary(&[theta]).expect("closed form")?;
    Ok(scaled_variance(theta, alpha)? / (1.0 - pi[0] - pi[k - 1]))
}

/// Asymptotic relative efficiency (percent) of the MDPDE at α against the
/// MLE. The stationary factor cancels, so the result is free of K.
pub fn are_example1(theta: f64, alpha: f64) -> Result<f64> {
    Ok(100.0 * scaled_variance(theta, 0.0)? / scaled_variance(theta, alpha)?)
}
