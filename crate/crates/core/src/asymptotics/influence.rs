//! Influence function of the MDPDE functional under row-wise point
//! contamination, and the sensitivity γ_α = sup_t ‖IF(t)‖₂.
//!
//! Row i of Π is contaminated towards the point mass at column t_i with the
//! stationary weights held fixed. Differentiating U_α(θ, Π_ε) = 0 at ε = 0
//! gives IF(t) = Ψ_α⁻¹ Σ_i π_io [ψ_{it_i} p_{it_i}^α − Σ_j ψ_ij p_ij^α π_ij].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model_matrices;
use crate::error::{Error, Result};
use crate::models::{score_matrix, support_by_row, ParametricFamily};

/// Largest number of contamination maps enumerated exhaustively.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensitivityMethod {
    /// Every contamination map evaluated; the supremum is exact.
    Exhaustive,
    /// Scalar θ: per-row extremes of the bracket, both signs; exact.
    PerRowExact,
    /// Coordinate ascent over rows from several starts; a lower bound.
    PerRowHeuristic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceReport {
    /// Contamination target column per row (0-based).
    pub t: Vec<usize>,
    pub if_vector: Vec<f64>,
    pub sensitivity: f64,
    pub sensitivity_method: SensitivityMethod,
}

/// IF(t) = base + Σ_i options[i][t_i] in parameter space.
struct Parts {
    base: DVector<f64>,
    /// Rows with weight: (row, [(column, Ψ⁻¹ π_io ψ p^α)]).
    rows: Vec<(usize, Vec<(usize, DVector<f64>)>)>,
    k: usize,
}

fn parts(
    family: &dyn ParametricFamily,
    theta: &[f64],
    pi: &DMatrix<f64>,
    pi_init: &DVector<f64>,
    alpha: f64,
) -> Result<Parts> {
    let report = model_matrices(family, theta, pi, pi_init, alpha)?;
    let psi_inv = report
        .psi
        .try_inverse()
        .ok_or_else(|| Error::SingularPsi("Ψ could not be inverted".into()))?;
    let t = family.clamp_interior(theta);
    let (probs, scores) = score_matrix(family, &t)?;
    let d = family.dim();
    let mut base = DVector::zeros(d);
    let mut rows = Vec::new();
    for (i, cells) in support_by_row(family).into_iter().enumerate() {
        let w = pi_init[i];
        if w <= 0.0 || cells.is_empty() {
            continue;
        }
        let mut opts = Vec::with_capacity(cells.len());
        for (r, j) in cells {
            let a = scores.row(r).transpose() * (w * probs[r].powf(alpha));
            base -= &a * pi[(i, j)];
            opts.push((j, &psi_inv * a));
        }
        rows.push((i, opts));
    }
    Ok(Parts { base: &psi_inv * base, rows, k: family.num_states() })
}

impl Parts {
    fn default_t(&self, family: &dyn ParametricFamily) -> Vec<usize> {
        let mut t: Vec<usize> = (0..self.k).collect();
        for (i, cells) in support_by_row(family).into_iter().enumerate() {
            if let Some(&(_, j)) = cells.first() {
                t[i] = j;
            }
        }
        t
    }
}

/// IF of the MDPDE functional at (Π, π_o) for contamination map `t`
/// (0-based target column per row).
pub fn influence_function(
    family: &dyn ParametricFamily,
    theta_pi: &[f64],
    pi: &DMatrix<f64>,
    pi_init: &DVector<f64>,
    t: &[usize],
    alpha: f64,
) -> Result<Vec<f64>> {
    let k = family.num_states();
    if t.len() != k {
        return Err(Error::Dimension(format!("contamination map has {} entries, expected K={k}", t.len())));
    }
    let parts = parts(family, theta_pi, pi, pi_init, alpha)?;
    let mut v = parts.base.clone();
    for (i, opts) in &parts.rows {
        let target = t[*i];
        let (_, a) = opts.iter().find(|(j, _)| *j == target).ok_or_else(|| {
            Error::InvalidArgument(format!("target {} is outside the support of row {}", target + 1, i + 1))
        })?;
        v += a;
    }
    Ok(v.iter().copied().collect())
}

/// γ_α = sup over contamination maps of ‖IF(t)‖₂, with the maximizing map.
pub fn sensitivity(
    family: &dyn ParametricFamily,
    theta_pi: &[f64],
    pi: &DMatrix<f64>,
    pi_init: &DVector<f64>,
    alpha: f64,
) -> Result<InfluenceReport> {
    let parts = parts(family, theta_pi, pi, pi_init, alpha)?;
    let combos = parts
        .rows
        .iter()
        .try_fold(1u128, |acc, (_, o)| acc.checked_mul(o.len() as u128).filter(|&n| n <= EXHAUSTIVE_LIMIT));
    let (choice, method) = match combos {
        Some(_) => (exhaustive(&parts), SensitivityMethod::Exhaustive),
        None if family.dim() == 1 => (scalar_extremes(&parts), SensitivityMethod::PerRowExact),
        None => (coordinate_ascent(&parts), SensitivityMethod::PerRowHeuristic),
    };
    let v = evaluate(&parts, &choice);
    let mut t = parts.default_t(family);
    for ((i, opts), &c) in parts.rows.iter().zip(&choice) {
        t[*i] = opts[c].0;
    }
    Ok(InfluenceReport {
        t,
        sensitivity: v.norm(),
        if_vector: v.iter().copied().collect(),
        sensitivity_method: method,
    })
}

fn evaluate(parts: &Parts, choice: &[usize]) -> DVector<f64> {
    let mut v = parts.base.clone();
    for ((_, opts), &c) in parts.rows.iter().zip(choice) {
        v += &opts[c].1;
    }
    v
}

fn exhaustive(parts: &Parts) -> Vec<usize> {
    let n = parts.rows.len();
    let mut choice = vec![0usize; n];
    let mut best = choice.clone();
    let mut best_norm = evaluate(parts, &choice).norm_squared();
    if n == 0 {
        return best;
    }
    // odometer over the choices with an incrementally updated sum
    let mut v = evaluate(parts, &choice);
    loop {
        let mut pos = 0;
        loop {
            let opts = &parts.rows[pos].1;
            v -= &opts[choice[pos]].1;
            choice[pos] += 1;
            if choice[pos] < opts.len() {
                v += &opts[choice[pos]].1;
                break;
            }
            choice[pos] = 0;
            v += &opts[0].1;
            pos += 1;
            if pos == n {
                return best;
            }
        }
        let norm = v.norm_squared();
        if norm > best_norm {
            best_norm = norm;
            best.copy_from_slice(&choice);
        }
    }
}

/// For scalar θ the IF is a sum of per-row terms, so the supremum of |IF|
/// takes every row's largest term or every row's smallest.
fn scalar_extremes(parts: &Parts) -> Vec<usize> {
    let pick = |better: fn(f64, f64) -> bool| -> Vec<usize> {
        parts
            .rows
            .iter()
            .map(|(_, opts)| {
                let mut best = 0;
                for (c, (_, a)) in opts.iter().enumerate() {
                    if better(a[0], opts[best].1[0]) {
                        best = c;
                    }
                }
                best
            })
            .collect()
    };
    let hi = pick(|a, b| a > b);
    let lo = pick(|a, b| a < b);
    if evaluate(parts, &hi).norm() >= evaluate(parts, &lo).norm() {
        hi
    } else {
        lo
    }
}

fn coordinate_ascent(parts: &Parts) -> Vec<usize> {
    let d = parts.base.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for u in 0..d {
        for sign in [1.0, -1.0] {
            let mut choice: Vec<usize> = parts
                .rows
                .iter()
                .map(|(_, opts)| {
                    (0..opts.len())
                        .max_by(|&a, &b| (sign * opts[a].1[u]).total_cmp(&(sign * opts[b].1[u])))
                        .unwrap_or(0)
                })
                .collect();
            let mut v = evaluate(parts, &choice);
            loop {
                let mut improved = false;
                for (r, (_, opts)) in parts.rows.iter().enumerate() {
                    let without = &v - &opts[choice[r]].1;
                    let mut best_c = choice[r];
                    let mut best_n = v.norm_squared();
                    for (c, (_, a)) in opts.iter().enumerate() {
                        let n = (&without + a).norm_squared();
                        if n > best_n * (1.0 + 1e-14) {
                            best_n = n;
                            best_c = c;
                        }
                    }
                    if best_c != choice[r] {
                        choice[r] = best_c;
                        v = without + &opts[best_c].1;
                        improved = true;
                    }
                }
                if !improved {
                    break;
                }
            }
            let n = v.norm_squared();
            if best.as_ref().is_none_or(|(b, _)| n > *b) {
                best = Some((n, choice));
            }
        }
    }
    best.map(|(_, c)| c).unwrap_or_default()
}

#[cfg(test)]
pub(crate) fn heuristic_for_tests(
    family: &dyn ParametricFamily,
    theta: &[f64],
    pi: &DMatrix<f64>,
    pi_init: &DVector<f64>,
    alpha: f64,
) -> Result<f64> {
    let parts = parts(family, theta, pi, pi_init, alpha)?;
    let c = if family.dim() == 1 { scalar_extremes(&parts) } else { coordinate_ascent(&parts) };
    Ok(evaluate(&parts, &c).norm())
}
