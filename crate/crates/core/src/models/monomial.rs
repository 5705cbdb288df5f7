use nalgebra::{DMatrix, DVector};

use super::ParametricFamily;
use crate::chain::{stationary_distribution, TransitionCounts};
use crate::error::{Error, Result};

/// One support cell p_ij(θ) = coef · θ_u^a · (1 − θ_u)^b.
///
/// `param = None` marks a constant cell (probability `coef`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
    pub coef: f64,
    pub param: Option<usize>,
    pub a: i32,
    pub b: i32,
}

impl Cell {
    pub fn constant(i: usize, j: usize, coef: f64) -> Self {
        Self { i, j, coef, param: None, a: 0, b: 0 }
    }

    pub fn mono(i: usize, j: usize, coef: f64, u: usize, a: i32, b: i32) -> Self {
        Self { i, j, coef, param: Some(u), a, b }
    }

    fn value(&self, theta: &[f64]) -> f64 {
        match self.param {
            None => self.coef,
            Some(u) => {
                let t = theta[u];
                self.coef * pw(t, self.a) * pw(1.0 - t, self.b)
            }
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        let da = if self.a == 0 { 0.0 } else { self.a as f64 * pw(t, self.a - 1) * pw(1.0 - t, self.b) };
        let db = if self.b == 0 { 0.0 } else { self.b as f64 * pw(t, self.a) * pw(1.0 - t, self.b - 1) };
        self.coef * (da - db)
    }

    fn dscore(&self, t: f64) -> f64 {
        -(self.a as f64) / (t * t) - (self.b as f64) / ((1.0 - t) * (1.0 - t))
    }
}

fn pw(x: f64, n: i32) -> f64 {
    if n == 0 {
        1.0
    } else {
        x.powi(n)
    }
}

/// Closed forms available for the built-in families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    BinomialWalk,
    MultiBinomialWalk,
    Greenwood,
    ReflectingWalk,
    CreditClubbed,
    Custom,
}

/// A family whose cells are all single binomial-type monomials.
///
/// Every built-in family has this shape, which gives exact Jacobians and
/// exact ∂ψ/∂θ.
#[derive(Debug, Clone)]
pub struct MonomialFamily {
    name: String,
    k: usize,
    bounds: Vec<(f64, f64)>,
    cells: Vec<Cell>,
    support: Vec<(usize, usize)>,
    separable: bool,
    row_param: Vec<Option<usize>>,
    kind: FamilyKind,
}

impl MonomialFamily {
    /// Cells are sorted row-major; each (i, j) may appear once.
    pub fn new(
        name: impl Into<String>,
        k: usize,
        bounds: Vec<(f64, f64)>,
        mut cells: Vec<Cell>,
        kind: FamilyKind,
    ) -> Result<Self> {
        cells.sort_by_key(|c| (c.i, c.j));
        for w in cells.windows(2) {
            if (w[0].i, w[0].j) == (w[1].i, w[1].j) {
                return Err(Error::InvalidArgument(format!("duplicate cell ({}, {})", w[0].i, w[0].j)));
            }
        }
        let d = bounds.len();
        let mut row_param = vec![None; k];
        let mut separable = true;
        for c in &cells {
            if c.i >= k || c.j >= k {
                return Err(Error::Dimension(format!("cell ({}, {}) outside K={k}", c.i, c.j)));
            }
            if let Some(u) = c.param {
                if u >= d {
                    return Err(Error::Dimension(format!("cell ({}, {}) uses coordinate {u} of {d}", c.i, c.j)));
                }
                match row_param[c.i] {
                    None => row_param[c.i] = Some(u),
                    Some(v) if v != u => separable = false,
                    _ => {}
                }
            }
        }
        let support = cells.iter().map(|c| (c.i, c.j)).collect();
        Ok(Self { name: name.into(), k, bounds, cells, support, separable, row_param, kind })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    fn stationary_closed(&self, theta: &[f64]) -> Result<DVector<f64>> {
        self.check_theta(theta)?;
        let k = self.k;
        let interior = theta.iter().all(|&t| t > 0.0 && t < 1.0);
        if !interior {
            return Ok(stationary_distribution(&self.matrix(theta)?)?.pi);
        }
        let weights: Vec<f64> = match self.kind {
            FamilyKind::BinomialWalk => {
                let t = theta[0];
                if (t - 0.5).abs() < 1e-12 {
                    walk_weights(&vec![t; k.saturating_sub(2)])
                } else {
                    let s = 1.0 - t;
                    let denom = 2.0 * (s.powi(2 * k as i32 - 1) - t.powi(2 * k as i32 - 1));
                    let p1 = s.powi(2 * (k as i32 - 1)) * (1.0 - 2.0 * t) / denom;
                    (1..=k as i32)
                        .map(|i| match i {
                            1 => p1,
                            i if i == k as i32 => p1 * t.powi(2 * (i - 2)) / s.powi(2 * (i - 2)),
                            i => p1 * t.powi(2 * (i - 2)) / s.powi(2 * (i - 1)),
                        })
                        .collect()
                }
            }
            FamilyKind::MultiBinomialWalk => walk_weights(theta),
            FamilyKind::ReflectingWalk => {
                let t = theta[0];
                let s = 1.0 - t;
                (1..=k as i32)
                    .map(|i| match i {
                        1 => 1.0,
                        i if i == k as i32 => t.powi(i - 2) * s.powi(2 - i),
                        i => t.powi(i - 2) * s.powi(1 - i),
                    })
                    .collect()
            }
            _ => return Err(Error::Unsupported(format!("{} has no closed-form stationary law", self.name))),
        };
        let total: f64 = weights.iter().sum();
        Ok(DVector::from_iterator(k, weights.into_iter().map(|w| w / total)))
    }

    fn mle_closed(&self, counts: &TransitionCounts) -> Result<Vec<f64>> {
        if counts.num_states() != self.k {
            return Err(Error::Dimension(format!("counts have K={}, family has K={}", counts.num_states(), self.k)));
        }
        let k = self.k;
        let nu = |i: usize, j: usize| counts.get(i, j) as f64;
        let ratio = |num: f64, den: f64| {
            if den > 0.0 {
                Ok(num / den)
            } else {
                Err(Error::NoTransitions)
            }
        };
        match self.kind {
            FamilyKind::BinomialWalk => {
                let (mut num, mut den) = (0.0, 0.0);
                for i in 1..k - 1 {
                    num += nu(i, i + 1) + nu(i, i) / 2.0;
                    den += counts.row_total(i) as f64;
                }
                Ok(vec![ratio(num, den)?])
            }
            FamilyKind::ReflectingWalk => {
                let (mut num, mut den) = (0.0, 0.0);
                for i in 1..k - 1 {
                    num += nu(i, i + 1);
                    den += counts.row_total(i) as f64;
                }
                Ok(vec![ratio(num, den)?])
            }
            FamilyKind::Greenwood => {
                let (mut num, mut den) = (0.0, 0.0);
                for i in 1..k {
                    for j in 0..=i {
                        num += (i - j) as f64 * nu(i, j);
                        den += i as f64 * nu(i, j);
                    }
                }
                Ok(vec![ratio(num, den)?])
            }
            // p_{i,i+1} = θ², p_ii = 2θ(1−θ) for the walk; the credit rows put
            // θ² on the diagonal and 2θ(1−θ) one state down.
            FamilyKind::MultiBinomialWalk => (1..k - 1)
                .map(|i| ratio(2.0 * nu(i, i + 1) + nu(i, i), 2.0 * counts.row_total(i) as f64))
                .collect(),
            FamilyKind::CreditClubbed => (1..k - 1)
                .map(|i| ratio(2.0 * nu(i, i) + nu(i, i + 1), 2.0 * counts.row_total(i) as f64))
                .collect(),
            FamilyKind::Custom => Err(Error::Unsupported(format!("{} has no closed-form MLE", self.name))),
        }
    }
}

/// Detailed-balance weights for a birth-death walk with Bin(2, θ_i) rows,
/// θ_1 = 1 and θ_K = 0 at the reflecting ends.
fn walk_weights(inner: &[f64]) -> Vec<f64> {
    let k = inner.len() + 2;
    let th = |i: usize| -> f64 {
        if i == 0 {
            1.0
        } else if i == k - 1 {
            0.0
        } else {
            inner[i - 1]
        }
    };
    let mut w = vec![1.0; k];
    for i in 1..k {
        let up = th(i - 1).powi(2);
        let down = (1.0 - th(i)).powi(2);
        w[i] = w[i - 1] * up / down;
    }
    w
}

impl ParametricFamily for MonomialFamily {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn num_states(&self) -> usize {
        self.k
    }

    fn dim(&self) -> usize {
        self.bounds.len()
    }

    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn support(&self) -> &[(usize, usize)] {
        &self.support
    }

    fn support_probs(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        Ok(self.cells.iter().map(|c| c.value(theta)).collect())
    }

    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        let t = self.clamp_interior(theta);
        let mut j = DMatrix::zeros(self.cells.len(), self.dim());
        for (r, c) in self.cells.iter().enumerate() {
            if let Some(u) = c.param {
                j[(r, u)] = c.derivative(t[u]);
            }
        }
        Ok(j)
    }

    fn log_hessian(&self, theta: &[f64]) -> Option<Result<Vec<DMatrix<f64>>>> {
        if let Err(e) = self.check_theta(theta) {
            return Some(Err(e));
        }
        let t = self.clamp_interior(theta);
        let d = self.dim();
        Some(Ok(self
            .cells
            .iter()
            .map(|c| {
                let mut m = DMatrix::zeros(d, d);
                if let Some(u) = c.param {
                    m[(u, u)] = c.dscore(t[u]);
                }
                m
            })
            .collect()))
    }

    fn stationary(&self, theta: &[f64]) -> Option<Result<DVector<f64>>> {
        match self.kind {
            FamilyKind::BinomialWalk | FamilyKind::MultiBinomialWalk | FamilyKind::ReflectingWalk => {
                Some(self.stationary_closed(theta))
            }
            _ => None,
        }
    }

    fn closed_form_mle(&self, counts: &TransitionCounts) -> Option<Result<Vec<f64>>> {
        match self.kind {
            FamilyKind::Custom => None,
            _ => Some(self.mle_closed(counts)),
        }
    }

    fn separable(&self) -> bool {
        self.separable
    }

    fn row_parameter(&self, row: usize) -> Option<usize> {
        if self.separable {
            self.row_param.get(row).copied().flatten()
        } else {
            None
        }
    }
}
