//! Order-r chains, either fitted directly on (r+1)-gram frequencies or
//! re-expressed as first-order chains on K^r augmented states with
//! p_{(i₁…i_r)(i₂…i_{r+1})} = p_{i₁…i_{r+1}}.

use nalgebra::{DMatrix, DVector};

use crate::chain::{count_transitions, simulate_chain, EmpiricalTransition, StateSequence};
use crate::dpd::solver::Objective;
use crate::dpd::{estimate, minimize_objective, DpdConfig, DpdEstimate};
use crate::error::{Error, Result};
use crate::models::ParametricFamily;

/// Largest augmented state space handled; the augmented route stores dense
/// K^r × K^r matrices.
pub const MAX_AUGMENTED_STATES: usize = 4096;

/// Row-major codec between r-tuples over K states and 0..K^r.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HigherOrderSpec {
    pub order: usize,
    pub k: usize,
    pub augmented: usize,
}

impl HigherOrderSpec {
    pub fn new(k: usize, order: usize) -> Result<Self> {
        if order == 0 || k == 0 {
            return Err(Error::InvalidArgument(format!("need K >= 1 and order >= 1, got K={k}, r={order}")));
        }
        let augmented = u32::try_from(order)
            .ok()
            .and_then(|r| k.checked_pow(r))
            .filter(|&n| n <= MAX_AUGMENTED_STATES)
            .ok_or_else(|| {
                Error::Unsupported(format!("K^r for K={k}, r={order} exceeds {MAX_AUGMENTED_STATES} states"))
            })?;
        Ok(Self { order, k, augmented })
    }

    pub fn encode(&self, tuple: &[usize]) -> usize {
        debug_assert_eq!(tuple.len(), self.order);
        tuple.iter().fold(0, |code, &s| code * self.k + s)
    }

    pub fn decode(&self, mut code: usize) -> Vec<usize> {
        let mut out = vec![0; self.order];
        for slot in out.iter_mut().rev() {
            *slot = code % self.k;
            code /= self.k;
        }
        out
    }

    /// Augmented state reached from history `code` by moving to `next`.
    pub fn shift(&self, code: usize, next: usize) -> usize {
        (code * self.k + next) % self.augmented
    }
}

/// Encodes each window (X_{t−r+1}, …, X_t) as one augmented state.
pub fn augment_order(seq: &StateSequence, r: usize) -> Result<(StateSequence, HigherOrderSpec)> {
    let spec = HigherOrderSpec::new(seq.num_states(), r)?;
    if seq.len() < r + 1 {
        return Err(Error::InvalidArgument(format!(
            "a sequence of length {} has no transitions of order {r}",
            seq.len()
        )));
    }
    let states = seq.states().windows(r).map(|w| spec.encode(w)).collect();
    Ok((StateSequence::new(states, spec.augmented)?, spec))
}

/// Dense tallies of the n-grams of `seq`, indexed row-major.
pub fn ngram_counts(seq: &StateSequence, n: usize) -> Result<Vec<u64>> {
    let spec = HigherOrderSpec::new(seq.num_states(), n)?;
    if seq.len() < n {
        return Err(Error::InvalidArgument(format!("a sequence of length {} has no {n}-grams", seq.len())));
    }
    let mut counts = vec![0u64; spec.augmented];
    for w in seq.states().windows(n) {
        counts[spec.encode(w)] += 1;
    }
    Ok(counts)
}

/// A parametric order-r chain: p(next | history) over a fixed support of
/// (history code, next state) pairs listed in increasing order.
pub trait HigherOrderFamily: Send + Sync {
    fn name(&self) -> String;
    fn base_states(&self) -> usize;
    fn order(&self) -> usize;
    fn dim(&self) -> usize;
    fn bounds(&self) -> &[(f64, f64)];
    fn support(&self) -> &[(usize, usize)];
    fn support_probs(&self, theta: &[f64]) -> Result<Vec<f64>>;
    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>>;
}

/// Plain first-order family seen as an order-1 chain.
pub struct FirstOrder<'a>(pub &'a dyn ParametricFamily);

impl HigherOrderFamily for FirstOrder<'_> {
    fn name(&self) -> String {
        self.0.name()
    }
    fn base_states(&self) -> usize {
        self.0.num_states()
    }
    fn order(&self) -> usize {
        1
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
    fn support_probs(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.0.support_probs(theta)
    }
    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.0.jacobian(theta)
    }
}

/// The first-order representation of an order-r family on K^r states.
pub struct AugmentedFamily<'a> {
    inner: &'a dyn HigherOrderFamily,
    spec: HigherOrderSpec,
    support: Vec<(usize, usize)>,
}

impl<'a> AugmentedFamily<'a> {
    pub fn new(inner: &'a dyn HigherOrderFamily) -> Result<Self> {
        let spec = HigherOrderSpec::new(inner.base_states(), inner.order())?;
        let support = inner.support().iter().map(|&(h, l)| (h, spec.shift(h, l))).collect();
        Ok(Self { inner, spec, support })
    }

    pub fn spec(&self) -> HigherOrderSpec {
        self.spec
    }
}

impl ParametricFamily for AugmentedFamily<'_> {
    fn name(&self) -> String {
        format!("{} (augmented, r={})", self.inner.name(), self.spec.order)
    }
    fn num_states(&self) -> usize {
        self.spec.augmented
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn bounds(&self) -> &[(f64, f64)] {
        self.inner.bounds()
    }
    fn support(&self) -> &[(usize, usize)] {
        &self.support
    }
    fn support_probs(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.inner.support_probs(theta)
    }
    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.inner.jacobian(theta)
    }
}

/// Empirical order-r transition law: π̂(l | h) and the history visit
/// frequencies used as weights.
#[derive(Debug, Clone, PartialEq)]
pub struct HigherOrderEmpirical {
    pub spec: HigherOrderSpec,
    /// π̂(l | h) at `h * K + l`; rows of unvisited histories are zero.
    pub pi_hat: Vec<f64>,
    pub weights: Vec<f64>,
}

impl HigherOrderEmpirical {
    pub fn from_sequence(seq: &StateSequence, r: usize) -> Result<Self> {
        let spec = HigherOrderSpec::new(seq.num_states(), r)?;
        if seq.len() < r + 1 {
            return Err(Error::NoTransitions);
        }
        let k = spec.k;
        let grams = ngram_counts(seq, r + 1)?;
        let total = (seq.len() - r) as f64;
        let mut pi_hat = vec![0.0; grams.len()];
        let mut weights = vec![0.0; spec.augmented];
        for h in 0..spec.augmented {
            let row = &grams[h * k..(h + 1) * k];
            let n: u64 = row.iter().sum();
            if n == 0 {
                continue;
            }
            weights[h] = n as f64 / total;
            for (l, &c) in row.iter().enumerate() {
                pi_hat[h * k + l] = c as f64 / n as f64;
            }
        }
        Ok(Self { spec, pi_hat, weights })
    }

    /// A known conditional law and history weights, used as "data".
    pub fn from_population(spec: HigherOrderSpec, pi_hat: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if pi_hat.len() != spec.augmented * spec.k || weights.len() != spec.augmented {
            return Err(Error::Dimension("population law does not match K^r".into()));
        }
        Ok(Self { spec, pi_hat, weights })
    }

    fn off_support(&self, family: &dyn HigherOrderFamily) -> usize {
        let k = self.spec.k;
        let mut on = vec![false; self.pi_hat.len()];
        for &(h, l) in family.support() {
            on[h * k + l] = true;
        }
        (0..self.pi_hat.len())
            .filter(|&c| !on[c] && self.pi_hat[c] > 0.0 && self.weights[c / k] > 0.0)
            .count()
    }
}

fn check_family(family: &dyn HigherOrderFamily, spec: &HigherOrderSpec) -> Result<()> {
    if family.base_states() != spec.k || family.order() != spec.order {
        return Err(Error::Dimension(format!(
            "family is order {} on K={}, data are order {} on K={}",
            family.order(),
            family.base_states(),
            spec.order,
            spec.k
        )));
    }
    Ok(())
}

/// H⁽ʳ⁾_α(θ) evaluated straight from the (r+1)-gram frequencies.
pub fn higher_order_objective(
    family: &dyn HigherOrderFamily,
    emp: &HigherOrderEmpirical,
    theta: &[f64],
    alpha: f64,
) -> Result<f64> {
    check_family(family, &emp.spec)?;
    if alpha < 0.0 {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    if alpha == 0.0 {
        let off = emp.off_support(family);
        if off > 0 {
            return Err(Error::OutsideSupport { cells: off });
        }
    }
    Ok(Direct { family, emp, alpha }.value(theta))
}

struct Direct<'a> {
    family: &'a dyn HigherOrderFamily,
    emp: &'a HigherOrderEmpirical,
    alpha: f64,
}

impl Objective for Direct<'_> {
    fn dim(&self) -> usize {
        self.family.dim()
    }

    fn bounds(&self) -> &[(f64, f64)] {
        self.family.bounds()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let Ok(probs) = self.family.support_probs(theta) else {
            return f64::INFINITY;
        };
        let k = self.emp.spec.k;
        let a = self.alpha;
        let mut total = 0.0;
        for (&(h, l), &p) in self.family.support().iter().zip(&probs) {
            let w = self.emp.weights[h];
            if w <= 0.0 {
                continue;
            }
            let obs = self.emp.pi_hat[h * k + l];
            if a == 0.0 {
                if obs > 0.0 {
                    if p <= 0.0 {
                        return f64::INFINITY;
                    }
                    total -= w * obs * p.ln();
                }
            } else {
                let pa = p.powf(a);
                total += w * (pa * p - (1.0 + 1.0 / a) * pa * obs);
            }
        }
        if a == 0.0 {
            total
        } else {
            total / (1.0 + a)
        }
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let (Ok(probs), Ok(jac)) = (self.family.support_probs(theta), self.family.jacobian(theta)) else {
            return vec![f64::NAN; d];
        };
        let k = self.emp.spec.k;
        let mut g = vec![0.0; d];
        for (r, (&(h, l), &p)) in self.family.support().iter().zip(&probs).enumerate() {
            let w = self.emp.weights[h];
            if w <= 0.0 || p <= 0.0 {
                continue;
            }
            let factor = w * p.powf(self.alpha - 1.0) * (p - self.emp.pi_hat[h * k + l]);
            for (u, gu) in g.iter_mut().enumerate() {
                *gu += jac[(r, u)] * factor;
            }
        }
        g
    }
}

/// Minimizes H⁽ʳ⁾_α directly over the (r+1)-gram frequencies of `emp`.
pub fn higher_order_fit(
    family: &dyn HigherOrderFamily,
    emp: &HigherOrderEmpirical,
    config: &DpdConfig,
) -> Result<DpdEstimate> {
    check_family(family, &emp.spec)?;
    let off = emp.off_support(family);
    if off > 0 && config.alpha == 0.0 {
        return Err(Error::OutsideSupport { cells: off });
    }
    let obj = Direct { family, emp, alpha: config.alpha };
    let mut est = minimize_objective(&obj, config)?;
    est.off_support_cells = off;
    debug_assert!({
        let aug = AugmentedFamily::new(family)?;
        let first = emp.to_augmented()?;
        let other = crate::dpd::objective(&aug, &first, &est.theta_hat, config.alpha)?;
        (other - est.objective_value).abs() <= 1e-10 * est.objective_value.abs().max(1.0)
    });
    Ok(est)
}

impl HigherOrderEmpirical {
    /// The same law written as a first-order chain on K^r states.
    pub fn to_augmented(&self) -> Result<EmpiricalTransition> {
        let spec = self.spec;
        let m = spec.augmented;
        let mut pi = DMatrix::zeros(m, m);
        for h in 0..m {
            if self.weights[h] <= 0.0 {
                continue;
            }
            for l in 0..spec.k {
                pi[(h, spec.shift(h, l))] = self.pi_hat[h * spec.k + l];
            }
        }
        let visited = self.weights.iter().map(|&w| w > 0.0).collect();
        Ok(EmpiricalTransition { pi_hat: pi, pi_init_hat: DVector::from_vec(self.weights.clone()), visited, total: f64::INFINITY })
    }
}

/// MDPDE of an order-r family from one sequence, computed on the direct
/// H⁽ʳ⁾ objective.
pub fn higher_order_estimate(
    seq: &StateSequence,
    r: usize,
    family: &dyn HigherOrderFamily,
    config: &DpdConfig,
) -> Result<DpdEstimate> {
    let emp = HigherOrderEmpirical::from_sequence(seq, r)?;
    higher_order_fit(family, &emp, config)
}

/// The same estimate through `augment_order` and the first-order estimator.
pub fn augmented_estimate(
    seq: &StateSequence,
    r: usize,
    family: &dyn HigherOrderFamily,
    config: &DpdConfig,
) -> Result<DpdEstimate> {
    let (aug, spec) = augment_order(seq, r)?;
    check_family(family, &spec)?;
    let af = AugmentedFamily::new(family)?;
    let emp = count_transitions(&aug)?.empirical()?;
    estimate(&af, &emp, config)
}

/// Simulates `steps` further states of an order-r family after `history`.
pub fn simulate_higher_order(
    family: &dyn HigherOrderFamily,
    theta: &[f64],
    history: &[usize],
    steps: usize,
    seed: u64,
) -> Result<StateSequence> {
    let af = AugmentedFamily::new(family)?;
    let spec = af.spec();
    if history.len() != spec.order || history.iter().any(|&s| s >= spec.k) {
        return Err(Error::InvalidArgument(format!("history must hold {} states below K={}", spec.order, spec.k)));
    }
    let p = af.matrix(theta)?;
    let aug = simulate_chain(&p, spec.encode(history), steps, seed)?;
    let mut states = history.to_vec();
    states.extend(aug.states()[1..].iter().map(|&c| c % spec.k));
    StateSequence::new(states, spec.k)
}

/// Order-2 walk on K states whose next state is Binomial(K − 1, q) with q
/// depending on the last move: θ₁ after a step up, θ₂ after a step down and
/// 1/2 after staying put.
pub struct MomentumBinomial {
    k: usize,
    bounds: [(f64, f64); 2],
    support: Vec<(usize, usize)>,
    binom: Vec<f64>,
}

impl MomentumBinomial {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("momentum walk needs K >= 2, got {k}")));
        }
        let spec = HigherOrderSpec::new(k, 2)?;
        let support = (0..spec.augmented).flat_map(|h| (0..k).map(move |l| (h, l))).collect();
        let n = k - 1;
        let mut binom = vec![1.0; k];
        for l in 1..k {
            binom[l] = binom[l - 1] * (n + 1 - l) as f64 / l as f64;
        }
        Ok(Self { k, bounds: [(0.0, 1.0); 2], support, binom })
    }

    /// Which coordinate drives history (i, j), if any.
    fn driver(&self, h: usize) -> Option<usize> {
        let (i, j) = (h / self.k, h % self.k);
        match j.cmp(&i) {
            std::cmp::Ordering::Greater => Some(0),
            std::cmp::Ordering::Less => Some(1),
            std::cmp::Ordering::Equal => None,
        }
    }

    fn q(&self, h: usize, theta: &[f64]) -> f64 {
        self.driver(h).map_or(0.5, |u| theta[u])
    }

    fn pmf(&self, l: usize, q: f64) -> f64 {
        let n = (self.k - 1) as i32;
        let l = l as i32;
        self.binom[l as usize] * q.powi(l) * (1.0 - q).powi(n - l)
    }

    fn dpmf(&self, l: usize, q: f64) -> f64 {
        let n = (self.k - 1) as i32;
        let l = l as i32;
        let up = if l > 0 { l as f64 * q.powi(l - 1) * (1.0 - q).powi(n - l) } else { 0.0 };
        let down = if l < n { (n - l) as f64 * q.powi(l) * (1.0 - q).powi(n - l - 1) } else { 0.0 };
        self.binom[l as usize] * (up - down)
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != 2 {
            return Err(Error::Dimension(format!("momentum walk expects 2 parameters, got {}", theta.len())));
        }
        for (index, &value) in theta.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::ParameterOutOfBounds { index, value, lo: 0.0, hi: 1.0 });
            }
        }
        Ok(())
    }
}

impl HigherOrderFamily for MomentumBinomial {
    fn name(&self) -> String {
        format!("momentum-binomial:{}", self.k)
    }
    fn base_states(&self) -> usize {
        self.k
    }
    fn order(&self) -> usize {
        2
    }
    fn dim(&self) -> usize {
        2
    }
    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
    fn support(&self) -> &[(usize, usize)] {
        &self.support
    }
    fn support_probs(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        Ok(self.support.iter().map(|&(h, l)| self.pmf(l, self.q(h, theta))).collect())
    }
    fn jacobian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check(theta)?;
        let mut jac = DMatrix::zeros(self.support.len(), 2);
        for (r, &(h, l)) in self.support.iter().enumerate() {
            if let Some(u) = self.driver(h) {
                jac[(r, u)] = self.dpmf(l, theta[u]);
            }
        }
        Ok(jac)
    }
}
