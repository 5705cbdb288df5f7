//! State sequences, transition counting, empirical transition estimates,
//! simulation, contamination and stationary laws.
//!
//! States are stored 0-based. The text format and the `*_one_based`
//! helpers use the conventional 1-based labels.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, ChainRng};

const ROW_SUM_TOL: f64 = 1e-10;

/// An observed path X_0, ..., X_T over states {0, ..., k-1}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSequence {
    states: Vec<usize>,
    k: usize,
}

impl StateSequence {
    pub fn new(states: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("state count must be positive".into()));
        }
        if let Some((position, &state)) = states.iter().enumerate().find(|(_, &s)| s >= k) {
            return Err(Error::StateOutOfRange { state: state + 1, position, k });
        }
        Ok(Self { states, k })
    }

    /// Builds from 1-based labels. When `k` is `None` it is the largest label.
    pub fn from_one_based(labels: &[usize], k: Option<usize>) -> Result<Self> {
        let k = k.unwrap_or_else(|| labels.iter().copied().max().unwrap_or(0));
        if let Some((position, &state)) = labels.iter().enumerate().find(|(_, &s)| s == 0 || s > k) {
            return Err(Error::StateOutOfRange { state, position, k });
        }
        Self::new(labels.iter().map(|s| s - 1).collect(), k)
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.states.iter().map(|s| s + 1).collect()
    }

    pub fn num_states(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Number of transitions, `len - 1`.
    pub fn transitions(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    /// Parses the text format: whitespace separated 1-based labels, with an
    /// optional `K=<int>` header on the first non-empty line.
    pub fn parse(text: &str) -> Result<Self> {
        let (k, body) = split_header(text)?;
        let mut labels = Vec::new();
        for (line_no, line) in body {
            for tok in line.split_whitespace() {
                labels.push(parse_label(tok, line_no)?);
            }
        }
        Self::from_one_based(&labels, k).map_err(|e| match e {
            Error::StateOutOfRange { state, position, k } => Error::Parse {
                line: locate_token(text, position),
                message: format!("state {state} outside 1..={k}"),
            },
            other => other,
        })
    }

    /// Text form with an explicit `K=` header and one line of labels.
    pub fn to_text(&self) -> String {
        let body: Vec<String> = self.to_one_based().iter().map(|s| s.to_string()).collect();
        format!("K={}\n{}\n", self.k, body.join(" "))
    }
}

pub(crate) fn split_header(text: &str) -> Result<(Option<usize>, Vec<(usize, &str)>)> {
    let mut k = None;
    let mut lines = Vec::new();
    let mut seen_content = false;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !seen_content {
            seen_content = true;
            if let Some(rest) = trimmed.strip_prefix("K=") {
                let value = rest.trim().parse::<usize>().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad K header `{trimmed}`"),
                })?;
                if value == 0 {
                    return Err(Error::Parse { line: line_no, message: "K must be positive".into() });
                }
                k = Some(value);
                continue;
            }
        }
        lines.push((line_no, trimmed));
    }
    Ok((k, lines))
}

pub(crate) fn parse_label(tok: &str, line: usize) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| Error::Parse {
        line,
        message: format!("`{tok}` is not a positive integer state label"),
    })
}

fn locate_token(text: &str, position: usize) -> usize {
    let mut seen = 0usize;
    for (idx, line) in text.lines().enumerate() {
        if line.trim_start().starts_with("K=") {
            continue;
        }
        seen += line.split_whitespace().count();
        if seen > position {
            return idx + 1;
        }
    }
    text.lines().count().max(1)
}

/// Transition tallies ν_ij with row totals ν_i+.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionCounts {
    k: usize,
    nu: Vec<u64>,
    nu_row: Vec<u64>,
    total: u64,
}

impl TransitionCounts {
    pub fn zeros(k: usize) -> Self {
        Self { k, nu: vec![0; k * k], nu_row: vec![0; k], total: 0 }
    }

    /// Builds from a dense `k x k` table of counts.
    pub fn from_matrix(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        let mut counts = Self::zeros(k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Dimension(format!("row {i} has {} entries, expected {k}", row.len())));
            }
            for (j, &c) in row.iter().enumerate() {
                counts.add(i, j, c);
            }
        }
        Ok(counts)
    }

    pub fn add(&mut self, i: usize, j: usize, n: u64) {
        self.nu[i * self.k + j] += n;
        self.nu_row[i] += n;
        self.total += n;
    }

    /// Adds every tally of `other` (same state count) into `self`.
    pub fn merge(&mut self, other: &TransitionCounts) -> Result<()> {
        if other.k != self.k {
            return Err(Error::Dimension(format!("cannot merge K={} into K={}", other.k, self.k)));
        }
        for (a, b) in self.nu.iter_mut().zip(&other.nu) {
            *a += b;
        }
        for (a, b) in self.nu_row.iter_mut().zip(&other.nu_row) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.nu[i * self.k + j]
    }

    pub fn row_total(&self, i: usize) -> u64 {
        self.nu_row[i]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Plug-in estimates π̂_ij = ν_ij/ν_i+ and π̂_io = ν_i+/T.
    pub fn empirical(&self) -> Result<EmpiricalTransition> {
        empirical_estimates(self)
    }
}

/// Pairwise scan of the sequence.
pub fn count_transitions(seq: &StateSequence) -> Result<TransitionCounts> {
    if seq.len() < 2 {
        return Err(Error::NoTransitions);
    }
    let mut counts = TransitionCounts::zeros(seq.k);
    for w in seq.states.windows(2) {
        counts.add(w[0], w[1], 1);
    }
    Ok(counts)
}

/// Non-parametric transition estimates and stationary weights.
///
/// Rows never left in the data are all-zero, flagged unvisited and carry zero
/// weight, so they drop out of every weighted sum downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTransition {
    pub pi_hat: DMatrix<f64>,
    pub pi_init_hat: DVector<f64>,
    pub visited: Vec<bool>,
    /// Number of transitions behind the estimates (effective sample size).
    pub total: f64,
}

impl EmpiricalTransition {
    pub fn num_states(&self) -> usize {
        self.visited.len()
    }

    /// Treats a known transition matrix and weight vector as "data"; used for
    /// functionals evaluated at a population transition matrix.
    pub fn from_population(pi: DMatrix<f64>, pi_init: DVector<f64>) -> Result<Self> {
        let k = pi.nrows();
        if pi.ncols() != k || pi_init.len() != k {
            return Err(Error::Dimension("transition matrix and weights disagree on K".into()));
        }
        let visited = (0..k).map(|i| pi_init[i] > 0.0).collect();
        Ok(Self { pi_hat: pi, pi_init_hat: pi_init, visited, total: f64::INFINITY })
    }
}

pub fn empirical_estimates(counts: &TransitionCounts) -> Result<EmpiricalTransition> {
    if counts.total == 0 {
        return Err(Error::NoTransitions);
    }
    let k = counts.k;
    let total = counts.total as f64;
    let mut pi_hat = DMatrix::zeros(k, k);
    let mut pi_init_hat = DVector::zeros(k);
    let mut visited = vec![false; k];
    for i in 0..k {
        let row = counts.nu_row[i];
        if row == 0 {
            continue;
        }
        visited[i] = true;
        pi_init_hat[i] = row as f64 / total;
        for j in 0..k {
            pi_hat[(i, j)] = counts.get(i, j) as f64 / row as f64;
        }
    }
    Ok(EmpiricalTransition { pi_hat, pi_init_hat, visited, total })
}

/// Checks that `p` is square with rows summing to one.
pub fn validate_stochastic(p: &DMatrix<f64>) -> Result<()> {
    if p.nrows() != p.ncols() {
        return Err(Error::Dimension(format!("transition matrix is {}x{}", p.nrows(), p.ncols())));
    }
    for i in 0..p.nrows() {
        let row = p.row(i);
        if row.iter().any(|&v| !(0.0..=1.0 + ROW_SUM_TOL).contains(&v)) {
            return Err(Error::InvalidArgument(format!("row {i} has an entry outside [0,1]")));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::RowSum { row: i, sum });
        }
    }
    Ok(())
}

fn draw(row: nalgebra::RowDVector<f64>, rng: &mut ChainRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = j;
        if u < acc {
            return j;
        }
    }
    last
}

/// Simulates `steps` transitions of the chain started at `x0` (0-based).
pub fn simulate_chain(p: &DMatrix<f64>, x0: usize, steps: usize, seed: u64) -> Result<StateSequence> {
    let mut rng = rng_from_seed(seed);
    simulate_with(p, x0, steps, &mut rng)
}

pub fn simulate_with(p: &DMatrix<f64>, x0: usize, steps: usize, rng: &mut ChainRng) -> Result<StateSequence> {
    validate_stochastic(p)?;
    let k = p.nrows();
    if x0 >= k {
        return Err(Error::StateOutOfRange { state: x0 + 1, position: 0, k });
    }
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0);
    let mut x = x0;
    for _ in 0..steps {
        x = draw(p.row(x).into_owned(), rng);
        states.push(x);
    }
    Ok(StateSequence { states, k })
}

/// How replaced positions are rewritten.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContaminationScheme {
    /// X_t = min(X_{t-1} + 1, K): a chain that always moves forward.
    ReplaceForward,
    /// X_t = target (0-based).
    AbsorbTo(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub epsilon: f64,
    pub scheme: ContaminationScheme,
    pub seed: u64,
}

impl ContaminationSpec {
    pub fn new(epsilon: f64, scheme: ContaminationScheme, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidArgument(format!("contamination proportion {epsilon} not in [0,1]")));
        }
        Ok(Self { epsilon, scheme, seed })
    }
}

/// Number of positions rewritten for a path with `transitions` steps.
pub fn contaminated_count(epsilon: f64, transitions: usize) -> usize {
    ((epsilon * transitions as f64).round() as usize).min(transitions)
}

fn pick_positions(transitions: usize, epsilon: f64, rng: &mut ChainRng) -> Vec<usize> {
    let n = contaminated_count(epsilon, transitions);
    if n == 0 {
        return Vec::new();
    }
    let mut picked: Vec<usize> = index::sample(rng, transitions, n).into_iter().map(|i| i + 1).collect();
    picked.sort_unstable();
    picked
}

/// Rewrites `round(ε·T)` uniformly chosen positions of an existing path
/// (index 0 is never touched); positions are rewritten in increasing order.
pub fn contaminate(seq: &StateSequence, spec: &ContaminationSpec) -> Result<StateSequence> {
    if !(0.0..=1.0).contains(&spec.epsilon) {
        return Err(Error::InvalidArgument(format!("contamination proportion {} not in [0,1]", spec.epsilon)));
    }
    if let ContaminationScheme::AbsorbTo(target) = spec.scheme {
        if target >= seq.k {
            return Err(Error::StateOutOfRange { state: target + 1, position: 0, k: seq.k });
        }
    }
    let mut out = seq.clone();
    if spec.epsilon == 0.0 || seq.len() < 2 {
        return Ok(out);
    }
    let mut rng = rng_from_seed(spec.seed);
    for t in pick_positions(seq.transitions(), spec.epsilon, &mut rng) {
        out.states[t] = match spec.scheme {
            ContaminationScheme::ReplaceForward => (out.states[t - 1] + 1).min(seq.k - 1),
            ContaminationScheme::AbsorbTo(target) => target,
        };
    }
    Ok(out)
}

/// Simulates a path in which `round(ε·steps)` uniformly chosen steps are drawn
/// from `contaminant` instead of `p`; the chain continues from wherever the
/// contaminating step left it.
pub fn simulate_contaminated(
    p: &DMatrix<f64>,
    contaminant: &DMatrix<f64>,
    x0: usize,
    steps: usize,
    epsilon: f64,
    seed: u64,
) -> Result<StateSequence> {
    validate_stochastic(p)?;
    validate_stochastic(contaminant)?;
    if p.shape() != contaminant.shape() {
        return Err(Error::Dimension("contaminating chain has a different state count".into()));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!("contamination proportion {epsilon} not in [0,1]")));
    }
    let k = p.nrows();
    if x0 >= k {
        return Err(Error::StateOutOfRange { state: x0 + 1, position: 0, k });
    }
    let mut rng = rng_from_seed(seed);
    let positions = pick_positions(steps, epsilon, &mut rng);
    let mut next_bad = positions.iter().peekable();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(x0);
    let mut x = x0;
    for t in 1..=steps {
        let source = if next_bad.peek() == Some(&&t) {
            next_bad.next();
            contaminant
        } else {
            p
        };
        x = draw(source.row(x).into_owned(), &mut rng);
        states.push(x);
    }
    Ok(StateSequence { states, k })
}

/// Stationary law of a transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub pi: DVector<f64>,
    /// False when the chain has several closed classes; `pi` is then one of
    /// many stationary laws.
    pub unique: bool,
}

/// Solves πᵀP = πᵀ, Σπ = 1 directly from (I - Pᵀ) with the normalization
/// row appended.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<Stationary> {
    validate_stochastic(p)?;
    let k = p.nrows();
    let a = DMatrix::<f64>::identity(k, k) - p.transpose();
    let sv = a.clone().svd(false, false).singular_values;
    let scale = sv.max().max(1.0);
    let nullity = sv.iter().filter(|&&s| s <= 1e-10 * scale * k as f64).count();
    if nullity == 0 {
        return Err(Error::Singular("I - P' has full rank; no stationary law".into()));
    }
    let mut aug = DMatrix::<f64>::zeros(k + 1, k);
    aug.view_mut((0, 0), (k, k)).copy_from(&a);
    aug.row_mut(k).fill(1.0);
    let mut rhs = DVector::<f64>::zeros(k + 1);
    rhs[k] = 1.0;
    let svd = aug.svd(true, true);
    let mut pi = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Singular(format!("stationary solve failed: {e}")))?;
    for v in pi.iter_mut() {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }
    let s = pi.sum();
    pi /= s;
    Ok(Stationary { pi, unique: nullity == 1 })
}
