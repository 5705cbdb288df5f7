use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{model_matrices, AsymptoticReport};
use crate::chain::{count_transitions, parse_label, split_header, StateSequence, TransitionCounts};
use crate::dpd::{estimate, DpdConfig, DpdEstimate};
use crate::error::{Error, Result};
use crate::models::ParametricFamily;

/// n ≥ 1 observed sequences over a common state space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceBundle {
    sequences: Vec<StateSequence>,
    k: usize,
}

impl SequenceBundle {
    pub fn new(sequences: Vec<StateSequence>) -> Result<Self> {
        let k = sequences
            .first()
            .map(|s| s.num_states())
            .ok_or_else(|| Error::InvalidArgument("a bundle needs at least one sequence".into()))?;
        if let Some(bad) = sequences.iter().position(|s| s.num_states() != k) {
            return Err(Error::Dimension(format!(
                "sequence {} has K={}, the first has K={k}",
                bad + 1,
                sequences[bad].num_states()
            )));
        }
        Ok(Self { sequences, k })
    }

    /// One sequence per line of whitespace separated 1-based labels, after an
    /// optional `K=` header. Without a header K is the largest label seen.
    pub fn parse(text: &str) -> Result<Self> {
        let (header, body) = split_header(text)?;
        let mut rows = Vec::with_capacity(body.len());
        for (line_no, line) in body {
            let labels = line
                .split_whitespace()
                .map(|tok| parse_label(tok, line_no))
                .collect::<Result<Vec<_>>>()?;
            rows.push((line_no, labels));
        }
        if rows.is_empty() {
            return Err(Error::InvalidArgument("a bundle needs at least one sequence".into()));
        }
        let k = match header {
            Some(k) => k,
            None => rows.iter().flat_map(|(_, l)| l.iter().copied()).max().unwrap_or(0),
        };
        let mut sequences = Vec::with_capacity(rows.len());
        for (line, labels) in rows {
            let seq = StateSequence::from_one_based(&labels, Some(k)).map_err(|e| match e {
                Error::StateOutOfRange { state, k, .. } => {
                    Error::Parse { line, message: format!("state {state} outside 1..={k}") }
                }
                other => other,
            })?;
            sequences.push(seq);
        }
        Self::new(sequences)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("K={}\n", self.k);
        for s in &self.sequences {
            let labels: Vec<String> = s.to_one_based().iter().map(|v| v.to_string()).collect();
            out.push_str(&labels.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn sequences(&self) -> &[StateSequence] {
        &self.sequences
    }

    pub fn num_states(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn lengths(&self) -> Vec<usize> {
        self.sequences.iter().map(|s| s.len()).collect()
    }
}

/// Tallies summed over the sequences, kept as exact integers alongside the
/// divisor n of the averaged counts ν_ij⁽ⁿ⁾ = (1/n) Σ_l ν_ij⁽ˡ⁾.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PooledCounts {
    pub sums: TransitionCounts,
    pub n: usize,
}

impl PooledCounts {
    pub fn averaged(&self, i: usize, j: usize) -> f64 {
        self.sums.get(i, j) as f64 / self.n as f64
    }

    /// nT, the total number of transitions behind the pooled estimates.
    pub fn effective_total(&self) -> u64 {
        self.sums.total()
    }
}

/// Counts every sequence in parallel and merges. Sequences of unequal length
/// are pooled by their raw tallies.
pub fn pooled_counts(bundle: &SequenceBundle) -> Result<PooledCounts> {
    let per = bundle.sequences.par_iter().map(count_transitions).collect::<Result<Vec<_>>>()?;
    let mut sums = TransitionCounts::zeros(bundle.k);
    for c in &per {
        sums.merge(c)?;
    }
    Ok(PooledCounts { sums, n: bundle.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiSequenceFit {
    pub estimate: DpdEstimate,
    /// Σ_α at θ̂ with the pooled visit frequencies as row weights; `None`
    /// when Ψ is singular there, with the reason in `variance_error`.
    #[serde(skip)]
    pub report: Option<AsymptoticReport>,
    pub se: Option<Vec<f64>>,
    pub variance_error: Option<String>,
    pub sequences: usize,
    /// nT.
    pub transitions: u64,
}

/// MDPDE from the pooled empirical matrix; standard errors use nT.
pub fn multi_sequence_estimate(
    bundle: &SequenceBundle,
    family: &dyn ParametricFamily,
    config: &DpdConfig,
) -> Result<MultiSequenceFit> {
    let pooled = pooled_counts(bundle)?;
    let emp = pooled.sums.empirical()?;
    let est = estimate(family, &emp, config)?;
    let nt = pooled.effective_total();
    let variance = family
        .matrix(&est.theta_hat)
        .and_then(|p| model_matrices(family, &est.theta_hat, &p, &emp.pi_init_hat, config.alpha));
    let (report, variance_error) = match variance {
        Ok(r) => (Some(r.with_sample_size(nt as f64)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(MultiSequenceFit {
        se: report.as_ref().and_then(|r| r.se.clone()),
        report,
        variance_error,
        estimate: est,
        sequences: pooled.n,
        transitions: nt,
    })
}
