use std::fs;
use std::path::Path;

use mdpde::{FamilyId, SequenceBundle, StateSequence};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

#[derive(Deserialize)]
struct SimulatedFile {
    k: usize,
    sequences: Vec<Vec<usize>>,
}

/// Reads sequences from `path`: the JSON written by `simulate`, a bundle
/// (one sequence per line) when `bundle` is set, or else a single sequence.
/// A `K` given on the command line applies when the file has no header.
pub fn read_sequences(path: &Path, bundle: bool, k: Option<usize>) -> CliResult<SequenceBundle> {
    let text = read_text(path)?;
    if text.trim_start().starts_with('{') {
        let file: SimulatedFile = serde_json::from_str(&text).map_err(|e| CliError::File {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        if let Some(k) = k.filter(|&k| k != file.k) {
            return Err(CliError::Invalid {
                path: path.to_path_buf(),
                message: format!("file has K={}, --K is {k}", file.k),
            });
        }
        let seqs = file
            .sequences
            .iter()
            .map(|s| StateSequence::from_one_based(s, Some(file.k)))
            .collect::<mdpde::Result<Vec<_>>>()
            .map_err(|e| CliError::in_file(path, e))?;
        return SequenceBundle::new(seqs).map_err(|e| CliError::in_file(path, e));
    }
    let has_header = text.lines().find(|l| !l.trim().is_empty()).is_some_and(|l| l.trim().starts_with("K="));
    let text = match k {
        Some(k) if !has_header => format!("K={k}\n{text}"),
        _ => text,
    };
    let parsed = if bundle {
        SequenceBundle::parse(&text)
    } else {
        StateSequence::parse(&text).and_then(|s| SequenceBundle::new(vec![s]))
    }
    .map_err(|e| {
        // line numbers refer to the file, not to the header added above
        match (e, has_header || k.is_none()) {
            (mdpde::Error::Parse { line, message }, false) => {
                CliError::File { path: path.to_path_buf(), line: line - 1, message }
            }
            (e, _) => CliError::in_file(path, e),
        }
    })?;
    if let Some(k) = k.filter(|&k| k != parsed.num_states()) {
        return Err(CliError::Invalid {
            path: path.to_path_buf(),
            message: format!("file has K={}, --K is {k}", parsed.num_states()),
        });
    }
    Ok(parsed)
}

/// Resolves the family, taking K from the data when it is not given.
pub fn family_id(name: &str, k: Option<usize>, data_k: Option<usize>) -> CliResult<FamilyId> {
    if name == "credit-clubbed" {
        return Ok(FamilyId::CreditClubbed);
    }
    let k = match (k, data_k) {
        (Some(k), _) => Some(k),
        // greenwood's K is the population size, one less than the state count
        (None, Some(n)) if name == "greenwood" => Some(n.saturating_sub(1)),
        (None, d) => d,
    };
    Ok(FamilyId::parse(name, k)?)
}

pub fn state_count(id: &FamilyId) -> usize {
    match *id {
        FamilyId::Greenwood(k) => k + 1,
        FamilyId::BinomialWalk(k)
        | FamilyId::MultiBinomialWalk(k)
        | FamilyId::BernoulliLaplace(k)
        | FamilyId::ReflectingWalk(k) => k,
        FamilyId::CreditClubbed => mdpde::models::CREDIT_STATES.len(),
    }
}
