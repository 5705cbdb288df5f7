//! Clubbed rating chain fitted to one-year migration percentages.

use std::path::Path;

use mdpde::dpd::estimate_per_row;
use mdpde::models::{credit_clubbed, CREDIT_STATES};
use mdpde::DpdConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// 2018 migration rates for three markets.
pub const PACKAGED: &str = include_str!("../data/credit_2018.csv");

/// Rows whose percentages sum further than this from 100 are rejected.
const SUM_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreditRow {
    pub market: String,
    pub state: String,
    pub down: f64,
    /// Missing for AAA, which cannot move up.
    pub up: Option<f64>,
    pub steady: f64,
}

#[derive(Deserialize)]
struct RawRow {
    market: String,
    state: String,
    down: f64,
    #[serde(deserialize_with = "optional_rate")]
    up: Option<f64>,
    steady: f64,
}

fn optional_rate<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    let s = String::deserialize(d)?;
    match s.trim() {
        "" | "--" => Ok(None),
        v => v.parse().map(Some).map_err(serde::de::Error::custom),
    }
}

/// Parses `market,state,down,up,steady` rows (percentages). `source` names
/// the input in error messages.
pub fn parse_credit(text: &str, source: &Path) -> CliResult<Vec<CreditRow>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let headers = reader.headers().map_err(|e| CliError::File { path: source.to_path_buf(), line: 1, message: e.to_string() })?.clone();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::File {
            path: source.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let raw: RawRow = record
            .deserialize(Some(&headers))
            .map_err(|e| CliError::File { path: source.to_path_buf(), line, message: e.to_string() })?;
        let bad = |message: String| CliError::File { path: source.to_path_buf(), line, message };
        let idx = CREDIT_STATES[..CREDIT_STATES.len() - 1]
            .iter()
            .position(|s| *s == raw.state)
            .ok_or_else(|| bad(format!("unknown rating `{}`", raw.state)))?;
        if idx == 0 && raw.up.is_some_and(|u| u != 0.0) {
            return Err(bad("AAA cannot have upgrades".into()));
        }
        if idx > 0 && raw.up.is_none() {
            return Err(bad(format!("{} needs an upgrade rate", raw.state)));
        }
        let parts = [raw.down, raw.up.unwrap_or(0.0), raw.steady];
        if parts.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(bad("rates must be non-negative".into()));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 100.0).abs() > SUM_TOLERANCE {
            return Err(bad(format!("rates sum to {sum}, expected 100")));
        }
        if rows.iter().any(|r: &CreditRow| r.market == raw.market && r.state == raw.state) {
            return Err(bad(format!("duplicate row {} {}", raw.market, raw.state)));
        }
        rows.push(CreditRow { market: raw.market, state: raw.state, down: raw.down, up: raw.up, steady: raw.steady });
    }
    if rows.is_empty() {
        return Err(CliError::Invalid { path: source.to_path_buf(), message: "no data rows".into() });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct CreditFit {
    pub market: String,
    pub state: String,
    /// `mle`, `mdpde`, `fixed` (AAA) or `absorbing` (D).
    pub method: String,
    pub alpha: Option<f64>,
    pub theta: Option<f64>,
    /// Percent.
    pub upgrade: Option<f64>,
    pub downgrade: Option<f64>,
    pub steady: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CreditOutput {
    pub command: String,
    pub fits: Vec<CreditFit>,
}

impl CreditOutput {
    pub fn converged(&self) -> bool {
        self.fits.iter().all(|f| f.converged)
    }

    pub fn to_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for f in &self.fits {
            w.serialize(f).map_err(|e| CliError::Output(e.to_string()))?;
        }
        String::from_utf8(w.into_inner().map_err(|e| CliError::Output(e.to_string()))?)
            .map_err(|e| CliError::Output(e.to_string()))
    }
}

fn model_row(market: &str, state: &str, method: &str, alpha: Option<f64>, theta: f64, converged: bool) -> CreditFit {
    CreditFit {
        market: market.into(),
        state: state.into(),
        method: method.into(),
        alpha,
        theta: Some(theta),
        upgrade: Some(100.0 * (1.0 - theta).powi(2)),
        downgrade: Some(200.0 * theta * (1.0 - theta)),
        steady: Some(100.0 * theta * theta),
        converged,
    }
}

/// Per-row MLE (closed form) and MDPDE at each alpha for every market, in
/// input order; AAA is echoed from the data and D is reported as absorbing.
pub fn fit_credit(rows: &[CreditRow], alphas: &[f64]) -> CliResult<CreditOutput> {
    let family = credit_clubbed()?;
    let k = CREDIT_STATES.len();
    let mut markets: Vec<&str> = Vec::new();
    for r in rows {
        if !markets.contains(&r.market.as_str()) {
            markets.push(&r.market);
        }
    }
    let mut fits = Vec::new();
    for market in markets {
        for (i, state) in CREDIT_STATES.iter().enumerate().take(k - 1) {
            let Some(r) = rows.iter().find(|r| r.market == market && r.state == *state) else {
                continue;
            };
            let total = r.down + r.up.unwrap_or(0.0) + r.steady;
            if i == 0 {
                fits.push(CreditFit {
                    market: market.into(),
                    state: r.state.clone(),
                    method: "fixed".into(),
                    alpha: None,
                    theta: None,
                    upgrade: None,
                    downgrade: Some(100.0 * r.down / total),
                    steady: Some(100.0 * r.steady / total),
                    converged: true,
                });
                continue;
            }
            let mut observed = vec![0.0; k];
            observed[i - 1] = r.up.unwrap_or(0.0) / total;
            observed[i] = r.steady / total;
            observed[i + 1] = r.down / total;
            let mle = (2.0 * observed[i] + observed[i + 1]) / 2.0;
            fits.push(model_row(market, state, "mle", Some(0.0), mle, true));
            for &alpha in alphas.iter().filter(|&&a| a != 0.0) {
                let est = estimate_per_row(&family, &observed, i, &DpdConfig::with_alpha(alpha))?;
                fits.push(model_row(market, state, "mdpde", Some(alpha), est.theta_hat[0], est.converged));
            }
        }
        fits.push(CreditFit {
            market: market.into(),
            state: CREDIT_STATES[k - 1].into(),
            method: "absorbing".into(),
            alpha: None,
            theta: None,
            upgrade: None,
            downgrade: None,
            steady: Some(100.0),
            converged: true,
        });
    }
    Ok(CreditOutput { command: "credit".into(), fits })
}
