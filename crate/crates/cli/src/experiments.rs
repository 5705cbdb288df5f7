//! The ARE table and the contamination MSE study.

use mdpde::asymptotics::are_example1;
use mdpde::dpd::estimate;
use mdpde::rng::child_seed;
use mdpde::{DpdConfig, FamilyId};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::MseArgs;
use crate::commands::{simulate_path, Scheme};
use crate::error::{CliError, CliResult};
use crate::input::state_count;

pub const ARE_THETAS: [f64; 10] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5];
pub const ARE_ALPHAS: [f64; 6] = [0.1, 0.2, 0.3, 0.5, 0.7, 1.0];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AreRow {
    pub theta: f64,
    /// ARE in percent, one entry per alpha.
    pub are: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AreTable {
    pub command: String,
    pub alphas: Vec<f64>,
    pub rows: Vec<AreRow>,
}

impl AreTable {
    /// One decimal, as published.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta");
        for a in &self.alphas {
            out.push_str(&format!(",alpha={a}"));
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.theta.to_string());
            for v in &row.are {
                out.push_str(&format!(",{v:.1}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn are_table() -> CliResult<AreTable> {
    let rows = ARE_THETAS
        .iter()
        .map(|&theta| {
            let are = ARE_ALPHAS
                .iter()
                .map(|&alpha| are_example1(theta, alpha))
                .collect::<mdpde::Result<Vec<_>>>()?;
            Ok(AreRow { theta, are })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(AreTable { command: "are-table".into(), alphas: ARE_ALPHAS.to_vec(), rows })
}

#[derive(Debug, Clone)]
pub struct MseConfig {
    pub family: FamilyId,
    pub theta: f64,
    /// Initial state, 0-based.
    pub x0: usize,
    pub alphas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub steps: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl MseConfig {
    /// Binomial walk on 10 states from state 1, or the Greenwood chain with
    /// 9 susceptibles starting from all of them.
    pub fn from_args(args: &MseArgs) -> CliResult<Self> {
        let family = match args.family.as_str() {
            "binomial-walk" => FamilyId::BinomialWalk(args.k.unwrap_or(10)),
            "greenwood" => FamilyId::Greenwood(args.k.unwrap_or(9)),
            other => return Err(CliError::usage(format!("mse-experiment supports binomial-walk and greenwood, not `{other}`"))),
        };
        let x0 = match family {
            FamilyId::Greenwood(k) => k,
            _ => 0,
        };
        if args.replicates == 0 {
            return Err(CliError::usage("--replicates must be at least 1"));
        }
        Ok(Self {
            x0,
            scheme: Scheme::parse(&args.scheme, state_count(&family))?,
            family,
            theta: args.theta,
            alphas: args.alpha.clone(),
            epsilons: args.epsilon.clone(),
            steps: args.steps.clone(),
            replicates: args.replicates,
            seed: args.seed,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MseRow {
    pub family: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub theta: f64,
    #[serde(rename = "T")]
    pub steps: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub mse: f64,
    pub mse_x100: f64,
    pub replicates: usize,
    /// Replicates whose fit failed; they are left out of the average.
    pub failures: usize,
}

/// Monte-Carlo MSE of θ̂_α for every (T, ε, α). Each (T, ε) cell draws its
/// own replicate paths, shared by all alphas; results do not depend on the
/// number of threads.
pub fn mse_experiment(cfg: &MseConfig) -> CliResult<Vec<MseRow>> {
    let family = cfg.family.build()?;
    let k = match cfg.family {
        FamilyId::Greenwood(k) | FamilyId::BinomialWalk(k) => k,
        _ => state_count(&cfg.family),
    };
    let configs: Vec<DpdConfig> = cfg.alphas.iter().map(|&a| DpdConfig::with_alpha(a)).collect();
    for c in &configs {
        c.validate()?;
    }
    let mut rows = Vec::new();
    let mut cell = 0u64;
    for &steps in &cfg.steps {
        for &eps in &cfg.epsilons {
            let cell_seed = child_seed(cfg.seed, cell);
            cell += 1;
            let errors: Vec<Vec<Option<f64>>> = (0..cfg.replicates)
                .into_par_iter()
                .map(|r| -> mdpde::Result<Vec<Option<f64>>> {
                    let seq = simulate_path(&cfg.family, &[cfg.theta], cfg.x0, steps, eps, cfg.scheme, child_seed(cell_seed, r as u64))?;
                    let emp = mdpde::chain::count_transitions(&seq)?.empirical()?;
                    Ok(configs
                        .iter()
                        .map(|c| estimate(&family, &emp, c).ok().map(|e| (e.theta_hat[0] - cfg.theta).powi(2)))
                        .collect())
                })
                .collect::<mdpde::Result<_>>()?;
            for (a, &alpha) in cfg.alphas.iter().enumerate() {
                let ok: Vec<f64> = errors.iter().filter_map(|e| e[a]).collect();
                let mse = ok.iter().sum::<f64>() / ok.len().max(1) as f64;
                rows.push(MseRow {
                    family: cfg.family.slug().into(),
                    k,
                    theta: cfg.theta,
                    steps,
                    epsilon: eps,
                    alpha,
                    mse: if ok.is_empty() { f64::NAN } else { mse },
                    mse_x100: if ok.is_empty() { f64::NAN } else { 100.0 * mse },
                    replicates: cfg.replicates,
                    failures: cfg.replicates - ok.len(),
                });
            }
        }
    }
    Ok(rows)
}
