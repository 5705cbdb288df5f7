//! simulate, estimate, wald, two-sample and influence.

use mdpde::asymptotics::{
    confidence_intervals, influence_function, model_matrices, model_matrices_at, model_stationary, sensitivity,
    Interval, SensitivityMethod,
};
use mdpde::chain::{contaminate, simulate_chain, simulate_contaminated, ContaminationScheme, ContaminationSpec};
use mdpde::dpd::estimate;
use mdpde::extensions::{higher_order_estimate, pooled_counts, MomentumBinomial};
use mdpde::hypothesis::{bernoulli_laplace_report, two_sample, wald_bernoulli_laplace, wald_composite, Constraint};
use mdpde::rng::child_seed;
use mdpde::{
    AsymptoticReport, DMatrix, DpdConfig, DpdEstimate, EmpiricalTransition, FamilyId, ParametricFamily,
    SequenceBundle, StateSequence, WaldResult,
};
use serde::{Deserialize, Serialize};

use crate::args::{
    EstimateArgs, FamilyArgs, InfluenceArgs, InputArgs, SimulateArgs, TwoSampleArgs, VarianceChoice, WaldArgs,
};
use crate::error::{CliError, CliResult};
use crate::input::{family_id, read_sequences, state_count};

/// How the contaminating steps of a simulated path are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Steps drawn from the family at the upper end of Θ.
    Sequential,
    /// Post-hoc: the state becomes one above its predecessor.
    Forward,
    /// Post-hoc: the state becomes the given one (0-based).
    Absorb(usize),
}

impl Scheme {
    pub fn parse(s: &str, k: usize) -> CliResult<Self> {
        match s {
            "sequential" => Ok(Self::Sequential),
            "forward" => Ok(Self::Forward),
            _ => {
                let state = s
                    .strip_prefix("absorb:")
                    .and_then(|v| v.parse::<usize>().ok())
                    .ok_or_else(|| CliError::usage(format!("unknown scheme `{s}`; use sequential, forward or absorb:<state>")))?;
                if state == 0 || state > k {
                    return Err(CliError::usage(format!("absorbing state {state} outside 1..={k}")));
                }
                Ok(Self::Absorb(state - 1))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Sequential => "sequential".into(),
            Self::Forward => "forward".into(),
            Self::Absorb(s) => format!("absorb:{}", s + 1),
        }
    }
}

/// Draws one path of `steps` transitions with a fraction `epsilon` of
/// contaminated steps.
pub fn simulate_path(
    id: &FamilyId,
    theta: &[f64],
    x0: usize,
    steps: usize,
    epsilon: f64,
    scheme: Scheme,
    seed: u64,
) -> mdpde::Result<StateSequence> {
    let p = id.matrix(theta)?;
    match scheme {
        Scheme::Sequential => {
            let upper: Vec<f64> = id.build()?.bounds().iter().map(|b| b.1).collect();
            if epsilon == 0.0 {
                simulate_chain(&p, x0, steps, seed)
            } else {
                simulate_contaminated(&p, &id.matrix(&upper)?, x0, steps, epsilon, seed)
            }
        }
        Scheme::Forward | Scheme::Absorb(_) => {
            let clean = simulate_chain(&p, x0, steps, seed)?;
            let scheme = match scheme {
                Scheme::Absorb(s) => ContaminationScheme::AbsorbTo(s),
                _ => ContaminationScheme::ReplaceForward,
            };
            contaminate(&clean, &ContaminationSpec::new(epsilon, scheme, child_seed(seed, 1))?)
        }
    }
}

fn theta_or_default(id: &FamilyId, theta: &[f64]) -> CliResult<Vec<f64>> {
    match id {
        FamilyId::BernoulliLaplace(k) if theta.is_empty() => Ok(mdpde::models::bernoulli_laplace_theta(*k)),
        _ if theta.is_empty() => Err(CliError::usage(format!("--theta is required for {id}"))),
        _ => Ok(theta.to_vec()),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulateOutput {
    pub command: String,
    pub family: String,
    /// Number of states.
    pub k: usize,
    pub theta: Vec<f64>,
    pub steps: usize,
    pub x0: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub scheme: String,
    /// 1-based state labels, one list per sequence.
    pub sequences: Vec<Vec<usize>>,
}

pub fn simulate(args: &SimulateArgs) -> CliResult<(SimulateOutput, Vec<StateSequence>)> {
    let id = family_id(&args.family.family, args.family.k, None)?;
    let k = state_count(&id);
    let theta = theta_or_default(&id, &args.theta)?;
    if args.x0 == 0 || args.x0 > k {
        return Err(CliError::usage(format!("--x0 {} outside 1..={k}", args.x0)));
    }
    if args.sequences == 0 {
        return Err(CliError::usage("--sequences must be at least 1"));
    }
    let scheme = Scheme::parse(&args.scheme, k)?;
    let seqs = (0..args.sequences)
        .map(|l| {
            let seed = if args.sequences == 1 { args.seed } else { child_seed(args.seed, l as u64) };
            simulate_path(&id, &theta, args.x0 - 1, args.steps, args.epsilon, scheme, seed)
        })
        .collect::<mdpde::Result<Vec<_>>>()?;
    let out = SimulateOutput {
        command: "simulate".into(),
        family: id.to_string(),
        k,
        theta,
        steps: args.steps,
        x0: args.x0,
        seed: args.seed,
        epsilon: args.epsilon,
        scheme: scheme.label(),
        sequences: seqs.iter().map(|s| s.to_one_based()).collect(),
    };
    Ok((out, seqs))
}

/// Reads the data and resolves the family against it.
fn load(input: &InputArgs, fam: &FamilyArgs) -> CliResult<(FamilyId, SequenceBundle)> {
    let data_k = match fam.k {
        Some(_) => Some(state_count(&family_id(&fam.family, fam.k, None)?)),
        None if fam.family == "credit-clubbed" => Some(mdpde::models::CREDIT_STATES.len()),
        None => None,
    };
    let bundle = read_sequences(&input.input, input.bundle, data_k)?;
    let id = family_id(&fam.family, fam.k, Some(bundle.num_states()))?;
    if state_count(&id) != bundle.num_states() {
        return Err(CliError::usage(format!("{id} has {} states, the data have {}", state_count(&id), bundle.num_states())));
    }
    Ok((id, bundle))
}

fn check_alphas(alphas: &[f64]) -> CliResult<()> {
    if alphas.is_empty() {
        return Err(CliError::usage("--alpha needs at least one value"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
        return Err(CliError::usage(format!("alpha must be >= 0, got {a}")));
    }
    Ok(())
}

/// Σ̂ with standard errors for n = number of transitions behind `emp`.
///
/// `Model` evaluates at p(θ̂) with the stationary law of θ̂ for a single
/// sequence; when that law is unavailable (several closed classes or a
/// singular Ψ, as for absorbing chains) or the data pool several sequences,
/// the empirical visit frequencies weight the rows instead. `Robust` uses the
/// empirical transition matrix itself.
pub fn variance_report(
    family: &dyn ParametricFamily,
    theta: &[f64],
    emp: &EmpiricalTransition,
    alpha: f64,
    choice: VarianceChoice,
    sequences: usize,
) -> mdpde::Result<AsymptoticReport> {
    let model = family.matrix(theta)?;
    let report = match choice {
        VarianceChoice::Robust => {
            let mut pi = emp.pi_hat.clone();
            for (i, &seen) in emp.visited.iter().enumerate() {
                if !seen {
                    pi.row_mut(i).copy_from(&model.row(i));
                }
            }
            model_matrices(family, theta, &pi, &emp.pi_init_hat, alpha)?
        }
        VarianceChoice::Model => {
            let stationary = if sequences == 1 { model_matrices_at(family, theta, alpha).ok() } else { None };
            match stationary {
                Some(r) => r,
                None => model_matrices(family, theta, &model, &emp.pi_init_hat, alpha)?,
            }
        }
    };
    Ok(report.with_sample_size(emp.total))
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateRow {
    pub alpha: f64,
    pub theta_hat: Vec<f64>,
    pub se: Option<Vec<f64>>,
    pub ci: Option<Vec<Interval>>,
    pub objective_value: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub at_boundary: Vec<bool>,
    pub off_support_cells: usize,
    pub condition_number: Option<f64>,
    pub near_singular: Option<bool>,
    pub variance_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateOutput {
    pub command: String,
    pub family: String,
    pub k: usize,
    pub order: usize,
    pub sequences: usize,
    pub transitions: u64,
    pub level: f64,
    pub variance: String,
    /// Closed-form maximum likelihood estimate, when the family has one.
    pub closed_form_mle: Option<Vec<f64>>,
    pub results: Vec<EstimateRow>,
}

impl EstimateOutput {
    pub fn converged(&self) -> bool {
        self.results.iter().all(|r| r.converged)
    }
}

fn variance_label(v: VarianceChoice) -> String {
    match v {
        VarianceChoice::Model => "model".into(),
        VarianceChoice::Robust => "robust".into(),
    }
}

fn row_from(est: DpdEstimate, report: mdpde::Result<AsymptoticReport>, level: f64, simultaneous: bool) -> CliResult<EstimateRow> {
    let (se, ci, cond, near, err) = match report {
        Ok(r) => {
            let ci = confidence_intervals(&est, &r, level, simultaneous)?;
            (r.se.clone(), Some(ci), Some(r.condition_number), Some(r.near_singular), None)
        }
        Err(e) => (None, None, None, None, Some(e.to_string())),
    };
    Ok(EstimateRow {
        alpha: est.alpha,
        theta_hat: est.theta_hat,
        se,
        ci,
        objective_value: est.objective_value,
        residual_norm: est.residual_norm,
        iterations: est.iterations,
        converged: est.converged,
        at_boundary: est.at_boundary,
        off_support_cells: est.off_support_cells,
        condition_number: cond,
        near_singular: near,
        variance_error: err,
    })
}

pub fn estimate_cmd(args: &EstimateArgs) -> CliResult<EstimateOutput> {
    check_alphas(&args.alpha)?;
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::usage(format!("--level must be in (0,1), got {}", args.level)));
    }
    if args.order == 0 {
        return Err(CliError::usage("--order must be at least 1"));
    }
    if args.order > 1 {
        return estimate_higher_order(args);
    }
    let (id, bundle) = load(&args.input, &args.family)?;
    let family = id.build()?;
    let counts = pooled_counts(&bundle)?.sums;
    let emp = counts.empirical()?;
    let mut results = Vec::with_capacity(args.alpha.len());
    for &alpha in &args.alpha {
        let est = estimate(&family, &emp, &DpdConfig::with_alpha(alpha))?;
        let report = variance_report(&family, &est.theta_hat, &emp, alpha, args.variance, bundle.len());
        results.push(row_from(est, report, args.level, args.simultaneous)?);
    }
    Ok(EstimateOutput {
        command: "estimate".into(),
        family: id.to_string(),
        k: bundle.num_states(),
        order: 1,
        sequences: bundle.len(),
        transitions: counts.total(),
        level: args.level,
        variance: variance_label(args.variance),
        closed_form_mle: family.closed_form_mle(&counts).transpose()?,
        results,
    })
}

fn estimate_higher_order(args: &EstimateArgs) -> CliResult<EstimateOutput> {
    if args.family.family != "momentum-binomial" || args.order != 2 {
        return Err(CliError::usage("orders above 1 are available for --family momentum-binomial with --order 2"));
    }
    let bundle = read_sequences(&args.input.input, args.input.bundle, args.family.k)?;
    if bundle.len() != 1 {
        return Err(CliError::usage("higher-order fitting takes a single sequence"));
    }
    let seq = &bundle.sequences()[0];
    let family = MomentumBinomial::new(bundle.num_states())?;
    let mut results = Vec::new();
    for &alpha in &args.alpha {
        let est = higher_order_estimate(seq, 2, &family, &DpdConfig::with_alpha(alpha))?;
        let none = Err(mdpde::Error::Unsupported("no variance for higher-order fits".into()));
        results.push(row_from(est, none, args.level, args.simultaneous)?);
    }
    Ok(EstimateOutput {
        command: "estimate".into(),
        family: format!("momentum-binomial:{}", bundle.num_states()),
        k: bundle.num_states(),
        order: 2,
        sequences: 1,
        transitions: (seq.len() - 2) as u64,
        level: args.level,
        variance: variance_label(args.variance),
        closed_form_mle: None,
        results,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct WaldRow {
    pub theta_hat: Vec<f64>,
    pub converged: bool,
    #[serde(flatten)]
    pub test: WaldResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct WaldOutput {
    pub command: String,
    pub family: String,
    pub null: String,
    pub transitions: u64,
    pub variance: String,
    pub results: Vec<WaldRow>,
}

pub fn wald_cmd(args: &WaldArgs) -> CliResult<WaldOutput> {
    check_alphas(&args.alpha)?;
    let (id, bundle) = load(&args.input, &args.family)?;
    let family = id.build()?;
    let emp = pooled_counts(&bundle)?.sums.empirical()?;
    let t = emp.total;
    let bl = args.null == "bernoulli-laplace";
    let theta0 = if bl {
        match id {
            FamilyId::MultiBinomialWalk(k) | FamilyId::BernoulliLaplace(k) => mdpde::models::bernoulli_laplace_theta(k),
            _ => return Err(CliError::usage("the bernoulli-laplace null needs the multi-binomial-walk family")),
        }
    } else {
        args.null
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::usage(format!("bad --null value `{v}`"))))
            .collect::<CliResult<Vec<_>>>()?
    };
    family.check_theta(&theta0)?;
    let mut results = Vec::new();
    for &alpha in &args.alpha {
        let est = estimate(&family, &emp, &DpdConfig::with_alpha(alpha))?;
        let test = if bl {
            let k = bundle.num_states();
            wald_bernoulli_laplace(&est, &bernoulli_laplace_report(k, alpha)?, t, k)?
        } else {
            let report = variance_report(&family, &est.theta_hat, &emp, alpha, args.variance, bundle.len())?;
            wald_composite(&est, &report, &Constraint::simple(theta0.clone()), t)?
        };
        results.push(WaldRow { theta_hat: est.theta_hat, converged: est.converged, test });
    }
    Ok(WaldOutput {
        command: "wald".into(),
        family: id.to_string(),
        null: if bl { "bernoulli-laplace".into() } else { format!("{theta0:?}") },
        transitions: emp.total as u64,
        variance: variance_label(args.variance),
        results,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoSampleRow {
    pub theta_hat_1: Vec<f64>,
    pub theta_hat_2: Vec<f64>,
    pub converged: bool,
    #[serde(flatten)]
    pub test: WaldResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoSampleOutput {
    pub command: String,
    pub family: String,
    pub transitions_1: u64,
    pub transitions_2: u64,
    pub variance: String,
    pub results: Vec<TwoSampleRow>,
}

pub fn two_sample_cmd(args: &TwoSampleArgs) -> CliResult<TwoSampleOutput> {
    check_alphas(&args.alpha)?;
    let (id, first) = load(&args.input, &args.family)?;
    let second_input = InputArgs { input: args.input2.clone(), bundle: args.input.bundle };
    let fam2 = FamilyArgs { family: args.family.family.clone(), k: args.family.k.or(match id {
        FamilyId::Greenwood(k) => Some(k),
        _ => Some(first.num_states()),
    }) };
    let (_, second) = load(&second_input, &fam2)?;
    let family = id.build()?;
    let e1 = pooled_counts(&first)?.sums.empirical()?;
    let e2 = pooled_counts(&second)?.sums.empirical()?;
    let mut results = Vec::new();
    for &alpha in &args.alpha {
        let cfg = DpdConfig::with_alpha(alpha);
        let a = estimate(&family, &e1, &cfg)?;
        let b = estimate(&family, &e2, &cfg)?;
        let ra = variance_report(&family, &a.theta_hat, &e1, alpha, args.variance, first.len())?;
        let rb = variance_report(&family, &b.theta_hat, &e2, alpha, args.variance, second.len())?;
        let test = two_sample(&a, &b, &ra, &rb, e1.total, e2.total)?;
        results.push(TwoSampleRow {
            converged: a.converged && b.converged,
            theta_hat_1: a.theta_hat,
            theta_hat_2: b.theta_hat,
            test,
        });
    }
    Ok(TwoSampleOutput {
        command: "two-sample".into(),
        family: id.to_string(),
        transitions_1: e1.total as u64,
        transitions_2: e2.total as u64,
        variance: variance_label(args.variance),
        results,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InfluenceRow {
    pub alpha: f64,
    pub theta: Vec<f64>,
    pub sensitivity: f64,
    pub sensitivity_method: SensitivityMethod,
    /// Maximizing contamination map, 1-based.
    pub worst_target: Vec<usize>,
    pub worst_if: Vec<f64>,
    pub target: Option<Vec<usize>>,
    pub target_if: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InfluenceOutput {
    pub command: String,
    pub family: String,
    /// `model` or `empirical`.
    pub evaluated_at: String,
    pub results: Vec<InfluenceRow>,
}

pub fn influence_cmd(args: &InfluenceArgs) -> CliResult<InfluenceOutput> {
    check_alphas(&args.alpha)?;
    let (id, data) = match &args.input {
        Some(path) => {
            let (id, bundle) = load(&InputArgs { input: path.clone(), bundle: false }, &args.family)?;
            (id, Some(bundle))
        }
        None => (family_id(&args.family.family, args.family.k, None)?, None),
    };
    let family = id.build()?;
    let k = family.num_states();
    let target: Option<Vec<usize>> = if args.target.is_empty() {
        None
    } else {
        if args.target.len() != k || args.target.iter().any(|&t| t == 0 || t > k) {
            return Err(CliError::usage(format!("--target needs {k} states in 1..={k}")));
        }
        Some(args.target.iter().map(|t| t - 1).collect())
    };
    let mut results = Vec::new();
    for &alpha in &args.alpha {
        let (theta, pi, w): (Vec<f64>, DMatrix<f64>, _) = match &data {
            Some(bundle) => {
                let emp = pooled_counts(bundle)?.sums.empirical()?;
                let est = estimate(&family, &emp, &DpdConfig::with_alpha(alpha))?;
                let model = family.matrix(&est.theta_hat)?;
                let mut pi = emp.pi_hat.clone();
                for (i, &seen) in emp.visited.iter().enumerate() {
                    if !seen {
                        pi.row_mut(i).copy_from(&model.row(i));
                    }
                }
                (est.theta_hat, pi, emp.pi_init_hat)
            }
            None => {
                let theta = theta_or_default(&id, &args.theta)?;
                family.check_theta(&theta)?;
                let pi = family.matrix(&theta)?;
                let w = model_stationary(&family, &theta)?;
                (theta, pi, w)
            }
        };
        let rep = sensitivity(&family, &theta, &pi, &w, alpha)?;
        let target_if = match &target {
            Some(t) => Some(influence_function(&family, &theta, &pi, &w, t, alpha)?),
            None => None,
        };
        results.push(InfluenceRow {
            alpha,
            theta,
            sensitivity: rep.sensitivity,
            sensitivity_method: rep.sensitivity_method,
            worst_target: rep.t.iter().map(|t| t + 1).collect(),
            worst_if: rep.if_vector,
            target: target.as_ref().map(|t| t.iter().map(|v| v + 1).collect()),
            target_if,
        });
    }
    Ok(InfluenceOutput {
        command: "influence".into(),
        family: id.to_string(),
        evaluated_at: if data.is_some() { "empirical".into() } else { "model".into() },
        results,
    })
}
