//! Command-line front end for the `mdpde` crate.

pub mod args;
pub mod commands;
pub mod credit;
pub mod error;
pub mod experiments;
pub mod input;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::Parser;
use serde::Serialize;

use args::{Cli, Command, Format, OutputArgs};
use error::{CliError, CliResult, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_OK};

/// Rendered output of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub body: String,
    /// False when some fit stopped before meeting its tolerance.
    pub converged: bool,
}

fn json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn csv_rows<T: Serialize>(rows: &[T]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Output(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
}

fn only_json(out: &OutputArgs, command: &str) -> CliResult<()> {
    match out.format {
        None | Some(Format::Json) => Ok(()),
        Some(f) => Err(CliError::usage(format!("{command} writes JSON only, not {f:?}"))),
    }
}

/// Runs a parsed command and renders its output.
pub fn execute(cli: &Cli) -> CliResult<Outcome> {
    let done = |body: String| Outcome { body, converged: true };
    match &cli.command {
        Command::Simulate(a) => {
            let (out, seqs) = commands::simulate(a)?;
            match a.out.format {
                None | Some(Format::Json) => Ok(done(json(&out)?)),
                Some(Format::Text) if seqs.len() == 1 => Ok(done(seqs[0].to_text())),
                Some(Format::Text) => Ok(done(mdpde::SequenceBundle::new(seqs)?.to_text())),
                Some(Format::Csv) => Err(CliError::usage("simulate writes json or text")),
            }
        }
        Command::Estimate(a) => {
            only_json(&a.out, "estimate")?;
            let out = commands::estimate_cmd(a)?;
            Ok(Outcome { converged: out.converged(), body: json(&out)? })
        }
        Command::Wald(a) => {
            only_json(&a.out, "wald")?;
            let out = commands::wald_cmd(a)?;
            Ok(Outcome { converged: out.results.iter().all(|r| r.converged), body: json(&out)? })
        }
        Command::TwoSample(a) => {
            only_json(&a.out, "two-sample")?;
            let out = commands::two_sample_cmd(a)?;
            Ok(Outcome { converged: out.results.iter().all(|r| r.converged), body: json(&out)? })
        }
        Command::Influence(a) => {
            only_json(&a.out, "influence")?;
            Ok(done(json(&commands::influence_cmd(a)?)?))
        }
        Command::AreTable(a) => {
            let table = experiments::are_table()?;
            match a.out.format {
                None | Some(Format::Csv) => Ok(done(table.to_csv())),
                Some(Format::Json) => Ok(done(json(&table)?)),
                Some(Format::Text) => Err(CliError::usage("are-table writes csv or json")),
            }
        }
        Command::MseExperiment(a) => {
            let rows = experiments::mse_experiment(&experiments::MseConfig::from_args(a)?)?;
            match a.out.format {
                None | Some(Format::Csv) => Ok(done(csv_rows(&rows)?)),
                Some(Format::Json) => Ok(done(json(&serde_json::json!({ "command": "mse-experiment", "rows": rows }))?)),
                Some(Format::Text) => Err(CliError::usage("mse-experiment writes csv or json")),
            }
        }
        Command::Credit(a) => {
            let rows = match (&a.input, a.packaged_credit) {
                (Some(path), _) => credit::parse_credit(&input::read_text(path)?, path)?,
                (None, true) => credit::parse_credit(credit::PACKAGED, Path::new("credit_2018.csv"))?,
                (None, false) => return Err(CliError::usage("credit needs --input or --packaged-credit")),
            };
            let out = credit::fit_credit(&rows, &a.alpha)?;
            let body = match a.out.format {
                None | Some(Format::Json) => json(&out)?,
                Some(Format::Csv) => out.to_csv()?,
                Some(Format::Text) => return Err(CliError::usage("credit writes json or csv")),
            };
            Ok(Outcome { converged: out.converged(), body })
        }
    }
}

fn output_args(cmd: &Command) -> &OutputArgs {
    match cmd {
        Command::Simulate(a) => &a.out,
        Command::Estimate(a) => &a.out,
        Command::Wald(a) => &a.out,
        Command::TwoSample(a) => &a.out,
        Command::Influence(a) => &a.out,
        Command::AreTable(a) => &a.out,
        Command::MseExperiment(a) => &a.out,
        Command::Credit(a) => &a.out,
    }
}

/// Parses `args` (program name first), runs the command and writes its
/// output to `--output` or `stdout`. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { stderr.write_all(text.as_bytes()) } else { stdout.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = execute(&cli).and_then(|outcome| {
        match &output_args(&cli.command).output {
            Some(path) => std::fs::write(path, &outcome.body).map_err(|source| CliError::Io { path: path.clone(), source })?,
            None => stdout.write_all(outcome.body.as_bytes()).map_err(|e| CliError::Output(e.to_string()))?,
        }
        Ok(outcome.converged)
    });
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            let _ = writeln!(stderr, "warning: at least one fit did not converge");
            EXIT_NOT_CONVERGED
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INPUT
        }
    }
}
