//! Command-line front end: `compile`, `gadget`, `verify`, `decide`, `pipeline`.

mod stages;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::circuits::CzConjugation;
use crate::decider::Rule;
use crate::error::{Error, Result};
use crate::twolocal::ScheduleRule;
use crate::verify::SpectralReport;

pub use stages::{run_pipeline, PipelineOutcome};

/// Exit status when any `bound` report fails.
pub const EXIT_FAILED: i32 = 1;
/// Exit status for input, precondition or solver errors.
pub const EXIT_ERROR: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "glhkit", version, about = "Compile circuits into clock Hamiltonians and check their spectra")]
pub struct Cli {
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build an operator, schedule and guiding state from a circuit.
    Compile(CompileArgs),
    /// Build and check a locality-reduction gadget.
    Gadget(GadgetArgs),
    /// Run the spectral checks for a compiled construction.
    Verify(VerifyArgs),
    /// Decide a serialized instance with the sampled estimator.
    Decide(DecideArgs),
    /// compile, verify, optional excited/gadget stages and decide, with a manifest.
    Pipeline(PipelineArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Construction {
    Kitaev5,
    Kitaev6,
    Twolocal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConjugationArg {
    Plain,
    ZConjugated,
}

impl From<ConjugationArg> for CzConjugation {
    fn from(c: ConjugationArg) -> Self {
        match c {
            ConjugationArg::Plain => CzConjugation::Plain,
            ConjugationArg::ZConjugated => CzConjugation::ZConjugated,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Calibrated,
    Literal,
}

impl From<RuleArg> for ScheduleRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Calibrated => ScheduleRule::Calibrated,
            RuleArg::Literal => ScheduleRule::Literal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DecideRule {
    Min,
    Majority,
}

impl From<DecideRule> for Rule {
    fn from(r: DecideRule) -> Self {
        match r {
            DecideRule::Min => Rule::Min,
            DecideRule::Majority => Rule::Majority,
        }
    }
}

/// Circuit and construction parameters shared by compile, verify and pipeline.
#[derive(Args, Debug, Clone)]
pub struct BuildArgs {
    /// Circuit JSON `{n, r, x, gates}`.
    #[arg(long)]
    pub circuit: PathBuf,
    #[arg(long, value_enum, default_value = "twolocal")]
    pub construction: Construction,
    /// Gap amplification (twolocal) or clock weight (kitaev5/6).
    #[arg(long, default_value_t = 16.0)]
    pub delta: f64,
    /// Pre-idling steps.
    #[arg(long = "M", alias = "m", default_value_t = 4)]
    pub m: usize,
    /// CZ spacing for the two-local construction.
    #[arg(long = "L", alias = "l", default_value_t = 1)]
    pub l: usize,
    #[arg(long, value_enum, default_value = "z-conjugated")]
    pub conjugation: ConjugationArg,
    /// Coefficient schedule for the two-local construction.
    #[arg(long = "schedule", value_enum, default_value = "calibrated")]
    pub rule: RuleArg,
    /// Completeness for the six-local thresholds.
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub alpha: f64,
    /// Soundness for the six-local thresholds.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub beta: f64,
    /// Constant in the soundness threshold.
    #[arg(long, default_value_t = 1.0)]
    pub beta_const: f64,
}

#[derive(Args, Debug)]
pub struct CompileArgs {
    #[command(flatten)]
    pub build: BuildArgs,
    /// Lift to the excited-level construction for level `c`.
    #[arg(long)]
    pub excited: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct GadgetArgs {
    /// Explicit gadget spec JSON.
    #[arg(long, conflicts_with_all = ["decompose", "toy"])]
    pub spec: Option<PathBuf>,
    /// Pauli-string Hamiltonian JSON to decompose.
    #[arg(long, conflicts_with = "toy")]
    pub decompose: Option<PathBuf>,
    /// The built-in two-qubit single-triple spec.
    #[arg(long)]
    pub toy: bool,
    #[arg(long, default_value_t = 0.1)]
    pub mu: f64,
    /// Override the spec's `c_r`.
    #[arg(long)]
    pub cr: Option<f64>,
    #[arg(long, default_value_t = crate::gadget::DEFAULT_KAPPA)]
    pub kappa: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub build: BuildArgs,
    /// Check this serialized operator instead of assembling one.
    #[arg(long)]
    pub operator: Option<PathBuf>,
    /// Append the fitted-constant reports.
    #[arg(long)]
    pub fits: bool,
    /// Also write the reports as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct QpeArgs {
    #[arg(long, default_value_t = 12)]
    pub bits: u32,
    #[arg(long, default_value_t = 0.9)]
    pub p: f64,
    #[arg(long, default_value_t = 25)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "rule", value_enum, default_value = "min")]
    pub decide_rule: DecideRule,
}

#[derive(Args, Debug)]
pub struct DecideArgs {
    /// Instance JSON `{operator, guiding_state, a, b, c, zeta, delta}`.
    #[arg(long)]
    pub instance: PathBuf,
    #[command(flatten)]
    pub qpe: QpeArgs,
    /// Repeat the decision and report the empirical success rate.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    #[command(flatten)]
    pub build: BuildArgs,
    #[arg(long)]
    pub excited: Option<usize>,
    /// Gadget stage input; omitted means no gadget stage.
    #[arg(long)]
    pub gadget_spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    pub mu: f64,
    /// Run the decide stage on the compiled operator.
    #[arg(long)]
    pub decide: bool,
    #[command(flatten)]
    pub qpe: QpeArgs,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

/// What a command prints and whether it counts as failed.
#[derive(Debug, Serialize)]
pub struct Outcome {
    pub value: Value,
    #[serde(skip)]
    pub reports: Vec<SpectralReport>,
    #[serde(skip)]
    pub failed: bool,
}

pub(crate) fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))
}

pub(crate) fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(value)?)?;
    Ok(p)
}

fn human(o: &Outcome) -> String {
    let mut s = String::new();
    for r in &o.reports {
        let tag = match r.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "FIT ",
        };
        let measured = format!("{:.6e}", r.measured);
        s.push_str(&format!(
            "{tag} {:<44} measured {measured:<24} {} ({:.6e})\n",
            r.check, r.claimed.symbolic, r.claimed.value
        ));
    }
    if o.reports.is_empty() {
        s.push_str(&serde_json::to_string_pretty(&o.value).unwrap_or_default());
        s.push('\n');
    }
    s
}

/// Parses `args`, runs the command, prints, and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(o) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&o.value).unwrap_or_default());
            } else {
                print!("{}", human(&o));
            }
            if o.failed {
                EXIT_FAILED
            } else {
                0
            }
        }
        Err(e) => {
            if cli.json {
                println!("{}", serde_json::json!({ "error": e.to_string() }));
            }
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn execute(cmd: &Command) -> Result<Outcome> {
    match cmd {
        Command::Compile(a) => stages::compile(a),
        Command::Gadget(a) => stages::gadget(a),
        Command::Verify(a) => stages::verify(a),
        Command::Decide(a) => stages::decide(a),
        Command::Pipeline(a) => {
            let o = run_pipeline(a)?;
            Ok(Outcome {
                value: serde_json::to_value(&o.manifest)?,
                failed: o.failed,
                reports: o.reports,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn command_tree_is_consistent() {
        Cli::command().debug_assert();
    }
}
