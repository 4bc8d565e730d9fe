//! Command-line front end for the simulator.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{ArgGroup, Parser, ValueEnum};
use sfi_core::harness::{builtin_case, compare_strategies, run_case, write_outputs, CaseSpec};
use sfi_core::newton::{Strategy, TolerancePolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Tight,
    Absolute,
    Relative,
    Adaptive,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Tight => Strategy::Tight,
            StrategyArg::Absolute => Strategy::AbsoluteRelax,
            StrategyArg::Relative => Strategy::RelativeRelax,
            StrategyArg::Adaptive => Strategy::AdaptiveRelax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Parser)]
#[command(name = "sfi", version, about = "Sequential fully implicit reservoir simulation")]
#[command(group(ArgGroup::new("source").required(true).args(["case", "config"])))]
pub struct Args {
    /// Built-in case name.
    #[arg(long)]
    pub case: Option<String>,
    /// JSON case file (SI units).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Inner tolerance strategy; replaces the configured policy with its preset.
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// Quasi-Newton acceleration of the outer loop.
    #[arg(long, value_enum)]
    pub qn: Option<Toggle>,
    /// Grid resolution factor; dtmax is scaled by the same factor.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seed for generated permeability fields.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run all four strategies and write comparison.csv instead of a single run.
    #[arg(long)]
    pub compare: bool,
    /// Print the resolved case as JSON and exit.
    #[arg(long)]
    pub print_config: bool,
}

fn resolve_case(args: &Args) -> Result<CaseSpec, String> {
    let mut case = match (&args.case, &args.config) {
        (Some(name), _) => builtin_case(name).map_err(|e| e.to_string())?,
        (None, Some(path)) => CaseSpec::from_json_file(path).map_err(|e| e.to_string())?,
        (None, None) => unreachable!("clap enforces one source"),
    };
    if let Some(seed) = args.seed {
        case = case.with_seed(seed);
    }
    case = case.scaled(args.scale).map_err(|e| e.to_string())?;
    if let Some(s) = args.strategy {
        let base = case.policy;
        case.policy = TolerancePolicy {
            max_iter_p: base.max_iter_p,
            max_iter_t: base.max_iter_t,
            chop: base.chop,
            ..TolerancePolicy::preset(s.into())
        };
    }
    if let Some(q) = args.qn {
        case.qn.enabled = q == Toggle::On;
    }
    case.validate().map_err(|e| e.to_string())?;
    Ok(case)
}

// a closed pipe (`sfi ... | head`) is not worth a panic
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn execute(args: &Args) -> Result<(), String> {
    let case = resolve_case(args)?;
    if args.print_config {
        emit(&format!("{}\n", case.to_json().map_err(|e| e.to_string())?));
        return Ok(());
    }
    if args.compare {
        let table = compare_strategies(&case, &Strategy::ALL, case.qn.enabled).map_err(|e| e.to_string())?;
        std::fs::create_dir_all(&args.out).map_err(|e| format!("{}: {e}", args.out.display()))?;
        let path = args.out.join("comparison.csv");
        std::fs::write(&path, table.to_csv()).map_err(|e| format!("{}: {e}", path.display()))?;
        emit(&table.to_csv());
        if let Some(bad) = table.rows.iter().find(|r| !r.agrees) {
            return Err(format!(
                "strategy {} disagrees with {} (max saturation difference {:e})",
                bad.strategy.name(),
                table.rows[0].strategy.name(),
                bad.max_sat_diff
            ));
        }
        return Ok(());
    }

    let (built, run) = run_case(&case).map_err(|e| e.to_string())?;
    write_outputs(
        &args.out,
        &case.name,
        case.policy.strategy.name(),
        case.qn.enabled,
        &built.model,
        &run,
    )
    .map_err(|e| e.to_string())?;
    let t = run.report.totals();
    emit(&format!(
        "{}: {} steps, outer {}, pressure {}, transport {}, cuts {}\n",
        case.name, t.accepted_steps, t.outer, t.pressure, t.transport, t.cuts
    ));
    match run.aborted {
        Some(reason) => Err(format!("simulation aborted: {reason}")),
        None => Ok(()),
    }
}

/// Parses `args` (including the program name) and runs. Returns the process
/// exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&args) {
        Ok(()) => 0,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    }
}
