//! Command-line front end: build models, run dependence checks, run the
//! named scenarios and staged-model commands.
//!
//! Exit codes: 0 when every check or stated value holds, 1 when a property
//! is violated or a stated value is not reproduced, 2 on any error,
//! including an exceeded budget.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use tourdep::config::{build_config, sha256_hex, Budgets, ModelConfig};
use tourdep::depcheck::{
    check_na, check_nlod, check_nod, check_nuod, check_signed_monotone, Limits, DEFAULT_MAX_SUBSET_SIZE,
    DEFAULT_THRESHOLD_BUDGET, DEFAULT_UPPER_SET_PAIR_BUDGET,
};
use tourdep::report::{Inputs, Recorder, Report};
use tourdep::scenario::{run_scenario, RunOptions, ScenarioId, DEFAULT_REPS, DEFAULT_SEED};
use tourdep::staged::{sum_staged, verify_assumption_i, verify_assumption_ii, StagedModel};
use tourdep::{JointDist, OrthantMode, DEFAULT_ATOM_BUDGET};

#[derive(Parser)]
#[command(name = "tourdep", version, about = "Exact negative-dependence checks for tournament score vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the exact law of a model config.
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        budgets: BudgetArgs,
    },
    /// Run dependence checks on a law file.
    Check {
        #[arg(long)]
        dist: PathBuf,
        /// Comma-separated subset of nlod,nuod,nod,na,signed.
        #[arg(long, value_delimiter = ',', default_value = "nod,na")]
        checks: Vec<CheckName>,
        #[command(flatten)]
        budgets: BudgetArgs,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named scenario.
    Scenario {
        #[arg(long, required_unless_present = "list")]
        id: Option<String>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_REPS)]
        reps: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// List the scenario ids and exit.
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        budgets: BudgetArgs,
    },
    /// Staged-model commands.
    Staged {
        #[command(subcommand)]
        action: StagedAction,
    },
}

#[derive(Subcommand)]
enum StagedAction {
    /// Check both assumptions of a staged model.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        budgets: BudgetArgs,
    },
    /// Write the exact law of the staged sum.
    Sum {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        budgets: BudgetArgs,
    },
}

#[derive(Args, Clone, Copy)]
struct BudgetArgs {
    #[arg(long, default_value_t = DEFAULT_ATOM_BUDGET)]
    atom_budget: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_BUDGET)]
    threshold_budget: usize,
    #[arg(long, default_value_t = DEFAULT_UPPER_SET_PAIR_BUDGET)]
    upper_set_budget: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_SUBSET_SIZE)]
    max_subset: usize,
}

impl From<BudgetArgs> for Budgets {
    fn from(b: BudgetArgs) -> Self {
        Budgets {
            atoms: b.atom_budget,
            limits: Limits {
                thresholds: b.threshold_budget,
                upper_set_pairs: b.upper_set_budget,
                max_subset_size: b.max_subset,
            },
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckName {
    Nlod,
    Nuod,
    Nod,
    Na,
    Signed,
}

impl CheckName {
    fn key(self) -> &'static str {
        match self {
            CheckName::Nlod => "nlod",
            CheckName::Nuod => "nuod",
            CheckName::Nod => "nod",
            CheckName::Na => "na",
            CheckName::Signed => "signed",
        }
    }
}

/// An error ending the run with exit code 2.
struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Run = Result<bool, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn write(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| Failure(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn emit(report: &Report, out: Option<&Path>) -> Run {
    write(out, &serde_json::to_string_pretty(report)?)?;
    for c in report.mismatches() {
        eprintln!("mismatch: {}: expected {}, observed {}", c.claim, c.expected, c.observed);
    }
    Ok(report.passed())
}

fn cmd_build(config: &Path, out: &Path, budgets: Budgets) -> Run {
    let cfg = ModelConfig::from_json(&read(config)?)?;
    let built = build_config(&cfg, &budgets)?;
    write(Some(out), &serde_json::to_string_pretty(&built)?)?;
    eprintln!("{}: {} atoms written to {}", cfg.name(), built.law.len(), out.display());
    Ok(true)
}

fn parse_law(text: &str, path: &Path) -> Result<JointDist, Failure> {
    serde_json::from_str(text).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

fn cmd_check(dist: &Path, checks: &[CheckName], budgets: Budgets, out: Option<&Path>) -> Run {
    let text = read(dist)?;
    let d = parse_law(&text, dist)?;
    let limits = budgets.limits;
    let mut rec = Recorder::new();
    let mut all_hold = true;
    for &c in checks {
        let r = rec.time(c.key(), |_| match c {
            CheckName::Nlod => check_nlod(&d, &limits),
            CheckName::Nuod => check_nuod(&d, &limits),
            CheckName::Nod => check_nod(&d, &limits),
            CheckName::Na => check_na(&d, &limits),
            CheckName::Signed => check_signed_monotone(&d, &limits),
        })?;
        all_hold &= r.is_holds();
        rec.check(c.key(), r);
    }
    let inputs = Inputs {
        config_sha256: Some(sha256_hex(text.as_bytes())),
        seed: None,
        reps: None,
        budgets,
        parameters: json!({
            "dist": dist.display().to_string(),
            "checks": checks.iter().map(|c| c.key()).collect::<Vec<_>>(),
        }),
    };
    emit(&rec.finish("check", None, inputs, all_hold), out)
}

fn cmd_scenario(id: &str, seed: u64, reps: u64, budgets: Budgets, out: Option<&Path>) -> Run {
    let id: ScenarioId = id.parse()?;
    let report = run_scenario(
        id,
        &RunOptions {
            seed,
            reps,
            budgets,
        },
    )?;
    emit(&report, out)
}

fn load_staged(path: &Path) -> Result<(StagedModel, String), Failure> {
    let text = read(path)?;
    let m = serde_json::from_str(&text).map_err(|e| Failure(format!("{}: {e}", path.display())))?;
    Ok((m, sha256_hex(text.as_bytes())))
}

fn cmd_staged_verify(model: &Path, budgets: Budgets, out: Option<&Path>) -> Run {
    let (m, hash) = load_staged(model)?;
    let mut rec = Recorder::new();
    let mut ok = true;
    let limits = budgets.limits;
    for (key, mode) in [("assumption_i_lower", OrthantMode::Lower), ("assumption_i_upper", OrthantMode::Upper)] {
        let r = rec.time(key, |_| verify_assumption_i(&m, mode, &limits))?;
        ok &= r.is_holds();
        rec.check(key, r);
    }
    let r = rec.time("assumption_ii", |_| verify_assumption_ii(&m))?;
    ok &= r.is_holds();
    rec.check("assumption_ii", r);
    let inputs = Inputs {
        config_sha256: Some(hash),
        seed: None,
        reps: None,
        budgets,
        parameters: json!({"model": model.display().to_string(), "stages": m.stage_count()}),
    };
    emit(&rec.finish("staged verify", None, inputs, ok), out)
}

fn cmd_staged_sum(model: &Path, budgets: Budgets, out: Option<&Path>) -> Run {
    let (m, _) = load_staged(model)?;
    let d = sum_staged(&m, budgets.atoms)?;
    write(out, &serde_json::to_string_pretty(&d)?)?;
    Ok(true)
}

fn run(cli: Cli) -> Run {
    match cli.command {
        Command::Build { config, out, budgets } => cmd_build(&config, &out, budgets.into()),
        Command::Check {
            dist,
            checks,
            budgets,
            out,
        } => cmd_check(&dist, &checks, budgets.into(), out.as_deref()),
        Command::Scenario {
            id,
            seed,
            reps,
            out,
            list,
            budgets,
        } => {
            if list {
                for id in ScenarioId::ALL {
                    println!("{id}\t{}", id.entry().anchor);
                }
                return Ok(true);
            }
            let id = id.expect("clap requires --id without --list");
            cmd_scenario(&id, seed, reps, budgets.into(), out.as_deref())
        }
        Command::Staged { action } => match action {
            StagedAction::Verify { model, out, budgets } => cmd_staged_verify(&model, budgets.into(), out.as_deref()),
            StagedAction::Sum { model, out, budgets } => cmd_staged_sum(&model, budgets.into(), out.as_deref()),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
