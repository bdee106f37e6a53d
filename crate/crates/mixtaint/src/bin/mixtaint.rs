use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mixtaint::{
    build_index, cluster_addresses, evaluate_suite, load_calibration, load_cases, load_chain,
    load_json, render_report, run_method, save_chain, save_json, ChainIndex, ClusteringOptions,
    Method, MixerScenario, ReportFormat, SampleCase, TimeSpan, WindowParams,
};

#[derive(Parser)]
#[command(
    name = "mixtaint",
    version,
    about = "Address-level taint analysis for coins passed through mixer services"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ClusterRule {
    Input,
    Output,
    Both,
}

impl FromStr for ClusterRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "input" => Ok(ClusterRule::Input),
            "output" => Ok(ClusterRule::Output),
            "both" => Ok(ClusterRule::Both),
            _ => Err(format!("unknown rule `{s}` (expected input, output or both)")),
        }
    }
}

#[derive(clap::Args)]
struct WindowArgs {
    /// Days of history before the deposit available to propagation.
    #[arg(long, default_value_t = 5)]
    lookback_days: u32,
    /// Days after the deposit in which outputs are counted.
    #[arg(long, default_value_t = 3)]
    horizon_days: u32,
    /// Days walked backwards from a known prior withdrawal (m4).
    #[arg(long, default_value_t = 3)]
    backtrace_days: u32,
}

impl WindowArgs {
    fn params(&self) -> WindowParams {
        WindowParams {
            lookback_days: self.lookback_days,
            horizon_days: self.horizon_days,
            backtrace_days: self.backtrace_days,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic chain and ground truth from a scenario file.
    Simulate {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Chain JSONL file to write.
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth JSON file to write.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Overrides the scenario's RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one method on one case and emit the taint result as JSON.
    Taint {
        #[arg(long)]
        chain: PathBuf,
        /// Case JSON file (one case or an array).
        #[arg(long)]
        case: PathBuf,
        /// Selects a case by id when the file holds several.
        #[arg(long)]
        case_id: Option<String>,
        #[arg(long, value_parser = Method::from_str)]
        method: Method,
        #[command(flatten)]
        window: WindowArgs,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a service's filter calibration to a stored taint result.
    Filter {
        #[arg(long)]
        chain: PathBuf,
        /// Taint result JSON produced by `taint`.
        #[arg(long)]
        result: PathBuf,
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        case_id: Option<String>,
        /// Calibration JSON file.
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a case suite end to end and render the report.
    Evaluate {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "table", value_parser = ReportFormat::from_str)]
        format: ReportFormat,
    },
    /// Dump address partitions for a time span.
    Cluster {
        #[arg(long)]
        chain: PathBuf,
        /// Which sharing rule to partition by.
        #[arg(long, default_value = "both", value_parser = ClusterRule::from_str)]
        rule: ClusterRule,
        /// Inclusive span start; unbounded when omitted.
        #[arg(long)]
        start_time: Option<i64>,
        /// Inclusive span end; unbounded when omitted.
        #[arg(long)]
        end_time: Option<i64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            scenario,
            out,
            truth,
            seed,
        } => {
            let mut scenario: MixerScenario = load_json(&scenario)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            let (txs, ground_truth) = mixtaint::simulate(&scenario)?;
            save_chain(&out, &txs)?;
            if let Some(truth_path) = truth {
                save_json(&truth_path, &ground_truth)?;
            }
            Ok(())
        }
        Command::Taint {
            chain,
            case,
            case_id,
            method,
            window,
            out,
        } => {
            let index = load_index(&chain)?;
            let case = pick_case(&case, case_id.as_deref())?;
            let result = run_method(&index, &case, method, window.params())?;
            emit_json(out.as_deref(), &result)
        }
        Command::Filter {
            chain,
            result,
            case,
            case_id,
            calibration,
            out,
        } => {
            let index = load_index(&chain)?;
            let case = pick_case(&case, case_id.as_deref())?;
            let calibrations = load_calibration(&calibration)?;
            let cal = calibrations
                .get(&case.service)
                .with_context(|| format!("no calibration for service `{}`", case.service))?;
            let taint_result: mixtaint::TaintResult = load_json(&result)?;
            let resolved =
                mixtaint::resolve_case(&index, &case, WindowParams::default())?;
            let outcome =
                mixtaint::apply_filters(&index, &taint_result, resolved.deposit_value, cal)?;
            emit_json(out.as_deref(), &outcome)
        }
        Command::Evaluate {
            chain,
            case,
            calibration,
            window,
            out,
            format,
        } => {
            let index = load_index(&chain)?;
            let cases = load_cases(&case)?;
            let calibrations = load_calibration(&calibration)?;
            let reports = evaluate_suite(&index, &cases, &calibrations, window.params())?;
            emit_text(out.as_deref(), &render_report(&reports, format))
        }
        Command::Cluster {
            chain,
            rule,
            start_time,
            end_time,
            out,
        } => {
            let index = load_index(&chain)?;
            let span = TimeSpan::new(
                start_time.unwrap_or(i64::MIN),
                end_time.unwrap_or(i64::MAX),
            );
            let mut text = String::new();
            if matches!(rule, ClusterRule::Input | ClusterRule::Both) {
                text.push_str("# input-sharing\n");
                text.push_str(&cluster_addresses(&index, span, ClusteringOptions::M2).dump());
            }
            if matches!(rule, ClusterRule::Output | ClusterRule::Both) {
                text.push_str("# output-sharing\n");
                let opts = ClusteringOptions {
                    input_sharing: false,
                    output_sharing: true,
                };
                text.push_str(&cluster_addresses(&index, span, opts).dump());
            }
            emit_text(out.as_deref(), &text)
        }
    }
}

fn load_index(path: &Path) -> Result<ChainIndex> {
    let txs = load_chain(path)?;
    build_index(txs).with_context(|| format!("invalid chain in {}", path.display()))
}

fn pick_case(path: &Path, case_id: Option<&str>) -> Result<SampleCase> {
    let cases = load_cases(path)?;
    match case_id {
        Some(id) => {
            let ids: BTreeSet<&str> = cases.iter().map(|c| c.id.as_str()).collect();
            cases
                .iter()
                .find(|c| c.id == id)
                .cloned()
                .with_context(|| format!("no case with id `{id}` (available: {ids:?})"))
        }
        None => {
            if cases.len() != 1 {
                bail!(
                    "{} holds {} cases; pass --case-id to pick one",
                    path.display(),
                    cases.len()
                );
            }
            Ok(cases.into_iter().next().unwrap())
        }
    }
}

fn emit_json<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => Ok(save_json(path, value)?),
        None => {
            let mut text = serde_json::to_string_pretty(value)?;
            text.push('\n');
            print!("{text}");
            Ok(())
        }
    }
}

fn emit_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text)
                .with_context(|| format!("failed to write {}", path.display()))?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
