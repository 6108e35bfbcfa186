use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use isac_hbf_experiments::audit::audit;
use isac_hbf_experiments::{run_scenario, Scale, Scenario, ScenarioName, OUTPUT_DIR_ENV};

#[derive(Debug, Parser)]
#[command(name = "hbf-experiments", version, about = "Monte-Carlo runs for hybrid beamforming and waveform design")]
struct Cli {
    /// TOML overlay applied on top of the scale preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; trial i uses seed + i.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Result file (default: $HBF_OUTPUT_DIR/<scenario>.csv, falling back to ./results).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Scale::Desk)]
    scale: Scale,
    /// Maximum concurrent trials (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and write its result files.
    Run {
        #[arg(value_enum)]
        scenario: ScenarioName,
    },
    /// List the available scenarios.
    ListScenarios,
    /// Recompute every stored metric of a result file.
    Audit { file: PathBuf },
}

fn resolve(cli: &Cli, name: ScenarioName) -> anyhow::Result<Scenario> {
    let mut sc = Scenario::preset(name, cli.scale);
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        sc.apply_overlay(&text).with_context(|| format!("applying {}", path.display()))?;
    }
    if let Some(seed) = cli.seed {
        sc.base.seed = seed;
    }
    if let Some(trials) = cli.trials {
        sc.trials = trials;
    }
    Ok(sc)
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    match &cli.command {
        Command::ListScenarios => {
            for name in ScenarioName::ALL {
                println!("{:<16} {}", name.as_str(), name.description());
            }
            Ok(true)
        }
        Command::Run { scenario } => {
            let sc = resolve(cli, *scenario)?;
            let out = match &cli.out {
                Some(p) => p.clone(),
                None => {
                    let dir = std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from("results"), PathBuf::from);
                    dir.join(format!("{}.csv", sc.name))
                }
            };
            if cli.jobs == Some(0) {
                bail!("--jobs must be at least 1");
            }
            let clock = Instant::now();
            let result = run_scenario(&sc, &out, cli.jobs);
            let elapsed = clock.elapsed();
            let output = match result {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("scenario {} failed after {elapsed:.1?}: {e}", sc.name);
                    return Ok(false);
                }
            };
            println!("{:>10} {:>8} {:>7} {:>12} {:>12} {:>12}", "value", "receiver", "failed", "mean_nmse", "stderr", "similarity");
            for row in &output.summary {
                let value = row.value.map_or_else(|| "-".to_string(), |v| v.to_string());
                println!(
                    "{:>10} {:>8} {:>7} {:>12.6} {:>12.6} {:>12.6}",
                    value,
                    format!("{:?}", row.receiver).to_lowercase(),
                    row.failed,
                    row.mean_nmse,
                    row.stderr_nmse,
                    row.mean_similarity
                );
            }
            for f in &output.files {
                println!("wrote {}", f.display());
            }
            println!("{} records in {elapsed:.1?}", output.records.len());
            Ok(true)
        }
        Command::Audit { file } => {
            let report = audit(file).with_context(|| format!("auditing {}", file.display()))?;
            for m in &report.mismatches {
                println!("trial {} value {:?} {:?}: {}", m.trial, m.value, m.receiver, m.detail);
            }
            println!(
                "{}: checked {} records ({} failed trials skipped), max error {:e}",
                if report.passed() { "PASS" } else { "FAIL" },
                report.checked,
                report.failed_trials,
                report.max_error
            );
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
