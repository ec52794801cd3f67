//! Scenario runner: `sgmech <simulate|verify|convergence> --config <file>`
//! with optional `--out <dir>` and `--seeds a..b` overrides.
//!
//! Exit codes: 0 when every verdict passes, 1 when any seed fails or an
//! integration aborts, 2 on config errors.

use std::path::PathBuf;
use std::process::ExitCode;

use sgmech::error::Error;
use sgmech::scenario::{parse_seeds, run, Experiment, ScenarioConfig};

const USAGE: &str = "\
usage: sgmech <command> --config <file> [--out <dir>] [--seeds a..b]

commands:
  simulate      integrate the configured system per seed and dump path CSVs
  verify        run the configured verification experiment
                (stationarity | noether | fundamental-lemma | hp-equivalence)
  convergence   deterministic-limit step-size sweep with an order fit

exit codes: 0 all verdicts pass, 1 any verdict fails, 2 config error
";

struct Args {
    command: String,
    config: PathBuf,
    out: Option<PathBuf>,
    seeds: Option<Vec<u64>>,
}

fn parse_args() -> Result<Args, String> {
    let mut argv = std::env::args().skip(1);
    let command = argv.next().ok_or_else(|| USAGE.to_string())?;
    if command == "--help" || command == "-h" || command == "help" {
        return Err(USAGE.to_string());
    }
    let mut config = None;
    let mut out = None;
    let mut seeds = None;
    while let Some(flag) = argv.next() {
        match flag.as_str() {
            "--config" => {
                config = Some(PathBuf::from(
                    argv.next().ok_or("--config needs a file argument")?,
                ))
            }
            "--out" => {
                out = Some(PathBuf::from(
                    argv.next().ok_or("--out needs a directory argument")?,
                ))
            }
            "--seeds" => {
                let spec = argv.next().ok_or("--seeds needs a range argument")?;
                seeds = Some(parse_seeds(&spec).map_err(|e| e.to_string())?);
            }
            other => return Err(format!("unknown flag `{other}`\n\n{USAGE}")),
        }
    }
    Ok(Args {
        command,
        config: config.ok_or(format!("--config is required\n\n{USAGE}"))?,
        out,
        seeds,
    })
}

fn command_accepts(command: &str, experiment: Experiment) -> bool {
    match command {
        "simulate" => experiment == Experiment::Simulate,
        "convergence" => experiment == Experiment::Convergence,
        "verify" => matches!(
            experiment,
            Experiment::Stationarity
                | Experiment::Noether
                | Experiment::FundamentalLemma
                | Experiment::HpEquivalence
        ),
        _ => false,
    }
}

fn main() -> ExitCode {
    let args = match parse_args() {
        Ok(args) => args,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    if !["simulate", "verify", "convergence"].contains(&args.command.as_str()) {
        eprintln!("unknown command `{}`\n\n{USAGE}", args.command);
        return ExitCode::from(2);
    }

    let mut config = match ScenarioConfig::load(&args.config) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Some(out) = args.out {
        config.out_dir = out;
    }
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    if !command_accepts(&args.command, config.experiment) {
        eprintln!(
            "config error: experiment `{}` does not belong to command `{}`",
            config.experiment.name(),
            args.command
        );
        return ExitCode::from(2);
    }

    match run(&config) {
        Ok(manifest) => {
            for outcome in &manifest.outcomes {
                println!(
                    "seed {:>4}  {}  {}",
                    outcome.seed,
                    if outcome.passed { "pass" } else { "FAIL" },
                    outcome.summary
                );
            }
            println!(
                "{}: {} -> {}",
                manifest.experiment,
                manifest.summary,
                config.out_dir.display()
            );
            if manifest.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ (Error::Config(_) | Error::InvalidArgument(_))) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::from(1)
        }
    }
}
