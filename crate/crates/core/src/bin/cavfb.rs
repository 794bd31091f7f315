// cavfb: run cavity feedback scenarios from a TOML config.
//
//   cavfb validate --config scenarios/quadrature_steady.toml
//   cavfb run --config scenarios/quadrature_steady.toml --out out/
//   cavfb compare --config scenarios/two_mode_compare.toml --tolerance 0.05
//
// Exit codes: 0 ok, 1 i/o, 2 config, 3 unphysical, 4 numerical, 5 threshold.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cavity_feedback::scenario::{parse_config, run, sha256_hex, RunOptions, Scenario, ScenarioError};

#[derive(Parser, Debug)]
#[command(name = "cavfb", version, about = "Cavity feedback scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the mode selected in the config.
    Run(Common),
    /// Parse and validate the config without computing anything.
    Validate(Common),
    /// Compare a two-mode loop with its reduced master equation.
    Compare(Common),
    /// Output and in-loop spectra of the linearized model.
    Spectra(Common),
    /// Check the scheme's generators for Lindblad form.
    LindbladCheck(Common),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Base seed for trajectory ensembles.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    /// Pass threshold on the trace distance in compare mode.
    #[arg(long, value_name = "X")]
    tolerance: Option<f64>,
}

fn execute(cmd: Command) -> Result<(), ScenarioError> {
    let (args, forced, dry) = match cmd {
        Command::Run(a) => (a, None, false),
        Command::Validate(a) => (a, None, true),
        Command::Compare(a) => (a, Some("compare"), false),
        Command::Spectra(a) => (a, Some("spectrum"), false),
        Command::LindbladCheck(a) => (a, Some("lindblad-check"), false),
    };
    let text = std::fs::read_to_string(&args.config)?;
    let mut config = parse_config(&text)?;
    if let Some(kind) = forced {
        config.force_mode(kind);
    }
    config.apply_overrides(args.seed, args.tolerance);
    let scenario = Scenario::from_config(config, &sha256_hex(&text))?;
    if dry {
        println!(
            "ok: {} scheme, {} mode, config_sha256={}",
            scenario.config.scheme.kind(),
            scenario.mode().kind(),
            scenario.config_sha256
        );
        return Ok(());
    }
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| ScenarioError::Io(std::io::Error::other(e)))?;
    }
    let summary = run(&scenario, &RunOptions::new(&args.out))?;
    println!(
        "{}",
        serde_json::to_string_pretty(&summary.summary["results"]).unwrap_or_default()
    );
    eprintln!(
        "wrote {} files to {} in {:.2} s",
        summary.files.len(),
        args.out.display(),
        summary.wall_seconds
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
