//! Load a scenario file and run it, as the `cavfb` binary does.
//!
//! cargo run --example run_scenario -- scenarios/quadrature_steady.toml out/

use std::path::PathBuf;

use cavity_feedback::scenario::{parse_scenario, run, RunOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/quadrature_steady.toml").to_string());
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    let text = std::fs::read_to_string(&path).expect("readable scenario");
    let scenario = match parse_scenario(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    };
    match run(&scenario, &RunOptions::new(&out)) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary.summary["results"]).unwrap());
            for f in &summary.files {
                println!("wrote {}", f.display());
            }
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
