//! `gdo`: run oscillator scenarios and write `report.json` plus CSVs.

mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use gdo_core::schedule::Preset;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "gdo", about = "Exact states, cyclic states and geometric phases of driven oscillators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Multiply every tolerance by this factor.
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
    },
    /// List the built-in presets and their constants.
    ListPresets,
    /// Print the version.
    Version,
}

fn list_presets() {
    println!("{:<7}{:<28}{:<24}description", "preset", "required", "optional");
    for p in Preset::ALL {
        println!("{:<7}{:<28}{:<24}{}", p.to_string(), p.required().join(","), p.optional().join(","), p.description());
    }
}

fn run(config: PathBuf, out: Option<PathBuf>, tol_scale: f64) -> ExitCode {
    if !(tol_scale > 0.0 && tol_scale.is_finite()) {
        eprintln!("error: --tol-scale must be positive, got {tol_scale}");
        return ExitCode::from(EXIT_USAGE);
    }
    let scenario = match config::load(&config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let out_dir = out.or_else(|| scenario.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let tol = scenario.tolerances.scaled(tol_scale);
    let started = Instant::now();
    let outcome = match runner::run(&scenario, &out_dir, &tol) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("pipeline error: {e}");
            return ExitCode::from(EXIT_FAIL);
        }
    };
    let mut report = outcome.report;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    report["meta"] = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": config.display().to_string(),
        "tol_scale": tol_scale,
        "unix_time": stamp,
        "elapsed_s": started.elapsed().as_secs_f64(),
    });
    let path = outcome.out_dir.join("report.json");
    let text = serde_json::to_string_pretty(&report).expect("report is valid JSON");
    if let Err(e) = std::fs::write(&path, text + "\n") {
        eprintln!("error: cannot write {}: {e}", path.display());
        return ExitCode::from(EXIT_FAIL);
    }
    if let Some(failures) = report["failures"].as_array() {
        for f in failures {
            eprintln!(
                "FAIL [{}] {}: measured {} allowed {}",
                f["module"].as_str().unwrap_or("?"),
                f["invariant"].as_str().unwrap_or("?"),
                f["measured"],
                f["allowed"]
            );
        }
    }
    println!("{}: {} ({})", scenario.name, if outcome.passed { "pass" } else { "fail" }, path.display());
    if outcome.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { config, out, tol_scale } => run(config, out, tol_scale),
        Command::ListPresets => {
            list_presets();
            ExitCode::SUCCESS
        }
        Command::Version => {
            println!("gdo {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
    }
}
