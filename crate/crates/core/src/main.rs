use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use convlab::config::{AnalysisConfig, OutputSpec};
use convlab::report::{run_analyze, run_cutlocus, write_outputs};
use convlab::suite::run_check_theorems;
use convlab::{par, Error};

#[derive(Parser)]
#[command(name = "convlab", version, about = "Convexity and injectivity radii of Riemannian manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Radii, conditions, balls and cut points at the configured points.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        /// Write here instead of the configured outputs (`.csv` for CSV).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Runs the acceptance criteria on the built-in models.
    CheckTheorems {
        /// Restrict to these models (repeatable); all when omitted.
        #[arg(long = "model")]
        models: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cut points along evenly spread directions from one point.
    Cutlocus {
        #[arg(long)]
        model: String,
        /// Comma-separated chart coordinates.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Model parameters as JSON.
        #[arg(long)]
        params: Option<String>,
        #[arg(long, default_value_t = 64)]
        dirs: usize,
        #[arg(long, default_value_t = 10.0)]
        bound: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> convlab::Result<()> {
    match cli.command {
        Command::Analyze { config, out, seed } => {
            let mut cfg = AnalysisConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if out.is_none() && cfg.outputs.is_empty() {
                return Err(Error::Config("no outputs configured; pass --out".into()));
            }
            let doc = run_analyze(&cfg)?;
            write_outputs(&doc, &cfg, out.as_deref())
        }
        Command::CheckTheorems { models, seed, out } => {
            let doc = run_check_theorems(&models, seed, |c| println!("{}", c.line()))?;
            let suite = doc.suite.as_ref().expect("suite ran");
            println!("all criteria passed: {}", suite.all_passed);
            match out {
                Some(path) => doc.write(&OutputSpec::from_path(&path)),
                None => Ok(()),
            }
        }
        Command::Cutlocus { model, point, out, params, dirs, bound, seed } => {
            let params: Value = match params {
                Some(text) => serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad --params: {e}")))?,
                None => Value::Null,
            };
            let doc = run_cutlocus(&model, &params, &point, dirs, bound, seed)?;
            doc.write(&OutputSpec::from_path(&out))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("CONVLAB_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        par::init_threads(n);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("convlab: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
