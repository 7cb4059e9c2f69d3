use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use plaplab::{run_experiment, ExperimentConfig, Format, RunError, Verb};

/// Exit codes: 0 success, 2 usage or invalid config, 3 run error, 4 a stage failed or an
/// invariant suite did not pass.
#[derive(Parser, Debug)]
#[command(
    name = "plaplab",
    version,
    about = "Discrete p-Laplace experiments: solves, k-sweeps, blow-up, Whitney and weight suites"
)]
struct Cli {
    #[arg(value_enum, required_unless_present = "print_schema")]
    verb: Option<Verb>,
    /// Experiment config (JSON); the built-in default is the blow-up setup.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `rng_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "csv,json,svg")]
    format: Vec<Format>,
    /// Worker threads for per-cell kernels (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Print the config JSON schema and exit.
    #[arg(long)]
    print_schema: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_schema {
        print!("{}", plaplab::config::schema_json());
        return ExitCode::SUCCESS;
    }
    let verb = cli.verb.expect("clap requires a verb");
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let mut config = match &cli.config {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            };
            match ExperimentConfig::from_json(&text) {
                Ok(mut c) => {
                    c.resolve_paths(path.parent().unwrap_or(std::path::Path::new(".")));
                    c
                }
                Err(e) => {
                    eprintln!("{}", serde_json::json!({ "error": "parse", "path": path, "message": e.to_string() }));
                    return ExitCode::from(2);
                }
            }
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.rng_seed = seed;
    }
    let out =
        cli.out.clone().or_else(|| config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out").join(verb.name()));
    match run_experiment(&config, verb, &cli.format, &out) {
        Ok((manifest, summary)) => {
            println!("{summary}");
            println!("{} files in {}", manifest.files.len(), out.display());
            if manifest.complete && manifest.invariants_passed {
                ExitCode::SUCCESS
            } else {
                for f in &manifest.failures {
                    eprintln!("error: {f}");
                }
                if manifest.complete {
                    eprintln!("error: an invariant suite failed; see the reports in {}", out.display());
                }
                ExitCode::from(4)
            }
        }
        Err(RunError::Invalid(violations)) => {
            eprintln!("{}", serde_json::json!({ "error": "invalid config", "violations": violations }));
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
