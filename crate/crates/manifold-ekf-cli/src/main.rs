//! Attitude-benchmark driver: runs the two-direction attitude filter in its
//! update variants over seeded Monte Carlo batches, writes per-step CSV
//! records and prints per-variant summaries.
//!
//! Exit codes: 0 success; 1 I/O error; 2 configuration error; 3 at least one
//! run diverged (output is still written).

use clap::Parser;
use manifold_ekf_cli::{
    parse_config, render_json, render_text, resolve_variants, total_failures, write_csv_file,
    CliError, Overrides, EXIT_DIVERGED, EXIT_OK,
};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "manifold-ekf",
    about = "Monte Carlo benchmark for an attitude EKF with parallel-transported covariances",
    long_about = None
)]
struct Args {
    /// JSON config file; flags override its fields.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Comma-separated variants: baseline, true-output, measurement,
    /// naive-posterior, iterated.
    #[arg(long, value_name = "NAME[,NAME...]", value_delimiter = ',')]
    variant: Option<Vec<String>>,

    /// Iteration count applied to every `iterated` variant.
    #[arg(long, value_name = "N")]
    iters: Option<usize>,

    /// Number of Monte Carlo runs (paired across variants).
    #[arg(long, value_name = "N")]
    runs: Option<u64>,

    /// Base RNG seed; run k derives its own stream from (seed, k).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Simulated duration in seconds.
    #[arg(long, value_name = "S")]
    duration: Option<f64>,

    /// Write per-step records as CSV to this path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Print the summary as JSON (with the resolved config echoed).
    #[arg(long)]
    json: bool,

    /// Permit the true-output variant, which reads the simulated truth and
    /// exists for diagnostics only.
    #[arg(long)]
    allow_true_output: bool,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MANIFOLD_EKF_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::Config(format!(
            "MANIFOLD_EKF_THREADS must be a non-negative integer (0 = auto), got '{raw}'"
        ))
    })?;
    if n == 0 {
        return Ok(()); // auto: rayon picks the core count
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn run(args: &Args) -> Result<i32, CliError> {
    configure_threads()?;
    let overrides = Overrides {
        variants: args.variant.clone(),
        iters: args.iters,
        runs: args.runs,
        seed: args.seed,
        duration: args.duration,
        out: args.out.clone(),
        allow_true_output: args.allow_true_output,
    };
    let cfg = parse_config(args.config.as_deref(), &overrides)?;
    let variants = resolve_variants(&cfg, args.allow_true_output)?;

    log::info!(
        "running {} x {} variants, {} steps each",
        cfg.runs,
        variants.len(),
        cfg.scenario.steps()
    );
    let batch = manifold_ekf::sim::monte_carlo(&cfg.scenario, &variants, cfg.runs)
        .map_err(|e| CliError::Config(e.to_string()))?;

    if let Some(path) = &cfg.output_path {
        write_csv_file(&batch.runs, path)?;
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&render_json(&cfg, &batch)).expect("summary serializes"));
    } else {
        print!("{}", render_text(&cfg, &batch));
    }

    let failures = total_failures(&batch);
    if failures > 0 {
        for run in batch.runs.iter().filter(|r| r.failure.is_some()) {
            eprintln!(
                "run {} [{}] diverged: {}",
                run.run_id,
                run.variant.label(),
                run.failure.as_deref().unwrap_or("")
            );
        }
        return Ok(EXIT_DIVERGED);
    }
    Ok(EXIT_OK)
}

fn main() {
    env_logger::init();
    let args = Args::parse();
    match run(&args) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("{err}");
            std::process::exit(err.exit_code());
        }
    }
}
