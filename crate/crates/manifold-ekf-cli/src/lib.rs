//! Configuration, CSV emission and summaries for the attitude-benchmark CLI.
//!
//! Precedence for every setting is flags > config file > built-in benchmark
//! defaults. The config is one JSON document with unknown keys rejected;
//! [`RunConfigFile::default`] documents the defaults. The binary resolves the
//! config, runs the Monte Carlo batch, writes CSV when asked and prints a
//! per-variant summary (text, or JSON with the resolved config echoed for
//! round-tripping).

use manifold_ekf::filter::{FilterVariant, UpdateVariant};
use manifold_ekf::sim::{FilterRun, McBatch, ScenarioConfig, VariantSummary, TRANSIENT_WINDOW};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
/// I/O failure (unreadable config, unwritable output).
pub const EXIT_IO: i32 = 1;
/// Invalid configuration: malformed JSON, unknown keys, bad field values,
/// unknown variant names, or a gated variant without its opt-in flag.
pub const EXIT_CONFIG: i32 = 2;
/// The batch ran, output was written, but at least one run diverged.
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

/// One requested filter variant. `iters` matters only for `iterated`;
/// `geometric_reset` defaults to false for `baseline` and true otherwise,
/// matching the comparison the benchmark is built around (classic error-state
/// EKF against the transported variants).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub name: String,
    #[serde(default)]
    pub iters: usize,
    #[serde(default)]
    pub geometric_reset: Option<bool>,
}

impl VariantSpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            iters: 0,
            geometric_reset: None,
        }
    }

    pub fn resolve(&self) -> Result<FilterVariant, CliError> {
        let update = match self.name.as_str() {
            "baseline" => UpdateVariant::Baseline,
            "true-output" => UpdateVariant::TrueOutput,
            "measurement" => UpdateVariant::Measurement,
            "naive-posterior" => UpdateVariant::NaivePosterior,
            "iterated" => UpdateVariant::Iterated(self.iters),
            other => {
                return Err(CliError::Config(format!(
                    "unknown variant '{other}' (expected baseline, true-output, \
                     measurement, naive-posterior or iterated)"
                )))
            }
        };
        let geometric_reset = self
            .geometric_reset
            .unwrap_or(update != UpdateVariant::Baseline);
        Ok(FilterVariant {
            update,
            geometric_reset,
        })
    }
}

/// The whole JSON config document. Every field is optional; absent fields take
/// the benchmark defaults (`ScenarioConfig::default`, one baseline variant,
/// one run, no CSV file).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub scenario: ScenarioConfig,
    pub variants: Vec<VariantSpec>,
    pub runs: u64,
    pub output_path: Option<PathBuf>,
}

impl Default for RunConfigFile {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            variants: vec![VariantSpec::named("baseline")],
            runs: 1,
            output_path: None,
        }
    }
}

/// Command-line overrides applied on top of the file (or the defaults).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub variants: Option<Vec<String>>,
    pub iters: Option<usize>,
    pub runs: Option<u64>,
    pub seed: Option<u64>,
    pub duration: Option<f64>,
    pub out: Option<PathBuf>,
    pub allow_true_output: bool,
}

/// Reads `path` (when given), overlays `overrides`, validates. The returned
/// config is fully resolved: serializing it and parsing that back yields the
/// same config.
pub fn parse_config(path: Option<&Path>, overrides: &Overrides) -> Result<RunConfigFile, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<RunConfigFile>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => RunConfigFile::default(),
    };
    if let Some(names) = &overrides.variants {
        cfg.variants = names.iter().map(|n| VariantSpec::named(n)).collect();
    }
    if let Some(iters) = overrides.iters {
        for spec in cfg.variants.iter_mut().filter(|s| s.name == "iterated") {
            spec.iters = iters;
        }
    }
    if let Some(runs) = overrides.runs {
        cfg.runs = runs;
    }
    if let Some(seed) = overrides.seed {
        cfg.scenario.seed = seed;
    }
    if let Some(duration) = overrides.duration {
        cfg.scenario.duration = duration;
    }
    if let Some(out) = &overrides.out {
        cfg.output_path = Some(out.clone());
    }

    cfg.scenario
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    if cfg.runs == 0 {
        return Err(CliError::Config("runs must be at least 1".to_string()));
    }
    if cfg.variants.is_empty() {
        return Err(CliError::Config("variants must not be empty".to_string()));
    }
    resolve_variants(&cfg, overrides.allow_true_output)?;
    Ok(cfg)
}

/// Maps the specs to filter variants, enforcing the true-output gate: that
/// variant peeks at the simulation truth and is for diagnostics only.
pub fn resolve_variants(
    cfg: &RunConfigFile,
    allow_true_output: bool,
) -> Result<Vec<FilterVariant>, CliError> {
    let variants = cfg
        .variants
        .iter()
        .map(|s| s.resolve())
        .collect::<Result<Vec<_>, _>>()?;
    if !allow_true_output
        && variants
            .iter()
            .any(|v| v.update == UpdateVariant::TrueOutput)
    {
        return Err(CliError::Config(
            "the true-output variant reads the simulated truth; pass --allow-true-output \
             to enable it"
                .to_string(),
        ));
    }
    Ok(variants)
}

/// 17 significant digits: every f64 round-trips exactly through this form.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `t,variant,run_id,attitude_error_rad,energy` rows ordered by
/// (variant label, run id, time).
pub fn emit_csv<W: Write>(runs: &[FilterRun], mut w: W) -> std::io::Result<()> {
    let mut order: Vec<&FilterRun> = runs.iter().collect();
    order.sort_by(|a, b| {
        (a.variant.label(), a.run_id).cmp(&(b.variant.label(), b.run_id))
    });
    writeln!(w, "t,variant,run_id,attitude_error_rad,energy")?;
    for run in order {
        let label = run.variant.label();
        for rec in &run.records {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(rec.t),
                label,
                run.run_id,
                fmt_f64(rec.attitude_error),
                fmt_f64(rec.energy)
            )?;
        }
    }
    Ok(())
}

pub fn write_csv_file(runs: &[FilterRun], path: &Path) -> Result<(), CliError> {
    let file = std::fs::File::create(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut buf = std::io::BufWriter::new(file);
    emit_csv(runs, &mut buf).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    buf.flush()
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Per-variant block of the printed summary.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryLine {
    pub variant: String,
    /// Mean attitude error over the transient window (first 5 s), completed runs.
    pub transient_error_mean: f64,
    /// Mean attitude error over the final third of the horizon, completed runs.
    pub steady_error_mean: f64,
    pub energy_mean: f64,
    pub failures: usize,
}

impl SummaryLine {
    fn from_summary(s: &VariantSummary) -> Self {
        Self {
            variant: s.label.clone(),
            transient_error_mean: s.transient_error_mean,
            steady_error_mean: s.steady_error_mean,
            energy_mean: s.energy_mean,
            failures: s.failures,
        }
    }
}

pub fn summary_lines(batch: &McBatch) -> Vec<SummaryLine> {
    batch.summaries.iter().map(SummaryLine::from_summary).collect()
}

pub fn render_text(cfg: &RunConfigFile, batch: &McBatch) -> String {
    let mut out = format!(
        "runs={} seed={} duration={}s dt={}s (transient window {}s)\n",
        cfg.runs, cfg.scenario.seed, cfg.scenario.duration, cfg.scenario.dt, TRANSIENT_WINDOW,
    );
    out.push_str(&format!(
        "{:<24} {:>12} {:>12} {:>10} {:>9}\n",
        "variant", "transient", "steady", "energy", "failures"
    ));
    for line in summary_lines(batch) {
        out.push_str(&format!(
            "{:<24} {:>12.6} {:>12.6} {:>10.4} {:>6}/{}\n",
            line.variant, line.transient_error_mean, line.steady_error_mean, line.energy_mean,
            line.failures, cfg.runs
        ));
    }
    out
}

/// JSON summary: the resolved config under `config` (so outputs are
/// reparseable experiment records) and the per-variant stats under `summary`.
pub fn render_json(cfg: &RunConfigFile, batch: &McBatch) -> serde_json::Value {
    serde_json::json!({
        "config": cfg,
        "summary": summary_lines(batch),
    })
}

pub fn total_failures(batch: &McBatch) -> usize {
    batch.summaries.iter().map(|s| s.failures).sum()
}
