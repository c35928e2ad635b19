use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use alpf_core::engine::{audit_text, metrics_csv, metrics_json, run, Pool, RunOutcome, StopReason};
use alpf_core::{ExperimentConfig, Mode, OracleAnnotator};
use anyhow::Context;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::args::SimulateArgs;
use crate::data::DataSpec;
use crate::UsageError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to regenerate a run's outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub git: String,
    pub data: DataSpec,
    pub config: ExperimentConfig,
}

#[derive(Debug)]
pub struct RunSummary {
    pub mode: Mode,
    pub dir: PathBuf,
    pub stop: StopReason,
    pub questions: usize,
    pub accuracy: Option<f64>,
    pub fraction_exact: f64,
}

pub fn run_dir(out: &Path, cfg: &ExperimentConfig) -> PathBuf {
    out.join(cfg.mode.to_string()).join(cfg.seed.to_string())
}

fn write_outputs(dir: &Path, manifest: &RunManifest, outcome: &RunOutcome) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    fs::write(dir.join("metrics.csv"), metrics_csv(outcome.history()))?;
    fs::write(dir.join("metrics.json"), metrics_json(outcome.history()))?;
    fs::write(dir.join("audit.log"), audit_text(outcome.audit()))?;
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(manifest)?,
    )?;
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> anyhow::Result<Vec<RunSummary>> {
    let (data, configs) = match &args.manifest {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let m: RunManifest = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            (m.data, vec![m.config])
        }
        None => {
            let modes = match (&args.mode, &args.grid) {
                (Some(mode), _) => vec![*mode],
                (None, Some(_)) => Mode::grid(),
                (None, None) => {
                    return Err(UsageError(
                        "one of --mode, --grid or --manifest is required".into(),
                    )
                    .into())
                }
            };
            let configs = modes.into_iter().map(|m| args.config(m)).collect();
            (DataSpec::from_args(&args.data), configs)
        }
    };
    for cfg in &configs {
        cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    }
    let (dataset, hierarchy) = data.load()?;
    let k = hierarchy.k();
    let pool = Arc::new(Pool::with_diagnostics(&dataset, k));
    let hierarchy = Arc::new(hierarchy);
    let truth = dataset.train_labels();

    configs
        .into_par_iter()
        .map(|cfg| -> anyhow::Result<RunSummary> {
            let mut oracle = OracleAnnotator::new(truth.clone(), k)?;
            let outcome = run(
                cfg.clone(),
                Arc::clone(&pool),
                Arc::clone(&hierarchy),
                &mut oracle,
            )?;
            let manifest = RunManifest {
                tool: "alpf".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                git: env!("ALPF_GIT_DESCRIBE").into(),
                data: data.clone(),
                config: cfg.clone(),
            };
            let dir = run_dir(&args.out, &cfg);
            write_outputs(&dir, &manifest, &outcome)?;
            let last = outcome.history().last();
            Ok(RunSummary {
                mode: cfg.mode,
                dir,
                stop: outcome.stop,
                questions: outcome.state.questions_asked,
                accuracy: last.and_then(|m| m.accuracy),
                fraction_exact: last.map_or(0.0, |m| m.fraction_exact),
            })
        })
        .collect()
}

pub fn print_summary(runs: &[RunSummary]) {
    println!(
        "{:<10} {:>10} {:>10} {:>9} {:>8}  output",
        "mode", "questions", "stop", "accuracy", "exact"
    );
    for r in runs {
        println!(
            "{:<10} {:>10} {:>10} {:>9} {:>8.3}  {}",
            r.mode.to_string(),
            r.questions,
            format!("{:?}", r.stop).to_lowercase(),
            r.accuracy.map_or("-".into(), |a| format!("{a:.4}")),
            r.fraction_exact,
            r.dir.display()
        );
    }
}
