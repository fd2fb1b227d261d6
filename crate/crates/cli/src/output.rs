//! Result files written by `run` and `suite`.
//!
//! ```text
//! OUT/manifest.toml                 resolved configuration; feed back with --config
//! OUT/index.csv                     one row per run
//! OUT/summary.csv                   per method and step statistics across seeds
//! OUT/<method>/seed_<n>/metrics.csv
//! OUT/<method>/seed_<n>/diagnostics.csv
//! OUT/<method>/seed_<n>/acquisitions.csv
//! OUT/<method>/seed_<n>/heatmap_step_<k>.csv   with --heatmap-step
//! ```

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use active_irl::active_loop::{summarize, RunRecord};
use active_irl::config::ExperimentConfig;
use active_irl::mdp::Mdp;
use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Serialize)]
struct IndexRow<'a> {
    method: &'a str,
    seed: u64,
    complete: bool,
    steps: usize,
    final_entropy: Option<f64>,
    final_regret: Option<f64>,
    path: String,
    error: Option<&'a str>,
}

#[derive(Debug, Serialize)]
struct AcquisitionRow {
    step: usize,
    state: usize,
    score: f64,
    n_samples: usize,
    chosen: bool,
}

#[derive(Debug, Serialize)]
struct HeatmapRow {
    state: usize,
    row: usize,
    col: usize,
    score: f64,
}

pub fn run_dir(out: &Path, rec: &RunRecord) -> PathBuf {
    out.join(rec.method.name()).join(format!("seed_{}", rec.seed))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

pub fn write_manifest(out: &Path, cfg: &ExperimentConfig) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    fs::write(out.join("manifest.toml"), cfg.to_toml()?)?;
    Ok(())
}

/// Per-run tables for one record.
pub fn write_run(
    out: &Path,
    cfg: &ExperimentConfig,
    rec: &RunRecord,
    heatmap_step: Option<usize>,
) -> Result<()> {
    let dir = run_dir(out, rec);
    fs::create_dir_all(&dir)?;
    rec.write_metrics_csv(create(&dir.join("metrics.csv"))?)?;
    rec.write_diagnostics_csv(create(&dir.join("diagnostics.csv"))?)?;

    let mut w = csv::Writer::from_writer(create(&dir.join("acquisitions.csv"))?);
    for (i, acq) in rec.acquisitions.iter().enumerate() {
        for c in &acq.scores {
            w.serialize(AcquisitionRow {
                step: i + 1,
                state: c.state,
                score: c.score,
                n_samples: c.n_samples,
                chosen: c.state == acq.chosen,
            })?;
        }
    }
    w.flush()?;

    if let Some(step) = heatmap_step {
        let env = cfg.env.build(rec.seed)?;
        write_heatmap(&dir, &env.mdp, rec, step)?;
    }
    Ok(())
}

fn write_heatmap(dir: &Path, mdp: &Mdp, rec: &RunRecord, step: usize) -> Result<()> {
    let n = mdp.n_states();
    let Some(scores) = rec.heatmap(step, n) else {
        log::warn!(
            "{} seed {}: no acquisition at step {step}",
            rec.method,
            rec.seed
        );
        return Ok(());
    };
    let mut w = csv::Writer::from_writer(create(&dir.join(format!("heatmap_step_{step}.csv")))?);
    for (s, score) in scores.into_iter().enumerate() {
        let (row, col) = mdp.grid().map_or((0, s), |g| g.coords(s));
        w.serialize(HeatmapRow {
            state: s,
            row,
            col,
            score,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_index(out: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(&out.join("index.csv"))?);
    for rec in records {
        let path = run_dir(Path::new(""), rec);
        w.serialize(IndexRow {
            method: rec.method.name(),
            seed: rec.seed,
            complete: rec.complete,
            steps: rec.rows.len(),
            final_entropy: rec.final_entropy(),
            final_regret: rec.final_regret(),
            path: path.to_string_lossy().into_owned(),
            error: rec.error.as_deref(),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary(out: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(&out.join("summary.csv"))?);
    for row in summarize(records) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
