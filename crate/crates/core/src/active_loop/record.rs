use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionResult;
use crate::config::Method;
use crate::error::Result;

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub step: usize,
    pub xi: usize,
    pub traj_len: usize,
    pub entropy_nats: f64,
    pub regret: f64,
    pub t_acq_s: f64,
    pub t_mcmc_s: f64,
}

/// Secondary per-step quantities; step 0 describes the initial posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub step: usize,
    pub n_demos: usize,
    pub entropy_nats: f64,
    pub regret: f64,
    pub cov_trace: f64,
    pub acceptance: f64,
    /// All queried states, space separated.
    pub queried: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub seed: u64,
    pub true_theta: Vec<f64>,
    pub rows: Vec<StepRow>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Acquisition scores per step, in step order.
    pub acquisitions: Vec<AcquisitionResult>,
    pub complete: bool,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn final_entropy(&self) -> Option<f64> {
        self.rows.last().map(|r| r.entropy_nats)
    }

    pub fn final_regret(&self) -> Option<f64> {
        self.rows.last().map(|r| r.regret)
    }

    pub fn write_metrics_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        if self.rows.is_empty() {
            out.write_record([
                "step",
                "xi",
                "traj_len",
                "entropy_nats",
                "regret",
                "t_acq_s",
                "t_mcmc_s",
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_diagnostics_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for d in &self.diagnostics {
            out.serialize(d)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Scores for every state at `step` (1-based); NaN for non-candidates.
    pub fn heatmap(&self, step: usize, n_states: usize) -> Option<Vec<f64>> {
        step.checked_sub(1)
            .and_then(|i| self.acquisitions.get(i))
            .map(|a| a.heatmap(n_states))
    }
}

pub fn read_metrics_csv<R: Read>(r: R) -> Result<Vec<StepRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for row in rd.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}
