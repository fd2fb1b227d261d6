use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method};
use crate::error::{Error, Result};

use super::record::RunRecord;
use super::runner::run_active_learning;

/// Per-method, per-step statistics across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub step: usize,
    pub n_runs: usize,
    pub entropy_median: f64,
    pub entropy_mean: f64,
    pub entropy_std: f64,
    pub regret_median: f64,
    pub regret_mean: f64,
    pub regret_std: f64,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

impl SuiteResult {
    pub fn records_for(&self, method: Method) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(move |r| r.method == method)
    }

    /// Median over seeds of the last-step entropy.
    pub fn median_final_entropy(&self, method: Method) -> Option<f64> {
        median(
            self.records_for(method)
                .filter_map(RunRecord::final_entropy)
                .collect(),
        )
    }

    pub fn median_final_regret(&self, method: Method) -> Option<f64> {
        median(
            self.records_for(method)
                .filter_map(RunRecord::final_regret)
                .collect(),
        )
    }
}

pub(crate) fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// Aggregate records by method and step.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut methods: Vec<Method> = records.iter().map(|r| r.method).collect();
    methods.sort();
    methods.dedup();
    let mut out = Vec::new();
    for m in methods {
        let runs: Vec<&RunRecord> = records.iter().filter(|r| r.method == m).collect();
        let steps = runs.iter().map(|r| r.rows.len()).max().unwrap_or(0);
        for i in 0..steps {
            let rows: Vec<_> = runs.iter().filter_map(|r| r.rows.get(i)).collect();
            let h: Vec<f64> = rows.iter().map(|r| r.entropy_nats).collect();
            let g: Vec<f64> = rows.iter().map(|r| r.regret).collect();
            let (hm, hs) = mean_std(&h);
            let (gm, gs) = mean_std(&g);
            out.push(SummaryRow {
                method: m,
                step: rows[0].step,
                n_runs: rows.len(),
                entropy_median: median(h).unwrap_or(f64::NAN),
                entropy_mean: hm,
                entropy_std: hs,
                regret_median: median(g).unwrap_or(f64::NAN),
                regret_mean: gm,
                regret_std: gs,
            });
        }
    }
    out
}

/// Run every (method, seed) pair of `base` with at most `jobs` runs in flight.
///
/// A seed selects the same true reward and initial demonstrations for every
/// method. Records come back ordered by method then seed.
pub fn run_suite(
    base: &ExperimentConfig,
    methods: &[Method],
    seeds: &[u64],
    jobs: usize,
) -> Result<SuiteResult> {
    let mut tasks = Vec::with_capacity(methods.len() * seeds.len());
    for &m in methods {
        for &s in seeds {
            let mut cfg = base.clone();
            cfg.method = m;
            cfg.seed = s;
            tasks.push(cfg);
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let records: Vec<RunRecord> = pool.install(|| {
        if jobs <= 1 {
            tasks.iter().map(run_active_learning).collect::<Result<_>>()
        } else {
            tasks
                .par_iter()
                .map(run_active_learning)
                .collect::<Result<_>>()
        }
    })?;
    let summary = summarize(&records);
    Ok(SuiteResult { records, summary })
}
