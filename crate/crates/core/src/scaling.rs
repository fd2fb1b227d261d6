//! Wall-time scaling of acquisition and posterior sampling on stretched
//! structured worlds.

use std::io::Write;
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::acquisition::{bo_ucb_eig, eig_nmc, BoConfig, EigConfig};
use crate::active_loop::{Expert, SyntheticExpert};
use crate::bayes_irl::{sample_posterior, DemoDataset, SamplerConfig};
use crate::error::{Error, Result};
use crate::mdp::make_scaled_structured_gridworld;
use crate::reward::Prior;
use crate::rng::{derive, tags};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleConfig {
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub steps: usize,
    pub seed: u64,
    pub prior: Prior,
    pub sampler: SamplerConfig,
    pub eig: EigConfig,
    pub bo: BoConfig,
    /// Also time BO acquisition with a quarter of the budget spread over all
    /// states and the rest growing linearly in the side length.
    pub with_bo: bool,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self {
            sizes: vec![6, 8, 10, 12, 14],
            trials: 5,
            steps: 5,
            seed: 0,
            prior: Prior::Uniform {
                low: -100.0,
                high: 0.0,
                dim: 3,
            },
            sampler: SamplerConfig {
                warmup_steps: 50,
                kept_samples: 200,
                ..SamplerConfig::default()
            },
            eig: EigConfig::default(),
            bo: BoConfig::default(),
            with_bo: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub size: usize,
    pub phase: String,
    pub mean_s: f64,
    pub median_s: f64,
    pub std_s: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleResult {
    /// EIG and posterior-sampling rows, two per size.
    pub rows: Vec<TimingRow>,
    /// BO acquisition rows, one per size when enabled.
    pub bo_rows: Vec<TimingRow>,
}

impl ScaleResult {
    fn phase(&self, phase: &str) -> (Vec<f64>, Vec<f64>) {
        self.rows
            .iter()
            .chain(&self.bo_rows)
            .filter(|r| r.phase == phase)
            .map(|r| (r.size as f64, r.median_s))
            .unzip()
    }

    /// Exponent `p` of a least-squares fit `t = c n^p` for `phase`, on the
    /// per-size median so one preempted trial does not bend the fit.
    pub fn exponent(&self, phase: &str) -> Option<f64> {
        let (n, t) = self.phase(phase);
        fit_power_law(&n, &t).map(|(_, p)| p)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in self.rows.iter().chain(&self.bo_rows) {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Least-squares fit of `ln t = ln c + p ln n`; returns `(c, p)`.
pub fn fit_power_law(n: &[f64], t: &[f64]) -> Option<(f64, f64)> {
    if n.len() != t.len() || n.len() < 2 || n.iter().chain(t).any(|v| !(*v > 0.0)) {
        return None;
    }
    let x: Vec<f64> = n.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let p = sxy / sxx;
    Some(((my - p * mx).exp(), p))
}

fn summarize(size: usize, phase: &str, v: &[f64]) -> TimingRow {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let mut sorted = v.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 0 {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };
    TimingRow {
        size,
        phase: phase.into(),
        mean_s: mean,
        median_s: median,
        std_s: var.sqrt(),
        n: v.len(),
    }
}

/// BO budget for side `n`: a quarter of the per-state NMC allocation on every
/// candidate, plus three quarters of the side-6 NMC budget scaled by `n / 6`.
pub fn quarter_rule_budget(
    eig: &EigConfig,
    n: usize,
    n_candidates: usize,
    base_candidates: usize,
) -> (usize, usize) {
    let per_state = (eig.n_rewards * eig.n_trajectories).div_ceil(4);
    let base = eig.budget(base_candidates) as f64;
    let linear = (0.75 * base * n as f64 / 6.0).round() as usize;
    (per_state, per_state * n_candidates + linear)
}

pub fn run_scaling(cfg: &ScaleConfig) -> Result<ScaleResult> {
    if cfg.sizes.iter().any(|&n| n < 4) {
        return Err(Error::Config("grid sizes must be at least 4".into()));
    }
    if cfg.trials == 0 || cfg.steps == 0 {
        return Err(Error::Config("trials and steps must be positive".into()));
    }
    cfg.sampler.validate()?;
    cfg.eig.validate()?;
    let base_candidates = {
        let env = make_scaled_structured_gridworld(
            6,
            cfg.prior.clone(),
            cfg.prior.sample(&mut derive(0, &[])),
        )?;
        env.mdp.non_terminal_states().len()
    };
    let mut rows = Vec::new();
    let mut bo_rows = Vec::new();
    for &n in &cfg.sizes {
        let (mut t_eig, mut t_mcmc, mut t_bo) = (Vec::new(), Vec::new(), Vec::new());
        for trial in 0..cfg.trials {
            let seed = derive(cfg.seed, &[n as u64, trial as u64]).next_u64();
            let theta = cfg.prior.sample(&mut derive(seed, &[tags::TRUTH]));
            let env = make_scaled_structured_gridworld(n, cfg.prior.clone(), theta)?;
            let mut expert = SyntheticExpert::new(&env, cfg.sampler.beta)?;
            let cands = env.mdp.non_terminal_states();
            let (per_state, total) = quarter_rule_budget(&cfg.eig, n, cands.len(), base_candidates);
            let bo_cfg = BoConfig {
                init_samples_per_state: per_state,
                total_budget: Some(total),
                ..cfg.bo.clone()
            };
            let mut dataset = DemoDataset::new();
            let mut r = derive(seed, &[tags::MCMC, 0]);
            let mut post = sample_posterior(
                &dataset,
                &env.mdp,
                &env.reward_model,
                &env.prior,
                &cfg.sampler,
                &mut r,
            )?;
            for step in 1..=cfg.steps {
                let mut r = derive(seed, &[tags::ACQUIRE, step as u64]);
                let start = Instant::now();
                let acq = eig_nmc(&cands, &post, &env.mdp, &cfg.eig, &mut r)?;
                t_eig.push(start.elapsed().as_secs_f64());
                if cfg.with_bo {
                    let start = Instant::now();
                    bo_ucb_eig(&cands, &post, &env.mdp, &cfg.eig, &bo_cfg, &mut r)?;
                    t_bo.push(start.elapsed().as_secs_f64());
                }
                let mut r = derive(seed, &[tags::EXPERT, step as u64, 0]);
                dataset.push(expert.demonstrate(
                    &env.mdp,
                    acq.chosen,
                    env.mdp.step_cap(),
                    &mut r,
                )?);
                let mut r = derive(seed, &[tags::MCMC, step as u64]);
                let start = Instant::now();
                post = sample_posterior(
                    &dataset,
                    &env.mdp,
                    &env.reward_model,
                    &env.prior,
                    &cfg.sampler,
                    &mut r,
                )?;
                t_mcmc.push(start.elapsed().as_secs_f64());
            }
        }
        log::info!(
            "size {n}: eig {:.3}s",
            t_eig.iter().sum::<f64>() / t_eig.len() as f64
        );
        rows.push(summarize(n, "eig", &t_eig));
        rows.push(summarize(n, "mcmc", &t_mcmc));
        if cfg.with_bo {
            bo_rows.push(summarize(n, "eig_bo", &t_bo));
        }
    }
    Ok(ScaleResult { rows, bo_rows })
}
