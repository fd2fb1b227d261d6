use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mcmc::{run_chain, ChainConfig, Target};
use crate::error::{Error, Result};
use crate::mdp::{solve_optimal, Mdp, QFunction, Trajectory};
use crate::reward::{Prior, RewardModel};
use crate::rng::{self, Rng};

/// Demonstrations collected so far.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DemoDataset {
    pub trajectories: Vec<Trajectory>,
}

impl DemoDataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: Trajectory) {
        self.trajectories.push(t);
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn total_steps(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).sum()
    }

    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        self.trajectories.iter().try_for_each(|t| t.validate(mdp))
    }

    /// Action counts per visited state. The likelihood only depends on these.
    pub(crate) fn counts(&self, n_actions: usize) -> ActionCounts {
        let mut by_state: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
        for t in &self.trajectories {
            for &(s, a) in &t.steps {
                by_state.entry(s).or_insert_with(|| vec![0.0; n_actions])[a] += 1.0;
            }
        }
        ActionCounts {
            rows: by_state.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ActionCounts {
    rows: Vec<(usize, Vec<f64>)>,
}

impl ActionCounts {
    /// Sum of Boltzmann log-probabilities of the recorded actions.
    pub(crate) fn log_likelihood(&self, q: &QFunction, beta: f64) -> f64 {
        let mut total = 0.0;
        for (s, counts) in &self.rows {
            let row = q.row(*s);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max) * beta;
            let lse = m + row.iter().map(|&v| (beta * v - m).exp()).sum::<f64>().ln();
            for (&c, &v) in counts.iter().zip(row) {
                if c > 0.0 {
                    total += c * (beta * v - lse);
                }
            }
        }
        total
    }
}

/// `log p(theta) + sum over demonstrations of log p(tau | theta)`.
///
/// Returns `-inf` outside the prior support.
pub fn log_posterior(
    theta: &[f64],
    dataset: &DemoDataset,
    mdp: &Mdp,
    model: &RewardModel,
    prior: &Prior,
    beta: f64,
) -> Result<f64> {
    let lp = prior.log_density(theta);
    if lp == f64::NEG_INFINITY {
        return Ok(lp);
    }
    if dataset.is_empty() {
        return Ok(lp);
    }
    let (q, _) = solve_optimal(mdp, &model.state_rewards(theta), None)?;
    Ok(lp + dataset.counts(mdp.n_actions()).log_likelihood(&q, beta))
}

/// Posterior target that keeps the last optimal policy as a warm start.
pub(crate) struct IrlTarget<'a> {
    mdp: &'a Mdp,
    model: &'a RewardModel,
    prior: &'a Prior,
    beta: f64,
    counts: ActionCounts,
    rewards: Vec<f64>,
    warm: Option<Vec<usize>>,
}

impl<'a> IrlTarget<'a> {
    pub(crate) fn new(
        mdp: &'a Mdp,
        model: &'a RewardModel,
        prior: &'a Prior,
        dataset: &DemoDataset,
        beta: f64,
    ) -> Self {
        Self {
            mdp,
            model,
            prior,
            beta,
            counts: dataset.counts(mdp.n_actions()),
            rewards: vec![0.0; mdp.n_states()],
            warm: None,
        }
    }
}

impl Target for IrlTarget<'_> {
    type Extra = QFunction;

    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn evaluate(&mut self, x: &[f64]) -> (f64, Option<QFunction>) {
        let lp = self.prior.log_density(x);
        if lp == f64::NEG_INFINITY {
            return (lp, None);
        }
        self.model.state_rewards_into(x, &mut self.rewards);
        let (q, policy) =
            solve_optimal(self.mdp, &self.rewards, self.warm.as_deref()).expect("finite rewards");
        self.warm = Some(policy);
        let ll = self.counts.log_likelihood(&q, self.beta);
        (lp + ll, Some(q))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub warmup_steps: usize,
    pub kept_samples: usize,
    pub thin_to: usize,
    /// Initial proposal scale as a fraction of the prior width.
    pub initial_scale: f64,
    pub target_accept: f64,
    pub beta: f64,
    pub chains: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            warmup_steps: 100,
            kept_samples: 200,
            thin_to: 50,
            initial_scale: 0.1,
            target_accept: 0.3,
            beta: 1.0,
            chains: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin_to == 0 || self.kept_samples < self.thin_to {
            return Err(Error::Config(
                "sampler needs kept_samples >= thin_to >= 1".into(),
            ));
        }
        if self.chains == 0 || self.kept_samples % self.chains != 0 {
            return Err(Error::Config(
                "kept_samples must be divisible by the number of chains".into(),
            ));
        }
        if !(self.initial_scale > 0.0) || !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config("invalid proposal settings".into()));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::Config("beta must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub warmup_steps: usize,
    pub kept_samples: usize,
    pub thin_to: usize,
    pub chains: usize,
    pub seed: Option<u64>,
    pub acceptance: f64,
    pub scales: Vec<f64>,
    pub warning: Option<String>,
}

/// Reward samples representing the current posterior.
///
/// `samples` is the thinned set used by acquisition functions and
/// `q_cache[i]` is the optimal Q function for `samples[i]`. `kept` is the full
/// retained chain, used for summary metrics.
#[derive(Debug, Clone)]
pub struct PosteriorSampleSet {
    pub samples: Vec<Vec<f64>>,
    pub q_cache: Option<Vec<QFunction>>,
    pub kept: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

impl PosteriorSampleSet {
    /// Posterior given by an explicit list of equally weighted parameter vectors.
    pub fn from_thetas(thetas: Vec<Vec<f64>>, mdp: &Mdp, model: &RewardModel) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::Input("posterior needs at least one sample".into()));
        }
        let mut warm: Option<Vec<usize>> = None;
        let mut q_cache = Vec::with_capacity(thetas.len());
        for t in &thetas {
            if t.len() != model.dim() {
                return Err(Error::Input("sample has the wrong dimension".into()));
            }
            let (q, pol) = solve_optimal(mdp, &model.state_rewards(t), warm.as_deref())?;
            warm = Some(pol);
            q_cache.push(q);
        }
        Ok(Self {
            kept: thetas.clone(),
            samples: thetas,
            q_cache: Some(q_cache),
            provenance: Provenance::default(),
        })
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn mean_of(rows: &[Vec<f64>]) -> Vec<f64> {
        let d = rows.first().map_or(0, Vec::len);
        let mut m = vec![0.0; d];
        for r in rows {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|x| *x /= rows.len() as f64);
        m
    }

    /// Mean over the full retained chain.
    pub fn mean(&self) -> Vec<f64> {
        Self::mean_of(&self.kept)
    }

    pub fn thinned_mean(&self) -> Vec<f64> {
        Self::mean_of(&self.samples)
    }

    /// Per-dimension standard deviation over the retained chain.
    pub fn std(&self) -> Vec<f64> {
        let m = self.mean();
        let n = self.kept.len() as f64;
        (0..m.len())
            .map(|d| {
                (self.kept.iter().map(|r| (r[d] - m[d]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0))
                    .sqrt()
            })
            .collect()
    }

    /// Trace of the sample covariance of the retained chain.
    pub fn covariance_trace(&self) -> f64 {
        self.std().iter().map(|s| s * s).sum()
    }

    /// Columnar text: header row of parameter names, one sample per row.
    pub fn write_csv<W: Write>(&self, names: &[String], w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(names)?;
        for s in &self.kept {
            out.write_record(s.iter().map(|v| format!("{v:?}")))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Read rows written by [`write_csv`](Self::write_csv). The Q cache is not restored.
    pub fn read_csv<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
        let mut rd = csv::Reader::from_reader(r);
        let names = rd.headers()?.iter().map(str::to_owned).collect();
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| Error::Input(format!("bad sample value {f:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok((names, rows))
    }
}

fn initial_point(prior: &Prior, rng: &mut Rng) -> Vec<f64> {
    prior.sample(rng)
}

/// Draw posterior samples with component-wise adaptive Metropolis.
///
/// Each chain warms up with proposal-scale adaptation, then keeps
/// `kept_samples / chains` sweeps. The retained set is thinned evenly to
/// `thin_to` samples for acquisition.
pub fn sample_posterior(
    dataset: &DemoDataset,
    mdp: &Mdp,
    model: &RewardModel,
    prior: &Prior,
    config: &SamplerConfig,
    rng: &mut Rng,
) -> Result<PosteriorSampleSet> {
    config.validate()?;
    prior.validate()?;
    if prior.dim() != model.dim() {
        return Err(Error::Config(
            "prior and reward model dimensions differ".into(),
        ));
    }
    dataset.validate(mdp)?;
    let per_chain = config.kept_samples / config.chains;
    let chain_rngs: Vec<Rng> = (0..config.chains)
        .map(|c| rng::fork(rng, c as u64))
        .collect();
    let scales = vec![config.initial_scale * prior.width(); model.dim()];
    let run = |mut crng: Rng| {
        let mut target = IrlTarget::new(mdp, model, prior, dataset, config.beta);
        let init = initial_point(prior, &mut crng);
        let cfg = ChainConfig {
            warmup: config.warmup_steps,
            kept: per_chain,
            initial_scales: scales.clone(),
            target_accept: config.target_accept,
            support: vec![prior.support(); model.dim()],
        };
        run_chain(&mut target, init, &cfg, &mut crng)
    };
    let outputs: Vec<_> = if config.chains == 1 {
        chain_rngs.into_iter().map(run).collect()
    } else {
        chain_rngs.into_par_iter().map(run).collect()
    };

    let mut kept = Vec::with_capacity(config.kept_samples);
    let mut qs = Vec::with_capacity(config.kept_samples);
    let mut acceptance = 0.0;
    let mut final_scales = vec![0.0; model.dim()];
    for out in outputs {
        acceptance += out.acceptance / config.chains as f64;
        for (f, s) in final_scales.iter_mut().zip(&out.scales) {
            *f += s / config.chains as f64;
        }
        kept.extend(out.samples);
        qs.extend(out.extras);
    }
    let warning = (acceptance < 0.01).then(|| {
        let msg = format!("acceptance rate {acceptance:.4} after warm-up is below 1%");
        log::warn!("{msg}");
        msg
    });
    let n = kept.len();
    let idx: Vec<usize> = (0..config.thin_to)
        .map(|i| (i * n) / config.thin_to + n / (2 * config.thin_to))
        .collect();
    let samples = idx.iter().map(|&i| kept[i].clone()).collect();
    let q_cache = idx.iter().map(|&i| qs[i].clone()).collect();
    Ok(PosteriorSampleSet {
        samples,
        q_cache: Some(q_cache),
        kept,
        provenance: Provenance {
            warmup_steps: config.warmup_steps,
            kept_samples: config.kept_samples,
            thin_to: config.thin_to,
            chains: config.chains,
            seed: None,
            acceptance,
            scales: final_scales,
            warning,
        },
    })
}
