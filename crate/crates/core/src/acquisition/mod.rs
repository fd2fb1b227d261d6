//! Acquisition functions over candidate initial states.

mod baselines;
mod bo;
mod exact;
mod nmc;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use baselines::{acq_action_entropy, acq_q_entropy, acq_random};
pub use bo::{
    bo_gaussian_update, bo_noise_map_update, bo_ucb_eig, bo_ucb_eig_with_state,
    noise_log_objective, ucb_select, BoConfig, BoEntry, BoState, NoiseObjective,
};
pub use exact::eig_exact_tiny;
pub use nmc::{eig_nmc, single_state_variant};

use crate::bayes_irl::PosteriorSampleSet;
use crate::error::{Error, Result};
use crate::mdp::{boltzmann_log_policy, LogPolicy, Mdp};

/// Settings of the nested Monte Carlo EIG estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigConfig {
    /// Reward samples per candidate (outer and inner sum).
    pub n_rewards: usize,
    /// Hypothetical trajectories per reward sample.
    pub n_trajectories: usize,
    /// Cap on hypothetical trajectory length; the MDP's cap when unset.
    pub step_cap: Option<usize>,
    pub beta: f64,
    /// Score candidates on the rayon pool.
    pub parallel: bool,
}

impl Default for EigConfig {
    fn default() -> Self {
        Self {
            n_rewards: 20,
            n_trajectories: 2,
            step_cap: None,
            beta: 1.0,
            parallel: false,
        }
    }
}

impl EigConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_rewards < 2 {
            return Err(Error::Config("EIG needs at least 2 reward samples".into()));
        }
        if self.n_trajectories == 0 {
            return Err(Error::Config(
                "EIG needs at least one trajectory per reward".into(),
            ));
        }
        if self.step_cap == Some(0) {
            return Err(Error::Config("step cap must be positive".into()));
        }
        Ok(())
    }

    pub fn cap(&self, mdp: &Mdp) -> usize {
        self.step_cap.unwrap_or_else(|| mdp.step_cap())
    }

    /// Trajectory budget of one NMC evaluation over `n_candidates` states.
    pub fn budget(&self, n_candidates: usize) -> usize {
        n_candidates * self.n_rewards * self.n_trajectories
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub state: usize,
    pub score: f64,
    pub n_samples: usize,
    pub std_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionResult {
    pub chosen: usize,
    pub scores: Vec<CandidateScore>,
    pub wall_time_s: f64,
}

impl AcquisitionResult {
    pub(crate) fn from_scores(scores: Vec<CandidateScore>, wall_time_s: f64) -> Self {
        let chosen =
            scores[argmax_lowest(&scores.iter().map(|c| c.score).collect::<Vec<_>>())].state;
        Self {
            chosen,
            scores,
            wall_time_s,
        }
    }

    pub fn score_of(&self, state: usize) -> Option<f64> {
        self.scores
            .iter()
            .find(|c| c.state == state)
            .map(|c| c.score)
    }

    /// Candidates ordered by decreasing score, ties by increasing state index.
    pub fn ranked(&self) -> Vec<usize> {
        let mut v: Vec<&CandidateScore> = self.scores.iter().collect();
        v.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.state.cmp(&b.state)));
        v.into_iter().map(|c| c.state).collect()
    }

    /// Tab-separated table `candidate, score, n_samples`.
    pub fn write_table<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "candidate\tscore\tn_samples")?;
        for c in &self.scores {
            writeln!(w, "{}\t{:?}\t{}", c.state, c.score, c.n_samples)?;
        }
        Ok(())
    }

    /// One score per state of the MDP; states that were not candidates get NaN.
    pub fn heatmap(&self, n_states: usize) -> Vec<f64> {
        let mut out = vec![f64::NAN; n_states];
        for c in &self.scores {
            out[c.state] = c.score;
        }
        out
    }
}

/// Index of the maximum; NaN never wins and ties go to the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] || (values[best].is_nan() && !v.is_nan()) {
            best = i;
        }
    }
    best
}

/// Sorted, de-duplicated candidates with terminal states removed (with a warning).
pub(crate) fn clean_candidates(candidates: &[usize], mdp: &Mdp) -> Result<Vec<usize>> {
    let mut c: Vec<usize> = candidates.to_vec();
    c.sort_unstable();
    c.dedup();
    if let Some(&bad) = c.iter().find(|&&s| s >= mdp.n_states()) {
        return Err(Error::Input(format!("candidate {bad} does not exist")));
    }
    let before = c.len();
    c.retain(|&s| !mdp.is_terminal(s));
    if c.len() != before {
        log::warn!("skipping {} terminal candidate(s)", before - c.len());
    }
    if c.is_empty() {
        return Err(Error::Input("no non-terminal candidates".into()));
    }
    Ok(c)
}

/// Boltzmann log-policies of every sample in the thinned set.
pub(crate) fn policy_tables(posterior: &PosteriorSampleSet, beta: f64) -> Result<Vec<LogPolicy>> {
    let qs = posterior
        .q_cache
        .as_ref()
        .ok_or_else(|| Error::Input("posterior sample set has no Q cache".into()))?;
    if qs.is_empty() {
        return Err(Error::Input("posterior sample set is empty".into()));
    }
    Ok(qs.iter().map(|q| boltzmann_log_policy(q, beta)).collect())
}

#[inline]
pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
