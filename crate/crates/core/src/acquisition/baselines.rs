use std::time::Instant;

use rand::{Rng as _, RngCore};

use super::nmc::candidate_stream;
use super::{clean_candidates, AcquisitionResult, CandidateScore};
use crate::bayes_irl::{knn_entropy, PosteriorSampleSet};
use crate::error::{Error, Result};
use crate::mdp::{boltzmann_policy, sample_trajectory, Mdp, Policy};
use crate::rng::Rng;

/// Uniformly random candidate; every score is zero.
pub fn acq_random(candidates: &[usize], mdp: &Mdp, rng: &mut Rng) -> Result<AcquisitionResult> {
    let start = Instant::now();
    let candidates = clean_candidates(candidates, mdp)?;
    let chosen = candidates[rng.random_range(0..candidates.len())];
    let scores = candidates
        .iter()
        .map(|&s| CandidateScore {
            state: s,
            score: 0.0,
            n_samples: 0,
            std_error: None,
        })
        .collect();
    Ok(AcquisitionResult {
        chosen,
        scores,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Joint kNN entropy of the posterior Q-value vectors at each candidate.
pub fn acq_q_entropy(
    candidates: &[usize],
    posterior: &PosteriorSampleSet,
    mdp: &Mdp,
    k: usize,
) -> Result<AcquisitionResult> {
    let start = Instant::now();
    let candidates = clean_candidates(candidates, mdp)?;
    let qs = posterior
        .q_cache
        .as_ref()
        .ok_or_else(|| Error::Input("posterior sample set has no Q cache".into()))?;
    let mut scores = Vec::with_capacity(candidates.len());
    for &s in &candidates {
        let points: Vec<Vec<f64>> = qs.iter().map(|q| q.row(s).to_vec()).collect();
        let h = knn_entropy(&points, k)?;
        scores.push(CandidateScore {
            state: s,
            score: h,
            n_samples: points.len(),
            std_error: None,
        });
    }
    Ok(AcquisitionResult::from_scores(
        scores,
        start.elapsed().as_secs_f64(),
    ))
}

/// Posterior-mean Boltzmann policy over the thinned samples.
pub fn posterior_mean_policy(posterior: &PosteriorSampleSet, beta: f64) -> Result<Policy> {
    let qs = posterior
        .q_cache
        .as_ref()
        .ok_or_else(|| Error::Input("posterior sample set has no Q cache".into()))?;
    let policies: Vec<Policy> = qs.iter().map(|q| boltzmann_policy(q, beta)).collect();
    Policy::mixture(&policies).ok_or_else(|| Error::Input("posterior sample set is empty".into()))
}

/// Expected summed action entropy of the posterior-mean policy along rollouts
/// from each candidate.
pub fn acq_action_entropy(
    candidates: &[usize],
    posterior: &PosteriorSampleSet,
    mdp: &Mdp,
    beta: f64,
    n_rollouts: usize,
    cap: usize,
    rng: &mut Rng,
) -> Result<AcquisitionResult> {
    let start = Instant::now();
    if n_rollouts == 0 {
        return Err(Error::Config(
            "action entropy needs at least one rollout".into(),
        ));
    }
    let candidates = clean_candidates(candidates, mdp)?;
    let policy = posterior_mean_policy(posterior, beta)?;
    let entropy: Vec<f64> = (0..mdp.n_states()).map(|s| policy.entropy(s)).collect();
    let master = rng.next_u64();
    let mut scores = Vec::with_capacity(candidates.len());
    for &s0 in &candidates {
        let mut r = candidate_stream(master, s0);
        let mut total = 0.0;
        for _ in 0..n_rollouts {
            let traj = sample_trajectory(mdp, &policy, s0, cap, &mut r)?;
            total += traj.steps.iter().map(|&(s, _)| entropy[s]).sum::<f64>();
        }
        scores.push(CandidateScore {
            state: s0,
            score: total / n_rollouts as f64,
            n_samples: n_rollouts,
            std_error: None,
        });
    }
    Ok(AcquisitionResult::from_scores(
        scores,
        start.elapsed().as_secs_f64(),
    ))
}
