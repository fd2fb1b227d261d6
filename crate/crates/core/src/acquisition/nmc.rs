use std::time::Instant;

use rand::seq::index;
use rand::{Rng as _, RngCore};
use rayon::prelude::*;

use super::{
    clean_candidates, log_sum_exp, policy_tables, AcquisitionResult, CandidateScore, EigConfig,
};
use crate::bayes_irl::PosteriorSampleSet;
use crate::error::Result;
use crate::mdp::{sample_trajectory_log, trajectory_log_likelihood_log, LogPolicy, Mdp};
use crate::rng::{derive, Rng};

/// The reward samples one candidate is scored against.
pub(super) fn choose_context(n_samples: usize, n_rewards: usize, rng: &mut Rng) -> Vec<usize> {
    if n_rewards <= n_samples {
        index::sample(rng, n_samples, n_rewards).into_vec()
    } else {
        (0..n_rewards)
            .map(|_| rng.random_range(0..n_samples))
            .collect()
    }
}

/// One draw of the log-likelihood ratio: a trajectory from the demonstrator
/// with reward `context[i]`, scored against every reward in the context.
pub(super) fn observe(
    mdp: &Mdp,
    tables: &[LogPolicy],
    context: &[usize],
    i: usize,
    xi: usize,
    cap: usize,
    rng: &mut Rng,
    lls: &mut Vec<f64>,
) -> f64 {
    let traj = sample_trajectory_log(mdp, &tables[context[i]], xi, cap, rng);
    lls.clear();
    lls.extend(
        context
            .iter()
            .map(|&k| trajectory_log_likelihood_log(&traj, &tables[k])),
    );
    lls[i] - (log_sum_exp(lls) - (context.len() as f64).ln())
}

pub(super) fn candidate_stream(master: u64, state: usize) -> Rng {
    derive(master, &[state as u64])
}

fn score_candidate(
    mdp: &Mdp,
    tables: &[LogPolicy],
    xi: usize,
    cfg: &EigConfig,
    cap: usize,
    master: u64,
) -> CandidateScore {
    let mut rng = candidate_stream(master, xi);
    let context = choose_context(tables.len(), cfg.n_rewards, &mut rng);
    let mut lls = Vec::with_capacity(context.len());
    let nt = cfg.n_trajectories;
    let mut total = 0.0;
    let mut within_var = 0.0;
    let mut all = Vec::with_capacity(context.len() * nt);
    for i in 0..context.len() {
        let start = all.len();
        for _ in 0..nt {
            all.push(observe(
                mdp, tables, &context, i, xi, cap, &mut rng, &mut lls,
            ));
        }
        let group = &all[start..];
        let m = group.iter().sum::<f64>() / nt as f64;
        total += m;
        if nt > 1 {
            within_var +=
                group.iter().map(|e| (e - m) * (e - m)).sum::<f64>() / (nt - 1) as f64 / nt as f64;
        }
    }
    let nr = context.len() as f64;
    let score = total / nr;
    let std_error = if nt > 1 {
        within_var.sqrt() / nr
    } else {
        let n = all.len() as f64;
        let var = all.iter().map(|e| (e - score) * (e - score)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    CandidateScore {
        state: xi,
        score,
        n_samples: all.len(),
        std_error: Some(std_error),
    }
}

/// Nested Monte Carlo estimate of the expected information gain of a
/// demonstration from each candidate.
///
/// Each candidate draws from its own stream derived from one value taken from
/// `rng` and the candidate's state index, so scores do not depend on the order
/// or grouping of candidates.
pub fn eig_nmc(
    candidates: &[usize],
    posterior: &PosteriorSampleSet,
    mdp: &Mdp,
    cfg: &EigConfig,
    rng: &mut Rng,
) -> Result<AcquisitionResult> {
    let start = Instant::now();
    cfg.validate()?;
    let candidates = clean_candidates(candidates, mdp)?;
    let tables = policy_tables(posterior, cfg.beta)?;
    let cap = cfg.cap(mdp);
    let master = rng.next_u64();
    let scores: Vec<CandidateScore> = if cfg.parallel {
        candidates
            .par_iter()
            .map(|&xi| score_candidate(mdp, &tables, xi, cfg, cap, master))
            .collect()
    } else {
        candidates
            .iter()
            .map(|&xi| score_candidate(mdp, &tables, xi, cfg, cap, master))
            .collect()
    };
    Ok(AcquisitionResult::from_scores(
        scores,
        start.elapsed().as_secs_f64(),
    ))
}

/// EIG of a single-step demonstration.
pub fn single_state_variant(
    candidates: &[usize],
    posterior: &PosteriorSampleSet,
    mdp: &Mdp,
    cfg: &EigConfig,
    rng: &mut Rng,
) -> Result<AcquisitionResult> {
    let cfg = EigConfig {
        step_cap: Some(1),
        ..cfg.clone()
    };
    eig_nmc(candidates, posterior, mdp, &cfg, rng)
}
