use std::time::Instant;

use crate::acquisition::{
    acq_action_entropy, acq_q_entropy, acq_random, bo_ucb_eig, eig_nmc, single_state_variant,
    AcquisitionResult,
};
use crate::bayes_irl::{
    posterior_entropy_estimate, sample_posterior, DemoDataset, PosteriorSampleSet,
};
use crate::config::{CandidateMode, ExperimentConfig, InitialDemos, Method};
use crate::error::{Error, Result};
use crate::mdp::{Environment, Mdp};
use crate::rng::{derive, tags, Rng};

use super::expert::{Expert, SyntheticExpert};
use super::metrics::{apprentice_policy, regret, target_distribution};
use super::record::{RunRecord, StepDiagnostics, StepRow};

/// Outcome of one acquisition: the scores and the states to query, best first.
#[derive(Debug, Clone)]
pub struct Acquired {
    pub result: AcquisitionResult,
    pub queries: Vec<usize>,
}

pub fn candidates_for(mode: CandidateMode, mdp: &Mdp) -> Vec<usize> {
    match mode {
        CandidateMode::NonTerminal => mdp.non_terminal_states(),
        CandidateMode::NonTerminalNonJail => mdp.non_terminal_non_jail_states(),
    }
}

/// Score the candidates with `method` and pick the states to query.
pub fn acquire(
    method: Method,
    cfg: &ExperimentConfig,
    candidates: &[usize],
    posterior: &PosteriorSampleSet,
    mdp: &Mdp,
    rng: &mut Rng,
) -> Result<Acquired> {
    let result = match method {
        Method::EigNmc => eig_nmc(candidates, posterior, mdp, &cfg.eig, rng)?,
        Method::EigBo => bo_ucb_eig(candidates, posterior, mdp, &cfg.eig, &cfg.bo, rng)?,
        Method::SingleEig | Method::SingleEigX8 => {
            single_state_variant(candidates, posterior, mdp, &cfg.eig, rng)?
        }
        Method::Random => acq_random(candidates, mdp, rng)?,
        Method::QEntropy => acq_q_entropy(candidates, posterior, mdp, cfg.q_entropy_k)?,
        Method::ActionEntropy => acq_action_entropy(
            candidates,
            posterior,
            mdp,
            cfg.beta,
            cfg.action_entropy_rollouts,
            mdp.step_cap(),
            rng,
        )?,
    };
    let queries = if method == Method::SingleEigX8 {
        result
            .ranked()
            .into_iter()
            .take(cfg.multi_queries)
            .collect()
    } else {
        vec![result.chosen]
    };
    Ok(Acquired { result, queries })
}

fn initial_states(spec: &InitialDemos, mdp: &Mdp) -> Result<Vec<usize>> {
    match spec {
        InitialDemos::None => Ok(vec![]),
        InitialDemos::FirstNonTerminal => mdp
            .non_terminal_states()
            .first()
            .map(|&s| vec![s])
            .ok_or_else(|| {
                Error::Config("no non-terminal state for the initial demonstration".into())
            }),
        InitialDemos::States(v) => {
            if let Some(&s) = v
                .iter()
                .find(|&&s| s >= mdp.n_states() || mdp.is_terminal(s))
            {
                return Err(Error::Config(format!(
                    "initial demonstration state {s} is invalid"
                )));
            }
            Ok(v.clone())
        }
    }
}

/// Run one experiment against a synthetic expert built from the configured
/// environment and `cfg.seed`.
pub fn run_active_learning(cfg: &ExperimentConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let env = cfg.env.build(cfg.seed)?;
    let mut expert = SyntheticExpert::new(&env, cfg.beta)?;
    run_with_expert(cfg, &env, &mut expert)
}

struct Timer(bool);

impl Timer {
    fn time<T>(&self, f: impl FnOnce() -> T) -> (T, f64) {
        let start = Instant::now();
        let out = f();
        (
            out,
            if self.0 {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
        )
    }
}

/// Run one experiment with an arbitrary demonstrator.
///
/// A failing expert ends the run early; the returned record is then marked
/// incomplete and holds the steps finished so far.
pub fn run_with_expert(
    cfg: &ExperimentConfig,
    env: &Environment,
    expert: &mut dyn Expert,
) -> Result<RunRecord> {
    cfg.validate()?;
    let seed = cfg.seed;
    let mdp = &env.mdp;
    let model = &env.reward_model;
    let true_rewards = env.true_rewards();
    let target = target_distribution(&cfg.target, mdp)?;
    let candidates = candidates_for(cfg.candidates, mdp);
    let timer = Timer(cfg.record_timing);
    let full_cap = mdp.step_cap();
    let cap = if cfg.method.single_step() {
        1
    } else {
        full_cap
    };

    let mut record = RunRecord {
        method: cfg.method,
        seed,
        true_theta: env.true_theta.clone(),
        rows: Vec::with_capacity(cfg.steps),
        diagnostics: Vec::with_capacity(cfg.steps + 1),
        acquisitions: Vec::with_capacity(cfg.steps),
        complete: false,
        error: None,
    };

    let mut dataset = DemoDataset::new();
    for (k, xi) in initial_states(&cfg.initial_demos, mdp)?
        .into_iter()
        .enumerate()
    {
        let mut r = derive(seed, &[tags::INIT_DEMO, k as u64]);
        match expert.demonstrate(mdp, xi, full_cap, &mut r) {
            Ok(t) => dataset.push(t),
            Err(e) => {
                record.error = Some(e.to_string());
                return Ok(record);
            }
        }
    }

    let sample = |dataset: &DemoDataset, step: usize| {
        let mut r = derive(seed, &[tags::MCMC, step as u64]);
        sample_posterior(dataset, mdp, model, &env.prior, &cfg.sampler, &mut r)
    };
    let evaluate = |post: &PosteriorSampleSet| -> Result<(f64, f64)> {
        let h = posterior_entropy_estimate(post, cfg.entropy_k)?;
        let app = apprentice_policy(post, mdp, model)?;
        Ok((h, regret(&app, &true_rewards, mdp, &target)?))
    };

    let mut posterior = sample(&dataset, 0)?;
    let (h0, r0) = evaluate(&posterior)?;
    record.diagnostics.push(StepDiagnostics {
        step: 0,
        n_demos: dataset.len(),
        entropy_nats: h0,
        regret: r0,
        cov_trace: posterior.covariance_trace(),
        acceptance: posterior.provenance.acceptance,
        queried: String::new(),
    });

    for step in 1..=cfg.steps {
        let mut acq_rng = derive(seed, &[tags::ACQUIRE, step as u64]);
        let (acquired, t_acq) =
            timer.time(|| acquire(cfg.method, cfg, &candidates, &posterior, mdp, &mut acq_rng));
        let acquired = acquired?;
        let mut traj_len = 0;
        for (k, &xi) in acquired.queries.iter().enumerate() {
            let mut r = derive(seed, &[tags::EXPERT, step as u64, k as u64]);
            match expert.demonstrate(mdp, xi, cap, &mut r) {
                Ok(t) => {
                    traj_len += t.len();
                    dataset.push(t);
                }
                Err(e) => {
                    log::warn!("expert failed at step {step}: {e}");
                    record.error = Some(e.to_string());
                    return Ok(record);
                }
            }
        }
        let (post, t_mcmc) = timer.time(|| sample(&dataset, step));
        posterior = post?;
        let (h, rg) = evaluate(&posterior)?;
        record.rows.push(StepRow {
            step,
            xi: acquired.result.chosen,
            traj_len,
            entropy_nats: h,
            regret: rg,
            t_acq_s: t_acq,
            t_mcmc_s: t_mcmc,
        });
        record.diagnostics.push(StepDiagnostics {
            step,
            n_demos: dataset.len(),
            entropy_nats: h,
            regret: rg,
            cov_trace: posterior.covariance_trace(),
            acceptance: posterior.provenance.acceptance,
            queried: acquired
                .queries
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        });
        let mut result = acquired.result;
        if !cfg.record_timing {
            result.wall_time_s = 0.0;
        }
        record.acquisitions.push(result);
    }
    record.complete = true;
    Ok(record)
}
