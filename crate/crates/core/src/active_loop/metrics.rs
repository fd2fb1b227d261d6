use crate::bayes_irl::PosteriorSampleSet;
use crate::config::TargetSpec;
use crate::error::{Error, Result};
use crate::mdp::{expected_return, greedy_actions, solve_optimal, Mdp, Policy};
use crate::reward::RewardModel;

/// Optimal deterministic policy for the posterior-mean reward.
///
/// Expected return is linear in the reward, so this maximises the posterior
/// expected return. Ties go to the lowest action index.
pub fn apprentice_policy(
    posterior: &PosteriorSampleSet,
    mdp: &Mdp,
    model: &RewardModel,
) -> Result<Policy> {
    if posterior.kept.is_empty() {
        return Err(Error::Input("posterior sample set is empty".into()));
    }
    let mean = posterior.mean();
    let (q, _) = solve_optimal(mdp, &model.state_rewards(&mean), None)?;
    Ok(Policy::deterministic(mdp.n_actions(), &greedy_actions(&q)))
}

/// Initial-state distribution described by `spec`.
pub fn target_distribution(spec: &TargetSpec, mdp: &Mdp) -> Result<Vec<f64>> {
    let states = match spec {
        TargetSpec::UniformNonTerminalNonJail => {
            let s = mdp.non_terminal_non_jail_states();
            if s.is_empty() {
                mdp.non_terminal_states()
            } else {
                s
            }
        }
        TargetSpec::UniformNonTerminal => mdp.non_terminal_states(),
        TargetSpec::State(s) => {
            if *s >= mdp.n_states() || mdp.is_terminal(*s) {
                return Err(Error::Config(format!(
                    "target state {s} is not a non-terminal state"
                )));
            }
            vec![*s]
        }
    };
    if states.is_empty() {
        return Err(Error::Config(
            "no non-terminal state for the target distribution".into(),
        ));
    }
    let mut d = vec![0.0; mdp.n_states()];
    let w = 1.0 / states.len() as f64;
    for s in states {
        d[s] = w;
    }
    Ok(d)
}

/// Return of the true optimal policy minus that of `apprentice`, both under
/// the true reward and the target distribution.
pub fn regret(apprentice: &Policy, true_rewards: &[f64], mdp: &Mdp, target: &[f64]) -> Result<f64> {
    let (_, best) = solve_optimal(mdp, true_rewards, None)?;
    let best = Policy::deterministic(mdp.n_actions(), &best);
    Ok(expected_return(mdp, &best, true_rewards, target)?
        - expected_return(mdp, apprentice, true_rewards, target)?)
}
