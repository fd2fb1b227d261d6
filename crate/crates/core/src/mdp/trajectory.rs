use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{LogPolicy, Mdp, Policy};
use crate::error::{Error, Result};
use crate::rng::Rng;

/// A demonstration: `(state, action)` pairs starting at `xi`.
///
/// The terminal state entered at the end (if any) is not recorded since no
/// action is taken there.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub xi: usize,
    pub steps: Vec<(usize, usize)>,
    pub terminated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Check the trajectory against the MDP's transition table.
    pub fn validate(&self, mdp: &Mdp) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::Input("trajectory has no steps".into()));
        }
        if self.steps[0].0 != self.xi {
            return Err(Error::Input("trajectory does not start at xi".into()));
        }
        if self.steps.len() > mdp.step_cap() {
            return Err(Error::Input("trajectory exceeds the step cap".into()));
        }
        for (i, &(s, a)) in self.steps.iter().enumerate() {
            if s >= mdp.n_states() || a >= mdp.n_actions() {
                return Err(Error::Input(format!("step {i} is out of range")));
            }
            if mdp.is_terminal(s) {
                return Err(Error::Input(format!("step {i} acts in a terminal state")));
            }
            if let Some(&(next, _)) = self.steps.get(i + 1) {
                if mdp.transition_prob(s, a, next) <= 0.0 {
                    return Err(Error::Input(format!(
                        "step {i} has an impossible successor"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn sample_index(rng: &mut Rng, weights: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
        if w > 0.0 {
            last = i;
        }
    }
    last
}

/// Roll out `policy` from `xi` until terminal entry or `cap` steps.
pub fn sample_trajectory(
    mdp: &Mdp,
    policy: &Policy,
    xi: usize,
    cap: usize,
    rng: &mut Rng,
) -> Result<Trajectory> {
    if xi >= mdp.n_states() {
        return Err(Error::Input(format!("start state {xi} does not exist")));
    }
    if mdp.is_terminal(xi) {
        return Err(Error::Input(format!("start state {xi} is terminal")));
    }
    if cap == 0 {
        return Err(Error::Input("step cap must be positive".into()));
    }
    Ok(rollout(mdp, xi, cap, rng, |s, rng| {
        sample_index(rng, policy.row(s).iter().copied())
    }))
}

/// Roll out a policy given as a log-probability table.
pub(crate) fn sample_trajectory_log(
    mdp: &Mdp,
    policy: &LogPolicy,
    xi: usize,
    cap: usize,
    rng: &mut Rng,
) -> Trajectory {
    rollout(mdp, xi, cap, rng, |s, rng| {
        sample_index(rng, policy.prob_row(s).iter().copied())
    })
}

fn rollout(
    mdp: &Mdp,
    xi: usize,
    cap: usize,
    rng: &mut Rng,
    mut act: impl FnMut(usize, &mut Rng) -> usize,
) -> Trajectory {
    let mut steps = Vec::with_capacity(cap);
    let mut s = xi;
    let mut terminated = false;
    while steps.len() < cap {
        let a = act(s, rng);
        steps.push((s, a));
        let succ = mdp.successors(s, a);
        let next = if succ.len() == 1 {
            succ[0].0
        } else {
            succ[sample_index(rng, succ.iter().map(|e| e.1))].0
        };
        if mdp.is_terminal(next) {
            terminated = true;
            break;
        }
        s = next;
    }
    Trajectory {
        xi,
        steps,
        terminated,
    }
}

/// `sum_t log pi(a_t | s_t)`; transition terms are omitted.
///
/// An action with zero probability yields `-inf`.
pub fn trajectory_log_likelihood(traj: &Trajectory, policy: &Policy) -> f64 {
    traj.steps
        .iter()
        .map(|&(s, a)| policy.prob(s, a).ln())
        .sum()
}

pub(crate) fn trajectory_log_likelihood_log(traj: &Trajectory, policy: &LogPolicy) -> f64 {
    traj.steps.iter().map(|&(s, a)| policy.log_prob(s, a)).sum()
}
