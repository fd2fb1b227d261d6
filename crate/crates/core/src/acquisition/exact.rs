use crate::error::{Error, Result};
use crate::mdp::{boltzmann_log_policy, solve_optimal, LogPolicy, Mdp};
use crate::reward::RewardModel;

use super::log_sum_exp;

const MAX_TRAJECTORIES: usize = 1_000_000;

struct Enumerator<'a> {
    mdp: &'a Mdp,
    tables: Vec<LogPolicy>,
    log_w: Vec<f64>,
    cap: usize,
    leaves: usize,
    eig: f64,
    scratch: Vec<f64>,
}

impl Enumerator<'_> {
    fn leaf(&mut self, ll: &[f64], log_t: f64) {
        self.scratch.clear();
        self.scratch
            .extend(ll.iter().zip(&self.log_w).map(|(l, w)| l + w));
        let log_marginal = log_sum_exp(&self.scratch);
        for (i, &joint) in self.scratch.iter().enumerate() {
            if joint > f64::NEG_INFINITY {
                self.eig += (joint + log_t).exp() * (ll[i] - log_marginal);
            }
        }
    }

    fn walk(&mut self, s: usize, depth: usize, ll: &[f64], log_t: f64) -> Result<()> {
        for a in 0..self.mdp.n_actions() {
            let next_ll: Vec<f64> = ll
                .iter()
                .zip(&self.tables)
                .map(|(l, p)| l + p.log_prob(s, a))
                .collect();
            if next_ll.iter().all(|l| *l == f64::NEG_INFINITY) {
                continue;
            }
            for &(s2, p) in self.mdp.successors(s, a) {
                let lt = log_t + p.ln();
                if self.mdp.is_terminal(s2) || depth + 1 == self.cap {
                    self.leaves += 1;
                    if self.leaves > MAX_TRAJECTORIES {
                        return Err(Error::Refused(format!(
                            "more than {MAX_TRAJECTORIES} trajectories to enumerate"
                        )));
                    }
                    self.leaf(&next_ll, lt);
                } else {
                    self.walk(s2, depth + 1, &next_ll, lt)?;
                }
            }
        }
        Ok(())
    }
}

/// Exact expected information gain of a demonstration from `xi` when the
/// reward is one of `thetas` with probabilities `weights`.
///
/// Enumerates every trajectory up to `cap` steps and refuses once more than a
/// million have been visited.
pub fn eig_exact_tiny(
    xi: usize,
    thetas: &[Vec<f64>],
    weights: &[f64],
    mdp: &Mdp,
    model: &RewardModel,
    beta: f64,
    cap: usize,
) -> Result<f64> {
    if thetas.is_empty() || thetas.len() != weights.len() {
        return Err(Error::Input("need one weight per reward sample".into()));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::Input(
            "weights must be finite and non-negative".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Input("weights must sum to one".into()));
    }
    if xi >= mdp.n_states() || mdp.is_terminal(xi) {
        return Err(Error::Input(format!(
            "state {xi} is not a valid non-terminal start"
        )));
    }
    if cap == 0 {
        return Err(Error::Input("step cap must be positive".into()));
    }
    let mut tables = Vec::with_capacity(thetas.len());
    for t in thetas {
        let (q, _) = solve_optimal(mdp, &model.state_rewards(t), None)?;
        tables.push(boltzmann_log_policy(&q, beta));
    }
    let mut e = Enumerator {
        mdp,
        tables,
        log_w: weights.iter().map(|w| w.ln()).collect(),
        cap,
        leaves: 0,
        eig: 0.0,
        scratch: Vec::with_capacity(thetas.len()),
    };
    let start = vec![0.0; thetas.len()];
    e.walk(xi, 0, &start, 0.0)?;
    Ok(e.eig)
}
