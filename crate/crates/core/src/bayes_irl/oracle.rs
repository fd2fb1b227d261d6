//! Brute-force posterior on a regular grid, used to validate the sampler.

use super::posterior::ActionCounts;
use super::DemoDataset;
use crate::error::{Error, Result};
use crate::mdp::{solve_optimal, Mdp};
use crate::reward::{Prior, RewardModel};

/// Normalised posterior over a regular grid of cell centres.
#[derive(Debug, Clone)]
pub struct GridPosterior {
    pub resolution: usize,
    pub bounds: (f64, f64),
    /// Cell centres along each axis (shared by all axes).
    pub centres: Vec<f64>,
    /// Cell probabilities, first parameter varying slowest.
    pub probs: Vec<f64>,
    pub marginals: Vec<Vec<f64>>,
    /// Index of the most probable cell.
    pub mode: usize,
}

impl GridPosterior {
    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn cell_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        let mut f = flat;
        for d in (0..self.dim()).rev() {
            idx[d] = f % self.resolution;
            f /= self.resolution;
        }
        idx
    }

    pub fn cell_centre(&self, flat: usize) -> Vec<f64> {
        self.cell_index(flat)
            .into_iter()
            .map(|i| self.centres[i])
            .collect()
    }
}

const MAX_DIM: usize = 3;

/// Evaluate the log posterior at every cell centre and normalise.
pub fn grid_oracle_posterior(
    dataset: &DemoDataset,
    mdp: &Mdp,
    model: &RewardModel,
    prior: &Prior,
    beta: f64,
    resolution: usize,
) -> Result<GridPosterior> {
    let dim = model.dim();
    if dim > MAX_DIM {
        return Err(Error::Refused(format!(
            "grid oracle supports at most {MAX_DIM} parameters, got {dim}"
        )));
    }
    if resolution == 0 {
        return Err(Error::Input("resolution must be positive".into()));
    }
    let (lo, hi) = prior.bounds();
    let width = (hi - lo) / resolution as f64;
    let centres: Vec<f64> = (0..resolution)
        .map(|i| lo + (i as f64 + 0.5) * width)
        .collect();
    let counts: ActionCounts = dataset.counts(mdp.n_actions());
    let total = resolution.pow(dim as u32);
    let mut logp = Vec::with_capacity(total);
    let mut warm: Option<Vec<usize>> = None;
    let mut theta = vec![0.0; dim];
    let mut rewards = vec![0.0; mdp.n_states()];
    for flat in 0..total {
        let mut f = flat;
        for d in (0..dim).rev() {
            theta[d] = centres[f % resolution];
            f /= resolution;
        }
        let lp = prior.log_density(&theta);
        if lp == f64::NEG_INFINITY {
            logp.push(lp);
            continue;
        }
        let ll = if dataset.is_empty() {
            0.0
        } else {
            model.state_rewards_into(&theta, &mut rewards);
            let (q, pol) = solve_optimal(mdp, &rewards, warm.as_deref())?;
            warm = Some(pol);
            counts.log_likelihood(&q, beta)
        };
        logp.push(lp + ll);
    }
    let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logp.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= z);
    let mode = logp
        .iter()
        .enumerate()
        .fold(0, |best, (i, &l)| if l > logp[best] { i } else { best });
    let mut marginals = vec![vec![0.0; resolution]; dim];
    for (flat, &p) in probs.iter().enumerate() {
        let mut f = flat;
        for d in (0..dim).rev() {
            marginals[d][f % resolution] += p;
            f /= resolution;
        }
    }
    Ok(GridPosterior {
        resolution,
        bounds: (lo, hi),
        centres,
        probs,
        marginals,
        mode,
    })
}

/// Total-variation distance between the histogram of `samples[.][dim]` and the
/// oracle marginal, both binned into `bins` equal-width bins over the oracle bounds.
pub fn marginal_tv(samples: &[Vec<f64>], oracle: &GridPosterior, dim: usize, bins: usize) -> f64 {
    let (lo, hi) = oracle.bounds;
    let bin_of =
        |x: f64| (((x - lo) / (hi - lo) * bins as f64).floor().max(0.0) as usize).min(bins - 1);
    let mut emp = vec![0.0; bins];
    for s in samples {
        emp[bin_of(s[dim])] += 1.0 / samples.len() as f64;
    }
    let mut orc = vec![0.0; bins];
    for (c, &p) in oracle.centres.iter().zip(&oracle.marginals[dim]) {
        orc[bin_of(*c)] += p;
    }
    0.5 * emp
        .iter()
        .zip(&orc)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes_irl::log_posterior;
    use crate::mdp::{boltzmann_policy, make_structured_gridworld, sample_trajectory};
    use crate::rng::derive;

    #[test]
    fn empty_dataset_is_flat_and_normalised() {
        let env = make_structured_gridworld(&mut derive(1, &[])).unwrap();
        let g = grid_oracle_posterior(
            &DemoDataset::new(),
            &env.mdp,
            &env.reward_model,
            &env.prior,
            1.0,
            10,
        )
        .unwrap();
        assert!((g.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert!(g.probs.iter().all(|&p| (p - 1e-3).abs() < 1e-12));
    }

    #[test]
    fn mode_matches_direct_maximisation() {
        let env = make_structured_gridworld(&mut derive(2, &[])).unwrap();
        let (q, _) = solve_optimal(&env.mdp, &env.true_rewards(), None).unwrap();
        let pol = boltzmann_policy(&q, 1.0);
        let mut data = DemoDataset::new();
        for (i, s) in [0usize, 13, 27].into_iter().enumerate() {
            data.push(
                sample_trajectory(&env.mdp, &pol, s, 15, &mut derive(3, &[i as u64])).unwrap(),
            );
        }
        let g =
            grid_oracle_posterior(&data, &env.mdp, &env.reward_model, &env.prior, 1.0, 8).unwrap();
        assert!((g.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let mut best = (f64::NEG_INFINITY, 0);
        for flat in 0..g.probs.len() {
            let lp = log_posterior(
                &g.cell_centre(flat),
                &data,
                &env.mdp,
                &env.reward_model,
                &env.prior,
                1.0,
            )
            .unwrap();
            if lp > best.0 {
                best = (lp, flat);
            }
        }
        assert_eq!(g.mode, best.1);
        for m in &g.marginals {
            assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn refuses_high_dimension() {
        let env = crate::mdp::make_random_gridworld(1, &Default::default()).unwrap();
        let r = grid_oracle_posterior(
            &DemoDataset::new(),
            &env.mdp,
            &env.reward_model,
            &env.prior,
            1.0,
            5,
        );
        assert!(matches!(r, Err(Error::Refused(_))));
    }
}
