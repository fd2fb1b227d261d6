//! Reward parameterisation and priors.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// How a single state obtains its reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RewardSlot {
    /// Reward is the given component of the unknown parameter vector.
    Param(usize),
    /// Reward is known in advance.
    Known(f64),
}

/// Maps a parameter vector to per-state rewards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardModel {
    slots: Vec<RewardSlot>,
    dim: usize,
    names: Vec<String>,
}

impl RewardModel {
    pub fn new(slots: Vec<RewardSlot>, names: Vec<String>) -> Result<Self> {
        let dim = names.len();
        for s in &slots {
            match *s {
                RewardSlot::Param(i) if i >= dim => {
                    return Err(Error::Config(format!(
                        "reward slot refers to parameter {i} but only {dim} are named"
                    )))
                }
                RewardSlot::Known(v) if !v.is_finite() => {
                    return Err(Error::Config("known reward is not finite".into()))
                }
                _ => {}
            }
        }
        Ok(Self { slots, dim, names })
    }

    /// One free parameter per state.
    pub fn per_state(n_states: usize) -> Self {
        Self {
            slots: (0..n_states).map(RewardSlot::Param).collect(),
            dim: n_states,
            names: (0..n_states).map(|s| format!("r{s}")).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_states(&self) -> usize {
        self.slots.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn slots(&self) -> &[RewardSlot] {
        &self.slots
    }

    pub fn state_rewards(&self, theta: &[f64]) -> Vec<f64> {
        debug_assert_eq!(theta.len(), self.dim);
        self.slots
            .iter()
            .map(|s| match *s {
                RewardSlot::Param(i) => theta[i],
                RewardSlot::Known(v) => v,
            })
            .collect()
    }

    pub fn state_rewards_into(&self, theta: &[f64], out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(&self.slots) {
            *o = match *s {
                RewardSlot::Param(i) => theta[i],
                RewardSlot::Known(v) => v,
            };
        }
    }
}

/// Independent per-dimension prior over the reward parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    Uniform { low: f64, high: f64, dim: usize },
    Normal { mean: f64, std: f64, dim: usize },
}

impl Prior {
    pub fn dim(&self) -> usize {
        match *self {
            Prior::Uniform { dim, .. } | Prior::Normal { dim, .. } => dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Prior::Uniform { low, high, .. }
                if !(low < high) || !low.is_finite() || !high.is_finite() =>
            {
                Err(Error::Config(format!(
                    "uniform prior needs low < high, got [{low}, {high}]"
                )))
            }
            Prior::Normal { std, mean, .. } if !(std > 0.0) || !mean.is_finite() => Err(
                Error::Config(format!("normal prior needs std > 0, got {std}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn in_support(&self, theta: &[f64]) -> bool {
        match *self {
            Prior::Uniform { low, high, .. } => theta.iter().all(|&t| t >= low && t <= high),
            Prior::Normal { .. } => theta.iter().all(|t| t.is_finite()),
        }
    }

    /// Log density, `-inf` outside the support.
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        if theta.len() != self.dim() || !self.in_support(theta) {
            return f64::NEG_INFINITY;
        }
        match *self {
            Prior::Uniform { low, high, dim } => -(dim as f64) * (high - low).ln(),
            Prior::Normal { mean, std, .. } => {
                let c = -0.5 * (2.0 * std::f64::consts::PI).ln() - std.ln();
                theta
                    .iter()
                    .map(|&t| c - 0.5 * ((t - mean) / std).powi(2))
                    .sum()
            }
        }
    }

    /// Log density of one coordinate. Used by component-wise updates.
    pub fn log_density_1d(&self, t: f64) -> f64 {
        match *self {
            Prior::Uniform { low, high, .. } => {
                if t >= low && t <= high {
                    -(high - low).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::Normal { mean, std, .. } => {
                if !t.is_finite() {
                    return f64::NEG_INFINITY;
                }
                -0.5 * (2.0 * std::f64::consts::PI).ln()
                    - std.ln()
                    - 0.5 * ((t - mean) / std).powi(2)
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        match *self {
            Prior::Uniform { low, high, dim } => {
                (0..dim).map(|_| rng.random_range(low..high)).collect()
            }
            Prior::Normal { mean, std, dim } => {
                let n = Normal::new(mean, std).expect("validated prior");
                (0..dim).map(|_| n.sample(rng)).collect()
            }
        }
    }

    /// Natural scale of one coordinate, used to seed proposal widths.
    pub fn width(&self) -> f64 {
        match *self {
            Prior::Uniform { low, high, .. } => high - low,
            Prior::Normal { std, .. } => 4.0 * std,
        }
    }

    /// Differential entropy of the prior in nats.
    pub fn entropy(&self) -> f64 {
        match *self {
            Prior::Uniform { low, high, dim } => dim as f64 * (high - low).ln(),
            Prior::Normal { std, dim, .. } => {
                dim as f64
                    * 0.5
                    * (2.0 * std::f64::consts::PI * std::f64::consts::E * std * std).ln()
            }
        }
    }

    /// Bounds used to discretise the prior (the support for uniform priors).
    /// Bounded support of one coordinate, if any.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            Prior::Uniform { low, high, .. } => Some((low, high)),
            Prior::Normal { .. } => None,
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Prior::Uniform { low, high, .. } => (low, high),
            Prior::Normal { mean, std, .. } => (mean - 4.0 * std, mean + 4.0 * std),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_rewards_follow_slots() {
        let m = RewardModel::new(
            vec![
                RewardSlot::Known(-1.0),
                RewardSlot::Param(1),
                RewardSlot::Param(0),
                RewardSlot::Known(100.0),
            ],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert_eq!(
            m.state_rewards(&[-3.0, -7.0]),
            vec![-1.0, -7.0, -3.0, 100.0]
        );
    }

    #[test]
    fn slot_out_of_range_is_rejected() {
        assert!(RewardModel::new(vec![RewardSlot::Param(2)], vec!["a".into()]).is_err());
    }

    #[test]
    fn uniform_prior_support() {
        let p = Prior::Uniform {
            low: -100.0,
            high: 0.0,
            dim: 3,
        };
        assert!(p.log_density(&[-1.0, -50.0, -99.0]).is_finite());
        assert_eq!(p.log_density(&[1.0, -50.0, -99.0]), f64::NEG_INFINITY);
        assert!((p.entropy() - 3.0 * 100f64.ln()).abs() < 1e-12);
    }
}
