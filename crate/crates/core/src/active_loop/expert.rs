use crate::error::Result;
use crate::mdp::{
    boltzmann_policy, sample_trajectory, solve_optimal, Environment, Mdp, Policy, Trajectory,
};
use crate::rng::Rng;

/// Source of demonstrations.
pub trait Expert {
    fn demonstrate(
        &mut self,
        mdp: &Mdp,
        xi: usize,
        cap: usize,
        rng: &mut Rng,
    ) -> Result<Trajectory>;
}

/// Boltzmann-rational demonstrator under the true reward.
#[derive(Debug, Clone)]
pub struct SyntheticExpert {
    policy: Policy,
}

impl SyntheticExpert {
    pub fn new(env: &Environment, beta: f64) -> Result<Self> {
        let (q, _) = solve_optimal(&env.mdp, &env.true_rewards(), None)?;
        Ok(Self {
            policy: boltzmann_policy(&q, beta),
        })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }
}

impl Expert for SyntheticExpert {
    fn demonstrate(
        &mut self,
        mdp: &Mdp,
        xi: usize,
        cap: usize,
        rng: &mut Rng,
    ) -> Result<Trajectory> {
        sample_trajectory(mdp, &self.policy, xi, cap, rng)
    }
}
