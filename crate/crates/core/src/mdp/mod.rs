//! Tabular MDPs, gridworld construction and exact planning.

mod grid;
mod planning;
mod policy;
mod trajectory;

pub use grid::{
    make_random_gridworld, make_scaled_structured_gridworld, make_structured_from_layout,
    make_structured_gridworld, parse_layout, Action, CellType, Environment, Grid, RandomEnvOptions,
    RewardNoise, STRUCTURED_LAYOUT,
};
pub use planning::{
    evaluate_deterministic, evaluate_policy, expected_return, greedy_actions, solve_optimal,
    value_iteration, QFunction,
};
pub use policy::{boltzmann_log_policy, boltzmann_policy, LogPolicy, Policy};
pub use trajectory::{sample_trajectory, trajectory_log_likelihood, Trajectory};
pub(crate) use trajectory::{sample_trajectory_log, trajectory_log_likelihood_log};

use crate::error::{Error, Result};

/// A finite MDP with state-only rewards.
///
/// Transitions are stored sparsely as `(successor, probability)` lists indexed
/// by `state * n_actions + action`. Terminal states end an episode on entry;
/// jail states are absorbing but non-terminal.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<Vec<(usize, f64)>>,
    terminal: Vec<bool>,
    jail: Vec<bool>,
    gamma: f64,
    step_cap: usize,
    deterministic: bool,
    grid: Option<Grid>,
}

impl Mdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<Vec<(usize, f64)>>,
        terminal: Vec<bool>,
        gamma: f64,
        step_cap: usize,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Input(
                "MDP needs at least one state and one action".into(),
            ));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Input(format!(
                "discount must lie in (0, 1), got {gamma}"
            )));
        }
        if step_cap == 0 {
            return Err(Error::Input("step cap must be positive".into()));
        }
        if transitions.len() != n_states * n_actions || terminal.len() != n_states {
            return Err(Error::Input(
                "transition or terminal table has the wrong shape".into(),
            ));
        }
        for (i, row) in transitions.iter().enumerate() {
            let total: f64 = row.iter().map(|&(_, p)| p).sum();
            if (total - 1.0).abs() > 1e-9 || row.iter().any(|&(t, p)| t >= n_states || !(p >= 0.0))
            {
                return Err(Error::Input(format!(
                    "transition row for state {} action {} is not a distribution",
                    i / n_actions,
                    i % n_actions
                )));
            }
        }
        let deterministic = transitions.iter().all(|r| r.len() == 1);
        let mut jail = vec![false; n_states];
        for s in 0..n_states {
            if terminal[s] {
                continue;
            }
            jail[s] = (0..n_actions).all(|a| {
                let row = &transitions[s * n_actions + a];
                row.len() == 1 && row[0].0 == s
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            transitions,
            terminal,
            jail,
            gamma,
            step_cap,
            deterministic,
            grid: None,
        })
    }

    pub(crate) fn with_grid(mut self, grid: Grid) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn step_cap(&self) -> usize {
        self.step_cap
    }

    pub fn set_gamma(&mut self, gamma: f64) -> Result<()> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Input(format!(
                "discount must lie in (0, 1), got {gamma}"
            )));
        }
        self.gamma = gamma;
        Ok(())
    }

    pub fn set_step_cap(&mut self, cap: usize) -> Result<()> {
        if cap == 0 {
            return Err(Error::Input("step cap must be positive".into()));
        }
        self.step_cap = cap;
        Ok(())
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    /// Absorbing non-terminal state: every action leads back to itself.
    pub fn is_jail(&self, s: usize) -> bool {
        self.jail[s]
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.n_actions + a]
    }

    pub fn transition_prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.successors(s, a)
            .iter()
            .filter(|&&(t, _)| t == next)
            .map(|&(_, p)| p)
            .sum()
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    pub fn non_terminal_states(&self) -> Vec<usize> {
        (0..self.n_states).filter(|&s| !self.terminal[s]).collect()
    }

    pub fn non_terminal_non_jail_states(&self) -> Vec<usize> {
        (0..self.n_states)
            .filter(|&s| !self.terminal[s] && !self.jail[s])
            .collect()
    }

    /// Uniform distribution over non-terminal, non-jail states.
    pub fn default_target_distribution(&self) -> Vec<f64> {
        let support = self.non_terminal_non_jail_states();
        let mut d = vec![0.0; self.n_states];
        let w = 1.0 / support.len().max(1) as f64;
        for s in support {
            d[s] = w;
        }
        d
    }
}
