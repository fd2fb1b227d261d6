//! Gridworld construction: the structured layout and the fully random world.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Mdp;
use crate::error::{Error, Result};
use crate::reward::{Prior, RewardModel, RewardSlot};
use crate::rng::Rng;

/// Bundled 6x6 layout: jail bottom-left, goal top-right.
pub const STRUCTURED_LAYOUT: &str = include_str!("../../layouts/structured_6x6.txt");

pub const PATH_REWARD: f64 = -1.0;
pub const GOAL_REWARD: f64 = 100.0;
pub const JAIL_REWARD: f64 = -1.0;
pub const DEFAULT_GAMMA: f64 = 0.95;
pub const STRUCTURED_CAP: usize = 15;
pub const RANDOM_CAP: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
    Stay = 4,
}

impl Action {
    pub const ALL: [Action; 5] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::Stay,
    ];

    pub fn from_index(a: usize) -> Option<Action> {
        Self::ALL.get(a).copied()
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
            Action::Stay => (0, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellType {
    Path,
    Goal,
    Jail,
    Mud,
    Water,
    Lava,
    /// Cell of the fully random world; reward is its own parameter.
    Free,
}

impl CellType {
    pub fn from_char(c: char) -> Option<CellType> {
        Some(match c {
            'P' => CellType::Path,
            'G' => CellType::Goal,
            'J' => CellType::Jail,
            'M' => CellType::Mud,
            'W' => CellType::Water,
            'L' => CellType::Lava,
            _ => return None,
        })
    }

    pub fn to_char(self) -> char {
        match self {
            CellType::Path => 'P',
            CellType::Goal => 'G',
            CellType::Jail => 'J',
            CellType::Mud => 'M',
            CellType::Water => 'W',
            CellType::Lava => 'L',
            CellType::Free => '.',
        }
    }
}

/// Grid geometry and per-cell labels. States are numbered row-major, row 0 on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<CellType>,
}

impl Grid {
    pub fn state(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn coords(&self, s: usize) -> (usize, usize) {
        (s / self.width, s % self.width)
    }

    /// Deterministic move; stepping off the edge leaves the state unchanged.
    pub fn step(&self, s: usize, a: Action) -> usize {
        let (r, c) = self.coords(s);
        let (dr, dc) = a.delta();
        let nr = r as isize + dr;
        let nc = c as isize + dc;
        if nr < 0 || nc < 0 || nr >= self.height as isize || nc >= self.width as isize {
            s
        } else {
            self.state(nr as usize, nc as usize)
        }
    }
}

/// An MDP bundled with its reward parameterisation, prior and ground truth.
#[derive(Debug, Clone)]
pub struct Environment {
    pub name: String,
    pub mdp: Mdp,
    pub reward_model: RewardModel,
    pub prior: Prior,
    pub true_theta: Vec<f64>,
}

impl Environment {
    pub fn true_rewards(&self) -> Vec<f64> {
        self.reward_model.state_rewards(&self.true_theta)
    }
}

/// Parse a layout: one character per cell, rows separated by newlines.
pub fn parse_layout(text: &str) -> Result<Grid> {
    let rows: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    if rows.is_empty() {
        return Err(Error::Config("layout is empty".into()));
    }
    let width = rows[0].chars().count();
    let mut cells = Vec::with_capacity(width * rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.chars().count() != width {
            return Err(Error::Config(format!(
                "layout row {i} has a different width"
            )));
        }
        for c in row.chars() {
            cells.push(
                CellType::from_char(c)
                    .ok_or_else(|| Error::Config(format!("unknown layout character {c:?}")))?,
            );
        }
    }
    if !cells.contains(&CellType::Goal) {
        return Err(Error::Config("layout has no goal cell".into()));
    }
    Ok(Grid {
        width,
        height: rows.len(),
        cells,
    })
}

fn grid_mdp(grid: Grid, terminal: Vec<bool>, gamma: f64, cap: usize) -> Result<Mdp> {
    let n = grid.width * grid.height;
    let mut transitions = Vec::with_capacity(n * 5);
    for s in 0..n {
        for a in Action::ALL {
            let next = if grid.cells[s] == CellType::Jail {
                s
            } else {
                grid.step(s, a)
            };
            transitions.push(vec![(next, 1.0)]);
        }
    }
    Ok(Mdp::new(n, 5, transitions, terminal, gamma, cap)?.with_grid(grid))
}

/// Structured world from a layout. Mud, water and lava rewards are the three
/// unknown parameters; path, jail and goal rewards are known.
pub fn make_structured_from_layout(
    layout: &str,
    prior: Prior,
    true_theta: Vec<f64>,
) -> Result<Environment> {
    let grid = parse_layout(layout)?;
    prior.validate()?;
    if prior.dim() != 3 || true_theta.len() != 3 {
        return Err(Error::Config(
            "structured world has exactly three unknown rewards".into(),
        ));
    }
    let slots = grid
        .cells
        .iter()
        .map(|c| match c {
            CellType::Path | CellType::Free => RewardSlot::Known(PATH_REWARD),
            CellType::Goal => RewardSlot::Known(GOAL_REWARD),
            CellType::Jail => RewardSlot::Known(JAIL_REWARD),
            CellType::Mud => RewardSlot::Param(0),
            CellType::Water => RewardSlot::Param(1),
            CellType::Lava => RewardSlot::Param(2),
        })
        .collect();
    let reward_model = RewardModel::new(slots, vec!["mud".into(), "water".into(), "lava".into()])?;
    let terminal = grid.cells.iter().map(|&c| c == CellType::Goal).collect();
    let mdp = grid_mdp(grid, terminal, DEFAULT_GAMMA, STRUCTURED_CAP)?;
    Ok(Environment {
        name: "structured".into(),
        mdp,
        reward_model,
        prior,
        true_theta,
    })
}

/// The bundled 6x6 structured world with a Uniform[-100, 0] prior per unknown type.
/// The ground truth is a draw from the prior made with `rng`.
pub fn make_structured_gridworld(rng: &mut Rng) -> Result<Environment> {
    let prior = Prior::Uniform {
        low: -100.0,
        high: 0.0,
        dim: 3,
    };
    let truth = prior.sample(rng);
    make_structured_from_layout(STRUCTURED_LAYOUT, prior, truth)
}

/// Scaled-up structured world of side `n`: the bundled layout is stretched
/// by nearest-cell lookup, with a single jail bottom-left and a single goal top-right.
pub fn make_scaled_structured_gridworld(
    n: usize,
    prior: Prior,
    true_theta: Vec<f64>,
) -> Result<Environment> {
    if n < 2 {
        return Err(Error::Input("grid side must be at least 2".into()));
    }
    let base = parse_layout(STRUCTURED_LAYOUT)?;
    let mut text = String::with_capacity(n * (n + 1));
    for r in 0..n {
        for c in 0..n {
            let ch = if r == n - 1 && c == 0 {
                'J'
            } else if r == 0 && c == n - 1 {
                'G'
            } else {
                let br = r * base.height / n;
                let bc = c * base.width / n;
                match base.cells[base.state(br, bc)] {
                    CellType::Jail | CellType::Goal => 'P',
                    other => other.to_char(),
                }
            };
            text.push(ch);
        }
        text.push('\n');
    }
    let mut env = make_structured_from_layout(&text, prior, true_theta)?;
    env.name = format!("structured-{n}x{n}");
    Ok(env)
}

/// Whether the random world's noise parameter is a standard deviation or a variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardNoise {
    #[default]
    StdDev,
    Variance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomEnvOptions {
    pub size: usize,
    pub noise: f64,
    pub noise_kind: RewardNoise,
    pub p_terminal: f64,
    pub terminal_quantile: f64,
    pub gamma: f64,
    pub step_cap: usize,
}

impl Default for RandomEnvOptions {
    fn default() -> Self {
        Self {
            size: 7,
            noise: 3.0,
            noise_kind: RewardNoise::StdDev,
            p_terminal: 0.1,
            terminal_quantile: 0.9,
            gamma: DEFAULT_GAMMA,
            step_cap: RANDOM_CAP,
        }
    }
}

impl RandomEnvOptions {
    pub fn reward_std(&self) -> f64 {
        match self.noise_kind {
            RewardNoise::StdDev => self.noise,
            RewardNoise::Variance => self.noise.sqrt(),
        }
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub(crate) fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

/// Fully random world: i.i.d. Normal rewards per state, random terminals plus
/// every state whose reward exceeds the empirical quantile.
pub fn make_random_gridworld(seed: u64, opts: &RandomEnvOptions) -> Result<Environment> {
    if opts.size < 2 {
        return Err(Error::Input("grid side must be at least 2".into()));
    }
    let std = opts.reward_std();
    let prior = Prior::Normal {
        mean: 0.0,
        std,
        dim: opts.size * opts.size,
    };
    prior.validate()?;
    let mut rng = crate::rng::derive(seed, &[crate::rng::tags::TRUTH, 0x7261_6e64]);
    let n = opts.size * opts.size;
    let normal = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
    let rewards: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let mut terminal: Vec<bool> = (0..n)
        .map(|_| rng.random::<f64>() < opts.p_terminal)
        .collect();
    let cut = quantile(&rewards, opts.terminal_quantile);
    for (t, &r) in terminal.iter_mut().zip(&rewards) {
        if r > cut {
            *t = true;
        }
    }
    if terminal.iter().all(|&t| t) {
        return Err(Error::Config(
            "random world has no non-terminal state".into(),
        ));
    }
    let grid = Grid {
        width: opts.size,
        height: opts.size,
        cells: vec![CellType::Free; n],
    };
    let mdp = grid_mdp(grid, terminal, opts.gamma, opts.step_cap)?;
    Ok(Environment {
        name: "random".into(),
        mdp,
        reward_model: RewardModel::per_state(n),
        prior,
        true_theta: rewards,
    })
}
