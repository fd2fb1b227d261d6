//! Exact planning under the reward-on-entry convention.
//!
//! `V(s) = r(s)` for terminal `s`; otherwise
//! `Q(s, a) = r(s) + gamma * sum_{s'} p(s' | s, a) V(s')` and `V(s) = max_a Q(s, a)`.

use nalgebra::{DMatrix, DVector};

use super::{Mdp, Policy};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    n_states: usize,
    n_actions: usize,
    q: Vec<f64>,
}

impl QFunction {
    pub fn from_values(n_states: usize, n_actions: usize, q: Vec<f64>) -> Self {
        assert_eq!(q.len(), n_states * n_actions);
        Self {
            n_states,
            n_actions,
            q,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.q[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn state_values(&self) -> Vec<f64> {
        (0..self.n_states)
            .map(|s| {
                self.row(s)
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    pub fn max_abs_diff(&self, other: &QFunction) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_rewards(mdp: &Mdp, rewards: &[f64]) -> Result<()> {
    if rewards.len() != mdp.n_states() {
        return Err(Error::Input(format!(
            "expected {} rewards, got {}",
            mdp.n_states(),
            rewards.len()
        )));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::Input("rewards must be finite".into()));
    }
    Ok(())
}

fn backup(mdp: &Mdp, rewards: &[f64], v: &[f64], q: &mut [f64]) {
    let na = mdp.n_actions();
    let g = mdp.gamma();
    for s in 0..mdp.n_states() {
        for a in 0..na {
            q[s * na + a] = if mdp.is_terminal(s) {
                rewards[s]
            } else {
                rewards[s]
                    + g * mdp
                        .successors(s, a)
                        .iter()
                        .map(|&(t, p)| p * v[t])
                        .sum::<f64>()
            };
        }
    }
}

/// Value iteration until the sup-norm change of `V` drops below `tol`.
pub fn value_iteration(mdp: &Mdp, rewards: &[f64], tol: f64) -> Result<QFunction> {
    check_rewards(mdp, rewards)?;
    if !(tol > 0.0) {
        return Err(Error::Input("tolerance must be positive".into()));
    }
    let (n, na) = (mdp.n_states(), mdp.n_actions());
    let mut v = vec![0.0; n];
    let mut q = vec![0.0; n * na];
    loop {
        backup(mdp, rewards, &v, &mut q);
        let mut delta: f64 = 0.0;
        for s in 0..n {
            let nv = if mdp.is_terminal(s) {
                rewards[s]
            } else {
                q[s * na..(s + 1) * na]
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            delta = delta.max((nv - v[s]).abs());
            v[s] = nv;
        }
        if delta < tol {
            backup(mdp, rewards, &v, &mut q);
            return Ok(QFunction {
                n_states: n,
                n_actions: na,
                q,
            });
        }
    }
}

/// Value of a deterministic policy, solved exactly.
///
/// On deterministic MDPs the policy induces a functional graph, evaluated in
/// linear time by following each path to a terminal state or a cycle.
pub fn evaluate_deterministic(mdp: &Mdp, rewards: &[f64], actions: &[usize]) -> Vec<f64> {
    if mdp.is_deterministic() {
        evaluate_functional_graph(mdp, rewards, actions)
    } else {
        let n = mdp.n_states();
        let na = mdp.n_actions();
        let mut probs = vec![0.0; n * na];
        for s in 0..n {
            probs[s * na + actions[s]] = 1.0;
        }
        solve_linear(mdp, rewards, &Policy::from_probs(n, na, probs))
    }
}

fn evaluate_functional_graph(mdp: &Mdp, rewards: &[f64], actions: &[usize]) -> Vec<f64> {
    const UNSEEN: u8 = 0;
    const ON_PATH: u8 = 1;
    const DONE: u8 = 2;
    let n = mdp.n_states();
    let g = mdp.gamma();
    let mut v = vec![0.0; n];
    let mut mark = vec![UNSEEN; n];
    let mut pos = vec![0usize; n];
    let mut path: Vec<usize> = Vec::with_capacity(n);
    for start in 0..n {
        if mark[start] == DONE {
            continue;
        }
        path.clear();
        let mut s = start;
        // Walk until reaching a solved state, a terminal, or closing a cycle.
        let tail_value = loop {
            if mark[s] == DONE {
                break Some(v[s]);
            }
            if mdp.is_terminal(s) {
                v[s] = rewards[s];
                mark[s] = DONE;
                break Some(v[s]);
            }
            if mark[s] == ON_PATH {
                break None;
            }
            mark[s] = ON_PATH;
            pos[s] = path.len();
            path.push(s);
            s = mdp.successors(s, actions[s])[0].0;
        };
        let mut upto = path.len();
        let mut next_value = match tail_value {
            Some(val) => val,
            None => {
                // `s` closes a cycle path[pos[s]..].
                let c0 = pos[s];
                let cycle = &path[c0..];
                let mut num = 0.0;
                let mut disc = 1.0;
                for &c in cycle {
                    num += disc * rewards[c];
                    disc *= g;
                }
                let head = num / (1.0 - disc);
                v[cycle[0]] = head;
                mark[cycle[0]] = DONE;
                let mut nv = head;
                for &c in cycle[1..].iter().rev() {
                    v[c] = rewards[c] + g * nv;
                    mark[c] = DONE;
                    nv = v[c];
                }
                upto = c0;
                head
            }
        };
        for &c in path[..upto].iter().rev() {
            v[c] = rewards[c] + g * next_value;
            mark[c] = DONE;
            next_value = v[c];
        }
    }
    v
}

fn solve_linear(mdp: &Mdp, rewards: &[f64], policy: &Policy) -> Vec<f64> {
    let n = mdp.n_states();
    let g = mdp.gamma();
    let mut a = DMatrix::<f64>::identity(n, n);
    let b = DVector::from_column_slice(rewards);
    for s in 0..n {
        if mdp.is_terminal(s) {
            continue;
        }
        for act in 0..mdp.n_actions() {
            let pa = policy.prob(s, act);
            if pa == 0.0 {
                continue;
            }
            for &(t, p) in mdp.successors(s, act) {
                a[(s, t)] -= g * pa * p;
            }
        }
    }
    let x = a
        .lu()
        .solve(&b)
        .expect("I - gamma P is nonsingular for gamma < 1");
    x.iter().copied().collect()
}

/// Exact value of an arbitrary (stochastic) policy.
pub fn evaluate_policy(mdp: &Mdp, rewards: &[f64], policy: &Policy) -> Result<Vec<f64>> {
    check_rewards(mdp, rewards)?;
    if policy.n_states() != mdp.n_states() || policy.n_actions() != mdp.n_actions() {
        return Err(Error::Input("policy shape does not match the MDP".into()));
    }
    if let Some(actions) = policy.as_deterministic() {
        return Ok(evaluate_deterministic(mdp, rewards, &actions));
    }
    Ok(solve_linear(mdp, rewards, policy))
}

/// Expected return of `policy` averaged over `initial`.
pub fn expected_return(
    mdp: &Mdp,
    policy: &Policy,
    rewards: &[f64],
    initial: &[f64],
) -> Result<f64> {
    if initial.len() != mdp.n_states() {
        return Err(Error::Input(
            "initial distribution has the wrong length".into(),
        ));
    }
    let total: f64 = initial.iter().sum();
    if (total - 1.0).abs() > 1e-9 || initial.iter().any(|&p| p < 0.0) {
        return Err(Error::Input("initial distribution must sum to one".into()));
    }
    if initial
        .iter()
        .enumerate()
        .any(|(s, &p)| p > 0.0 && mdp.is_terminal(s))
    {
        return Err(Error::Input(
            "initial distribution puts mass on a terminal state".into(),
        ));
    }
    let v = evaluate_policy(mdp, rewards, policy)?;
    Ok(initial.iter().zip(&v).map(|(p, v)| p * v).sum())
}

/// Greedy action per state, ties broken by the lowest action index.
pub fn greedy_actions(q: &QFunction) -> Vec<usize> {
    (0..q.n_states())
        .map(|s| {
            let row = q.row(s);
            let mut best = 0;
            for a in 1..row.len() {
                if row[a] > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect()
}

/// Optimal Q by policy iteration, optionally warm-started from a policy.
///
/// Returns the Q function and the greedy policy it was derived from. The
/// evaluation step is exact, so the result satisfies the Bellman optimality
/// equation up to round-off.
pub fn solve_optimal(
    mdp: &Mdp,
    rewards: &[f64],
    warm: Option<&[usize]>,
) -> Result<(QFunction, Vec<usize>)> {
    check_rewards(mdp, rewards)?;
    let (n, na) = (mdp.n_states(), mdp.n_actions());
    let mut actions: Vec<usize> = match warm {
        Some(w) if w.len() == n => w.to_vec(),
        _ => {
            // Myopic start: greedy on one-step lookahead with V = r.
            let mut q = vec![0.0; n * na];
            backup(mdp, rewards, rewards, &mut q);
            greedy_actions(&QFunction {
                n_states: n,
                n_actions: na,
                q,
            })
        }
    };
    let mut q = vec![0.0; n * na];
    for _ in 0..(10 * n + 100) {
        let v = evaluate_deterministic(mdp, rewards, &actions);
        backup(mdp, rewards, &v, &mut q);
        let mut changed = false;
        for s in 0..n {
            if mdp.is_terminal(s) {
                continue;
            }
            let row = &q[s * na..(s + 1) * na];
            let cur = row[actions[s]];
            let mut best = actions[s];
            for (a, &qa) in row.iter().enumerate() {
                if qa > row[best] && qa > cur + 1e-12 * (1.0 + cur.abs()) {
                    best = a;
                }
            }
            if best != actions[s] {
                actions[s] = best;
                changed = true;
            }
        }
        if !changed {
            return Ok((
                QFunction {
                    n_states: n,
                    n_actions: na,
                    q,
                },
                actions,
            ));
        }
    }
    // Policy iteration terminates in finitely many steps; this is a guard.
    let qf = value_iteration(mdp, rewards, 1e-10)?;
    let greedy = greedy_actions(&qf);
    Ok((qf, greedy))
}
