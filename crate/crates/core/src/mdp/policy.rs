use super::QFunction;

/// Stochastic policy: a distribution over actions for each state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn from_probs(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Self {
        assert_eq!(probs.len(), n_states * n_actions);
        Self {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self::from_probs(
            n_states,
            n_actions,
            vec![1.0 / n_actions as f64; n_states * n_actions],
        )
    }

    /// One-hot policy from an action per state.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Self {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * n_actions + a] = 1.0;
        }
        Self::from_probs(actions.len(), n_actions, probs)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn as_deterministic(&self) -> Option<Vec<usize>> {
        (0..self.n_states)
            .map(|s| {
                let row = self.row(s);
                let a = row.iter().position(|&p| p == 1.0)?;
                row.iter()
                    .enumerate()
                    .all(|(b, &p)| b == a || p == 0.0)
                    .then_some(a)
            })
            .collect()
    }

    /// Shannon entropy of the action distribution at `s`, in nats.
    pub fn entropy(&self, s: usize) -> f64 {
        self.row(s)
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum()
    }

    /// Pointwise average of several policies.
    pub fn mixture<'a>(policies: impl IntoIterator<Item = &'a Policy>) -> Option<Policy> {
        let mut it = policies.into_iter();
        let first = it.next()?;
        let mut acc = first.probs.clone();
        let mut count = 1.0;
        for p in it {
            for (a, b) in acc.iter_mut().zip(&p.probs) {
                *a += b;
            }
            count += 1.0;
        }
        acc.iter_mut().for_each(|x| *x /= count);
        Some(Policy::from_probs(first.n_states, first.n_actions, acc))
    }
}

/// Log-probability table of a policy, the form used by likelihood code.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPolicy {
    n_actions: usize,
    logp: Vec<f64>,
    p: Vec<f64>,
}

impl LogPolicy {
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn log_prob(&self, s: usize, a: usize) -> f64 {
        self.logp[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.logp[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn prob_row(&self, s: usize) -> &[f64] {
        &self.p[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn from_policy(p: &Policy) -> Self {
        Self {
            n_actions: p.n_actions,
            logp: p.probs.iter().map(|x| x.ln()).collect(),
            p: p.probs.clone(),
        }
    }

    pub fn to_policy(&self) -> Policy {
        let n = self.logp.len() / self.n_actions;
        Policy::from_probs(n, self.n_actions, self.p.clone())
    }
}

/// Boltzmann-rational policy `pi(a|s) proportional to exp(beta * Q(s, a))`.
pub fn boltzmann_policy(q: &QFunction, beta: f64) -> Policy {
    boltzmann_log_policy(q, beta).to_policy()
}

/// Log of the Boltzmann policy, computed with max subtraction.
pub fn boltzmann_log_policy(q: &QFunction, beta: f64) -> LogPolicy {
    let na = q.n_actions();
    let mut logp = Vec::with_capacity(q.values().len());
    let mut scaled = vec![0.0; na];
    for s in 0..q.n_states() {
        let row = q.row(s);
        for (x, &v) in scaled.iter_mut().zip(row) {
            *x = beta * v;
        }
        let m = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + scaled.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        logp.extend(scaled.iter().map(|x| x - lse));
    }
    let p = logp.iter().map(|x| x.exp()).collect();
    LogPolicy {
        n_actions: na,
        logp,
        p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_q_gives_uniform() {
        let q = QFunction::from_values(1, 5, vec![3.0; 5]);
        for beta in [0.0, 1.0, 7.5] {
            let p = boltzmann_policy(&q, beta);
            for a in 0..5 {
                assert!((p.prob(0, a) - 0.2).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_beta_is_uniform() {
        let q = QFunction::from_values(1, 5, vec![1.0, -4.0, 10.0, 0.0, 2.0]);
        let p = boltzmann_policy(&q, 0.0);
        assert!(p.row(0).iter().all(|&x| (x - 0.2).abs() < 1e-15));
    }

    #[test]
    fn two_action_substitution() {
        let q = QFunction::from_values(1, 2, vec![2f64.ln(), 0.0]);
        let p = boltzmann_policy(&q, 1.0);
        assert!((p.prob(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((p.prob(0, 1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn stable_for_huge_values() {
        let q = QFunction::from_values(1, 2, vec![1e6, 1e6 - 1.0]);
        let p = boltzmann_policy(&q, 1.0);
        assert!(p.row(0).iter().all(|x| x.is_finite()));
        assert!((p.prob(0, 0) - 1.0 / (1.0 + (-1f64).exp())).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn normalized_and_positive(vals in prop::collection::vec(-100.0f64..100.0, 5), beta in 0.0f64..3.0) {
            let q = QFunction::from_values(1, 5, vals);
            let p = boltzmann_policy(&q, beta);
            let total: f64 = p.row(0).iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(p.row(0).iter().all(|&x| x > 0.0));
        }

        #[test]
        fn shift_invariant(vals in prop::collection::vec(-50.0f64..50.0, 5), beta in 0.0f64..3.0, shift in -1000.0f64..1000.0) {
            let q = QFunction::from_values(1, 5, vals.clone());
            let shifted = QFunction::from_values(1, 5, vals.iter().map(|v| v + shift).collect());
            let a = boltzmann_policy(&q, beta);
            let b = boltzmann_policy(&shifted, beta);
            for i in 0..5 {
                prop_assert!((a.prob(0, i) - b.prob(0, i)).abs() < 1e-12);
            }
        }
    }
}
