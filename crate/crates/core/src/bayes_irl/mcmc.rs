//! Component-wise adaptive random-walk Metropolis.
//!
//! One iteration is a sweep that proposes a Gaussian move in each coordinate
//! in turn. During warm-up the per-coordinate proposal scales follow a
//! Robbins-Monro update on the log scale toward a target acceptance rate;
//! they are frozen afterwards so the sampling phase is a valid
//! Metropolis-Hastings chain.
//!
//! Coordinates with a bounded support use proposals reflected back into the
//! interval. Reflection keeps the proposal symmetric, so no correction term
//! is needed, and moves are no longer wasted outside the support.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::rng::Rng;

/// Unnormalised log density plus side information computed alongside it.
pub trait Target {
    type Extra: Clone;

    fn dim(&self) -> usize;

    /// Returns `(log density, extra)`. `-inf` marks points outside the support.
    fn evaluate(&mut self, x: &[f64]) -> (f64, Option<Self::Extra>);
}

#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub warmup: usize,
    pub kept: usize,
    pub initial_scales: Vec<f64>,
    pub target_accept: f64,
    /// Per-coordinate interval to reflect proposals into, if bounded.
    pub support: Vec<Option<(f64, f64)>>,
}

/// Fold `y` into `[lo, hi]` by repeated reflection at the ends.
pub(crate) fn reflect(y: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    let t = (y - lo).rem_euclid(2.0 * w);
    lo + if t > w { 2.0 * w - t } else { t }
}

#[derive(Debug, Clone)]
pub struct ChainOutput<E> {
    pub samples: Vec<Vec<f64>>,
    pub extras: Vec<E>,
    pub scales: Vec<f64>,
    pub warmup_acceptance: f64,
    pub acceptance: f64,
}

pub fn run_chain<T: Target>(
    target: &mut T,
    init: Vec<f64>,
    cfg: &ChainConfig,
    rng: &mut Rng,
) -> ChainOutput<T::Extra> {
    let dim = target.dim();
    assert_eq!(init.len(), dim);
    assert_eq!(cfg.initial_scales.len(), dim);
    assert_eq!(cfg.support.len(), dim);
    let max_log_scale: Vec<f64> = cfg
        .support
        .iter()
        .map(|s| s.map_or(f64::INFINITY, |(lo, hi)| (hi - lo).ln()))
        .collect();
    let mut x = init;
    let (mut lp, extra) = target.evaluate(&x);
    let mut extra = extra.expect("initial point must lie in the support");
    let mut log_scales: Vec<f64> = cfg.initial_scales.iter().map(|s| s.ln()).collect();
    let mut samples = Vec::with_capacity(cfg.kept);
    let mut extras = Vec::with_capacity(cfg.kept);
    let mut proposal = x.clone();
    let (mut acc_warm, mut acc_keep) = (0.0, 0.0);

    for it in 0..cfg.warmup + cfg.kept {
        let warming = it < cfg.warmup;
        for d in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            proposal.copy_from_slice(&x);
            proposal[d] += log_scales[d].exp() * z;
            if let Some((lo, hi)) = cfg.support[d] {
                proposal[d] = reflect(proposal[d], lo, hi);
            }
            let (lp_new, extra_new) = target.evaluate(&proposal);
            let log_alpha = lp_new - lp;
            let alpha = if log_alpha.is_nan() {
                0.0
            } else {
                log_alpha.min(0.0).exp()
            };
            let u: f64 = rng.random();
            if u < alpha {
                if let Some(e) = extra_new {
                    x.copy_from_slice(&proposal);
                    lp = lp_new;
                    extra = e;
                }
            }
            if warming {
                let gain = 1.0 / ((it + 1) as f64).powf(0.6);
                log_scales[d] =
                    (log_scales[d] + gain * (alpha - cfg.target_accept)).min(max_log_scale[d]);
                acc_warm += alpha;
            } else {
                acc_keep += alpha;
            }
        }
        if !warming {
            samples.push(x.clone());
            extras.push(extra.clone());
        }
    }
    let denom = |n: usize| (n * dim).max(1) as f64;
    ChainOutput {
        samples,
        extras,
        scales: log_scales.iter().map(|l| l.exp()).collect(),
        warmup_acceptance: acc_warm / denom(cfg.warmup),
        acceptance: acc_keep / denom(cfg.kept),
    }
}
