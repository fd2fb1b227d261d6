//! Kozachenko-Leonenko k-nearest-neighbour differential entropy.

use rand::Rng as _;
use statrs::function::gamma::{digamma, ln_gamma};

use super::PosteriorSampleSet;
use crate::error::{Error, Result};

const JITTER: f64 = 1e-9;

fn kth_distances(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    let n = points.len();
    let mut d2 = vec![0.0; n - 1];
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut j = 0;
            for (m, q) in points.iter().enumerate() {
                if m == i {
                    continue;
                }
                d2[j] = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                j += 1;
            }
            let (_, kth, _) = d2.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
            kth.sqrt()
        })
        .collect()
}

/// Differential entropy in nats from `k`-th nearest-neighbour distances
/// under the Euclidean metric.
///
/// Points are translated so the first lies at the origin (entropy is
/// translation invariant). If any k-th distance is zero the points are
/// perturbed by a deterministic jitter of scale 1e-9 and a warning is logged.
pub fn knn_entropy(points: &[Vec<f64>], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Input("k must be positive".into()));
    }
    let n = points.len();
    if n < k + 1 {
        return Err(Error::Input(format!(
            "need at least {} points for k = {k}, got {n}",
            k + 1
        )));
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::Input(
            "points must share a positive dimension".into(),
        ));
    }
    let origin = points[0].clone();
    let mut centred: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(&origin).map(|(a, b)| a - b).collect())
        .collect();
    let mut dist = kth_distances(&centred, k);
    if dist.iter().any(|&r| r <= 0.0) {
        log::warn!(
            "duplicate-heavy sample set: jittering by {JITTER:e} before the kNN entropy estimate"
        );
        let mut rng = crate::rng::derive(0x6a69_7474, &[n as u64, d as u64]);
        for p in &mut centred {
            for x in p.iter_mut() {
                *x += JITTER * (rng.random::<f64>() - 0.5);
            }
        }
        dist = kth_distances(&centred, k);
    }
    let df = d as f64;
    let log_unit_ball = 0.5 * df * std::f64::consts::PI.ln() - ln_gamma(0.5 * df + 1.0);
    let mean_log: f64 = dist.iter().map(|r| r.ln()).sum::<f64>() / n as f64;
    Ok(digamma(n as f64) - digamma(k as f64) + log_unit_ball + df * mean_log)
}

/// Entropy estimate of a posterior from its retained chain.
pub fn posterior_entropy_estimate(samples: &PosteriorSampleSet, k: usize) -> Result<f64> {
    knn_entropy(&samples.kept, k)
}
