//! Bayesian IRL: reward posteriors from demonstrations.

pub mod entropy;
pub mod mcmc;
mod oracle;
mod posterior;

pub use entropy::{knn_entropy, posterior_entropy_estimate};
pub use oracle::{grid_oracle_posterior, marginal_tv, GridPosterior};
pub use posterior::{
    log_posterior, sample_posterior, DemoDataset, PosteriorSampleSet, Provenance, SamplerConfig,
};
