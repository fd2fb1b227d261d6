//! One human-demonstration session: environment, dataset, posterior and the
//! query/demonstrate/compute phase machine. Everything here is synchronous;
//! the HTTP layer decides where the expensive parts run.

use std::fmt;
use std::sync::Arc;

use active_irl::acquisition::AcquisitionResult;
use active_irl::active_loop::{acquire, candidates_for};
use active_irl::bayes_irl::{
    posterior_entropy_estimate, sample_posterior, DemoDataset, PosteriorSampleSet, SamplerConfig,
};
use active_irl::config::{ExperimentConfig, Method};
use active_irl::mdp::{CellType, Environment, Mdp, Trajectory};
use active_irl::reward::{Prior, RewardModel};
use active_irl::rng::{derive, tags};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub const HISTOGRAM_BINS: usize = 20;
pub const ACTION_NAMES: [&str; 5] = ["up", "down", "left", "right", "stay"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApiError {
    BadRequest(String),
    Conflict(String),
    NotFound(String),
    Internal(String),
}

impl fmt::Display for ApiError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApiError::BadRequest(m)
            | ApiError::Conflict(m)
            | ApiError::NotFound(m)
            | ApiError::Internal(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for ApiError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    AwaitingQuery,
    Demonstrating,
    Computing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridView {
    pub width: usize,
    pub height: usize,
    /// Row-major cell types, row 0 on top.
    pub cells: Vec<CellType>,
    pub terminal: Vec<bool>,
    pub step_cap: usize,
    pub actions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub low: f64,
    pub high: f64,
    /// Probability mass per equal-width bin.
    pub bins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub entropy_nats: f64,
    pub n_demos: usize,
    pub histograms: Vec<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreView {
    pub state: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub xi: usize,
    pub scores: Vec<ScoreView>,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub state: usize,
    /// The agent entered a terminal state.
    pub terminated: bool,
    pub remaining: usize,
    /// The demonstration is over, by terminal entry or by the step cap.
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingView {
    pub xi: usize,
    pub state: usize,
    pub steps: Vec<(usize, usize)>,
    pub remaining: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorView {
    pub computing: bool,
    pub summary: PosteriorSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub preset: String,
    pub method: Method,
    pub seed: u64,
    pub phase: Phase,
    pub computing: bool,
    pub grid: GridView,
    pub pending: Option<PendingView>,
    pub demos: Vec<Trajectory>,
    pub summary: PosteriorSummary,
    pub last_error: Option<String>,
}

#[derive(Debug, Clone)]
struct Pending {
    xi: usize,
    state: usize,
    steps: Vec<(usize, usize)>,
    cap: usize,
}

impl Pending {
    fn remaining(&self) -> usize {
        self.cap - self.steps.len()
    }
}

fn internal(e: impl fmt::Display) -> ApiError {
    ApiError::Internal(e.to_string())
}

/// Posterior computation detached from the session so it can run elsewhere.
pub struct RefreshJob {
    mdp: Mdp,
    model: RewardModel,
    prior: Prior,
    sampler: SamplerConfig,
    entropy_k: usize,
    dataset: DemoDataset,
    seed: u64,
}

pub type Refreshed = (Arc<PosteriorSampleSet>, PosteriorSummary);

impl RefreshJob {
    pub fn run(self) -> Result<Refreshed, String> {
        let k = self.dataset.len() as u64;
        let post = sample_posterior(
            &self.dataset,
            &self.mdp,
            &self.model,
            &self.prior,
            &self.sampler,
            &mut derive(self.seed, &[tags::MCMC, k]),
        )
        .map_err(|e| e.to_string())?;
        let entropy = posterior_entropy_estimate(&post, self.entropy_k).map_err(|e| e.to_string())?;
        let (low, high) = self.prior.bounds();
        let histograms = (0..post.dim())
            .map(|d| histogram(post.kept.iter().map(|r| r[d]), low, high))
            .collect();
        let summary = PosteriorSummary {
            names: self.model.names().to_vec(),
            mean: post.mean(),
            std: post.std(),
            entropy_nats: entropy,
            n_demos: self.dataset.len(),
            histograms,
        };
        Ok((Arc::new(post), summary))
    }
}

/// Normalised histogram on `[low, high]`; values outside go to the end bins.
pub fn histogram(values: impl Iterator<Item = f64>, low: f64, high: f64) -> Histogram {
    let mut bins = vec![0.0; HISTOGRAM_BINS];
    let width = (high - low) / HISTOGRAM_BINS as f64;
    let mut n = 0usize;
    for v in values {
        let i = ((v - low) / width).floor();
        let i = if i.is_nan() {
            0
        } else {
            (i.max(0.0) as usize).min(HISTOGRAM_BINS - 1)
        };
        bins[i] += 1.0;
        n += 1;
    }
    if n > 0 {
        bins.iter_mut().for_each(|b| *b /= n as f64);
    }
    Histogram { low, high, bins }
}

/// Acquisition detached from the session.
pub struct QueryJob {
    cfg: ExperimentConfig,
    mdp: Mdp,
    posterior: Arc<PosteriorSampleSet>,
    candidates: Vec<usize>,
    seed: u64,
    k: u64,
}

impl QueryJob {
    pub fn run(self) -> Result<AcquisitionResult, String> {
        acquire(
            self.cfg.method,
            &self.cfg,
            &self.candidates,
            &self.posterior,
            &self.mdp,
            &mut derive(self.seed, &[tags::ACQUIRE, self.k]),
        )
        .map(|a| a.result)
        .map_err(|e| e.to_string())
    }
}

pub struct Session {
    pub id: String,
    pub preset: String,
    pub seed: u64,
    cfg: ExperimentConfig,
    env: Environment,
    dataset: DemoDataset,
    phase: Phase,
    pending: Option<Pending>,
    posterior: Arc<PosteriorSampleSet>,
    summary: PosteriorSummary,
    last_error: Option<String>,
}

impl Session {
    /// New session with a prior-only posterior, computed in place.
    pub fn create(id: String, preset: &str, method: &str, seed: u64) -> Result<Self, ApiError> {
        let mut cfg =
            ExperimentConfig::preset(preset).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        cfg.method = method
            .parse()
            .map_err(|e: active_irl::Error| ApiError::BadRequest(e.to_string()))?;
        let cfg = cfg.resolve().map_err(internal)?;
        let env = cfg.env.build(seed).map_err(internal)?;
        let mut session = Self {
            id,
            preset: preset.to_string(),
            seed,
            cfg,
            env,
            dataset: DemoDataset::new(),
            phase: Phase::Computing,
            pending: None,
            posterior: Arc::new(PosteriorSampleSet {
                samples: vec![],
                q_cache: None,
                kept: vec![],
                provenance: Default::default(),
            }),
            summary: PosteriorSummary {
                names: vec![],
                mean: vec![],
                std: vec![],
                entropy_nats: f64::NAN,
                n_demos: 0,
                histograms: vec![],
            },
            last_error: None,
        };
        let out = session.refresh_job().run().map_err(ApiError::Internal)?;
        session.install(Ok(out));
        Ok(session)
    }

    pub fn method(&self) -> Method {
        self.cfg.method
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn n_demos(&self) -> usize {
        self.dataset.len()
    }

    pub fn mdp(&self) -> &Mdp {
        &self.env.mdp
    }

    pub fn refresh_job(&self) -> RefreshJob {
        RefreshJob {
            mdp: self.env.mdp.clone(),
            model: self.env.reward_model.clone(),
            prior: self.env.prior.clone(),
            sampler: self.cfg.sampler.clone(),
            entropy_k: self.cfg.entropy_k,
            dataset: self.dataset.clone(),
            seed: self.seed,
        }
    }

    /// Store the outcome of a refresh and reopen the session for queries.
    /// A failed refresh keeps the previous posterior.
    pub fn install(&mut self, out: Result<Refreshed, String>) {
        match out {
            Ok((post, summary)) => {
                self.posterior = post;
                self.summary = summary;
                self.last_error = None;
            }
            Err(e) => {
                log::error!("session {}: posterior refresh failed: {e}", self.id);
                self.last_error = Some(e);
            }
        }
        self.phase = Phase::AwaitingQuery;
    }

    fn demo_cap(&self) -> usize {
        if self.cfg.method.single_step() {
            1
        } else {
            self.env.mdp.step_cap()
        }
    }

    pub fn query_job(&self) -> Result<QueryJob, ApiError> {
        self.expect_phase(Phase::AwaitingQuery)?;
        Ok(QueryJob {
            cfg: self.cfg.clone(),
            mdp: self.env.mdp.clone(),
            posterior: Arc::clone(&self.posterior),
            candidates: candidates_for(self.cfg.candidates, &self.env.mdp),
            seed: self.seed,
            k: self.dataset.len() as u64,
        })
    }

    /// Open a demonstration starting at `xi`.
    pub fn begin_demo(&mut self, xi: usize) -> Result<usize, ApiError> {
        self.expect_phase(Phase::AwaitingQuery)?;
        let mdp = &self.env.mdp;
        if xi >= mdp.n_states() || mdp.is_terminal(xi) {
            return Err(ApiError::BadRequest(format!("{xi} is not a valid start state")));
        }
        let cap = self.demo_cap();
        self.pending = Some(Pending {
            xi,
            state: xi,
            steps: vec![],
            cap,
        });
        self.phase = Phase::Demonstrating;
        Ok(cap)
    }

    /// Apply one action of the running demonstration. When it ends the
    /// trajectory joins the dataset and the session waits for a refresh.
    pub fn act(&mut self, a: usize) -> Result<ActionOutcome, ApiError> {
        let mdp = &self.env.mdp;
        if a >= mdp.n_actions() {
            return Err(ApiError::BadRequest(format!(
                "action must be in 0..{}",
                mdp.n_actions()
            )));
        }
        self.expect_phase(Phase::Demonstrating)?;
        let k = self.dataset.len() as u64;
        let p = self.pending.as_mut().expect("demonstrating without a pending query");
        let s = p.state;
        let successors = mdp.successors(s, a);
        let next = if successors.len() == 1 {
            successors[0].0
        } else {
            let mut rng = derive(self.seed, &[tags::EXPERT, k, p.steps.len() as u64]);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            successors
                .iter()
                .find(|&&(_, q)| {
                    acc += q;
                    u < acc
                })
                .unwrap_or(&successors[successors.len() - 1])
                .0
        };
        p.steps.push((s, a));
        p.state = next;
        let terminated = mdp.is_terminal(next);
        let finished = terminated || p.remaining() == 0;
        let outcome = ActionOutcome {
            state: next,
            terminated,
            remaining: if terminated { 0 } else { p.remaining() },
            finished,
        };
        if finished {
            let p = self.pending.take().expect("pending query");
            self.dataset.push(Trajectory {
                xi: p.xi,
                steps: p.steps,
                terminated,
            });
            self.phase = Phase::Computing;
        }
        Ok(outcome)
    }

    fn expect_phase(&self, want: Phase) -> Result<(), ApiError> {
        if self.phase == want {
            Ok(())
        } else {
            Err(ApiError::Conflict(format!(
                "session is {:?}, operation needs {:?}",
                self.phase, want
            )))
        }
    }

    pub fn grid(&self) -> GridView {
        let mdp = &self.env.mdp;
        let n = mdp.n_states();
        let (width, height, cells) = match mdp.grid() {
            Some(g) => (g.width, g.height, g.cells.clone()),
            None => (n, 1, vec![CellType::Free; n]),
        };
        GridView {
            width,
            height,
            cells,
            terminal: (0..n).map(|s| mdp.is_terminal(s)).collect(),
            step_cap: mdp.step_cap(),
            actions: ACTION_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn posterior_view(&self) -> PosteriorView {
        PosteriorView {
            computing: self.phase == Phase::Computing,
            summary: self.summary.clone(),
        }
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            id: self.id.clone(),
            preset: self.preset.clone(),
            method: self.cfg.method,
            seed: self.seed,
            phase: self.phase,
            computing: self.phase == Phase::Computing,
            grid: self.grid(),
            pending: self.pending.as_ref().map(|p| PendingView {
                xi: p.xi,
                state: p.state,
                steps: p.steps.clone(),
                remaining: p.remaining(),
            }),
            demos: self.dataset.trajectories.clone(),
            summary: self.summary.clone(),
            last_error: self.last_error.clone(),
        }
    }
}

pub fn query_response(result: &AcquisitionResult, remaining: usize) -> QueryResponse {
    QueryResponse {
        xi: result.chosen,
        scores: result
            .scores
            .iter()
            .map(|c| ScoreView {
                state: c.state,
                score: c.score,
            })
            .collect(),
        remaining,
    }
}
