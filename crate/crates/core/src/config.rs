//! Experiment configuration, stored as TOML, and the built-in presets.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::acquisition::{BoConfig, EigConfig};
use crate::bayes_irl::SamplerConfig;
use crate::error::{Error, Result};
use crate::mdp::{
    make_random_gridworld, make_structured_from_layout, Environment, RandomEnvOptions,
    STRUCTURED_LAYOUT,
};
use crate::reward::Prior;
use crate::rng::{derive, tags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    EigNmc,
    EigBo,
    SingleEig,
    SingleEigX8,
    Random,
    QEntropy,
    ActionEntropy,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::EigNmc,
        Method::EigBo,
        Method::SingleEig,
        Method::SingleEigX8,
        Method::Random,
        Method::QEntropy,
        Method::ActionEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::EigNmc => "eig_nmc",
            Method::EigBo => "eig_bo",
            Method::SingleEig => "single_eig",
            Method::SingleEigX8 => "single_eig_x8",
            Method::Random => "random",
            Method::QEntropy => "q_entropy",
            Method::ActionEntropy => "action_entropy",
        }
    }

    /// Whether demonstrations are single steps rather than full trajectories.
    pub fn single_step(self) -> bool {
        matches!(self, Method::SingleEig | Method::SingleEigX8)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Which environment to build for a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    /// Typed gridworld; the bundled layout unless `layout` is given.
    /// The true type rewards are drawn from the prior per seed.
    Structured {
        prior: Prior,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        layout: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step_cap: Option<usize>,
    },
    /// Random per-state rewards and terminals, drawn per seed.
    Random(RandomEnvOptions),
}

impl EnvSpec {
    pub fn build(&self, seed: u64) -> Result<Environment> {
        match self {
            EnvSpec::Structured {
                prior,
                layout,
                gamma,
                step_cap,
            } => {
                prior.validate()?;
                let theta = prior.sample(&mut derive(seed, &[tags::TRUTH]));
                let mut env = make_structured_from_layout(
                    layout.as_deref().unwrap_or(STRUCTURED_LAYOUT),
                    prior.clone(),
                    theta,
                )?;
                if let Some(g) = gamma {
                    env.mdp.set_gamma(*g)?;
                }
                if let Some(c) = step_cap {
                    env.mdp.set_step_cap(*c)?;
                }
                Ok(env)
            }
            EnvSpec::Random(opts) => make_random_gridworld(seed, opts),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateMode {
    NonTerminal,
    NonTerminalNonJail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialDemos {
    None,
    /// One demonstration from the first non-terminal state in row-major order.
    FirstNonTerminal,
    States(Vec<usize>),
}

/// Initial-state distribution used for regret.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSpec {
    UniformNonTerminalNonJail,
    UniformNonTerminal,
    State(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteSpec {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            seeds: (0..10).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub method: Method,
    pub steps: usize,
    pub beta: f64,
    pub seed: u64,
    pub candidates: CandidateMode,
    pub initial_demos: InitialDemos,
    pub target: TargetSpec,
    /// Neighbour count of the posterior entropy estimate.
    pub entropy_k: usize,
    pub q_entropy_k: usize,
    pub action_entropy_rollouts: usize,
    /// Single states queried per step by `single_eig_x8`.
    pub multi_queries: usize,
    /// Write measured wall times; when off the time columns are zero so
    /// reruns produce identical files.
    pub record_timing: bool,
    pub env: EnvSpec,
    pub sampler: SamplerConfig,
    pub eig: EigConfig,
    pub bo: BoConfig,
    pub suite: SuiteSpec,
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "structured-paper" => Ok(Self::structured_paper()),
            "random-paper" => Ok(Self::random_paper()),
            _ => Err(Error::Config(format!("unknown preset {name:?}"))),
        }
    }

    pub const PRESETS: [&'static str; 2] = ["structured-paper", "random-paper"];

    pub fn structured_paper() -> Self {
        Self {
            name: "structured-paper".into(),
            method: Method::EigNmc,
            steps: 20,
            beta: 1.0,
            seed: 0,
            candidates: CandidateMode::NonTerminal,
            initial_demos: InitialDemos::None,
            target: TargetSpec::UniformNonTerminalNonJail,
            entropy_k: 5,
            q_entropy_k: 5,
            action_entropy_rollouts: 10,
            multi_queries: 8,
            record_timing: true,
            env: EnvSpec::Structured {
                prior: Prior::Uniform {
                    low: -100.0,
                    high: 0.0,
                    dim: 3,
                },
                layout: None,
                gamma: None,
                step_cap: None,
            },
            sampler: SamplerConfig::default(),
            eig: EigConfig::default(),
            bo: BoConfig::default(),
            suite: SuiteSpec::default(),
        }
    }

    pub fn random_paper() -> Self {
        Self {
            name: "random-paper".into(),
            candidates: CandidateMode::NonTerminalNonJail,
            initial_demos: InitialDemos::FirstNonTerminal,
            env: EnvSpec::Random(RandomEnvOptions::default()),
            suite: SuiteSpec {
                methods: Method::ALL.to_vec(),
                seeds: (0..16).collect(),
            },
            ..Self::structured_paper()
        }
    }

    /// Copy the shared rationality coefficient into the sub-configs and check
    /// every field.
    pub fn resolve(mut self) -> Result<Self> {
        self.sampler.beta = self.beta;
        self.eig.beta = self.beta;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config("beta must be positive".into()));
        }
        if self.entropy_k == 0 || self.q_entropy_k == 0 {
            return Err(Error::Config(
                "kNN neighbour counts must be positive".into(),
            ));
        }
        if self.action_entropy_rollouts == 0 || self.multi_queries == 0 {
            return Err(Error::Config(
                "rollout and query counts must be positive".into(),
            ));
        }
        self.sampler.validate()?;
        self.eig.validate()?;
        self.bo.validate()?;
        if self.sampler.kept_samples <= self.entropy_k {
            return Err(Error::Config(
                "need more kept samples than entropy neighbours".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str::<Self>(text)?.resolve()
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for name in ExperimentConfig::PRESETS {
            let cfg = ExperimentConfig::preset(name).unwrap().resolve().unwrap();
            let text = cfg.to_toml().unwrap();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg, "{text}");
        }
        assert!(ExperimentConfig::preset("nope").is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let v = toml::Value::try_from(m).unwrap();
            assert_eq!(v.as_str(), Some(m.name()));
        }
        assert!("eig".parse::<Method>().is_err());
    }

    #[test]
    fn unknown_keys_and_bad_values_rejected() {
        let mut text = ExperimentConfig::structured_paper().to_toml().unwrap();
        text = text.replace("steps = 20", "steps = 0");
        assert!(matches!(
            ExperimentConfig::from_toml(&text),
            Err(Error::Config(_))
        ));
        let bad = format!(
            "bogus = 1\n{}",
            ExperimentConfig::structured_paper().to_toml().unwrap()
        );
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn truth_is_shared_per_seed() {
        let spec = ExperimentConfig::structured_paper().env;
        let a = spec.build(4).unwrap();
        let b = spec.build(4).unwrap();
        let c = spec.build(5).unwrap();
        assert_eq!(a.true_theta, b.true_theta);
        assert_ne!(a.true_theta, c.true_theta);
        assert!(a.true_theta.iter().all(|t| (-100.0..=0.0).contains(t)));
    }

    #[test]
    fn random_env_defaults_apply() {
        let text = r#"
            name = "x"
            method = "random"
            steps = 3
            beta = 2.0
            seed = 1
            candidates = "non_terminal_non_jail"
            initial_demos = { states = [0, 3] }
            target = { state = 0 }
            entropy_k = 5
            q_entropy_k = 5
            action_entropy_rollouts = 10
            multi_queries = 8
            record_timing = false
            [env]
            kind = "random"
            size = 5
            [sampler]
            [eig]
            [bo]
            [suite]
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.sampler.beta, 2.0);
        assert_eq!(cfg.eig.beta, 2.0);
        assert_eq!(cfg.initial_demos, InitialDemos::States(vec![0, 3]));
        let env = cfg.env.build(1).unwrap();
        assert_eq!(env.mdp.n_states(), 25);
        assert_eq!(env.mdp.step_cap(), 10);
    }
}
