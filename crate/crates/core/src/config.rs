//! JSON run configuration. Unknown fields are rejected.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bandit::{ActionSpec, LinearBanditEnv, Policy};
use crate::noise::{NoiseBudget, NoiseError, NoiseKind, NoiseModel};
use crate::switching::{RuleKind, StreamConfig, SwitchError, SwitchRule};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl From<NoiseError> for ConfigError {
    fn from(e: NoiseError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

impl From<SwitchError> for ConfigError {
    fn from(e: SwitchError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

fn one() -> f64 {
    1.0
}

fn one_count() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    pub kind: RuleKind,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default)]
    pub eta: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma: 1.0,
            eta: 0.0,
        }
    }
}

fn default_reward_sigma() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    /// Norm `S` of `θ*`.
    #[serde(default = "one")]
    pub theta_norm: f64,
    #[serde(default)]
    pub actions: ActionSpec,
    #[serde(default = "default_reward_sigma")]
    pub reward_noise_sigma: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            theta_norm: 1.0,
            actions: ActionSpec::default(),
            reward_noise_sigma: default_reward_sigma(),
        }
    }
}

fn default_policy() -> Policy {
    Policy::RareSwitch
}

/// Configuration for `simulate` and `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dim: usize,
    pub horizon: usize,
    #[serde(default = "one")]
    pub lambda: f64,
    /// Cap `L` on action norms; actions are drawn on this sphere.
    #[serde(default = "one")]
    pub action_norm_cap: f64,
    pub rules: Vec<RuleConfig>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default = "default_policy")]
    pub policy: Policy,
    /// Also run the every-step baseline for each seed.
    #[serde(default)]
    pub include_baseline: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_count")]
    pub seeds: usize,
    /// Require `α > c_ρ` for Rayleigh rules and check `m ≤ bound + 1`.
    #[serde(default)]
    pub assert_bound: bool,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn budget(&self) -> Result<NoiseBudget, ConfigError> {
        Ok(NoiseBudget::new(self.noise.eta, self.lambda)?)
    }

    pub fn switch_rules(&self) -> Result<Vec<SwitchRule>, ConfigError> {
        self.rules
            .iter()
            .map(|r| SwitchRule::new(r.kind, r.alpha).map_err(Into::into))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dim == 0 {
            return Err(ConfigError::Invalid("dim must be at least 1".into()));
        }
        if self.rules.is_empty() {
            return Err(ConfigError::Invalid("rules must list at least one rule".into()));
        }
        if self.seeds == 0 {
            return Err(ConfigError::Invalid("seeds must be at least 1".into()));
        }
        if !(self.action_norm_cap.is_finite() && self.action_norm_cap > 0.0) {
            return Err(ConfigError::Invalid("action_norm_cap L must be > 0".into()));
        }
        let budget = self.budget()?;
        NoiseModel::new(self.noise.kind, self.noise.sigma, 0)?;
        for rule in self.switch_rules()? {
            if self.assert_bound && rule.kind.is_rayleigh() {
                rule.check_bound(&budget)?;
            }
        }
        let env = &self.env;
        if !(env.theta_norm.is_finite() && env.theta_norm > 0.0) {
            return Err(ConfigError::Invalid("env.theta_norm S must be > 0".into()));
        }
        if !(env.reward_noise_sigma.is_finite() && env.reward_noise_sigma >= 0.0) {
            return Err(ConfigError::Invalid("env.reward_noise_sigma must be >= 0".into()));
        }
        let count = match env.actions {
            ActionSpec::Fixed { count } | ActionSpec::Fresh { count } => count,
        };
        if count == 0 {
            return Err(ConfigError::Invalid("env.actions.count must be at least 1".into()));
        }
        Ok(())
    }

    /// Stream configuration for one run, with the noise seeded per run.
    pub fn stream_config(&self, rule: SwitchRule, noise_seed: u64) -> Result<StreamConfig, ConfigError> {
        let model = NoiseModel::new(self.noise.kind, self.noise.sigma, noise_seed)?;
        Ok(StreamConfig::new(
            self.dim,
            self.horizon,
            self.action_norm_cap,
            rule,
            model,
            self.budget()?,
        )?)
    }

    pub fn environment(&self, env_seed: u64) -> Result<LinearBanditEnv, ConfigError> {
        LinearBanditEnv::random(
            self.dim,
            self.env.actions,
            self.env.theta_norm,
            self.action_norm_cap,
            self.env.reward_noise_sigma,
            env_seed,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

fn default_dims() -> Vec<usize> {
    vec![2, 3, 5, 8]
}

fn half() -> f64 {
    0.5
}

fn default_alpha() -> f64 {
    4.0
}

fn default_rule() -> RuleKind {
    RuleKind::Rayleigh
}

fn default_noise_kind() -> NoiseKind {
    NoiseKind::GaussianOrthogonalRescaled
}

fn default_directions() -> usize {
    100
}

/// One verification suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "suite", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SuiteConfig {
    /// Perturbed vs. clean generalized Rayleigh maxima.
    Claim1 {
        #[serde(default = "default_dims")]
        dims: Vec<usize>,
        instances: usize,
        #[serde(default = "one")]
        lambda: f64,
        /// `η = ρ λ`.
        #[serde(default = "half")]
        rho: f64,
    },
    /// Rayleigh maximum vs. determinant ratio on monotone pairs.
    Lemma12 {
        #[serde(default = "default_dims")]
        dims: Vec<usize>,
        instances: usize,
        #[serde(default = "one")]
        lambda: f64,
    },
    /// Width inequalities and update-count bound along random streams.
    Theorem {
        streams: usize,
        dims: Vec<usize>,
        horizon: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default = "half")]
        eta: f64,
        #[serde(default = "default_rule")]
        rule: RuleKind,
        #[serde(default = "default_noise_kind")]
        noise: NoiseKind,
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default = "default_directions")]
        directions: usize,
    },
}

impl SuiteConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        match self {
            SuiteConfig::Claim1 { dims, lambda, rho, .. } => {
                check_dims(dims)?;
                if !(0.0..=0.5).contains(rho) {
                    return Err(ConfigError::Invalid(format!(
                        "claim1: rho = {rho} violates 0 <= 2*eta <= lambda"
                    )));
                }
                NoiseBudget::new(rho * lambda, *lambda)?;
            }
            SuiteConfig::Lemma12 { dims, lambda, .. } => {
                check_dims(dims)?;
                if !(lambda.is_finite() && *lambda > 0.0) {
                    return Err(ConfigError::Invalid("lemma12: lambda must be > 0".into()));
                }
            }
            SuiteConfig::Theorem {
                dims,
                alpha,
                lambda,
                eta,
                sigma,
                ..
            } => {
                check_dims(dims)?;
                NoiseBudget::new(*eta, *lambda)?;
                SwitchRule::new(RuleKind::Rayleigh, *alpha)?;
                NoiseModel::new(NoiseKind::None, *sigma, 0)?;
            }
        }
        Ok(())
    }
}

fn check_dims(dims: &[usize]) -> Result<(), ConfigError> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(ConfigError::Invalid(
            "dims must be a nonempty list of positive sizes".into(),
        ));
    }
    Ok(())
}

/// Configuration for `verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_suites")]
    pub suites: Vec<SuiteConfig>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            suites: default_suites(),
        }
    }
}

/// Desk-sized default: every check, at reduced counts.
pub fn default_suites() -> Vec<SuiteConfig> {
    vec![
        SuiteConfig::Claim1 {
            dims: default_dims(),
            instances: 1000,
            lambda: 1.0,
            rho: 0.5,
        },
        SuiteConfig::Lemma12 {
            dims: default_dims(),
            instances: 1000,
            lambda: 1.0,
        },
        SuiteConfig::Theorem {
            streams: 6,
            dims: vec![2, 5, 10],
            horizon: 2000,
            alpha: 4.0,
            lambda: 1.0,
            eta: 0.5,
            rule: RuleKind::Rayleigh,
            noise: NoiseKind::GaussianOrthogonalRescaled,
            sigma: 1.0,
            directions: 100,
        },
    ]
}

impl VerifyConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: VerifyConfig = serde_json::from_str(text)?;
        for s in &cfg.suites {
            s.validate()?;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }
}
