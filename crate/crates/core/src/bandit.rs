//! Linear bandit environment and an optimistic agent that recomputes its
//! estimate and confidence radius only at switch times.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{verify_theorem_on_traces, RecordedStream, TheoremOptions};
use crate::linalg::{LinalgError, SpdMatrix, Vector};
use crate::noise::NoiseKind;
use crate::sampling;
use crate::switching::{run_stream, RuleKind, StreamConfig, SwitchError, SwitchRule, SwitchTrace, SwitchTracker};

/// Confidence level of the radius `β`.
pub const CONFIDENCE_DELTA: f64 = 0.01;

const REWARD_STREAM_SALT: u64 = 0x005e_ed0f_4e77_a4d5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BanditError {
    #[error("invalid environment: {0}")]
    InvalidEnv(String),
    #[error("environment has dimension {env}, stream config has {cfg}")]
    DimensionMismatch { env: usize, cfg: usize },
    #[error("rule list is empty")]
    NoRules,
    #[error(transparent)]
    Switch(#[from] SwitchError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// How actions are offered each round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ActionSpec {
    /// The same `count` arms every round.
    Fixed { count: usize },
    /// `count` fresh arms per round.
    Fresh { count: usize },
}

impl Default for ActionSpec {
    fn default() -> Self {
        ActionSpec::Fixed { count: 10 }
    }
}

#[derive(Debug, Clone)]
enum ArmSource {
    Fixed(Vec<Vector>),
    Fresh { count: usize },
}

#[derive(Debug, Clone)]
pub struct LinearBanditEnv {
    theta_star: Vector,
    theta_bound: f64,
    action_radius: f64,
    arms: ArmSource,
    reward_noise_sigma: f64,
    seed: u64,
}

impl LinearBanditEnv {
    /// Fixed-arm environment with explicit parameters.
    pub fn with_fixed_arms(
        theta_star: Vector,
        theta_bound: f64,
        arms: Vec<Vector>,
        reward_noise_sigma: f64,
        seed: u64,
    ) -> Result<Self, BanditError> {
        let radius = arms.iter().map(|a| a.norm()).fold(0.0, f64::max);
        let env = Self {
            theta_star,
            theta_bound,
            action_radius: radius,
            arms: ArmSource::Fixed(arms),
            reward_noise_sigma,
            seed,
        };
        env.validate()?;
        Ok(env)
    }

    /// `θ*` uniform on the sphere of radius `theta_bound`; arms uniform on the
    /// sphere of radius `action_radius`.
    pub fn random(
        dim: usize,
        actions: ActionSpec,
        theta_bound: f64,
        action_radius: f64,
        reward_noise_sigma: f64,
        seed: u64,
    ) -> Result<Self, BanditError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if dim == 0 {
            return Err(BanditError::InvalidEnv("dimension must be at least 1".into()));
        }
        let theta_star = sampling::unit_vector(&mut rng, dim) * theta_bound;
        let arms = match actions {
            ActionSpec::Fixed { count } => ArmSource::Fixed(
                (0..count)
                    .map(|_| sampling::unit_vector(&mut rng, dim) * action_radius)
                    .collect(),
            ),
            ActionSpec::Fresh { count } => ArmSource::Fresh { count },
        };
        let env = Self {
            theta_star,
            theta_bound,
            action_radius,
            arms,
            reward_noise_sigma,
            seed,
        };
        env.validate()?;
        Ok(env)
    }

    fn validate(&self) -> Result<(), BanditError> {
        let bad = |m: String| Err(BanditError::InvalidEnv(m));
        if !(self.theta_bound.is_finite() && self.theta_bound > 0.0) {
            return bad(format!("theta bound S must be > 0 (got {})", self.theta_bound));
        }
        if self.theta_star.norm() > self.theta_bound * (1.0 + 1e-12) {
            return bad("‖θ*‖ exceeds S".into());
        }
        if !(self.reward_noise_sigma.is_finite() && self.reward_noise_sigma >= 0.0) {
            return bad("reward noise sigma must be >= 0".into());
        }
        if !(self.action_radius.is_finite() && self.action_radius > 0.0) {
            return bad("action radius must be > 0".into());
        }
        let count = match &self.arms {
            ArmSource::Fixed(arms) => {
                if arms.iter().any(|a| a.len() != self.dim()) {
                    return bad("arm dimension differs from θ*".into());
                }
                arms.len()
            }
            ArmSource::Fresh { count } => *count,
        };
        if count == 0 {
            return bad("at least one action is required".into());
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn theta_star(&self) -> &Vector {
        &self.theta_star
    }

    pub fn theta_bound(&self) -> f64 {
        self.theta_bound
    }

    pub fn action_radius(&self) -> f64 {
        self.action_radius
    }

    pub fn reward_noise_sigma(&self) -> f64 {
        self.reward_noise_sigma
    }

    /// Actions offered in round `t`; a pure function of `(seed, t)`.
    pub fn offered(&self, t: u64) -> Vec<Vector> {
        match &self.arms {
            ArmSource::Fixed(arms) => arms.clone(),
            ArmSource::Fresh { count } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(t);
                (0..*count)
                    .map(|_| sampling::unit_vector(&mut rng, self.dim()) * self.action_radius)
                    .collect()
            }
        }
    }

    pub fn mean_reward(&self, x: &Vector) -> f64 {
        self.theta_star.dot(x)
    }

    /// `θ*ᵀx + σ z_t`. The noise draw depends on `t` only, so different
    /// policies see common random numbers.
    pub fn sample_reward(&self, t: u64, x: &Vector) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ REWARD_STREAM_SALT);
        rng.set_stream(t);
        let z: f64 = rng.sample(StandardNormal);
        self.mean_reward(x) + self.reward_noise_sigma * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Recompute every round (plain OFUL).
    EveryStep,
    /// Recompute only when the switch rule fires.
    RareSwitch,
}

impl Policy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Policy::EveryStep => "every-step",
            Policy::RareSwitch => "rare-switch",
        }
    }
}

/// Frozen policy state between switches.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub tau: u64,
    pub anchor: SpdMatrix,
    pub theta_hat: Vector,
    pub beta: f64,
}

impl AgentState {
    pub fn score(&self, x: &Vector) -> Result<f64, LinalgError> {
        Ok(self.theta_hat.dot(x) + self.beta * self.anchor.inv_norm(x)?)
    }

    /// First maximizer of the optimistic score.
    pub fn choose(&self, offered: &[Vector]) -> Result<usize, LinalgError> {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, x) in offered.iter().enumerate() {
            let s = self.score(x)?;
            if s > best.1 {
                best = (i, s);
            }
        }
        Ok(best.0)
    }
}

/// `σ √(d ln((1 + n L²/λ)/δ)) + √λ S` after `n` observations.
pub fn confidence_radius(
    reward_noise_sigma: f64,
    dim: usize,
    n: u64,
    action_norm_cap: f64,
    lambda: f64,
    theta_bound: f64,
) -> f64 {
    let inner = (1.0 + n as f64 * action_norm_cap * action_norm_cap / lambda) / CONFIDENCE_DELTA;
    reward_noise_sigma * (dim as f64 * inner.ln()).sqrt() + lambda.sqrt() * theta_bound
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub t: u64,
    pub action_index: usize,
    pub action: Vec<f64>,
    pub reward: f64,
    pub regret: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BanditRun {
    pub policy: Policy,
    pub rule: SwitchRule,
    pub rounds: Vec<RoundRecord>,
    pub cumulative_regret: Vec<f64>,
    pub trace: SwitchTrace,
    pub recomputations: usize,
    /// Wall clock spent in policy recomputation; excluded from serialized
    /// output so artifacts stay reproducible.
    #[serde(skip)]
    pub recompute_time: Duration,
}

impl BanditRun {
    pub fn total_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }

    pub fn actions(&self) -> Vec<Vector> {
        self.rounds
            .iter()
            .map(|r| Vector::from_column_slice(&r.action))
            .collect()
    }

    /// CSV with columns `t,cum_regret,m_so_far`.
    pub fn write_regret_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        #[derive(Serialize)]
        struct Row {
            t: u64,
            cum_regret: f64,
            m_so_far: usize,
        }
        let mut w = csv::Writer::from_writer(out);
        let mut m = 0;
        for (rec, cum) in self.trace.steps.iter().zip(&self.cumulative_regret) {
            m += usize::from(rec.switched);
            w.serialize(Row {
                t: rec.t,
                cum_regret: *cum,
                m_so_far: m,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Plays `cfg.horizon` rounds.
///
/// Each round first evaluates the switch rule on `Ṽ_t`; on a switch the
/// agent re-solves `Ṽ_t θ̂ = Σ_{s<t} x_s r_s` and refreshes `β`. It then plays
/// the optimistic action under the frozen state and absorbs it.
pub fn run_bandit(env: &LinearBanditEnv, cfg: &StreamConfig, policy: Policy) -> Result<BanditRun, BanditError> {
    if env.dim() != cfg.dim {
        return Err(BanditError::DimensionMismatch {
            env: env.dim(),
            cfg: cfg.dim,
        });
    }
    if env.action_radius() > cfg.action_norm_cap * (1.0 + 1e-12) {
        return Err(BanditError::InvalidEnv(format!(
            "action radius {} exceeds cap L = {}",
            env.action_radius(),
            cfg.action_norm_cap
        )));
    }
    let mut tracker = SwitchTracker::new(*cfg)?;
    let mut response = Vector::zeros(cfg.dim);
    let mut agent: Option<AgentState> = None;
    let mut rounds = Vec::with_capacity(cfg.horizon);
    let mut cumulative_regret = Vec::with_capacity(cfg.horizon);
    let mut cum = 0.0;
    let mut recomputations = 0;
    let mut recompute_time = Duration::ZERO;

    for _ in 0..cfg.horizon {
        let rec = match policy {
            Policy::EveryStep => tracker.advance_forced()?,
            Policy::RareSwitch => tracker.advance()?,
        };
        let t = rec.t;
        if rec.switched {
            let start = Instant::now();
            let anchor = tracker.anchor().expect("anchor set on switch").clone();
            let theta_hat = anchor.solve(&response)?;
            let beta = confidence_radius(
                env.reward_noise_sigma(),
                cfg.dim,
                t - 1,
                cfg.action_norm_cap,
                cfg.lambda(),
                env.theta_bound(),
            );
            agent = Some(AgentState {
                tau: t,
                anchor,
                theta_hat,
                beta,
            });
            recomputations += 1;
            recompute_time += start.elapsed();
        }
        let state = agent.as_ref().expect("first round always switches");
        let offered = env.offered(t);
        let idx = state.choose(&offered)?;
        let x = &offered[idx];
        let best = offered
            .iter()
            .map(|a| env.mean_reward(a))
            .fold(f64::NEG_INFINITY, f64::max);
        let regret = (best - env.mean_reward(x)).max(0.0);
        let reward = env.sample_reward(t, x);
        tracker.absorb(x)?;
        response += x * reward;
        cum += regret;
        cumulative_regret.push(cum);
        rounds.push(RoundRecord {
            t,
            action_index: idx,
            action: x.iter().copied().collect(),
            reward,
            regret,
        });
    }

    Ok(BanditRun {
        policy,
        rule: cfg.rule,
        rounds,
        cumulative_regret,
        trace: tracker.into_trace(),
        recomputations,
        recompute_time,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub rule: SwitchRule,
    /// Updates in this rule's own bandit run.
    pub m: usize,
    pub cumulative_regret: f64,
    /// Updates when replaying the shared action stream.
    pub shared_m: usize,
    /// Non-switch steps on the shared stream where some width grew by more
    /// than `√α`.
    pub shared_width_violations: usize,
    pub shared_trace: SwitchTrace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingCheck {
    pub alpha: f64,
    pub rayleigh_kind: RuleKind,
    pub m_rayleigh: usize,
    pub m_determinant: usize,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Rayleigh-vs-determinant update counts on the shared stream, for each
    /// pair with equal `α`. Only populated without noise.
    pub ordering: Vec<OrderingCheck>,
}

impl Comparison {
    pub fn ordering_holds(&self) -> bool {
        self.ordering.iter().all(|o| o.holds)
    }
}

/// Runs one bandit per rule on the same environment and noise seed, then
/// replays the first rule's action stream under every rule so that update
/// counts are compared on identical data.
pub fn compare_rules(
    env: &LinearBanditEnv,
    cfg: &StreamConfig,
    rules: &[SwitchRule],
) -> Result<Comparison, BanditError> {
    let Some(first) = rules.first() else {
        return Err(BanditError::NoRules);
    };
    let runs: Vec<BanditRun> = rules
        .iter()
        .map(|r| run_bandit(env, &cfg.with_rule(*r), Policy::RareSwitch))
        .collect::<Result<_, _>>()?;
    debug_assert_eq!(runs[0].rule, *first);
    let shared = runs[0].actions();
    let opts = TheoremOptions {
        directions_per_checkpoint: 0,
        ..Default::default()
    };
    let mut rows = Vec::with_capacity(rules.len());
    for (rule, run) in rules.iter().zip(&runs) {
        let rule_cfg = cfg.with_rule(*rule);
        let shared_trace = run_stream(&rule_cfg, &shared)?;
        let report = verify_theorem_on_traces(
            &[RecordedStream {
                cfg: rule_cfg,
                xs: shared.clone(),
                trace: shared_trace.clone(),
            }],
            &opts,
        );
        rows.push(ComparisonRow {
            rule: *rule,
            m: run.trace.m,
            cumulative_regret: run.total_regret(),
            shared_m: shared_trace.m,
            shared_width_violations: report.private_violations,
            shared_trace,
        });
    }
    let mut ordering = Vec::new();
    if cfg.noise.kind == NoiseKind::None {
        for r in rows.iter().filter(|r| r.rule.kind.is_rayleigh()) {
            for d in rows
                .iter()
                .filter(|d| d.rule.kind == RuleKind::Determinant && d.rule.alpha == r.rule.alpha)
            {
                ordering.push(OrderingCheck {
                    alpha: r.rule.alpha,
                    rayleigh_kind: r.rule.kind,
                    m_rayleigh: r.shared_m,
                    m_determinant: d.shared_m,
                    holds: r.shared_m <= d.shared_m,
                });
            }
        }
    }
    Ok(Comparison { rows, ordering })
}
