//! Rare-switching rules and the streaming tracker that applies them.
//!
//! Steps are 1-indexed. At step `t` the tracker holds the design matrix
//! `V_t = λI + Σ_{s<t} x_s x_sᵀ`, perturbs it into `Ṽ_t = V_t + E_t`,
//! compares `Ṽ_t` with the frozen anchor `Ṽ_τ`, and only afterwards absorbs
//! `x_t`. Step 1 always switches: it computes the first policy and sets the
//! first anchor.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{default_loewner_tol, gen_rayleigh_max, loewner_dominates, LinalgError, SpdMatrix, Vector};
use crate::noise::{sample_noise, NoiseBudget, NoiseModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SwitchError {
    #[error("alpha must be finite and > 1 (got {0})")]
    InvalidAlpha(f64),
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("action norm cap L must be finite and > 0 (got {0})")]
    InvalidNormCap(f64),
    #[error("alpha must exceed c_rho for the update-count bound (alpha = {alpha}, c_rho = {c_rho})")]
    BoundVacuous { alpha: f64, c_rho: f64 },
    #[error("step {t}: action norm {norm} exceeds cap L = {cap}")]
    NormCapViolated { t: u64, norm: f64, cap: f64 },
    #[error("step {t}: action has dimension {got}, expected {expected}")]
    DimensionMismatch { t: u64, expected: usize, got: usize },
    #[error("stream has {got} actions, expected horizon {expected}")]
    HorizonMismatch { expected: usize, got: usize },
    #[error("tracker misuse: {0}")]
    OutOfOrder(&'static str),
    #[error("perturbed design matrix at step {t} is not positive definite")]
    PerturbedNotPd { t: u64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    /// `det(Ṽ_t) > α det(Ṽ_τ)`.
    Determinant,
    /// `λ_max(Ṽ_τ^{-1/2} Ṽ_t Ṽ_τ^{-1/2}) > α`.
    Rayleigh,
    /// `Ṽ_t ⋠ α Ṽ_τ`.
    RayleighLoewnerForm,
}

impl RuleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RuleKind::Determinant => "determinant",
            RuleKind::Rayleigh => "rayleigh",
            RuleKind::RayleighLoewnerForm => "rayleigh-loewner-form",
        }
    }

    /// Both Rayleigh variants share the worst-direction guarantees.
    pub fn is_rayleigh(&self) -> bool {
        matches!(self, RuleKind::Rayleigh | RuleKind::RayleighLoewnerForm)
    }
}

/// Relative slack under which a statistic counts as equal to `α`. Log-space
/// determinants carry rounding of a few ulps, enough to break exact ties.
pub const TIE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwitchRule {
    pub kind: RuleKind,
    pub alpha: f64,
}

impl SwitchRule {
    pub fn new(kind: RuleKind, alpha: f64) -> Result<Self, SwitchError> {
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(SwitchError::InvalidAlpha(alpha));
        }
        Ok(Self { kind, alpha })
    }

    /// `statistic > α`, with ratios within `TIE_SLACK` of `α` treated as ties.
    pub fn exceeds(&self, statistic: f64) -> bool {
        statistic > self.alpha * (1.0 + TIE_SLACK)
    }

    /// The update-count bound needs `α > c_ρ`.
    pub fn check_bound(&self, budget: &NoiseBudget) -> Result<(), SwitchError> {
        if self.alpha > budget.c_rho() {
            Ok(())
        } else {
            Err(SwitchError::BoundVacuous {
                alpha: self.alpha,
                c_rho: budget.c_rho(),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    pub switched: bool,
    /// Determinant ratio for the determinant rule, generalized Rayleigh
    /// maximum for both Rayleigh forms.
    pub statistic: f64,
}

/// Evaluates `rule` on the current matrix against the anchor. Ties do not
/// switch.
pub fn should_switch(rule: &SwitchRule, current: &SpdMatrix, anchor: &SpdMatrix) -> Result<Decision, SwitchError> {
    if current.dim() != anchor.dim() {
        return Err(LinalgError::DimensionMismatch {
            expected: anchor.dim(),
            got: current.dim(),
        }
        .into());
    }
    let decision = match rule.kind {
        RuleKind::Determinant => {
            let statistic = (current.log_det() - anchor.log_det()).exp();
            Decision {
                switched: rule.exceeds(statistic),
                statistic,
            }
        }
        RuleKind::Rayleigh => {
            let statistic = gen_rayleigh_max(current.as_sym(), anchor)?;
            Decision {
                switched: rule.exceeds(statistic),
                statistic,
            }
        }
        RuleKind::RayleighLoewnerForm => {
            let scaled = anchor.as_sym().scale(rule.alpha);
            let tol = default_loewner_tol(&scaled, current.as_sym());
            let dominated = loewner_dominates(&scaled, current.as_sym(), tol)?;
            Decision {
                switched: !dominated,
                statistic: gen_rayleigh_max(current.as_sym(), anchor)?,
            }
        }
    };
    Ok(decision)
}

/// Everything needed to run a stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StreamConfig {
    pub dim: usize,
    pub horizon: usize,
    /// Cap `L` on `‖x_t‖₂`.
    pub action_norm_cap: f64,
    pub rule: SwitchRule,
    pub noise: NoiseModel,
    pub budget: NoiseBudget,
}

impl StreamConfig {
    pub fn new(
        dim: usize,
        horizon: usize,
        action_norm_cap: f64,
        rule: SwitchRule,
        noise: NoiseModel,
        budget: NoiseBudget,
    ) -> Result<Self, SwitchError> {
        if dim == 0 {
            return Err(SwitchError::ZeroDimension);
        }
        if !(action_norm_cap.is_finite() && action_norm_cap > 0.0) {
            return Err(SwitchError::InvalidNormCap(action_norm_cap));
        }
        Ok(Self {
            dim,
            horizon,
            action_norm_cap,
            rule,
            noise,
            budget,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.budget.lambda()
    }

    pub fn with_rule(mut self, rule: SwitchRule) -> Self {
        self.rule = rule;
        self
    }
}

/// One evaluated step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    /// Most recent update time `≤ t`, after this step's decision.
    pub tau: u64,
    pub statistic: f64,
    pub switched: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SwitchTrace {
    pub steps: Vec<StepRecord>,
    pub update_times: Vec<u64>,
    pub m: usize,
}

impl SwitchTrace {
    pub fn push(&mut self, record: StepRecord) {
        if record.switched {
            self.update_times.push(record.t);
            self.m += 1;
        }
        self.steps.push(record);
    }

    /// Checks the structural trace invariants. `rule` is used for the
    /// decision consistency check, skipped when `None` (forced switching).
    pub fn check_invariants(&self, rule: Option<&SwitchRule>) -> Result<(), String> {
        if self.m != self.update_times.len() {
            return Err(format!("m = {} but {} update times", self.m, self.update_times.len()));
        }
        if self.update_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err("update times not strictly increasing".into());
        }
        let mut last = None;
        for (i, rec) in self.steps.iter().enumerate() {
            if rec.t != i as u64 + 1 {
                return Err(format!("step {} has t = {}", i + 1, rec.t));
            }
            if rec.switched {
                last = Some(rec.t);
            }
            if Some(rec.tau) != last {
                return Err(format!(
                    "step {}: tau = {} but last update is {:?}",
                    rec.t, rec.tau, last
                ));
            }
            if let Some(rule) = rule {
                if rec.t > 1 && rec.switched != rule.exceeds(rec.statistic) {
                    return Err(format!(
                        "step {}: switched = {} with statistic {} and alpha {}",
                        rec.t, rec.switched, rec.statistic, rule.alpha
                    ));
                }
            }
        }
        if self.steps.first().is_some_and(|r| !r.switched) {
            return Err("first step must switch".into());
        }
        Ok(())
    }

    /// CSV with columns `t,tau,statistic,switched`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        for rec in &self.steps {
            w.serialize(rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Streaming state machine: call [`SwitchTracker::advance`] to evaluate the
/// next step, then [`SwitchTracker::absorb`] with that step's action.
#[derive(Debug, Clone)]
pub struct SwitchTracker {
    cfg: StreamConfig,
    t: u64,
    design: SpdMatrix,
    perturbed: Option<SpdMatrix>,
    anchor: Option<Anchor>,
    awaiting_action: bool,
    trace: SwitchTrace,
}

#[derive(Debug, Clone)]
struct Anchor {
    t: u64,
    perturbed: SpdMatrix,
    design: SpdMatrix,
}

impl SwitchTracker {
    pub fn new(cfg: StreamConfig) -> Result<Self, SwitchError> {
        let design = SpdMatrix::scaled_identity(cfg.dim, cfg.lambda())?;
        Ok(Self {
            cfg,
            t: 0,
            design,
            perturbed: None,
            anchor: None,
            awaiting_action: false,
            trace: SwitchTrace::default(),
        })
    }

    pub fn config(&self) -> &StreamConfig {
        &self.cfg
    }

    /// Evaluates step `t + 1` under the configured rule.
    pub fn advance(&mut self) -> Result<StepRecord, SwitchError> {
        self.advance_inner(false)
    }

    /// Evaluates the next step and switches regardless of the rule.
    pub fn advance_forced(&mut self) -> Result<StepRecord, SwitchError> {
        self.advance_inner(true)
    }

    fn advance_inner(&mut self, force: bool) -> Result<StepRecord, SwitchError> {
        if self.awaiting_action {
            return Err(SwitchError::OutOfOrder("advance called twice without absorb"));
        }
        let t = self.t + 1;
        let noise = sample_noise(&self.cfg.noise, &self.cfg.budget, t, self.cfg.dim);
        let perturbed =
            SpdMatrix::new(self.design.as_sym().add(&noise)?).map_err(|_| SwitchError::PerturbedNotPd { t })?;

        let decision = match &self.anchor {
            None => Decision {
                switched: true,
                statistic: 1.0,
            },
            Some(anchor) => {
                let d = should_switch(&self.cfg.rule, &perturbed, &anchor.perturbed)?;
                Decision {
                    switched: d.switched || force,
                    ..d
                }
            }
        };
        if decision.switched {
            self.anchor = Some(Anchor {
                t,
                perturbed: perturbed.clone(),
                design: self.design.clone(),
            });
        }
        let record = StepRecord {
            t,
            tau: self.anchor.as_ref().map_or(t, |a| a.t),
            statistic: decision.statistic,
            switched: decision.switched,
        };
        self.perturbed = Some(perturbed);
        self.t = t;
        self.awaiting_action = true;
        self.trace.push(record);
        Ok(record)
    }

    /// Adds `x_t x_tᵀ` for the step just evaluated.
    pub fn absorb(&mut self, x: &Vector) -> Result<(), SwitchError> {
        if !self.awaiting_action {
            return Err(SwitchError::OutOfOrder("absorb called before advance"));
        }
        if x.len() != self.cfg.dim {
            return Err(SwitchError::DimensionMismatch {
                t: self.t,
                expected: self.cfg.dim,
                got: x.len(),
            });
        }
        let norm = x.norm();
        let cap = self.cfg.action_norm_cap;
        if !(norm.is_finite() && norm <= cap * (1.0 + 1e-12)) {
            return Err(SwitchError::NormCapViolated { t: self.t, norm, cap });
        }
        self.design = self.design.rank_one_update(x)?;
        self.awaiting_action = false;
        Ok(())
    }

    /// Steps evaluated so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Non-private design matrix (includes every absorbed action).
    pub fn design(&self) -> &SpdMatrix {
        &self.design
    }

    /// `Ṽ_t` from the last `advance`.
    pub fn perturbed(&self) -> Option<&SpdMatrix> {
        self.perturbed.as_ref()
    }

    pub fn tau(&self) -> Option<u64> {
        self.anchor.as_ref().map(|a| a.t)
    }

    /// Frozen `Ṽ_τ`.
    pub fn anchor(&self) -> Option<&SpdMatrix> {
        self.anchor.as_ref().map(|a| &a.perturbed)
    }

    /// `V_τ`, the non-private matrix at the anchor time.
    pub fn anchor_design(&self) -> Option<&SpdMatrix> {
        self.anchor.as_ref().map(|a| &a.design)
    }

    pub fn trace(&self) -> &SwitchTrace {
        &self.trace
    }

    pub fn into_trace(self) -> SwitchTrace {
        self.trace
    }
}

/// Runs the rule over a fixed action stream of length `cfg.horizon`.
pub fn run_stream(cfg: &StreamConfig, xs: &[Vector]) -> Result<SwitchTrace, SwitchError> {
    if xs.len() != cfg.horizon {
        return Err(SwitchError::HorizonMismatch {
            expected: cfg.horizon,
            got: xs.len(),
        });
    }
    let mut tracker = SwitchTracker::new(*cfg)?;
    for x in xs {
        tracker.advance()?;
        tracker.absorb(x)?;
    }
    Ok(tracker.into_trace())
}

/// Upper bound on the number of updates after the initial one:
/// `d·ln(1 + T L²/(λ d)) / ln(α/c_ρ)`.
///
/// Between adjacent updates `det V` grows by more than `α/c_ρ`, and
/// `det V_T / det(λI) ≤ (1 + T L²/(λ d))^d` by AM–GM on the eigenvalues.
pub fn update_count_bound(cfg: &StreamConfig) -> Result<f64, SwitchError> {
    cfg.rule.check_bound(&cfg.budget)?;
    if cfg.horizon == 0 {
        return Ok(0.0);
    }
    let d = cfg.dim as f64;
    let growth = 1.0 + cfg.horizon as f64 * cfg.action_norm_cap.powi(2) / (cfg.lambda() * d);
    Ok(d * growth.ln() / (cfg.rule.alpha / cfg.budget.c_rho()).ln())
}
