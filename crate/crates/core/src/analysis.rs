//! Numerical checks of the switching guarantees, and counterexamples for the
//! determinant rule once the design matrix stops being monotone.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    default_loewner_tol, gen_rayleigh_max, gen_rayleigh_top, loewner_dominates, mahalanobis_inv_norm, spectral_norm,
    LinalgError, SpdMatrix, SymMatrix, Vector,
};
use crate::noise::{adversarial_noise_pair, sample_noise, NoiseBudget, NoiseError, NoiseKind, NoiseModel};
use crate::sampling;
use crate::switching::{run_stream, should_switch, update_count_bound, StreamConfig, SwitchError, SwitchTrace};

/// Relative slack for the sandwich and ordering checks.
pub const CHECK_REL_TOL: f64 = 1e-9;
/// Relative slack before a width inequality counts as violated.
pub const VIOLATION_REL_TOL: f64 = 1e-7;
/// Distance kept from `α` on both sides of a constructed counterexample.
const COUNTEREXAMPLE_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("ordering needs B ⪯ A, but A − B has eigenvalue {min_eigenvalue}")]
    NotMonotone { min_eigenvalue: f64 },
    #[error("no counterexample found: {reason}")]
    NoCounterexample { reason: String },
    #[error("counterexample failed re-verification: {0}")]
    InvalidCounterexample(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Switch(#[from] SwitchError),
}

// ---------------------------------------------------------------------------
// Sandwich: c_ρ⁻¹ g ≤ g̃ ≤ c_ρ g

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichEntry {
    pub g: f64,
    pub g_tilde: f64,
    /// `g̃ / (c_ρ g)`.
    pub upper_ratio: f64,
    /// `g / (c_ρ g̃)`.
    pub lower_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichReport {
    pub instances: usize,
    pub failures: usize,
    pub max_upper_ratio: f64,
    pub max_lower_ratio: f64,
    pub pass: bool,
}

impl Default for SandwichReport {
    fn default() -> Self {
        Self {
            instances: 0,
            failures: 0,
            max_upper_ratio: 0.0,
            max_lower_ratio: 0.0,
            pass: true,
        }
    }
}

impl SandwichReport {
    pub fn record(&mut self, entry: &SandwichEntry) {
        self.instances += 1;
        self.failures += usize::from(!entry.pass);
        self.max_upper_ratio = self.max_upper_ratio.max(entry.upper_ratio);
        self.max_lower_ratio = self.max_lower_ratio.max(entry.lower_ratio);
        self.pass = self.max_upper_ratio <= 1.0 + CHECK_REL_TOL && self.max_lower_ratio <= 1.0 + CHECK_REL_TOL;
    }

    pub fn merge(mut self, other: &SandwichReport) -> SandwichReport {
        self.instances += other.instances;
        self.failures += other.failures;
        self.max_upper_ratio = self.max_upper_ratio.max(other.max_upper_ratio);
        self.max_lower_ratio = self.max_lower_ratio.max(other.max_lower_ratio);
        self.pass &= other.pass;
        self
    }
}

/// Compares `g = λ_max(V_a^{-1/2} V_b V_a^{-1/2})` with its perturbed
/// counterpart `g̃` built from `V_a + E_a` and `V_b + E_b`.
pub fn check_claim1(
    v_a: &SpdMatrix,
    v_b: &SpdMatrix,
    e_a: &SymMatrix,
    e_b: &SymMatrix,
    budget: &NoiseBudget,
) -> Result<SandwichEntry, AnalysisError> {
    let lambda = budget.lambda();
    for (name, v) in [("V_a", v_a), ("V_b", v_b)] {
        let min = v.as_sym().min_eigenvalue();
        if min < lambda * (1.0 - 1e-12) {
            return Err(AnalysisError::Precondition(format!(
                "λ_min({name}) = {min} is below lambda = {lambda}"
            )));
        }
    }
    for (name, e) in [("E_a", e_a), ("E_b", e_b)] {
        let norm = spectral_norm(e);
        if norm > budget.eta() * (1.0 + 1e-12) + 1e-300 {
            return Err(AnalysisError::Precondition(format!(
                "‖{name}‖₂ = {norm} exceeds eta = {}",
                budget.eta()
            )));
        }
    }
    let g = gen_rayleigh_max(v_b.as_sym(), v_a)?;
    let pa = SpdMatrix::new(v_a.as_sym().add(e_a)?)?;
    let pb = v_b.as_sym().add(e_b)?;
    let g_tilde = gen_rayleigh_max(&pb, &pa)?;
    let c = budget.c_rho();
    let upper_ratio = g_tilde / (c * g);
    let lower_ratio = g / (c * g_tilde);
    Ok(SandwichEntry {
        g,
        g_tilde,
        upper_ratio,
        lower_ratio,
        pass: upper_ratio <= 1.0 + CHECK_REL_TOL && lower_ratio <= 1.0 + CHECK_REL_TOL,
    })
}

/// Randomized sandwich instances in dimension `dim`: realizable `V_a ⪯ V_b`
/// and noise alternating between rescaled Gaussian draws and exact-norm
/// random-sign perturbations.
pub fn claim1_suite(
    dim: usize,
    instances: usize,
    budget: &NoiseBudget,
    action_norm_cap: f64,
    seed: u64,
) -> Result<SandwichReport, AnalysisError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(dim as u64);
    let mut report = SandwichReport::default();
    for i in 0..instances {
        let va = sampling::random_design(&mut rng, dim, budget.lambda(), action_norm_cap);
        let (vb, _) = sampling::extend_design(&mut rng, &va, action_norm_cap);
        let (ea, eb) = if i % 2 == 0 {
            let sigma = rng.random_range(0.0..2.0) * budget.eta();
            let model = NoiseModel::new(NoiseKind::GaussianOrthogonalRescaled, sigma, rng.random())?;
            (
                sample_noise(&model, budget, 1, dim),
                sample_noise(&model, budget, 2, dim),
            )
        } else {
            (
                sampling::signed_orthogonal_noise(&mut rng, dim, budget.eta()),
                sampling::signed_orthogonal_noise(&mut rng, dim, budget.eta()),
            )
        };
        // Rounding in Q diag(±η) Qᵀ may overshoot η by an ulp.
        let ea = clamp_norm(ea, budget.eta());
        let eb = clamp_norm(eb, budget.eta());
        let entry = check_claim1(&SpdMatrix::new(va)?, &SpdMatrix::new(vb)?, &ea, &eb, budget)?;
        report.record(&entry);
    }
    Ok(report)
}

fn clamp_norm(e: SymMatrix, eta: f64) -> SymMatrix {
    let n = spectral_norm(&e);
    if n > eta {
        e.scale(eta / n)
    } else {
        e
    }
}

// ---------------------------------------------------------------------------
// Rayleigh maximum vs determinant ratio under monotonicity

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma12Check {
    /// `sup xᵀAx / xᵀBx`.
    pub rayleigh: f64,
    /// `det A / det B`.
    pub det_ratio: f64,
    pub ok: bool,
}

/// For `B ⪯ A`, every generalized eigenvalue is at least one, so the largest
/// one is bounded by their product `det A / det B`.
pub fn check_lemma12_ordering(a: &SpdMatrix, b: &SpdMatrix) -> Result<Lemma12Check, AnalysisError> {
    let tol = default_loewner_tol(a.as_sym(), b.as_sym());
    if !loewner_dominates(a.as_sym(), b.as_sym(), tol)? {
        return Err(AnalysisError::NotMonotone {
            min_eigenvalue: a.as_sym().sub(b.as_sym())?.min_eigenvalue(),
        });
    }
    let rayleigh = gen_rayleigh_max(a.as_sym(), b)?;
    let det_ratio = (a.log_det() - b.log_det()).exp();
    Ok(Lemma12Check {
        rayleigh,
        det_ratio,
        ok: rayleigh <= det_ratio * (1.0 + CHECK_REL_TOL),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lemma12Report {
    pub instances: usize,
    pub failures: usize,
    /// Largest `rayleigh / det_ratio` observed.
    pub max_ratio: f64,
}

impl Lemma12Report {
    pub fn pass(&self) -> bool {
        self.failures == 0
    }
}

/// Random monotone pairs `B = V_a`, `A = V_a + Σ more actions`.
pub fn lemma12_suite(
    dim: usize,
    instances: usize,
    lambda: f64,
    action_norm_cap: f64,
    seed: u64,
) -> Result<Lemma12Report, AnalysisError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1000 + dim as u64);
    let mut report = Lemma12Report {
        instances: 0,
        failures: 0,
        max_ratio: 0.0,
    };
    for _ in 0..instances {
        let b = sampling::random_design(&mut rng, dim, lambda, action_norm_cap);
        let (a, _) = sampling::extend_design(&mut rng, &b, action_norm_cap);
        let check = check_lemma12_ordering(&SpdMatrix::new(a)?, &SpdMatrix::new(b)?)?;
        report.instances += 1;
        report.failures += usize::from(!check.ok);
        report.max_ratio = report.max_ratio.max(check.rayleigh / check.det_ratio);
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Counterexamples

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMode {
    Analytic,
    Grid,
}

/// A legal instance where the determinant rule stays silent while some
/// confidence width grows by more than `√α`.
#[derive(Debug, Clone, Serialize)]
pub struct Counterexample {
    pub mode: SearchMode,
    pub alpha: f64,
    pub eta: f64,
    pub lambda: f64,
    pub c_rho: f64,
    pub action_norm_cap: f64,
    /// Actions building `V_τ` from `λI`.
    pub prefix: Vec<Vec<f64>>,
    /// Actions between `τ` and `t`.
    pub increment: Vec<Vec<f64>>,
    pub design_tau: SymMatrix,
    pub design_t: SymMatrix,
    pub noise_tau: SymMatrix,
    pub noise_t: SymMatrix,
    pub perturbed_tau: SymMatrix,
    pub perturbed_t: SymMatrix,
    /// `x*` maximizing `‖x‖_{Ṽ_τ⁻¹} / ‖x‖_{Ṽ_t⁻¹}`.
    pub witness: Vec<f64>,
    /// `det Ṽ_t / det Ṽ_τ`.
    pub det_ratio: f64,
    /// `λ_max(Ṽ_τ^{-1/2} Ṽ_t Ṽ_τ^{-1/2})`.
    pub rayleigh: f64,
    /// `‖x*‖_{Ṽ_τ⁻¹} / ‖x*‖_{Ṽ_t⁻¹}`.
    pub width_inflation: f64,
}

impl Counterexample {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        mode: SearchMode,
        alpha: f64,
        budget: &NoiseBudget,
        action_norm_cap: f64,
        prefix: Vec<Vector>,
        increment: Vec<Vector>,
        noise_tau: SymMatrix,
        noise_t: SymMatrix,
    ) -> Result<Self, AnalysisError> {
        let dim = noise_tau.dim();
        let mut design = SpdMatrix::scaled_identity(dim, budget.lambda())?;
        for x in &prefix {
            design = design.rank_one_update(x)?;
        }
        let design_tau = design.as_sym().clone();
        for x in &increment {
            design = design.rank_one_update(x)?;
        }
        let design_t = design.into_sym();
        let perturbed_tau = design_tau.add(&noise_tau)?;
        let perturbed_t = design_t.add(&noise_t)?;
        let p_tau = SpdMatrix::new(perturbed_tau.clone())?;
        let p_t = SpdMatrix::new(perturbed_t.clone())?;
        let top = gen_rayleigh_top(&perturbed_t, &p_tau)?;
        let witness = perturbed_tau.as_matrix() * &top.vector;
        let witness = &witness / witness.norm();
        let width_inflation = mahalanobis_inv_norm(&witness, &p_tau)? / mahalanobis_inv_norm(&witness, &p_t)?;
        let out = Self {
            mode,
            alpha,
            eta: budget.eta(),
            lambda: budget.lambda(),
            c_rho: budget.c_rho(),
            action_norm_cap,
            prefix: prefix.iter().map(|x| x.iter().copied().collect()).collect(),
            increment: increment.iter().map(|x| x.iter().copied().collect()).collect(),
            design_tau,
            design_t,
            noise_tau,
            noise_t,
            perturbed_tau,
            perturbed_t,
            witness: witness.iter().copied().collect(),
            det_ratio: (p_t.log_det() - p_tau.log_det()).exp(),
            rayleigh: top.value,
            width_inflation,
        };
        out.verify()?;
        Ok(out)
    }

    /// Re-derives every defining property from the raw actions and noise.
    pub fn verify(&self) -> Result<(), AnalysisError> {
        let bad = |msg: String| Err(AnalysisError::InvalidCounterexample(msg));
        let dim = self.noise_tau.dim();
        if !(self.eta.is_finite() && 2.0 * self.eta <= self.lambda) {
            return bad(format!("2η = {} exceeds λ = {}", 2.0 * self.eta, self.lambda));
        }
        let mut v_tau = DMatrix::identity(dim, dim) * self.lambda;
        for x in &self.prefix {
            let x = Vector::from_column_slice(x);
            if x.norm() > self.action_norm_cap * (1.0 + 1e-12) {
                return bad(format!("prefix action norm {} exceeds L", x.norm()));
            }
            v_tau += &x * x.transpose();
        }
        let mut v_t = v_tau.clone();
        for x in &self.increment {
            let x = Vector::from_column_slice(x);
            if x.norm() > self.action_norm_cap * (1.0 + 1e-12) {
                return bad(format!("increment action norm {} exceeds L", x.norm()));
            }
            v_t += &x * x.transpose();
        }
        let scale = 1.0 + v_t.amax();
        if (&v_tau - self.design_tau.as_matrix()).amax() > 1e-12 * scale
            || (&v_t - self.design_t.as_matrix()).amax() > 1e-12 * scale
        {
            return bad("stored design matrices do not match the action stream".into());
        }
        for (name, e) in [("E_τ", &self.noise_tau), ("E_t", &self.noise_t)] {
            let n = spectral_norm(e);
            if n > self.eta * (1.0 + 1e-12) {
                return bad(format!("‖{name}‖₂ = {n} exceeds η = {}", self.eta));
            }
        }
        let v_tau = SymMatrix::from_symmetric_part(v_tau)?;
        let v_t = SymMatrix::from_symmetric_part(v_t)?;
        if !loewner_dominates(&v_t, &v_tau, default_loewner_tol(&v_t, &v_tau))? {
            return bad("non-private stream is not monotone".into());
        }
        let p_tau = SpdMatrix::new(v_tau.add(&self.noise_tau)?)?;
        let p_t = SpdMatrix::new(v_t.add(&self.noise_t)?)?;
        let det_ratio = (p_t.log_det() - p_tau.log_det()).exp();
        if det_ratio > self.alpha {
            return bad(format!(
                "determinant rule fires: ratio {det_ratio} > α = {}",
                self.alpha
            ));
        }
        let rayleigh = gen_rayleigh_max(p_t.as_sym(), &p_tau)?;
        if rayleigh <= self.alpha {
            return bad(format!("Rayleigh value {rayleigh} does not exceed α = {}", self.alpha));
        }
        let x = Vector::from_column_slice(&self.witness);
        let inflation = mahalanobis_inv_norm(&x, &p_tau)? / mahalanobis_inv_norm(&x, &p_t)?;
        if inflation <= self.alpha.sqrt() {
            return bad(format!(
                "width inflation {inflation} does not exceed √α = {}",
                self.alpha.sqrt()
            ));
        }
        Ok(())
    }

    /// Human-readable block with every value at 17 significant digits.
    pub fn to_text(&self) -> String {
        fn mat(m: &SymMatrix) -> String {
            let d = m.dim();
            (0..d)
                .map(|i| {
                    let row: Vec<String> = (0..d).map(|j| format!("{:.16e}", m.get(i, j))).collect();
                    format!("  [{}]", row.join(", "))
                })
                .collect::<Vec<_>>()
                .join("\n")
        }
        fn vecs(xs: &[Vec<f64>]) -> String {
            if xs.is_empty() {
                return "  (none)".into();
            }
            xs.iter()
                .map(|x| {
                    let v: Vec<String> = x.iter().map(|v| format!("{v:.16e}")).collect();
                    format!("  ({})", v.join(", "))
                })
                .collect::<Vec<_>>()
                .join("\n")
        }
        let witness: Vec<String> = self.witness.iter().map(|v| format!("{v:.16e}")).collect();
        format!(
            "counterexample ({mode:?})\n\
             alpha = {alpha:.16e}\neta = {eta:.16e}\nlambda = {lambda:.16e}\nc_rho = {c:.16e}\n\
             L = {cap:.16e}\n\
             prefix actions (V_tau = lambda I + sum x x^T):\n{prefix}\n\
             increment actions (V_t = V_tau + sum x x^T):\n{inc}\n\
             V_tau =\n{vtau}\nV_t =\n{vt}\nE_tau =\n{etau}\nE_t =\n{et}\n\
             tilde V_tau =\n{ptau}\ntilde V_t =\n{pt}\n\
             witness x* = ({witness})\n\
             det ratio = {det:.16e}  (<= alpha: determinant rule does not switch)\n\
             rayleigh = {ray:.16e}  (> alpha)\n\
             width inflation = {infl:.16e}  (> sqrt(alpha) = {sa:.16e})\n",
            mode = self.mode,
            alpha = self.alpha,
            eta = self.eta,
            lambda = self.lambda,
            c = self.c_rho,
            cap = self.action_norm_cap,
            prefix = vecs(&self.prefix),
            inc = vecs(&self.increment),
            vtau = mat(&self.design_tau),
            vt = mat(&self.design_t),
            etau = mat(&self.noise_tau),
            et = mat(&self.noise_t),
            ptau = mat(&self.perturbed_tau),
            pt = mat(&self.perturbed_t),
            witness = witness.join(", "),
            det = self.det_ratio,
            ray = self.rayleigh,
            infl = self.width_inflation,
            sa = self.alpha.sqrt(),
        )
    }
}

/// Splits squared mass `mass` along unit axis `axis` into the fewest actions
/// of norm at most `cap`.
fn realize_mass(mass: f64, axis: usize, dim: usize, cap: f64) -> Vec<Vector> {
    if mass <= 0.0 {
        return Vec::new();
    }
    let k = (mass / (cap * cap) - 1e-12).ceil().max(1.0) as usize;
    let norm = (mass / k as f64).sqrt();
    (0..k)
        .map(|_| {
            let mut x = Vector::zeros(dim);
            x[axis] = norm;
            x
        })
        .collect()
}

/// Searches for a [`Counterexample`] in `d = 2` with unit action cap.
///
/// Analytic mode: one prefix action along `e₂`, then noise from
/// [`adversarial_noise_pair`] with target `e₁`, so `Ṽ_τ` is inflated along
/// `e₁` and `Ṽ_t` deflated along it (a loss the data never repairs), and
/// the increment along `e₂` is sized so that the determinant ratio sits just
/// below `α`. The `e₂` ratio then reaches `≈ α·c_ρ`.
///
/// Grid mode: brute force over diagonal configurations (axis masses and
/// diagonal noise signs) using only scalar ratios, keeping the instance with
/// the largest Rayleigh value among those whose determinant ratio is `≤ α`.
pub fn find_counterexample(
    alpha: f64,
    budget: &NoiseBudget,
    mode: SearchMode,
) -> Result<Counterexample, AnalysisError> {
    if !(alpha.is_finite() && alpha > 1.0) {
        return Err(AnalysisError::Precondition(format!(
            "alpha must exceed 1 (got {alpha})"
        )));
    }
    if budget.eta() == 0.0 {
        return Err(AnalysisError::NoCounterexample {
            reason: "monotone case: with eta = 0 the perturbed matrices are monotone and the \
                     Rayleigh value never exceeds the determinant ratio"
                .into(),
        });
    }
    let cap = 1.0;
    match mode {
        SearchMode::Analytic => analytic_counterexample(alpha, budget, cap),
        SearchMode::Grid => grid_counterexample(alpha, budget, cap),
    }
}

fn analytic_counterexample(alpha: f64, budget: &NoiseBudget, cap: f64) -> Result<Counterexample, AnalysisError> {
    let (lambda, eta) = (budget.lambda(), budget.eta());
    let prefix = vec![Vector::from_column_slice(&[0.0, cap])];
    let (e_tau, e_t) = adversarial_noise_pair(budget, &Vector::from_column_slice(&[1.0, 0.0]))?;
    // Ṽ_τ = diag(λ + η, a − η), Ṽ_t = diag(λ − η, a + δ + η) with a = λ + L².
    let a = lambda + cap * cap;
    let shrink = (lambda - eta) / (lambda + eta);
    let target_det = alpha * (1.0 - COUNTEREXAMPLE_MARGIN);
    let target_ray = target_det / shrink;
    let delta = (target_ray * (a - eta) - (a + eta)).max(0.0);
    let ray = (a + delta + eta) / (a - eta);
    if ray <= alpha * (1.0 + COUNTEREXAMPLE_MARGIN) {
        return Err(AnalysisError::NoCounterexample {
            reason: format!("achievable inflation {ray} does not exceed alpha = {alpha}"),
        });
    }
    let increment = realize_mass(delta, 1, 2, cap);
    Counterexample::assemble(SearchMode::Analytic, alpha, budget, cap, prefix, increment, e_tau, e_t)
}

const GRID_MASSES: [f64; 7] = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0];
const GRID_SIGNS: [f64; 3] = [-1.0, 0.0, 1.0];

/// (prefix masses, increment masses, E_τ signs, E_t signs, rayleigh)
type GridPoint = ([f64; 2], [f64; 2], [f64; 2], [f64; 2], f64);

fn grid_counterexample(alpha: f64, budget: &NoiseBudget, cap: f64) -> Result<Counterexample, AnalysisError> {
    let (lambda, eta) = (budget.lambda(), budget.eta());
    let mut best: Option<GridPoint> = None;
    for &p0 in &GRID_MASSES {
        for &p1 in &GRID_MASSES {
            for &d0 in &GRID_MASSES {
                for &d1 in &GRID_MASSES {
                    for &a0 in &GRID_SIGNS {
                        for &a1 in &GRID_SIGNS {
                            for &b0 in &GRID_SIGNS {
                                for &b1 in &GRID_SIGNS {
                                    let r0 = (lambda + p0 + d0 + b0 * eta) / (lambda + p0 + a0 * eta);
                                    let r1 = (lambda + p1 + d1 + b1 * eta) / (lambda + p1 + a1 * eta);
                                    let det = r0 * r1;
                                    let ray = r0.max(r1);
                                    if det <= alpha * (1.0 - COUNTEREXAMPLE_MARGIN)
                                        && ray > alpha * (1.0 + COUNTEREXAMPLE_MARGIN)
                                        && best.is_none_or(|b| ray > b.4)
                                    {
                                        best = Some(([p0, p1], [d0, d1], [a0, a1], [b0, b1], ray));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let Some((p, d, a, b, _)) = best else {
        return Err(AnalysisError::NoCounterexample {
            reason: format!("no diagonal configuration on the search grid beats alpha = {alpha}"),
        });
    };
    let mut prefix = realize_mass(p[0], 0, 2, cap);
    prefix.extend(realize_mass(p[1], 1, 2, cap));
    let mut increment = realize_mass(d[0], 0, 2, cap);
    increment.extend(realize_mass(d[1], 1, 2, cap));
    let e_tau = SymMatrix::from_diagonal(&[a[0] * eta, a[1] * eta]);
    let e_t = SymMatrix::from_diagonal(&[b[0] * eta, b[1] * eta]);
    Counterexample::assemble(SearchMode::Grid, alpha, budget, cap, prefix, increment, e_tau, e_t)
}

// ---------------------------------------------------------------------------
// Width and update-count guarantees along traces

/// A stream together with the trace produced on it. The matrices are
/// replayed from `xs` and the noise model, never taken from the producer.
#[derive(Debug, Clone)]
pub struct RecordedStream {
    pub cfg: StreamConfig,
    pub xs: Vec<Vector>,
    pub trace: SwitchTrace,
}

impl RecordedStream {
    pub fn run(cfg: StreamConfig, xs: Vec<Vector>) -> Result<Self, SwitchError> {
        let trace = run_stream(&cfg, &xs)?;
        Ok(Self { cfg, xs, trace })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TheoremOptions {
    pub directions_per_checkpoint: usize,
    pub seed: u64,
    /// Violations are kept in the report up to this many; all are counted.
    pub max_listed: usize,
}

impl Default for TheoremOptions {
    fn default() -> Self {
        Self {
            directions_per_checkpoint: 100,
            seed: 0,
            max_listed: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WidthKind {
    /// `‖x‖_{Ṽ_τ⁻¹} ≤ √α ‖x‖_{Ṽ_t⁻¹}`.
    Private,
    /// `‖x‖_{V_τ⁻¹} ≤ √(c_ρ α) ‖x‖_{V_t⁻¹}`.
    NonPrivate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WidthViolation {
    pub trace: usize,
    pub t: u64,
    pub tau: u64,
    pub kind: WidthKind,
    /// Worst observed `‖x‖_{τ} / ‖x‖_{t}`.
    pub ratio: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub trace: usize,
    pub m: usize,
    /// `None` when `α ≤ c_ρ` and the bound is vacuous.
    pub bound: Option<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TheoremReport {
    pub traces: usize,
    pub checkpoints: usize,
    pub directions: usize,
    pub private_violations: usize,
    pub nonprivate_violations: usize,
    pub bound_violations: usize,
    pub violations: Vec<WidthViolation>,
    pub bounds: Vec<BoundCheck>,
    pub trace_errors: Vec<String>,
}

impl TheoremReport {
    pub fn total_violations(&self) -> usize {
        self.private_violations + self.nonprivate_violations + self.bound_violations + self.trace_errors.len()
    }

    fn merge(mut self, other: TheoremReport, max_listed: usize) -> TheoremReport {
        self.traces += other.traces;
        self.checkpoints += other.checkpoints;
        self.directions += other.directions;
        self.private_violations += other.private_violations;
        self.nonprivate_violations += other.nonprivate_violations;
        self.bound_violations += other.bound_violations;
        let room = max_listed.saturating_sub(self.violations.len());
        self.violations.extend(other.violations.into_iter().take(room));
        self.bounds.extend(other.bounds);
        self.trace_errors.extend(other.trace_errors);
        self
    }
}

/// Checks both width inequalities at every non-switch step (random unit
/// directions plus the exact worst direction) and the update-count bound
/// `m ≤ bound + 1` on every trace.
pub fn verify_theorem_on_traces(traces: &[RecordedStream], opts: &TheoremOptions) -> TheoremReport {
    traces
        .par_iter()
        .enumerate()
        .map(|(i, rec)| verify_one(i, rec, opts))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(TheoremReport::default(), |acc, r| acc.merge(r, opts.max_listed))
}

fn verify_one(index: usize, rec: &RecordedStream, opts: &TheoremOptions) -> TheoremReport {
    let mut report = TheoremReport {
        traces: 1,
        ..Default::default()
    };
    match replay_widths(index, rec, opts, &mut report) {
        Ok(()) => {}
        Err(e) => report.trace_errors.push(format!("trace {index}: {e}")),
    }
    if let Err(e) = rec.trace.check_invariants(Some(&rec.cfg.rule)) {
        report.trace_errors.push(format!("trace {index}: {e}"));
    }
    let bound = update_count_bound(&rec.cfg).ok();
    let ok = bound.is_none_or(|b| (rec.trace.m as f64) <= b + 1.0);
    if !ok {
        report.bound_violations += 1;
    }
    report.bounds.push(BoundCheck {
        trace: index,
        m: rec.trace.m,
        bound,
        ok,
    });
    report
}

/// Worst `‖x‖_{anchor⁻¹} / ‖x‖_{current⁻¹}` over the given directions and the
/// exact maximizer `x* = anchor · w`, `w` the top generalized eigenvector.
fn worst_width_ratio(current: &SpdMatrix, anchor: &SpdMatrix, directions: &[Vector]) -> Result<f64, LinalgError> {
    let mut worst = 0.0_f64;
    for x in directions {
        worst = worst.max(anchor.inv_norm(x)? / current.inv_norm(x)?);
    }
    let top = gen_rayleigh_top(current.as_sym(), anchor)?;
    let x_star = anchor.as_sym().as_matrix() * &top.vector;
    worst = worst.max(anchor.inv_norm(&x_star)? / current.inv_norm(&x_star)?);
    Ok(worst)
}

fn replay_widths(
    index: usize,
    rec: &RecordedStream,
    opts: &TheoremOptions,
    report: &mut TheoremReport,
) -> Result<(), AnalysisError> {
    let cfg = &rec.cfg;
    let dim = cfg.dim;
    if rec.xs.len() != rec.trace.steps.len() {
        return Err(AnalysisError::Precondition(format!(
            "{} actions but {} trace steps",
            rec.xs.len(),
            rec.trace.steps.len()
        )));
    }
    let alpha = cfg.rule.alpha;
    let private_limit = alpha.sqrt();
    let nonprivate_limit = (cfg.budget.c_rho() * alpha).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(index as u64);

    let mut design = DMatrix::identity(dim, dim) * cfg.lambda();
    let mut anchor: Option<(SpdMatrix, SpdMatrix)> = None;
    for (x, step) in rec.xs.iter().zip(&rec.trace.steps) {
        let t = step.t;
        let v_t = SymMatrix::from_symmetric_part(design.clone())?;
        let noise = sample_noise(&cfg.noise, &cfg.budget, t, dim);
        let p_t = SpdMatrix::new(v_t.add(&noise)?)?;
        let v_t = SpdMatrix::new(v_t)?;
        match &anchor {
            None => {
                if !step.switched {
                    return Err(AnalysisError::Precondition("first step did not switch".into()));
                }
            }
            Some((p_tau, v_tau)) => {
                let replayed = should_switch(&cfg.rule, &p_t, p_tau)?;
                if replayed.switched != step.switched {
                    report.trace_errors.push(format!(
                        "trace {index}, step {t}: replayed decision {} disagrees with trace",
                        replayed.switched
                    ));
                }
                if !step.switched {
                    let dirs: Vec<Vector> = (0..opts.directions_per_checkpoint)
                        .map(|_| sampling::unit_vector(&mut rng, dim))
                        .collect();
                    report.checkpoints += 1;
                    report.directions += dirs.len();
                    let checks = [
                        (
                            WidthKind::Private,
                            worst_width_ratio(&p_t, p_tau, &dirs)?,
                            private_limit,
                        ),
                        (
                            WidthKind::NonPrivate,
                            worst_width_ratio(&v_t, v_tau, &dirs)?,
                            nonprivate_limit,
                        ),
                    ];
                    for (kind, ratio, limit) in checks {
                        if ratio > limit * (1.0 + VIOLATION_REL_TOL) {
                            match kind {
                                WidthKind::Private => report.private_violations += 1,
                                WidthKind::NonPrivate => report.nonprivate_violations += 1,
                            }
                            if report.violations.len() < opts.max_listed {
                                report.violations.push(WidthViolation {
                                    trace: index,
                                    t,
                                    tau: step.tau,
                                    kind,
                                    ratio,
                                    limit,
                                });
                            }
                        }
                    }
                }
            }
        }
        if step.switched {
            anchor = Some((p_t, v_t));
        }
        design += x * x.transpose();
    }
    Ok(())
}
