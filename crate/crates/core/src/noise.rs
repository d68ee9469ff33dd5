//! Bounded symmetric perturbations of the design matrix.
//!
//! The perturbation is abstract: any symmetric `E_t` with `‖E_t‖₂ ≤ η` is
//! admissible. Gaussian draws are rescaled onto the budget when they exceed
//! it, so the bound holds surely rather than with high probability.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{spectral_norm, SymMatrix, Vector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("lambda must be finite and > 0 (got {0})")]
    InvalidLambda(f64),
    #[error("eta must be finite and >= 0 (got {0})")]
    InvalidEta(f64),
    #[error("noise budget violates 0 <= 2*eta <= lambda (eta = {eta}, lambda = {lambda})")]
    BudgetTooLarge { eta: f64, lambda: f64 },
    #[error("sigma must be finite and >= 0 (got {0})")]
    InvalidSigma(f64),
    #[error("adversarial pair needs dimension 2 (got {0})")]
    UnsupportedDimension(usize),
    #[error("adversarial pair needs eta > 0")]
    ZeroBudget,
    #[error("target direction must be nonzero and finite")]
    ZeroDirection,
}

/// Spectral-norm cap `η` on the noise, the ridge `λ`, and the derived
/// constants `ρ = η/λ` and `c_ρ = (1+ρ)/(1−ρ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseBudget {
    eta: f64,
    lambda: f64,
    rho: f64,
    c_rho: f64,
}

impl NoiseBudget {
    pub fn new(eta: f64, lambda: f64) -> Result<Self, NoiseError> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(NoiseError::InvalidLambda(lambda));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(NoiseError::InvalidEta(eta));
        }
        if 2.0 * eta > lambda {
            return Err(NoiseError::BudgetTooLarge { eta, lambda });
        }
        let rho = eta / lambda;
        Ok(Self {
            eta,
            lambda,
            rho,
            c_rho: (1.0 + rho) / (1.0 - rho),
        })
    }

    /// No noise at all.
    pub fn noiseless(lambda: f64) -> Result<Self, NoiseError> {
        Self::new(0.0, lambda)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn c_rho(&self) -> f64 {
        self.c_rho
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    /// Symmetric Gaussian matrix, rescaled onto the budget when it exceeds it.
    GaussianOrthogonalRescaled,
    /// `E_t = ±η·diag(1, −1, 1, …)` with the sign flipping every step.
    AdversarialDiagonal,
}

impl NoiseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::GaussianOrthogonalRescaled => "gaussian-orthogonal-rescaled",
            NoiseKind::AdversarialDiagonal => "adversarial-diagonal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Entry scale before rescaling.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma: f64, seed: u64) -> Result<Self, NoiseError> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(NoiseError::InvalidSigma(sigma));
        }
        Ok(Self { kind, sigma, seed })
    }

    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            sigma: 0.0,
            seed: 0,
        }
    }
}

/// Draws `E_t` for step `t`.
///
/// The result is a pure function of `(model, budget, t, dim)`: the generator
/// is seeded with `model.seed` and positioned on stream `t`.
pub fn sample_noise(model: &NoiseModel, budget: &NoiseBudget, t: u64, dim: usize) -> SymMatrix {
    match model.kind {
        NoiseKind::None => SymMatrix::zeros(dim),
        NoiseKind::GaussianOrthogonalRescaled => {
            let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
            rng.set_stream(t);
            let mut m = nalgebra::DMatrix::zeros(dim, dim);
            for i in 0..dim {
                for j in i..dim {
                    let z: f64 = rng.sample(StandardNormal);
                    let v = if i == j {
                        model.sigma * std::f64::consts::SQRT_2 * z
                    } else {
                        model.sigma * z
                    };
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let e = SymMatrix::from_symmetric_part(m).expect("finite square draw");
            let norm = spectral_norm(&e);
            if norm > budget.eta() {
                e.scale(budget.eta() / norm)
            } else {
                e
            }
        }
        NoiseKind::AdversarialDiagonal => {
            let sign = if t % 2 == 1 { 1.0 } else { -1.0 };
            let diag: Vec<f64> = (0..dim)
                .map(|i| {
                    let s = if i % 2 == 0 { sign } else { -sign };
                    s * budget.eta()
                })
                .collect();
            SymMatrix::from_diagonal(&diag)
        }
    }
}

/// `(E_τ, E_t)` with `E_τ = η(uuᵀ − vvᵀ)` and `E_t = −E_τ`, where `u` is the
/// normalized target direction and `v ⊥ u`.
///
/// `E_τ` inflates `u` and `E_t` deflates it, so `Ṽ_t − Ṽ_τ` loses `2η` along
/// `u` relative to the data increment.
pub fn adversarial_noise_pair(budget: &NoiseBudget, target_dir: &Vector) -> Result<(SymMatrix, SymMatrix), NoiseError> {
    if target_dir.len() != 2 {
        return Err(NoiseError::UnsupportedDimension(target_dir.len()));
    }
    if budget.eta() <= 0.0 {
        return Err(NoiseError::ZeroBudget);
    }
    let norm = target_dir.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(NoiseError::ZeroDirection);
    }
    let u = target_dir / norm;
    let v = Vector::from_column_slice(&[-u[1], u[0]]);
    let e_tau = SymMatrix::outer(&u)
        .sub(&SymMatrix::outer(&v))
        .expect("both 2x2")
        .scale(budget.eta());
    let e_t = e_tau.scale(-1.0);
    Ok((e_tau, e_t))
}
