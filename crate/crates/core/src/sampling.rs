//! Random vectors and realizable design matrices.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{SymMatrix, Vector};

/// Uniform on the unit sphere in `R^dim`.
pub fn unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector {
    loop {
        let v = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-300 {
            return v / n;
        }
    }
}

/// Uniform on the ball of radius `radius`.
pub fn in_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vector {
    let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
    unit_vector(rng, dim) * r
}

/// Upper bound on the number of actions [`random_design`] absorbs.
pub const MAX_RANDOM_ACTIONS: usize = 50;

/// `base + Σ_{s=1..n} x_s x_sᵀ` with `n ~ U{0..=50}` and `x_s` uniform on the
/// radius-`radius` ball. Returns the matrix and the actions used.
pub fn extend_design<R: Rng + ?Sized>(rng: &mut R, base: &SymMatrix, radius: f64) -> (SymMatrix, Vec<Vector>) {
    let n = rng.random_range(0..=MAX_RANDOM_ACTIONS);
    let xs: Vec<Vector> = (0..n).map(|_| in_ball(rng, base.dim(), radius)).collect();
    let mut m = base.as_matrix().clone();
    for x in &xs {
        m += x * x.transpose();
    }
    (SymMatrix::from_symmetric_part(m).expect("finite square"), xs)
}

/// A realizable design matrix `λI + Σ x_s x_sᵀ`.
pub fn random_design<R: Rng + ?Sized>(rng: &mut R, dim: usize, lambda: f64, radius: f64) -> SymMatrix {
    extend_design(rng, &SymMatrix::scaled_identity(dim, lambda), radius).0
}

/// `η · Q diag(±1) Qᵀ` for a random orthogonal `Q`; spectral norm exactly `η`
/// up to rounding.
pub fn signed_orthogonal_noise<R: Rng + ?Sized>(rng: &mut R, dim: usize, eta: f64) -> SymMatrix {
    let g = nalgebra::DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let signs = nalgebra::DVector::from_fn(dim, |_, _| if rng.random::<bool>() { eta } else { -eta });
    let m = &q * nalgebra::DMatrix::from_diagonal(&signs) * q.transpose();
    SymMatrix::from_symmetric_part(m).expect("finite square")
}
