//! Dense symmetric-matrix kernels.
//!
//! Everything here works on small dense matrices (d up to a few dozen). The
//! positive-definite type caches its Cholesky factor so that generalized
//! eigenvalues, log-determinants and inverse-weighted norms only ever need
//! triangular solves against that factor.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use thiserror::Error;

/// Column vector of reals.
pub type Vector = DVector<f64>;

/// Relative asymmetry accepted by [`SymMatrix::from_row_major`].
const SYMMETRY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix must have dimension at least 1")]
    Empty,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("matrix is not positive definite (Cholesky factorization failed)")]
    NotPositiveDefinite,
}

/// A real symmetric matrix. Entry `(i, j)` and `(j, i)` are bit-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Builds from a square matrix by taking its symmetric part `(M + Mᵀ)/2`.
    pub fn from_symmetric_part(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        check_square(&m)?;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let d = m.nrows();
        let mut out = m;
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = avg;
                out[(j, i)] = avg;
            }
        }
        Ok(Self(out))
    }

    /// Builds from a matrix that must already be symmetric up to a tiny
    /// relative slack; the result is exactly symmetric.
    pub fn new(m: DMatrix<f64>) -> Result<Self, LinalgError> {
        check_square(&m)?;
        let d = m.nrows();
        for i in 0..d {
            for j in (i + 1)..d {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                let scale = 1.0_f64.max(a.abs()).max(b.abs());
                if (a - b).abs() > SYMMETRY_SLACK * scale {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Self::from_symmetric_part(m)
    }

    /// Row-major `dim * dim` slice.
    pub fn from_row_major(dim: usize, data: &[f64]) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::Empty);
        }
        if data.len() != dim * dim {
            return Err(LinalgError::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self(DMatrix::identity(dim, dim) * scale)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// `x xᵀ`.
    pub fn outer(x: &Vector) -> Self {
        let d = x.len();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let v = x[i] * x[j];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix, LinalgError> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix, LinalgError> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(Self(&self.0 - &other.0))
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        Self(&self.0 * c)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().expect("dim >= 1")
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(self)
    }

    /// `xᵀ M x`.
    pub fn quadratic_form(&self, x: &Vector) -> Result<f64, LinalgError> {
        check_same_dim(self.dim(), x.len())?;
        Ok(x.dot(&(&self.0 * x)))
    }
}

impl serde::Serialize for SymMatrix {
    /// Nested rows.
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let d = self.dim();
        let mut seq = serializer.serialize_seq(Some(d))?;
        for i in 0..d {
            let row: Vec<f64> = (0..d).map(|j| self.0[(i, j)]).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}

/// A symmetric positive-definite matrix together with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    sym: SymMatrix,
    chol: Cholesky<f64, Dyn>,
}

impl SpdMatrix {
    /// Factorizes `sym`; a failed Cholesky is the positive-definiteness test.
    pub fn new(sym: SymMatrix) -> Result<Self, LinalgError> {
        let chol = Cholesky::new(sym.0.clone()).ok_or(LinalgError::NotPositiveDefinite)?;
        if (0..sym.dim()).any(|i| {
            let v = chol.l_dirty()[(i, i)];
            !(v.is_finite() && v > 0.0)
        }) {
            return Err(LinalgError::NotPositiveDefinite);
        }
        Ok(Self { sym, chol })
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self, LinalgError> {
        Self::new(SymMatrix::scaled_identity(dim, scale))
    }

    pub fn dim(&self) -> usize {
        self.sym.dim()
    }

    pub fn as_sym(&self) -> &SymMatrix {
        &self.sym
    }

    pub fn into_sym(self) -> SymMatrix {
        self.sym
    }

    /// Lower-triangular `L` with `L Lᵀ = M`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `V + x xᵀ`, with the factor updated in `O(d²)`.
    pub fn rank_one_update(&self, x: &Vector) -> Result<SpdMatrix, LinalgError> {
        check_same_dim(self.dim(), x.len())?;
        let sym = self.sym.add(&SymMatrix::outer(x))?;
        let mut chol = self.chol.clone();
        chol.rank_one_update(x, 1.0);
        Ok(Self { sym, chol })
    }

    /// `ln det M` as `Σ 2 ln L_ii`.
    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        (0..self.dim()).map(|i| 2.0 * l[(i, i)].ln()).sum()
    }

    /// `L⁻¹ x`.
    fn whiten(&self, x: &Vector) -> Vector {
        self.chol
            .l_dirty()
            .solve_lower_triangular(x)
            .expect("Cholesky factor has a positive diagonal")
    }

    /// `sqrt(xᵀ M⁻¹ x)`, computed as `‖L⁻¹ x‖₂`.
    pub fn inv_norm(&self, x: &Vector) -> Result<f64, LinalgError> {
        check_same_dim(self.dim(), x.len())?;
        Ok(self.whiten(x).norm())
    }

    /// `M⁻¹ b`.
    pub fn solve(&self, b: &Vector) -> Result<Vector, LinalgError> {
        check_same_dim(self.dim(), b.len())?;
        Ok(self.chol.solve(b))
    }

    /// `L⁻¹ A L⁻ᵀ` for `M = L Lᵀ`, symmetrized.
    fn reduce(&self, a: &SymMatrix) -> Result<SymMatrix, LinalgError> {
        check_same_dim(self.dim(), a.dim())?;
        let l = self.chol.l_dirty();
        let left = l
            .solve_lower_triangular(&a.0)
            .expect("Cholesky factor has a positive diagonal");
        let both = l
            .solve_lower_triangular(&left.transpose())
            .expect("Cholesky factor has a positive diagonal");
        SymMatrix::from_symmetric_part(both)
    }
}

/// Top generalized eigenpair of the pencil `(A, B)`: `A w = μ B w`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigenpair {
    pub value: f64,
    /// Normalized so that `wᵀ B w = 1`.
    pub vector: Vector,
}

/// `V + x xᵀ`.
pub fn rank_one_update(v: &SpdMatrix, x: &Vector) -> Result<SpdMatrix, LinalgError> {
    v.rank_one_update(x)
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm(m: &SymMatrix) -> f64 {
    SymmetricEigen::new(m.0.clone())
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `sup_{x≠0} xᵀAx / xᵀBx = λ_max(B^{-1/2} A B^{-1/2})`.
///
/// Reduces with the Cholesky factor `B = L Lᵀ` to `L⁻¹ A L⁻ᵀ`, which has the
/// same spectrum, and takes a full symmetric eigendecomposition.
pub fn gen_rayleigh_max(a: &SymMatrix, b: &SpdMatrix) -> Result<f64, LinalgError> {
    Ok(b.reduce(a)?.max_eigenvalue())
}

/// Same as [`gen_rayleigh_max`] but also returns the maximizing direction.
pub fn gen_rayleigh_top(a: &SymMatrix, b: &SpdMatrix) -> Result<GeneralizedEigenpair, LinalgError> {
    let reduced = b.reduce(a)?;
    let eig = SymmetricEigen::new(reduced.0);
    let (idx, value) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .expect("dim >= 1");
    let z: Vector = eig.eigenvectors.column(idx).into_owned();
    // w = L⁻ᵀ z
    let vector = b
        .chol
        .l_dirty()
        .tr_solve_lower_triangular(&z)
        .expect("Cholesky factor has a positive diagonal");
    Ok(GeneralizedEigenpair { value, vector })
}

/// `ln det M`.
pub fn log_det(m: &SpdMatrix) -> f64 {
    m.log_det()
}

/// Scale-relative default tolerance for [`loewner_dominates`].
pub fn default_loewner_tol(a: &SymMatrix, b: &SymMatrix) -> f64 {
    1e-10 * (1.0 + spectral_norm(a) + spectral_norm(b))
}

/// `A ⪰ B` up to `tol`: `λ_min(A − B) ≥ −tol`.
pub fn loewner_dominates(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool, LinalgError> {
    Ok(a.sub(b)?.min_eigenvalue() >= -tol)
}

/// `sqrt(xᵀ M⁻¹ x)` without forming `M⁻¹`.
pub fn mahalanobis_inv_norm(x: &Vector, m: &SpdMatrix) -> Result<f64, LinalgError> {
    m.inv_norm(x)
}

fn check_square(m: &DMatrix<f64>) -> Result<(), LinalgError> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(LinalgError::Empty);
    }
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(())
}

fn check_same_dim(expected: usize, got: usize) -> Result<(), LinalgError> {
    if expected == got {
        Ok(())
    } else {
        Err(LinalgError::DimensionMismatch { expected, got })
    }
}
