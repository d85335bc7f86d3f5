//! Construction and application of the four estimator matrices.
//!
//! All four are built from the *perturbed* array response matrix `H + ΔH`
//! (the only one available to the estimator) and later judged against the
//! true model. Systems of the form `(H'H'ᵗ + eps I)` are solved through a
//! symmetric positive-definite factorization rather than explicit inversion.

use nalgebra::{Cholesky, DVector};
use thiserror::Error;

use crate::matrix::Matrix;
use crate::model::{self, ModelError};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("rank constraint must satisfy 1 <= r < m, got r = {r}, m = {m}")]
    BadRank { r: usize, m: usize },
    #[error("ridge parameter must be positive, got {0}")]
    BadEta(f64),
    #[error("regularized normal system is numerically singular")]
    SolveFailure,
    #[error("dimension mismatch: estimator is {est_rows} x {est_cols}, input has length {input}")]
    DimensionMismatch {
        est_rows: usize,
        est_cols: usize,
        input: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which construction produced an estimator matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorKind {
    /// Full-rank Wiener filter `H'ᵗ (H'H'ᵗ + eps I)⁻¹`.
    Mmse,
    /// Wiener filter projected onto the leading-r right singular subspace.
    RMmse(usize),
    /// Truncated pseudoinverse over the leading r spectral channels.
    RSvd(usize),
    /// Ridge `(H'ᵗH' + eta I)⁻¹ H'ᵗ`.
    Ridge(f64),
}

/// An m×n estimator matrix tagged with its construction.
#[derive(Debug, Clone)]
pub struct EstimatorMatrix {
    pub kind: EstimatorKind,
    pub w: Matrix,
}

impl EstimatorMatrix {
    /// Applies the estimator to an observation, returning `w · y`.
    pub fn apply(&self, y: &[f64]) -> Result<Vec<f64>, EstimatorError> {
        if y.len() != self.w.ncols() {
            return Err(EstimatorError::DimensionMismatch {
                est_rows: self.w.nrows(),
                est_cols: self.w.ncols(),
                input: y.len(),
            });
        }
        let x = &self.w * DVector::from_column_slice(y);
        Ok(x.as_slice().to_vec())
    }
}

/// Wiener filter `w = H'ᵗ (H'H'ᵗ + eps I_n)⁻¹` built from the perturbed
/// matrix.
pub fn mmse(h_pert: &Matrix, epsilon: f64) -> Result<EstimatorMatrix, EstimatorError> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(EstimatorError::BadEta(epsilon));
    }
    let n = h_pert.nrows();
    let mut gram = h_pert * h_pert.transpose();
    for i in 0..n {
        gram[(i, i)] += epsilon;
    }
    let chol = Cholesky::new(gram).ok_or(EstimatorError::SolveFailure)?;
    // Solve (H'H'ᵗ + eps I) Z = H', then w = Zᵗ.
    let z = chol.solve(h_pert);
    Ok(EstimatorMatrix {
        kind: EstimatorKind::Mmse,
        w: z.transpose(),
    })
}

/// Reduced-rank Wiener filter: the spectral form `V Iₘʳ Σᵗ (ΣΣᵗ + eps I)⁻¹ Uᵗ`,
/// equal to `V_r V_rᵗ · mmse(H', eps)`.
pub fn r_mmse(h_pert: &Matrix, epsilon: f64, r: usize) -> Result<EstimatorMatrix, EstimatorError> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(EstimatorError::BadEta(epsilon));
    }
    let m = h_pert.ncols();
    if r == 0 || r >= m {
        return Err(EstimatorError::BadRank { r, m });
    }
    let svd = model::decompose(h_pert)?;
    let w = rank_limited_spectral(&svd, r, |s| s / (s * s + epsilon));
    debug_assert_rank(&w, r);
    Ok(EstimatorMatrix {
        kind: EstimatorKind::RMmse(r),
        w,
    })
}

/// Truncated SVD estimator `V Σ_r† Uᵗ`: reciprocal of the leading r
/// singular values, zeros elsewhere. Independent of the noise power.
pub fn r_svd(h_pert: &Matrix, r: usize) -> Result<EstimatorMatrix, EstimatorError> {
    let m = h_pert.ncols();
    if r == 0 || r >= m {
        return Err(EstimatorError::BadRank { r, m });
    }
    let svd = model::decompose(h_pert)?;
    let w = rank_limited_spectral(&svd, r, |s| 1.0 / s);
    debug_assert_rank(&w, r);
    Ok(EstimatorMatrix {
        kind: EstimatorKind::RSvd(r),
        w,
    })
}

/// Ridge estimator `w = (H'ᵗH' + eta I_m)⁻¹ H'ᵗ`.
pub fn ridge(h_pert: &Matrix, eta: f64) -> Result<EstimatorMatrix, EstimatorError> {
    if !eta.is_finite() || eta <= 0.0 {
        return Err(EstimatorError::BadEta(eta));
    }
    let m = h_pert.ncols();
    let mut gram = h_pert.transpose() * h_pert;
    for i in 0..m {
        gram[(i, i)] += eta;
    }
    let chol = Cholesky::new(gram).ok_or(EstimatorError::SolveFailure)?;
    let w = chol.solve(&h_pert.transpose());
    Ok(EstimatorMatrix {
        kind: EstimatorKind::Ridge(eta),
        w,
    })
}

/// `V · diag(f(sigma_1), .., f(sigma_r), 0, ..) · Uᵗ` as an m×n matrix.
fn rank_limited_spectral(svd: &model::SvdTriple, r: usize, f: impl Fn(f64) -> f64) -> Matrix {
    let n = svd.left.nrows();
    let m = svd.right.nrows();
    // V D with D the m×n diagonal of f over the leading r channels.
    let mut vd = Matrix::zeros(m, n);
    for (j, &s) in svd.singulars.iter().take(r).enumerate() {
        vd.set_column(j, &(svd.right.column(j) * f(s)));
    }
    vd * svd.left.transpose()
}

#[cfg(debug_assertions)]
fn debug_assert_rank(w: &Matrix, r: usize) {
    let svals = model::jacobi::singular_values(w).expect("rank check svd");
    let top = svals[0];
    for (idx, &s) in svals.iter().enumerate() {
        if idx >= r {
            debug_assert!(
                s <= 1e-10 * top,
                "rank-limited estimator has singular value {s} at index {idx}"
            );
        }
    }
}

#[cfg(not(debug_assertions))]
fn debug_assert_rank(_w: &Matrix, _r: usize) {}
