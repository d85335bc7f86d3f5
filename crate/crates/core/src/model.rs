//! Stochastic linear model `y = Hx + sqrt(eps) * n`, its SVD plumbing, SNR,
//! and the classification of a (model, perturbation) pair as an
//! ill-conditioned, high-SNR pair with separated leading spectrum.
//!
//! Conventions used throughout the crate:
//!
//! * `H` is n×m with n ≥ m and full column rank; its singular values are
//!   written `gamma_i`, those of the perturbed `H + ΔH` are `sigma_i`, both
//!   strictly decreasing.
//! * SVD factors are full: the left factor is n×n (thin factor completed to
//!   an orthonormal basis), the right factor is m×m.
//! * Singular vector signs are canonicalized so that each left vector's
//!   largest-magnitude entry is positive, with the paired right vector
//!   flipped in tandem. This makes the alignment matrices `K = UᵗM` and
//!   `L = NᵗV` deterministic without affecting any bound.

use nalgebra::DVector;
use thiserror::Error;

use crate::matrix::{self, Matrix};

pub(crate) mod jacobi;

/// Relative gap under which two singular values count as coincident.
pub const DISTINCTNESS_GAP: f64 = 1e-9;

/// Absolute floor under which the smallest singular value counts as zero.
pub const RANK_FLOOR: f64 = 1e-300;

/// Max-abs tolerance for orthonormality residuals of SVD factors.
pub const ORTHONORMALITY_TOL: f64 = 1e-12;

/// Relative slack for the trailing-spectrum noise comparison in
/// [`PerturbedPair::classify`]; the canonical construction puts the smallest
/// perturbed singular value exactly at the noise level.
pub const TRAILING_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("matrix must be n x m with n >= m, got {rows} x {cols}")]
    BadShape { rows: usize, cols: usize },
    #[error("noise power must be positive, got {0}")]
    BadNoisePower(f64),
    #[error("matrix entries must be finite")]
    NonFiniteEntry,
    #[error("singular values {0} and {1} are closer than the distinctness gap")]
    DegenerateSpectrum(usize, usize),
    #[error("matrix is rank deficient: smallest singular value {0:.3e}")]
    RankDeficient(f64),
    #[error("rank constraint must satisfy 1 <= r < m, got r = {r}, m = {m}")]
    BadRank { r: usize, m: usize },
    #[error("separation gap must satisfy kappa > 1, got {0}")]
    BadKappa(f64),
    #[error("perturbation must have the same shape as the base matrix")]
    ShapeMismatch,
    #[error("SVD did not converge")]
    SvdFailure,
}

/// The pair `(H, eps)` defining `y = Hx + sqrt(eps) * n` with white `x`, `n`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    h: Matrix,
    epsilon: f64,
}

impl LinearModel {
    /// Validates shape (n ≥ m), finiteness, full column rank, and `eps > 0`.
    pub fn new(h: Matrix, epsilon: f64) -> Result<Self, ModelError> {
        if h.nrows() < h.ncols() || h.ncols() == 0 {
            return Err(ModelError::BadShape {
                rows: h.nrows(),
                cols: h.ncols(),
            });
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteEntry);
        }
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(ModelError::BadNoisePower(epsilon));
        }
        let svals = jacobi::singular_values(&h).ok_or(ModelError::SvdFailure)?;
        let smallest = svals[svals.len() - 1];
        if smallest.is_nan() || smallest <= RANK_FLOOR {
            return Err(ModelError::RankDeficient(smallest));
        }
        Ok(Self { h, epsilon })
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Observation dimension n.
    pub fn n(&self) -> usize {
        self.h.nrows()
    }

    /// Signal dimension m.
    pub fn m(&self) -> usize {
        self.h.ncols()
    }
}

/// Signal-to-noise ratio `tr[HHᵗ] / (n eps)` of the model.
///
/// Depends only on the singular values of `H`, hence is invariant under
/// left/right orthogonal transformations.
pub fn snr(model: &LinearModel) -> f64 {
    let h = model.h();
    h.norm_squared() / (h.nrows() as f64 * model.epsilon())
}

/// Same SNR in decibels.
pub fn snr_db(model: &LinearModel) -> f64 {
    10.0 * snr(model).log10()
}

/// Full SVD `A = left · diag(singulars) · rightᵗ` with strictly decreasing
/// positive singular values and canonicalized signs.
#[derive(Debug, Clone)]
pub struct SvdTriple {
    /// n×n orthonormal left factor (thin factor completed to a full basis).
    pub left: Matrix,
    /// The m singular values, strictly decreasing, all positive.
    pub singulars: Vec<f64>,
    /// m×m orthonormal right factor.
    pub right: Matrix,
}

impl SvdTriple {
    /// Reassembles `left · diag(singulars) · rightᵗ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.left.nrows();
        let m = self.right.nrows();
        let mut scaled = Matrix::zeros(n, m);
        for (j, &s) in self.singulars.iter().enumerate() {
            scaled.set_column(j, &(self.left.column(j) * s));
        }
        scaled * self.right.transpose()
    }

    /// Largest singular value.
    pub fn spectral_norm(&self) -> f64 {
        self.singulars[0]
    }
}

/// Full SVD of an n×m matrix (n ≥ m, rank m) with distinct singular values.
///
/// The thin left factor is completed to an n×n orthonormal basis, singular
/// values are sorted strictly decreasing, and each singular vector pair is
/// sign-flipped so the left vector's largest-magnitude entry is positive
/// (complement columns are flipped by the same rule).
pub fn decompose(a: &Matrix) -> Result<SvdTriple, ModelError> {
    let (n, m) = (a.nrows(), a.ncols());
    if n < m || m == 0 {
        return Err(ModelError::BadShape { rows: n, cols: m });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(ModelError::NonFiniteEntry);
    }

    let svd = jacobi::thin_svd(a).ok_or(ModelError::SvdFailure)?;
    let mut u = svd.u;
    let singulars = svd.singulars;

    let smallest = singulars[m - 1];
    if smallest.is_nan() || smallest <= RANK_FLOOR {
        return Err(ModelError::RankDeficient(smallest));
    }
    let top = singulars[0];
    for i in 0..m - 1 {
        if (singulars[i] - singulars[i + 1]) / top < DISTINCTNESS_GAP {
            return Err(ModelError::DegenerateSpectrum(i, i + 1));
        }
    }

    let mut right = svd.v;
    for j in 0..m {
        if column_needs_flip(&u.column(j).clone_owned()) {
            u.set_column(j, &(-u.column(j)).clone_owned());
            right.set_column(j, &(-right.column(j)).clone_owned());
        }
    }

    let mut left = matrix::complete_orthonormal_basis(&u);
    for j in m..n {
        if column_needs_flip(&left.column(j).clone_owned()) {
            left.set_column(j, &(-left.column(j)).clone_owned());
        }
    }

    let triple = SvdTriple {
        left,
        singulars,
        right,
    };
    debug_assert!(matrix::orthonormality_residual(&triple.left) < ORTHONORMALITY_TOL);
    debug_assert!(matrix::orthonormality_residual(&triple.right) < ORTHONORMALITY_TOL);
    debug_assert!(matrix::rel_frobenius_error(a, &triple.reconstruct()) < 1e-10);
    Ok(triple)
}

fn column_needs_flip(col: &DVector<f64>) -> bool {
    let mut best = 0usize;
    for i in 1..col.len() {
        if col[i].abs() > col[best].abs() {
            best = i;
        }
    }
    col[best] < 0.0
}

/// A base model, a perturbation `ΔH`, a rank constraint, and the cached
/// SVDs and alignment matrices `K = UᵗM`, `L = NᵗV`.
#[derive(Debug, Clone)]
pub struct PerturbedPair {
    base: LinearModel,
    delta: Matrix,
    r: usize,
    kappa: f64,
    base_svd: SvdTriple,
    pert_svd: SvdTriple,
    k_align: Matrix,
    l_align: Matrix,
}

impl PerturbedPair {
    /// Assembles the pair, decomposing both `H` and `H + ΔH` and caching the
    /// alignment matrices. Fails if either matrix is rank deficient, has a
    /// degenerate spectrum, or if `r`/`kappa` are out of range.
    pub fn new(base: LinearModel, delta: Matrix, r: usize, kappa: f64) -> Result<Self, ModelError> {
        if delta.nrows() != base.n() || delta.ncols() != base.m() {
            return Err(ModelError::ShapeMismatch);
        }
        if delta.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteEntry);
        }
        let m = base.m();
        if r == 0 || r >= m {
            return Err(ModelError::BadRank { r, m });
        }
        if !kappa.is_finite() || kappa <= 1.0 {
            return Err(ModelError::BadKappa(kappa));
        }
        let base_svd = decompose(base.h())?;
        let pert_svd = decompose(&(base.h() + &delta))?;
        let k_align = pert_svd.left.transpose() * &base_svd.left;
        let l_align = base_svd.right.transpose() * &pert_svd.right;
        debug_assert!(matrix::orthonormality_residual(&k_align) < ORTHONORMALITY_TOL);
        debug_assert!(matrix::orthonormality_residual(&l_align) < ORTHONORMALITY_TOL);
        Ok(Self {
            base,
            delta,
            r,
            kappa,
            base_svd,
            pert_svd,
            k_align,
            l_align,
        })
    }

    pub fn base(&self) -> &LinearModel {
        &self.base
    }

    pub fn delta(&self) -> &Matrix {
        &self.delta
    }

    /// The perturbed array response matrix `H + ΔH`.
    pub fn h_perturbed(&self) -> Matrix {
        self.base.h() + &self.delta
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn epsilon(&self) -> f64 {
        self.base.epsilon()
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn m(&self) -> usize {
        self.base.m()
    }

    /// Singular values `gamma_i` of the base matrix.
    pub fn gammas(&self) -> &[f64] {
        &self.base_svd.singulars
    }

    /// Singular values `sigma_i` of the perturbed matrix.
    pub fn sigmas(&self) -> &[f64] {
        &self.pert_svd.singulars
    }

    pub fn base_svd(&self) -> &SvdTriple {
        &self.base_svd
    }

    pub fn pert_svd(&self) -> &SvdTriple {
        &self.pert_svd
    }

    /// Spectral norm of the perturbation.
    pub fn delta_norm(&self) -> f64 {
        crate::bounds::spectral_norm(&self.delta)
    }

    /// The cached alignment matrices `(K, L)`, both orthogonal.
    pub fn alignment_matrices(&self) -> (&Matrix, &Matrix) {
        (&self.k_align, &self.l_align)
    }

    /// Separation check for the leading `r` spectrum: `gamma_r > ||ΔH||₂`
    /// and the r perturbation intervals pairwise disjoint.
    pub fn check_pairwise_separated(&self) -> SeparationCheck {
        let d = self.delta_norm();
        let gammas = self.gammas();
        let r = self.r;
        let intervals: Vec<(f64, f64)> = gammas[..r]
            .iter()
            .map(|&g| (g - d, g + std::f64::consts::SQRT_2 * d))
            .collect();
        let mut separated = gammas[r - 1] > d;
        // Decreasing gammas: adjacent disjointness is the binding case.
        for i in 0..r.saturating_sub(1) {
            if intervals[i + 1].1 >= intervals[i].0 {
                separated = false;
            }
        }
        SeparationCheck {
            separated,
            intervals,
        }
    }

    /// Classifies the pair against the three ill-conditioned high-SNR
    /// conditions at gap `kappa`:
    ///
    /// 1. the leading r spectra are pairwise separated,
    /// 2. `gamma_i, sigma_i > kappa * sqrt(eps)` for i ≤ r,
    /// 3. `gamma_i, sigma_i ≤ sqrt(eps)` for i > r (inclusive up to a 1e-9
    ///    relative slack, since the canonical construction puts the smallest
    ///    perturbed singular value exactly at the noise level).
    pub fn classify(&self) -> Classification {
        let mut failed = Vec::new();
        let sqrt_eps = self.epsilon().sqrt();
        let r = self.r;

        if !self.check_pairwise_separated().separated {
            failed.push(Condition::PairwiseSeparation);
        }

        let gate = self.kappa * sqrt_eps;
        let leading_ok = self.gammas()[..r]
            .iter()
            .chain(self.sigmas()[..r].iter())
            .all(|&s| s > gate);
        if !leading_ok {
            failed.push(Condition::LeadingAboveGap);
        }

        let cap = sqrt_eps * (1.0 + TRAILING_SLACK);
        let trailing_ok = self.gammas()[r..]
            .iter()
            .chain(self.sigmas()[r..].iter())
            .all(|&s| s <= cap);
        if !trailing_ok {
            failed.push(Condition::TrailingBelowNoise);
        }

        if failed.is_empty() {
            Classification::Satisfied
        } else {
            Classification::Violated(failed)
        }
    }
}

/// Result of [`PerturbedPair::check_pairwise_separated`].
#[derive(Debug, Clone)]
pub struct SeparationCheck {
    pub separated: bool,
    /// Per-index intervals `[gamma_i - ||ΔH||₂, gamma_i + sqrt(2) ||ΔH||₂]`.
    pub intervals: Vec<(f64, f64)>,
}

/// One of the three classification conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// Condition 1: leading spectra pairwise separated.
    PairwiseSeparation,
    /// Condition 2: leading singular values exceed `kappa * sqrt(eps)`.
    LeadingAboveGap,
    /// Condition 3: trailing singular values at most `sqrt(eps)`.
    TrailingBelowNoise,
}

/// Verdict of [`PerturbedPair::classify`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Classification {
    Satisfied,
    Violated(Vec<Condition>),
}

impl Classification {
    pub fn is_satisfied(&self) -> bool {
        matches!(self, Classification::Satisfied)
    }
}
