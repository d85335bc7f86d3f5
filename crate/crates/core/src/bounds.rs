//! Singular value/vector perturbation machinery: deviation intervals,
//! projection envelopes, rotation-angle bounds, the per-index separation
//! measures `delta_i` / `rho_i`, diagonal-dominance inequalities for the
//! alignment matrices, and the robustness certificates that decide when the
//! full Wiener filter is provably worse than its rank-reduced counterpart.

use thiserror::Error;

use crate::matrix::Matrix;
use crate::model::{self, ModelError, PerturbedPair};
use crate::mse::x_weight;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("index {0} out of range for spectrum of length {1}")]
    BadIndex(usize, usize),
    #[error("zero spectral gap: rotation bound undefined")]
    ZeroGap,
    #[error("pair does not satisfy the separated ill-conditioned classification")]
    DefinitionViolated,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Largest singular value of a matrix (its spectral norm).
pub fn spectral_norm(e: &Matrix) -> f64 {
    if e.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    model::jacobi::singular_values(e).expect("spectral norm iteration")[0]
}

/// Deviation interval for a singular value under a perturbation of spectral
/// norm `delta_norm`: if `gamma > delta_norm` the perturbed value lies in
/// `[gamma - delta_norm, gamma + sqrt(2) delta_norm]`; otherwise the
/// hypothesis fails and no interval is produced.
pub fn sv_interval(gamma: f64, delta_norm: f64) -> Option<(f64, f64)> {
    if gamma > delta_norm {
        Some((
            gamma - delta_norm,
            gamma + std::f64::consts::SQRT_2 * delta_norm,
        ))
    } else {
        None
    }
}

/// Squared-singular-value envelope implied by the projection decomposition
/// of a perturbation: for each index, `lo <= sigma_tilde_i^2 <= hi` with
///
/// ```text
/// hi = (gamma_i + ||P E||_2)^2 + ||P_perp E||_2^2
/// lo = max(gamma_i - ||P E||_2, 0)^2 + min_sv(P_perp E)^2
/// ```
///
/// where `P` projects onto the range of `a` and `P_perp` onto its
/// complement (zero when `a` is square).
#[derive(Debug, Clone)]
pub struct EnvelopeEntry {
    pub lo: f64,
    pub hi: f64,
    pub holds: bool,
}

pub fn stewart_envelope(a: &Matrix, e: &Matrix) -> Result<Vec<EnvelopeEntry>, BoundsError> {
    let (n, m) = (a.nrows(), a.ncols());
    if e.nrows() != n || e.ncols() != m {
        return Err(BoundsError::Model(ModelError::ShapeMismatch));
    }
    let gammas = model::jacobi::singular_values(a).ok_or(ModelError::SvdFailure)?;
    if gammas[m - 1].is_nan() || gammas[m - 1] <= model::RANK_FLOOR {
        return Err(BoundsError::Model(ModelError::RankDeficient(gammas[m - 1])));
    }

    let (norm_pe, norm_perp, min_perp) = if n == m {
        // Square case: the range of a full-rank square matrix is everything.
        (spectral_norm(e), 0.0, 0.0)
    } else {
        let svd = model::jacobi::thin_svd(a).ok_or(ModelError::SvdFailure)?;
        let q = svd.u; // n x m thin factor spanning the range of a
        let pe = &q * (q.transpose() * e);
        let perp = e - &pe;
        let perp_svals = model::jacobi::singular_values(&perp).ok_or(ModelError::SvdFailure)?;
        (
            spectral_norm(&pe),
            perp_svals[0],
            perp_svals[perp_svals.len() - 1],
        )
    };

    let pert_svals = model::jacobi::singular_values(&(a + e)).ok_or(ModelError::SvdFailure)?;
    let entries = (0..m)
        .map(|i| {
            let g = gammas[i];
            let hi = (g + norm_pe) * (g + norm_pe) + norm_perp * norm_perp;
            let lo_base = (g - norm_pe).max(0.0);
            let lo = lo_base * lo_base + min_perp * min_perp;
            let s2 = pert_svals[i] * pert_svals[i];
            let tol = 1e-12 * hi.max(1.0);
            EnvelopeEntry {
                lo,
                hi,
                holds: s2 >= lo - tol && s2 <= hi + tol,
            }
        })
        .collect();
    Ok(entries)
}

/// Both sides of the classical rotation bounds for one singular-vector pair
/// `(i of the base matrix, j of the perturbed one)`, zero-based.
#[derive(Debug, Clone)]
pub struct AngleBounds {
    /// `sin^2(m_i, u_j) + sin^2(n_i, v_j)`.
    pub wedin_lhs: f64,
    /// `(||E v_j||^2 + ||E^t u_j||^2) / delta_ij^2`.
    pub wedin_rhs: f64,
    /// `min_x ||x m_i - u_j||^2 + ||x n_i - v_j||^2` and its bound
    /// `2 (||E v_j||^2 + ||E^t u_j||^2) / zeta_ij^2`; absent if the combined
    /// gap `zeta_ij` vanishes.
    pub dopico: Option<(f64, f64)>,
    /// `zeta_ij = min(delta_ij, gamma_i + sigma_tilde_j)`.
    pub zeta: f64,
}

/// Squared sine of the angle between unit vectors, computed as the squared
/// norm of the projection residual (stable for nearly aligned vectors).
fn sin_sq(a: &nalgebra::DVectorView<f64>, b: &nalgebra::DVectorView<f64>) -> f64 {
    let c = a.dot(b);
    let mut resid = 0.0;
    for k in 0..a.len() {
        let d = a[k] - c * b[k];
        resid += d * d;
    }
    resid
}

pub fn angle_bounds(
    a: &Matrix,
    e: &Matrix,
    i: usize,
    j: usize,
) -> Result<AngleBounds, BoundsError> {
    let (n, m) = (a.nrows(), a.ncols());
    if e.nrows() != n || e.ncols() != m {
        return Err(BoundsError::Model(ModelError::ShapeMismatch));
    }
    if i >= m || j >= m {
        return Err(BoundsError::BadIndex(i.max(j), m));
    }
    let base = model::decompose(a)?;
    let pert = model::decompose(&(a + e))?;

    // Candidate set: every base singular value except the i-th, augmented
    // with 0 for strictly tall matrices.
    let mut delta = f64::INFINITY;
    for (idx, &g) in base.singulars.iter().enumerate() {
        if idx != i {
            delta = delta.min((pert.singulars[j] - g).abs());
        }
    }
    if n > m {
        delta = delta.min(pert.singulars[j]);
    }
    if delta == 0.0 {
        return Err(BoundsError::ZeroGap);
    }

    let m_i = base.left.column(i);
    let n_i = base.right.column(i);
    let u_j = pert.left.column(j);
    let v_j = pert.right.column(j);

    let r_j = -(e * v_j);
    let s_j = -(e.transpose() * u_j);
    let residual = r_j.norm_squared() + s_j.norm_squared();

    let wedin_lhs = sin_sq(&m_i, &u_j) + sin_sq(&n_i, &v_j);
    let wedin_rhs = residual / (delta * delta);

    let zeta = delta.min(base.singulars[i] + pert.singulars[j]);
    let dopico = if zeta > 0.0 {
        let plus = (m_i - u_j).norm_squared() + (n_i - v_j).norm_squared();
        let minus = (-m_i - u_j).norm_squared() + (-n_i - v_j).norm_squared();
        Some((plus.min(minus), 2.0 * residual / (zeta * zeta)))
    } else {
        None
    };

    Ok(AngleBounds {
        wedin_lhs,
        wedin_rhs,
        dopico,
        zeta,
    })
}

/// Per-index separation of the perturbed leading spectrum from the
/// neighboring base singular values, and the induced alignment measure
/// `rho_i = 1 - ||ΔH||_2^2 / delta_i^2` (`rho_i = 1` iff the perturbation
/// vanishes; `rho_i > 1/2` gates the sign and dominance results).
#[derive(Debug, Clone)]
pub struct SeparationData {
    pub deltas: Vec<f64>,
    pub rhos: Vec<f64>,
    pub delta_h_norm: f64,
}

impl SeparationData {
    pub fn rho_gate(&self) -> bool {
        self.rhos.iter().all(|&rho| rho > 0.5)
    }

    pub fn min_rho(&self) -> f64 {
        self.rhos.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Spectra-level computation of the separation data; `gammas` and `sigmas`
/// must be strictly decreasing with `r < len`.
pub fn separation_from_spectra(
    gammas: &[f64],
    sigmas: &[f64],
    r: usize,
    delta_norm: f64,
) -> SeparationData {
    assert!(r >= 1 && r < gammas.len() && gammas.len() == sigmas.len());
    let mut deltas = Vec::with_capacity(r);
    let mut rhos = Vec::with_capacity(r);
    for i in 0..r {
        // Neighbors: the next base value, and the previous one when i > 0.
        let mut d = (sigmas[i] - gammas[i + 1]).abs();
        if i > 0 {
            d = d.min((sigmas[i] - gammas[i - 1]).abs());
        }
        deltas.push(d);
        rhos.push(if d > 0.0 {
            1.0 - (delta_norm * delta_norm) / (d * d)
        } else {
            f64::NEG_INFINITY
        });
    }
    SeparationData {
        deltas,
        rhos,
        delta_h_norm: delta_norm,
    }
}

/// Separation data of a classified pair; errors if the pair does not
/// satisfy the separated ill-conditioned classification the measure
/// presumes.
pub fn separation_data(pair: &PerturbedPair) -> Result<SeparationData, BoundsError> {
    if !pair.classify().is_satisfied() {
        return Err(BoundsError::DefinitionViolated);
    }
    Ok(separation_from_spectra(
        pair.gammas(),
        pair.sigmas(),
        pair.r(),
        pair.delta_norm(),
    ))
}

/// Inequality slacks (LHS-favoring, i.e. nonnegative when the inequality
/// holds) for the diagonal-dominance structure of the alignment matrices at
/// one leading index.
#[derive(Debug, Clone)]
pub struct DominanceEntry {
    pub rho: f64,
    /// `k_ii^2 + l_ii^2 - 2 rho_i` (holds unconditionally).
    pub slack_diag_sum: f64,
    /// Remaining slacks, present only when `rho_i > 1/2`.
    pub gated: Option<GatedSlacks>,
}

/// Slacks of the inequalities that require `rho_i > 1/2`.
#[derive(Debug, Clone)]
pub struct GatedSlacks {
    /// `k_ii l_ii` itself (sign match: must be positive).
    pub diag_product: f64,
    /// `k_ii^2 - (2 rho_i - 1)`.
    pub k_diag: f64,
    /// `l_ii^2 - (2 rho_i - 1)`.
    pub l_diag: f64,
    /// `k_ii l_ii - (2 rho_i - 1)`.
    pub product: f64,
    /// `2(1 - rho_i) - Σ_{j≠i} k_ij^2` (row tail).
    pub k_row_tail: f64,
    /// `2(1 - rho_i) - Σ_{j≠i} k_ji^2` (column tail).
    pub k_col_tail: f64,
    pub l_row_tail: f64,
    pub l_col_tail: f64,
    /// `2(1 - rho_i) - |Σ_{j≠i, j≤m} k_ij l_ji|` (cross sum).
    pub cross_sum: f64,
}

impl GatedSlacks {
    pub fn min_slack(&self) -> f64 {
        self.diag_product
            .min(self.k_diag)
            .min(self.l_diag)
            .min(self.product)
            .min(self.k_row_tail)
            .min(self.k_col_tail)
            .min(self.l_row_tail)
            .min(self.l_col_tail)
            .min(self.cross_sum)
    }
}

/// Evaluates every dominance inequality for the leading indices of a
/// classified pair.
pub fn diagonal_dominance_report(pair: &PerturbedPair) -> Result<Vec<DominanceEntry>, BoundsError> {
    let sep = separation_data(pair)?;
    let (k, l) = pair.alignment_matrices();
    let (n, m) = (pair.n(), pair.m());
    let mut entries = Vec::with_capacity(pair.r());
    for (i, &rho) in sep.rhos.iter().enumerate() {
        let kii = k[(i, i)];
        let lii = l[(i, i)];
        let slack_diag_sum = kii * kii + lii * lii - 2.0 * rho;
        let gated = if rho > 0.5 {
            let tail_budget = 2.0 * (1.0 - rho);
            let k_row: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| k[(i, j)] * k[(i, j)])
                .sum();
            let k_col: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| k[(j, i)] * k[(j, i)])
                .sum();
            let l_row: f64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| l[(i, j)] * l[(i, j)])
                .sum();
            let l_col: f64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| l[(j, i)] * l[(j, i)])
                .sum();
            let cross: f64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| k[(i, j)] * l[(j, i)])
                .sum();
            Some(GatedSlacks {
                diag_product: kii * lii,
                k_diag: kii * kii - (2.0 * rho - 1.0),
                l_diag: lii * lii - (2.0 * rho - 1.0),
                product: kii * lii - (2.0 * rho - 1.0),
                k_row_tail: tail_budget - k_row,
                k_col_tail: tail_budget - k_col,
                l_row_tail: tail_budget - l_row,
                l_col_tail: tail_budget - l_col,
                cross_sum: tail_budget - cross.abs(),
            })
        } else {
            None
        };
        entries.push(DominanceEntry {
            rho,
            slack_diag_sum,
            gated,
        });
    }
    Ok(entries)
}

/// Max-abs residuals of the near-block-diagonal structure of the alignment
/// matrices: off-diagonal coupling blocks and deviation of the leading
/// diagonal magnitudes from one.
#[derive(Debug, Clone)]
pub struct BlockResidual {
    pub k_offdiag: f64,
    pub l_offdiag: f64,
    pub k_diag_dev: f64,
    pub l_diag_dev: f64,
}

pub fn block_structure_residual(pair: &PerturbedPair) -> BlockResidual {
    let (k, l) = pair.alignment_matrices();
    let (n, m, r) = (pair.n(), pair.m(), pair.r());

    let mut k_offdiag = 0.0f64;
    for i in 0..r {
        for j in r..n {
            k_offdiag = k_offdiag.max(k[(i, j)].abs()).max(k[(j, i)].abs());
        }
    }
    let mut l_offdiag = 0.0f64;
    for i in 0..r {
        for j in r..m {
            l_offdiag = l_offdiag.max(l[(i, j)].abs()).max(l[(j, i)].abs());
        }
    }
    let mut k_diag_dev = 0.0f64;
    let mut l_diag_dev = 0.0f64;
    for i in 0..r {
        k_diag_dev = k_diag_dev.max((k[(i, i)].abs() - 1.0).abs());
        l_diag_dev = l_diag_dev.max((l[(i, i)].abs() - 1.0).abs());
    }
    BlockResidual {
        k_offdiag,
        l_offdiag,
        k_diag_dev,
        l_diag_dev,
    }
}

/// Gap bounds split by the column range of the second summation index
/// (leading `j ≤ r` versus trailing `j > r`).
#[derive(Debug, Clone)]
pub struct ElTerSplit {
    pub el_leading: f64,
    pub el_trailing: f64,
    pub ter_leading: f64,
    pub ter_trailing: f64,
}

impl ElTerSplit {
    pub fn rhs_el(&self) -> f64 {
        self.el_leading + self.el_trailing
    }

    pub fn rhs_ter(&self) -> f64 {
        self.ter_leading + self.ter_trailing
    }
}

/// `2 Σ_{i≤r} Σ_j (1 - rho_i)(w_i gamma_j + 1)^2` with `w_i` the Wiener
/// weight for the reduced-rank gap and `1/sigma_i` for the truncated-SVD
/// gap; computable from spectra and separation data alone.
pub fn bound_el_ter_split(
    gammas: &[f64],
    sigmas: &[f64],
    epsilon: f64,
    sep: &SeparationData,
    r: usize,
) -> ElTerSplit {
    let mut split = ElTerSplit {
        el_leading: 0.0,
        el_trailing: 0.0,
        ter_leading: 0.0,
        ter_trailing: 0.0,
    };
    for (&sigma, &rho) in sigmas.iter().zip(&sep.rhos).take(r) {
        let one_minus_rho = 1.0 - rho;
        let x = x_weight(sigma, epsilon);
        let inv_s = 1.0 / sigma;
        for (j, &g) in gammas.iter().enumerate() {
            let el = 2.0 * one_minus_rho * (x * g + 1.0) * (x * g + 1.0);
            let ter = 2.0 * one_minus_rho * (inv_s * g + 1.0) * (inv_s * g + 1.0);
            if j < r {
                split.el_leading += el;
                split.ter_leading += ter;
            } else {
                split.el_trailing += el;
                split.ter_trailing += ter;
            }
        }
    }
    split
}

/// The trailing-channel sum deciding whether the full Wiener filter loses,
/// split into its cross block (`j ≤ r`), tail block (`j > r`), and noise
/// term.
#[derive(Debug, Clone)]
pub struct AlSplit {
    pub cross_block: f64,
    pub tail_block: f64,
    pub eps_term: f64,
}

impl AlSplit {
    pub fn lhs(&self) -> f64 {
        self.cross_block + self.tail_block + self.eps_term
    }
}

pub fn lhs_al_split(pair: &PerturbedPair) -> AlSplit {
    let (k, l) = pair.alignment_matrices();
    let gammas = pair.gammas();
    let sigmas = pair.sigmas();
    let epsilon = pair.epsilon();
    let (m, r) = (pair.m(), pair.r());

    let mut cross_block = 0.0;
    let mut tail_block = 0.0;
    let mut eps_term = 0.0;
    for i in r..m {
        let x = x_weight(sigmas[i], epsilon);
        eps_term += epsilon * x * x;
        for (j, &g) in gammas.iter().enumerate() {
            let term = x * g * k[(i, j)] - l[(j, i)];
            if j < r {
                cross_block += term * term;
            } else {
                tail_block += term * term;
            }
        }
    }
    AlSplit {
        cross_block,
        tail_block,
        eps_term,
    }
}

/// Verdict on whether the full Wiener filter is certified to lose to the
/// reduced-rank one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictAl {
    MmseWorse,
    Inconclusive,
    RhoGateFailed,
}

/// Validity of the shared-vs-generic gap bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictElTer {
    BoundsValid,
    RhoGateFailed,
}

/// The computed certificate triple and verdicts for a pair.
///
/// The gap bounds are only theorems under the `rho_i > 1/2` gate; they are
/// still computed and reported when the gate fails, but flagged. The
/// losing-Wiener comparison `lhs_al >= m - r` is an exact identity for the
/// closed-form MSE difference, so its verdict needs no gate; it is still
/// marked gate-failed for reporting discipline when any `rho_i <= 1/2`.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub rhs_el: f64,
    pub rhs_ter: f64,
    pub lhs_al: f64,
    pub threshold_al: f64,
    pub separation: SeparationData,
    pub rho_gate: bool,
    pub verdict_el_ter: VerdictElTer,
    pub verdict_al: VerdictAl,
}

/// Evaluates the robustness certificates of a pair.
pub fn robustness_certificates(pair: &PerturbedPair) -> CertificateReport {
    let sep = separation_from_spectra(pair.gammas(), pair.sigmas(), pair.r(), pair.delta_norm());
    let split = bound_el_ter_split(pair.gammas(), pair.sigmas(), pair.epsilon(), &sep, pair.r());
    let al = lhs_al_split(pair);
    let threshold_al = (pair.m() - pair.r()) as f64;
    let rho_gate = sep.rho_gate();

    let verdict_el_ter = if rho_gate {
        VerdictElTer::BoundsValid
    } else {
        VerdictElTer::RhoGateFailed
    };
    let verdict_al = if !rho_gate {
        VerdictAl::RhoGateFailed
    } else if al.lhs() >= threshold_al {
        VerdictAl::MmseWorse
    } else {
        VerdictAl::Inconclusive
    };

    CertificateReport {
        rhs_el: split.rhs_el(),
        rhs_ter: split.rhs_ter(),
        lhs_al: al.lhs(),
        threshold_al,
        separation: sep,
        rho_gate,
        verdict_el_ter,
        verdict_al,
    }
}
