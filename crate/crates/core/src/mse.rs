//! Exact MSE functional, closed-form MSE expressions for the three
//! spectral estimators, the per-index gain/loss landscape, and the
//! shared-vs-generic gap quantities.
//!
//! Notation: `gamma_i` are the singular values of the true matrix `H`,
//! `sigma_i` those of the perturbed `H + ΔH`, `eps` the noise power, and
//! `x_i = sigma_i / (sigma_i² + eps)` the Wiener weight of channel `i`.
//! The per-index terms
//!
//! ```text
//! B_i = x_i²(gamma_i² + eps) - 2 x_i gamma_i
//! A_i = B_i - [eps/sigma_i² + (gamma_i/sigma_i - 1)²] + 1
//! ```
//!
//! decompose every MSE difference among the full-rank Wiener, reduced-rank
//! Wiener, and truncated-SVD estimators; their signs decide which estimator
//! wins on each spectral channel.

use thiserror::Error;

use crate::estimators::EstimatorMatrix;
use crate::model::{LinearModel, PerturbedPair};

#[derive(Debug, Error)]
pub enum MseError {
    #[error("rank constraint must satisfy 1 <= r < m, got r = {r}, m = {m}")]
    BadRank { r: usize, m: usize },
    #[error("estimator is {est_rows} x {est_cols}, model is {n} x {m}")]
    DimensionMismatch {
        est_rows: usize,
        est_cols: usize,
        n: usize,
        m: usize,
    },
    #[error("spectra must be strictly decreasing positive vectors of equal length")]
    BadSpectrum,
    #[error("landscape maximizer did not reach gradient tolerance {0:.1e}")]
    OptimizerFailure(f64),
}

/// Which closed-form family to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorFamily {
    Mmse,
    RMmse,
    RSvd,
}

/// A closed-form MSE value together with its per-index ingredients.
///
/// `per_index_a` / `per_index_b` always hold the paired-spectra terms
/// `A_i` (for i ≤ r) and `B_i` (all i); `phi` and `psi` are the rotated
/// spectra induced by the alignment matrices (equal to `gamma` when the
/// two SVDs share singular vectors).
#[derive(Debug, Clone)]
pub struct MseBreakdown {
    pub total: f64,
    pub per_index_a: Vec<f64>,
    pub per_index_b: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub x_weights: Vec<f64>,
}

/// Wiener weight `x = sigma / (sigma² + eps)`.
pub fn x_weight(sigma: f64, epsilon: f64) -> f64 {
    sigma / (sigma * sigma + epsilon)
}

/// Exact MSE `tr[W (HHᵗ + eps I) Wᵗ] - 2 tr[W H] + m` of estimator `W`
/// against the true model, evaluated as
/// `||WH||_F² + eps ||W||_F² - 2 tr[WH] + m`.
pub fn mse_exact(est: &EstimatorMatrix, truth: &LinearModel) -> Result<f64, MseError> {
    let w = &est.w;
    if w.ncols() != truth.n() || w.nrows() != truth.m() {
        return Err(MseError::DimensionMismatch {
            est_rows: w.nrows(),
            est_cols: w.ncols(),
            n: truth.n(),
            m: truth.m(),
        });
    }
    let wh = w * truth.h();
    let trace_wh: f64 = (0..wh.nrows()).map(|i| wh[(i, i)]).sum();
    Ok(wh.norm_squared() + truth.epsilon() * w.norm_squared() - 2.0 * trace_wh + truth.m() as f64)
}

/// Per-index Wiener-channel excess `B_i(gamma, sigma, eps)`.
pub fn term_b(gamma: f64, sigma: f64, epsilon: f64) -> f64 {
    let x = x_weight(sigma, epsilon);
    x * x * (gamma * gamma + epsilon) - 2.0 * x * gamma
}

/// Per-index Wiener-vs-truncation difference `A_i(gamma, sigma, eps)`.
pub fn term_a(gamma: f64, sigma: f64, epsilon: f64) -> f64 {
    let ratio = gamma / sigma - 1.0;
    term_b(gamma, sigma, epsilon) - (epsilon / (sigma * sigma) + ratio * ratio) + 1.0
}

fn validate_spectra(gammas: &[f64], sigmas: &[f64]) -> Result<(), MseError> {
    let m = gammas.len();
    if m == 0 || sigmas.len() != m {
        return Err(MseError::BadSpectrum);
    }
    let decreasing_positive = |v: &[f64]| {
        v.iter().all(|&x| x > 0.0 && x.is_finite()) && v.windows(2).all(|w| w[0] > w[1])
    };
    if !decreasing_positive(gammas) || !decreasing_positive(sigmas) {
        return Err(MseError::BadSpectrum);
    }
    Ok(())
}

fn validate_rank(r: usize, m: usize) -> Result<(), MseError> {
    if r == 0 || r >= m {
        return Err(MseError::BadRank { r, m });
    }
    Ok(())
}

/// Closed-form MSE when the base and perturbed matrices share singular
/// vectors (only the singular values are perturbed).
pub fn closed_form_shared(
    family: EstimatorFamily,
    gammas: &[f64],
    sigmas: &[f64],
    epsilon: f64,
    r: usize,
) -> Result<MseBreakdown, MseError> {
    validate_spectra(gammas, sigmas)?;
    let m = gammas.len();
    validate_rank(r, m)?;

    let x_weights: Vec<f64> = sigmas.iter().map(|&s| x_weight(s, epsilon)).collect();
    let per_index_b: Vec<f64> = (0..m)
        .map(|i| term_b(gammas[i], sigmas[i], epsilon))
        .collect();
    let per_index_a: Vec<f64> = (0..r)
        .map(|i| term_a(gammas[i], sigmas[i], epsilon))
        .collect();

    let total = match family {
        EstimatorFamily::Mmse => per_index_b.iter().sum::<f64>() + m as f64,
        EstimatorFamily::RMmse => per_index_b[..r].iter().sum::<f64>() + m as f64,
        EstimatorFamily::RSvd => {
            let noise: f64 = sigmas[..r].iter().map(|&s| 1.0 / (s * s)).sum();
            let bias: f64 = (0..r)
                .map(|i| {
                    let d = gammas[i] / sigmas[i] - 1.0;
                    d * d
                })
                .sum();
            (m - r) as f64 + epsilon * noise + bias
        }
    };

    Ok(MseBreakdown {
        total,
        per_index_a,
        per_index_b,
        phi: gammas.to_vec(),
        psi: gammas.to_vec(),
        x_weights,
    })
}

/// Rotated spectra `phi_i = sqrt(Σ_j k_ij² gamma_j²)` and
/// `psi_i = Σ_j gamma_j k_ij l_ji` induced by the alignment matrices.
pub fn rotated_spectra(pair: &PerturbedPair) -> (Vec<f64>, Vec<f64>) {
    let (k, l) = pair.alignment_matrices();
    let gammas = pair.gammas();
    let m = pair.m();
    let mut phi = Vec::with_capacity(m);
    let mut psi = Vec::with_capacity(m);
    for i in 0..m {
        let mut phi_sq = 0.0;
        let mut psi_i = 0.0;
        for (j, &g) in gammas.iter().enumerate() {
            let kij = k[(i, j)];
            phi_sq += kij * kij * g * g;
            psi_i += g * kij * l[(j, i)];
        }
        phi.push(phi_sq.sqrt());
        psi.push(psi_i);
    }
    (phi, psi)
}

/// Closed-form MSE for an arbitrary perturbation, expressed through the
/// rotated spectra. Equals [`mse_exact`] of the corresponding constructed
/// estimator against the base model.
pub fn closed_form_generic(
    pair: &PerturbedPair,
    family: EstimatorFamily,
    r: usize,
) -> Result<MseBreakdown, MseError> {
    let m = pair.m();
    validate_rank(r, m)?;
    let epsilon = pair.epsilon();
    let gammas = pair.gammas();
    let sigmas = pair.sigmas();
    let (phi, psi) = rotated_spectra(pair);
    let x_weights: Vec<f64> = sigmas.iter().map(|&s| x_weight(s, epsilon)).collect();

    let channel_sum = |count: usize, weight: &dyn Fn(usize) -> f64| -> f64 {
        (0..count)
            .map(|i| {
                let wi = weight(i);
                wi * wi * (phi[i] * phi[i] + epsilon) - 2.0 * wi * psi[i]
            })
            .sum()
    };

    let total = match family {
        EstimatorFamily::Mmse => channel_sum(m, &|i| x_weights[i]) + m as f64,
        EstimatorFamily::RMmse => channel_sum(r, &|i| x_weights[i]) + m as f64,
        EstimatorFamily::RSvd => channel_sum(r, &|i| 1.0 / sigmas[i]) + m as f64,
    };

    let per_index_b: Vec<f64> = (0..m)
        .map(|i| term_b(gammas[i], sigmas[i], epsilon))
        .collect();
    let per_index_a: Vec<f64> = (0..r)
        .map(|i| term_a(gammas[i], sigmas[i], epsilon))
        .collect();

    Ok(MseBreakdown {
        total,
        per_index_a,
        per_index_b,
        phi,
        psi,
        x_weights,
    })
}

/// Residuals of the five algebraic decomposition identities tying the three
/// closed forms to the A/B terms.
#[derive(Debug, Clone)]
pub struct IdentityReport {
    /// Signed residuals, in order:
    /// `J(MMSE) - (ΣB + m)`,
    /// `J(r-MMSE) - (Σ_{i≤r} B + m)`,
    /// `[J(r-MMSE) - J(r-SVD)] - Σ_{i≤r} A`,
    /// `[J(MMSE) - J(r-MMSE)] - Σ_{i>r} B`,
    /// `[J(MMSE) - J(r-SVD)] - (Σ_{i≤r} A + Σ_{i>r} B)`.
    pub residuals: [f64; 5],
    pub max_residual: f64,
}

/// Evaluates both sides of the five decomposition identities and returns
/// the residual report.
pub fn decomposition_identities(
    gammas: &[f64],
    sigmas: &[f64],
    epsilon: f64,
    r: usize,
) -> Result<IdentityReport, MseError> {
    validate_spectra(gammas, sigmas)?;
    let m = gammas.len();
    validate_rank(r, m)?;

    let j_mmse = closed_form_shared(EstimatorFamily::Mmse, gammas, sigmas, epsilon, r)?.total;
    let j_rmmse = closed_form_shared(EstimatorFamily::RMmse, gammas, sigmas, epsilon, r)?.total;
    let j_rsvd = closed_form_shared(EstimatorFamily::RSvd, gammas, sigmas, epsilon, r)?.total;

    let b: Vec<f64> = (0..m)
        .map(|i| term_b(gammas[i], sigmas[i], epsilon))
        .collect();
    let a: Vec<f64> = (0..m)
        .map(|i| term_a(gammas[i], sigmas[i], epsilon))
        .collect();
    let sum_b: f64 = b.iter().sum();
    let sum_b_leading: f64 = b[..r].iter().sum();
    let sum_b_trailing: f64 = b[r..].iter().sum();
    let sum_a_leading: f64 = a[..r].iter().sum();

    let residuals = [
        j_mmse - (sum_b + m as f64),
        j_rmmse - (sum_b_leading + m as f64),
        (j_rmmse - j_rsvd) - sum_a_leading,
        (j_mmse - j_rmmse) - sum_b_trailing,
        (j_mmse - j_rsvd) - (sum_a_leading + sum_b_trailing),
    ];
    let max_residual = residuals.iter().fold(0.0f64, |acc, &x| acc.max(x.abs()));
    Ok(IdentityReport {
        residuals,
        max_residual,
    })
}

/// Stationary points of the per-index terms as functions of `gamma` for
/// fixed `(sigma, eps)`: the maximizer of `A` and the minimizer of `B`.
pub fn critical_points(sigma: f64, epsilon: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    let gamma_a_max = sigma * (s2 + epsilon) / (2.0 * s2 + epsilon);
    let gamma_b_min = sigma + epsilon / sigma;
    (gamma_a_max, gamma_b_min)
}

/// Positivity regions of the per-index terms as functions of `gamma` for
/// fixed `(sigma, eps)`.
///
/// `A > 0` exactly on `a_interval` (present iff the noise power is below
/// the algebraic threshold, roughly `eps < 0.325 sigma²`); `B > 0` exactly
/// on `(0, b_lower_hi) ∪ (b_upper_lo, ∞)`.
#[derive(Debug, Clone)]
pub struct PositivityRegions {
    pub a_interval: Option<(f64, f64)>,
    /// `(0, hi)`: the noise-dominated branch of the `B > 0` region.
    pub b_lower_interval: (f64, f64),
    /// Lower endpoint of the unbounded `B > 0` branch `(lo, ∞)`.
    pub b_upper_lo: f64,
    pub beta_a: Option<f64>,
    pub beta_b: f64,
}

/// Exact threshold on `eps / sigma²` below which the `A > 0` interval
/// exists: the positive root of `t³ + 3t² + 2t - 1 = 0` (≈ 0.3247,
/// commonly quoted rounded to 0.325).
pub fn a_region_threshold() -> f64 {
    // Newton from 0.3; converges to full precision in a handful of steps.
    let mut t = 0.3f64;
    for _ in 0..64 {
        let f = t * t * t + 3.0 * t * t + 2.0 * t - 1.0;
        let df = 3.0 * t * t + 6.0 * t + 2.0;
        let next = t - f / df;
        if (next - t).abs() <= 1e-15 * t.abs() {
            return next;
        }
        t = next;
    }
    t
}

/// Computes the positivity regions at fixed `(sigma, eps)`.
pub fn positivity_regions(sigma: f64, epsilon: f64) -> PositivityRegions {
    let s2 = sigma * sigma;
    let radicand = s2 * s2 * s2
        - 2.0 * epsilon * s2 * s2
        - 3.0 * epsilon * epsilon * s2
        - epsilon * epsilon * epsilon;
    let (gamma_a_max, gamma_b_min) = critical_points(sigma, epsilon);

    let (beta_a, a_interval) = if radicand > 0.0 {
        let beta = radicand.sqrt() / (epsilon + 2.0 * s2);
        (Some(beta), Some((gamma_a_max - beta, gamma_a_max + beta)))
    } else {
        (None, None)
    };

    let beta_b = (s2 + epsilon * epsilon / s2 + epsilon).sqrt();
    PositivityRegions {
        a_interval,
        b_lower_interval: (0.0, gamma_b_min - beta_b),
        b_upper_lo: gamma_b_min + beta_b,
        beta_a,
        beta_b,
    }
}

/// Noise-free parametrization: with `gamma = a_gamma sqrt(eps)` and
/// `sigma = a_sigma sqrt(eps)` both per-index terms lose their dependence
/// on `eps`. Returns `(A, B)` evaluated in that parametrization.
pub fn parametrized_terms(a_gamma: f64, a_sigma: f64) -> (f64, f64) {
    let g = a_gamma;
    let s = a_sigma;
    let s2 = s * s;
    let a_num = 2.0 * g * s * (1.0 + s2) - (1.0 + 2.0 * s2) * (1.0 + g * g);
    let a_den = s * (1.0 + s2);
    let a_value = a_num / (a_den * a_den);

    let b_num = s * (s + g * (s * g - 2.0 * s2 - 2.0));
    let b_den = 1.0 + s2;
    let b_value = b_num / (b_den * b_den);
    (a_value, b_value)
}

/// Analytic gradient of the parametrized `A` term.
fn parametrized_a_gradient(g: f64, s: f64) -> (f64, f64) {
    let s2 = s * s;
    let num = 2.0 * g * s * (1.0 + s2) - (1.0 + 2.0 * s2) * (1.0 + g * g);
    let den = s2 * (1.0 + s2) * (1.0 + s2);
    let dnum_dg = 2.0 * s * (1.0 + s2) - 2.0 * g * (1.0 + 2.0 * s2);
    let dnum_ds = 2.0 * g * (1.0 + 3.0 * s2) - 4.0 * s * (1.0 + g * g);
    let dden_ds = 2.0 * s * (1.0 + s2) * (1.0 + 3.0 * s2);
    let f = num / den;
    (dnum_dg / den, (dnum_ds - f * dden_ds) / den)
}

/// Landscape extrema of the noise-free terms.
#[derive(Debug, Clone)]
pub struct ExtremalConstants {
    /// Argmax `(a_gamma, a_sigma)` of the parametrized `A` term.
    pub a_argmax: (f64, f64),
    /// Value of `A` at the argmax.
    pub a_max: f64,
    /// Supremum of the parametrized `B` term over the noise-dominated
    /// branch; approached (not attained) as `a_gamma → 0` at `a_sigma = 1`.
    pub b_sup: f64,
}

const GRADIENT_TOL: f64 = 1e-8;

/// Numerically maximizes the parametrized `A` term over `(0, 50]²` by
/// quasi-Newton ascent from a 10×10 multistart grid, and reports the `B`
/// supremum from its closed form at `a_sigma = 1`.
pub fn extremal_constants() -> Result<ExtremalConstants, MseError> {
    let mut best: Option<(f64, f64, f64)> = None;
    for gi in 0..10 {
        for si in 0..10 {
            // Log-spaced grid over (0.1, 10].
            let g0 = 10f64.powf(-1.0 + 2.0 * gi as f64 / 9.0);
            let s0 = 10f64.powf(-1.0 + 2.0 * si as f64 / 9.0);
            if let Some((g, s, v)) = ascend_a_term(g0, s0) {
                if g <= 50.0 && s <= 50.0 && best.is_none_or(|(_, _, bv)| v > bv) {
                    best = Some((g, s, v));
                }
            }
        }
    }
    let (g, s, v) = best.ok_or(MseError::OptimizerFailure(GRADIENT_TOL))?;

    // lim_{a_gamma -> 0} B = a_sigma² / (1 + a_sigma²)², equal to 1/4 at
    // a_sigma = 1.
    let b_sup = 0.25;
    Ok(ExtremalConstants {
        a_argmax: (g, s),
        a_max: v,
        b_sup,
    })
}

/// BFGS ascent on the parametrized `A` term in log coordinates (keeps the
/// iterates positive). Returns the stationary point if the original-space
/// gradient norm reaches tolerance.
fn ascend_a_term(g0: f64, s0: f64) -> Option<(f64, f64, f64)> {
    let value = |u: f64, v: f64| parametrized_terms(u.exp(), v.exp()).0;
    // Chain rule: d/d(ln a) = a * d/da.
    let grad = |u: f64, v: f64| {
        let (g, s) = (u.exp(), v.exp());
        let (dg, ds) = parametrized_a_gradient(g, s);
        (g * dg, s * ds)
    };

    let (mut u, mut v) = (g0.ln(), s0.ln());
    let mut f = value(u, v);
    let (mut gu, mut gv) = grad(u, v);
    // Inverse Hessian approximation (2x2, row-major).
    let mut h = [1.0, 0.0, 0.0, 1.0];

    for _ in 0..500 {
        let (g, s) = (u.exp(), v.exp());
        let (dg, ds) = parametrized_a_gradient(g, s);
        if (dg * dg + ds * ds).sqrt() < GRADIENT_TOL {
            return Some((g, s, f));
        }

        // Ascent direction d = H * grad.
        let du = h[0] * gu + h[1] * gv;
        let dv = h[2] * gu + h[3] * gv;
        let slope = du * gu + dv * gv;
        if !slope.is_finite() || slope <= 0.0 {
            h = [1.0, 0.0, 0.0, 1.0];
            continue;
        }

        // Backtracking line search (Armijo).
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let (nu, nv) = (u + step * du, v + step * dv);
            let nf = value(nu, nv);
            if nf.is_finite() && nf >= f + 1e-4 * step * slope {
                let (ngu, ngv) = grad(nu, nv);
                // BFGS update on the negated objective.
                let (sx, sy) = (nu - u, nv - v);
                let (yx, yy) = (gu - ngu, gv - ngv);
                let sy_dot = sx * yx + sy * yy;
                if sy_dot > 1e-14 {
                    let rho = 1.0 / sy_dot;
                    // H = (I - rho s yᵗ) H (I - rho y sᵗ) + rho s sᵗ
                    let a11 = 1.0 - rho * sx * yx;
                    let a12 = -rho * sx * yy;
                    let a21 = -rho * sy * yx;
                    let a22 = 1.0 - rho * sy * yy;
                    let b11 = a11 * h[0] + a12 * h[2];
                    let b12 = a11 * h[1] + a12 * h[3];
                    let b21 = a21 * h[0] + a22 * h[2];
                    let b22 = a21 * h[1] + a22 * h[3];
                    h = [
                        b11 * a11 + b12 * a12 + rho * sx * sx,
                        b11 * a21 + b12 * a22 + rho * sx * sy,
                        b21 * a11 + b22 * a12 + rho * sy * sx,
                        b21 * a21 + b22 * a22 + rho * sy * sy,
                    ];
                }
                u = nu;
                v = nv;
                f = nf;
                gu = ngu;
                gv = ngv;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    None
}

/// Gap quantities between the generic-perturbation closed forms and the
/// shared-singular-vector closed forms.
#[derive(Debug, Clone)]
pub struct CorollaryGaps {
    /// `|J_generic(r-MMSE) - J_shared(r-MMSE)|`.
    pub gap_rmmse: f64,
    /// `|J_generic(r-SVD) - J_shared(r-SVD)|`.
    pub gap_rsvd: f64,
    /// `J_generic(MMSE) - J_generic(r-MMSE)` (signed).
    pub mmse_minus_rmmse: f64,
}

/// Computes the three gap quantities, each through the rotated-spectra
/// expansion; agreement with the direct difference of closed forms is a
/// debug-mode assertion (the two routes are algebraically identical).
pub fn corollary_gaps(pair: &PerturbedPair, r: usize) -> Result<CorollaryGaps, MseError> {
    let m = pair.m();
    validate_rank(r, m)?;
    let epsilon = pair.epsilon();
    let gammas = pair.gammas();
    let sigmas = pair.sigmas();
    let (phi, psi) = rotated_spectra(pair);

    let mut gap_rmmse = 0.0;
    let mut gap_rsvd = 0.0;
    for i in 0..r {
        let x = x_weight(sigmas[i], epsilon);
        let phi_excess = phi[i] * phi[i] - gammas[i] * gammas[i];
        let psi_deficit = gammas[i] - psi[i];
        gap_rmmse += x * x * phi_excess + 2.0 * x * psi_deficit;
        gap_rsvd += phi_excess / (sigmas[i] * sigmas[i]) + 2.0 * psi_deficit / sigmas[i];
    }
    let gap_rmmse = gap_rmmse.abs();
    let gap_rsvd = gap_rsvd.abs();

    let mut mmse_minus_rmmse = 0.0;
    for i in r..m {
        let x = x_weight(sigmas[i], epsilon);
        mmse_minus_rmmse += x * x * (phi[i] * phi[i] + epsilon) - 2.0 * x * psi[i];
    }

    #[cfg(debug_assertions)]
    {
        let shared_rmmse =
            closed_form_shared(EstimatorFamily::RMmse, gammas, sigmas, epsilon, r)?.total;
        let shared_rsvd =
            closed_form_shared(EstimatorFamily::RSvd, gammas, sigmas, epsilon, r)?.total;
        let gen_mmse = closed_form_generic(pair, EstimatorFamily::Mmse, r)?.total;
        let gen_rmmse = closed_form_generic(pair, EstimatorFamily::RMmse, r)?.total;
        let gen_rsvd = closed_form_generic(pair, EstimatorFamily::RSvd, r)?.total;
        let scale = 1.0f64.max(gen_mmse.abs());
        debug_assert!(((gen_rmmse - shared_rmmse).abs() - gap_rmmse).abs() <= 1e-10 * scale);
        debug_assert!(((gen_rsvd - shared_rsvd).abs() - gap_rsvd).abs() <= 1e-10 * scale);
        debug_assert!(((gen_mmse - gen_rmmse) - mmse_minus_rmmse).abs() <= 1e-10 * scale);
    }

    Ok(CorollaryGaps {
        gap_rmmse,
        gap_rsvd,
        mmse_minus_rmmse,
    })
}
