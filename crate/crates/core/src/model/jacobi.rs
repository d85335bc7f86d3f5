//! One-sided Jacobi SVD.
//!
//! The general-purpose bidiagonalization SVD we would otherwise lean on
//! loses up to eight digits on the small singular values of ill-conditioned
//! matrices, which is far outside the tolerances this crate works to. The
//! one-sided Jacobi iteration computes every singular value with high
//! relative accuracy and is easily fast enough for the matrix sizes that
//! flow through the estimators and bounds (problem sizes here are small).

use crate::matrix::Matrix;

/// Thin SVD `a = u * diag(singulars) * vᵗ` with `u` n×m, `v` m×m, singular
/// values sorted in decreasing order (not sign-canonicalized).
pub(crate) struct ThinSvd {
    pub u: Matrix,
    pub singulars: Vec<f64>,
    pub v: Matrix,
}

const SWEEP_LIMIT: usize = 64;
const ROTATION_TOL: f64 = 1e-15;

/// Runs Hestenes one-sided Jacobi: rotates column pairs of a working copy
/// until all columns are mutually orthogonal, accumulating the rotations
/// into `v`. Column norms then are the singular values.
pub(crate) fn thin_svd(a: &Matrix) -> Option<ThinSvd> {
    let (n, m) = (a.nrows(), a.ncols());
    assert!(n >= m && m > 0);
    let mut work = a.clone();
    let mut v = Matrix::identity(m, m);

    let mut converged = false;
    for _ in 0..SWEEP_LIMIT {
        let mut rotated = false;
        for p in 0..m.saturating_sub(1) {
            for q in (p + 1)..m {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..n {
                    let wp = work[(i, p)];
                    let wq = work[(i, q)];
                    app += wp * wp;
                    aqq += wq * wq;
                    apq += wp * wq;
                }
                if apq == 0.0 || apq.abs() <= ROTATION_TOL * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let wp = work[(i, p)];
                    let wq = work[(i, q)];
                    work[(i, p)] = c * wp - s * wq;
                    work[(i, q)] = s * wp + c * wq;
                }
                for i in 0..m {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }

    let mut order: Vec<usize> = (0..m).collect();
    let norms: Vec<f64> = (0..m).map(|j| work.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut u = Matrix::zeros(n, m);
    let mut v_sorted = Matrix::zeros(m, m);
    let mut singulars = Vec::with_capacity(m);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        singulars.push(sigma);
        if sigma > 0.0 {
            u.set_column(dst, &(work.column(src) / sigma));
        }
        v_sorted.set_column(dst, &v.column(src));
    }
    Some(ThinSvd {
        u,
        singulars,
        v: v_sorted,
    })
}

/// Singular values only (decreasing), skipping the factor bookkeeping.
pub(crate) fn singular_values(a: &Matrix) -> Option<Vec<f64>> {
    if a.nrows() >= a.ncols() {
        singular_values_tall(a)
    } else {
        singular_values_tall(&a.transpose())
    }
}

fn singular_values_tall(a: &Matrix) -> Option<Vec<f64>> {
    let (n, m) = (a.nrows(), a.ncols());
    let mut work = a.clone();
    let mut converged = false;
    for _ in 0..SWEEP_LIMIT {
        let mut rotated = false;
        for p in 0..m.saturating_sub(1) {
            for q in (p + 1)..m {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..n {
                    let wp = work[(i, p)];
                    let wq = work[(i, q)];
                    app += wp * wp;
                    aqq += wq * wq;
                    apq += wp * wq;
                }
                if apq == 0.0 || apq.abs() <= ROTATION_TOL * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..n {
                    let wp = work[(i, p)];
                    let wq = work[(i, q)];
                    work[(i, p)] = c * wp - s * wq;
                    work[(i, q)] = s * wp + c * wq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }
    let mut norms: Vec<f64> = (0..m).map(|j| work.column(j).norm()).collect();
    norms.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Some(norms)
}
