//! Dense matrix carrier and small shared linear-algebra helpers.
//!
//! All matrices in this crate are dense, real, and row-major in their wire
//! representation (see [`crate::json`]). Internally we lean on `nalgebra`;
//! the helpers here cover the few operations the rest of the crate keeps
//! reaching for (Frobenius norms, orthonormality residuals, completion of a
//! thin orthonormal factor to a full square one).

use nalgebra::DMatrix;

/// Dense real matrix. Entries must be finite; the JSON boundary enforces it.
pub type Matrix = DMatrix<f64>;

/// Max-abs entry of `a` (the entrywise infinity norm).
pub fn max_abs(a: &Matrix) -> f64 {
    a.iter().fold(0.0, |acc, &x| acc.max(x.abs()))
}

/// Relative Frobenius distance `||a - b||_F / ||a||_F` (absolute if `a = 0`).
pub fn rel_frobenius_error(a: &Matrix, b: &Matrix) -> f64 {
    let denom = a.norm();
    let diff = (a - b).norm();
    if denom > 0.0 {
        diff / denom
    } else {
        diff
    }
}

/// Max-abs entry of `qᵗq - I`; zero iff the columns of `q` are orthonormal.
pub fn orthonormality_residual(q: &Matrix) -> f64 {
    let gram = q.transpose() * q;
    let eye = Matrix::identity(gram.nrows(), gram.ncols());
    max_abs(&(gram - eye))
}

/// Extend a thin column-orthonormal factor `q` (n×k, k ≤ n) to a full n×n
/// orthonormal matrix whose first k columns are exactly the columns of `q`.
///
/// The complement is built deterministically: identity columns are
/// orthogonalized against the accepted basis (modified Gram–Schmidt, two
/// passes) and kept whenever the residual survives. For k < n there are
/// always at least n−k surviving candidates.
pub fn complete_orthonormal_basis(q: &Matrix) -> Matrix {
    let n = q.nrows();
    let k = q.ncols();
    assert!(k <= n, "thin factor has more columns than rows");

    let mut full = Matrix::zeros(n, n);
    full.view_mut((0, 0), (n, k)).copy_from(q);

    let mut accepted = k;
    let mut candidate = 0usize;
    while accepted < n {
        assert!(
            candidate < n,
            "orthonormal completion ran out of candidates"
        );
        let mut v = nalgebra::DVector::<f64>::zeros(n);
        v[candidate] = 1.0;
        candidate += 1;

        // Two MGS passes keep the completed factor orthonormal to ~1e-15.
        for _ in 0..2 {
            for j in 0..accepted {
                let col = full.column(j);
                let proj = col.dot(&v);
                v.axpy(-proj, &col.clone_owned(), 1.0);
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            v /= norm;
            full.set_column(accepted, &v);
            accepted += 1;
        }
    }
    full
}
