//! Small dense helpers on top of `nalgebra`: SVD rank with the relative
//! threshold used throughout the crate, nullspaces and left null vectors.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold factor.
pub const RANK_RTOL: f64 = 1e-9;

/// Singular values of `m`, sorted descending. Empty for degenerate shapes.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Threshold below which a singular value counts as zero:
/// `1e-9 * max(1, sigma_max)`.
pub fn rank_threshold(sv: &[f64]) -> f64 {
    RANK_RTOL * sv.first().copied().unwrap_or(0.0).max(1.0)
}

pub fn rank(m: &DMatrix<f64>) -> usize {
    let sv = singular_values(m);
    let tol = rank_threshold(&sv);
    sv.iter().filter(|&&s| s > tol).count()
}

/// Smallest singular value, or `None` for an empty matrix.
pub fn min_singular_value(m: &DMatrix<f64>) -> Option<f64> {
    singular_values(m).last().copied()
}

/// Orthonormal basis of the right nullspace of a square matrix, one column
/// per singular value under the rank threshold.
pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Pad to square so that V is complete.
    let rows = m.nrows().max(n);
    let mut sq = DMatrix::zeros(rows, n);
    sq.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = sq.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let tol = rank_threshold(&sv);
    let cols: Vec<DVector<f64>> = sv
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= tol)
        .map(|(idx, _)| v_t.row(idx).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Left null vector of a square matrix with a one-dimensional left nullspace,
/// taken from the smallest singular vector of the transpose and flipped so
/// that its entries sum to a positive number. Returns `None` when the left
/// nullspace is not one-dimensional.
pub fn left_null_vector(m: &DMatrix<f64>) -> Option<DVector<f64>> {
    let ns = null_space(&m.transpose());
    if ns.ncols() != 1 {
        return None;
    }
    let mut w = ns.column(0).into_owned();
    if w.sum() < 0.0 {
        w.neg_mut();
    }
    Some(w)
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn matrix_inf_norm(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}
