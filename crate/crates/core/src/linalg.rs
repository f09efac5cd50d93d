//! Small dense linear-algebra helpers shared by the regularity checks and
//! the multiplier solve.

use nalgebra::{DMatrix, DVector};

/// Singular values in descending order. Empty matrices have none.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `tol` times the largest one.
pub fn relative_rank(sv: &[f64], tol: f64) -> usize {
    let Some(&largest) = sv.first() else {
        return 0;
    };
    if largest <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * largest).count()
}

/// Orthonormal basis (as columns) of the null space of `a`, using the
/// relative singular-value threshold `tol`.
pub fn null_space(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let cols = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(cols, cols);
    }
    // Pad to at least square so the SVD yields a full set of right vectors.
    let rows = a.nrows().max(cols);
    let mut padded = DMatrix::zeros(rows, cols);
    padded.view_mut((0, 0), (a.nrows(), cols)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let largest = svd.singular_values.max();
    let kept: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| largest <= 0.0 || svd.singular_values[i] <= tol * largest)
        .collect();
    let mut basis = DMatrix::zeros(cols, kept.len());
    for (c, &i) in kept.iter().enumerate() {
        basis.set_column(c, &v_t.row(i).transpose());
    }
    basis
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_mat(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}
