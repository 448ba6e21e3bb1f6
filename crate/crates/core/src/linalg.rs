//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! All matrices handled here are desk-scale (a few hundred rows at most), so
//! every spectral quantity goes through a full symmetric eigendecomposition.

use nalgebra::{DMatrix, DVector};

/// Sorted (ascending) eigenvalues of a symmetric matrix.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// `(λ_min, λ_max)` of a symmetric matrix. Empty matrices yield `(0, 0)`.
pub fn sym_extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    let ev = sym_eigenvalues(m);
    match (ev.first(), ev.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => (0.0, 0.0),
    }
}

/// Spectral norm (largest singular value). Zero for empty matrices.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let gram = if m.nrows() <= m.ncols() {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    sym_extreme_eigenvalues(&gram).1.max(0.0).sqrt()
}

/// Smallest singular value of a matrix with at most as many rows as columns.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Stack row vectors into an `rows.len() × ncols` matrix.
pub fn stack_rows(rows: &[DVector<f64>], ncols: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows.len(), ncols);
    for (i, r) in rows.iter().enumerate() {
        out.row_mut(i).copy_from(&r.transpose());
    }
    out
}

/// Vertical concatenation `[top; bottom]`.
pub fn vstack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(top.ncols(), bottom.ncols());
    let ncols = top.ncols().max(bottom.ncols());
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), ncols);
    if top.nrows() > 0 {
        out.rows_mut(0, top.nrows()).copy_from(top);
    }
    if bottom.nrows() > 0 {
        out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    }
    out
}
