//! Fixed-size aliases and small dense helpers shared across modules.

use nalgebra::{Matrix6, SMatrix, SVector};

pub type Matrix12 = SMatrix<f64, 12, 12>;
pub type Vector12 = SVector<f64, 12>;

/// Builds a 12×12 matrix from four 6×6 blocks.
pub fn block2(
    tl: &Matrix6<f64>,
    tr: &Matrix6<f64>,
    bl: &Matrix6<f64>,
    br: &Matrix6<f64>,
) -> Matrix12 {
    let mut m = Matrix12::zeros();
    m.fixed_view_mut::<6, 6>(0, 0).copy_from(tl);
    m.fixed_view_mut::<6, 6>(0, 6).copy_from(tr);
    m.fixed_view_mut::<6, 6>(6, 0).copy_from(bl);
    m.fixed_view_mut::<6, 6>(6, 6).copy_from(br);
    m
}

/// Upper-triangular block form `[[tl, tr], [0, I]]`.
pub fn upper_unit(tl: &Matrix6<f64>, tr: &Matrix6<f64>) -> Matrix12 {
    block2(tl, tr, &Matrix6::zeros(), &Matrix6::identity())
}

/// Stacks two 6-vectors.
pub fn stack(top: &nalgebra::Vector6<f64>, bottom: &nalgebra::Vector6<f64>) -> Vector12 {
    let mut v = Vector12::zeros();
    v.fixed_rows_mut::<6>(0).copy_from(top);
    v.fixed_rows_mut::<6>(6).copy_from(bottom);
    v
}

pub fn block<const R: usize, const C: usize>(
    m: &Matrix12,
    row: usize,
    col: usize,
) -> SMatrix<f64, R, C> {
    m.fixed_view::<R, C>(row, col).into_owned()
}

pub fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse<const N: usize>(m: &SMatrix<f64, N, N>) -> Option<SMatrix<f64, N, N>> {
    m.cholesky().map(|c| c.inverse())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<const N: usize>(m: &SMatrix<f64, N, N>) -> f64 {
    nalgebra::DMatrix::from_column_slice(N, N, symmetrize(m).as_slice())
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Matrix commutator `[a, b] = ab - ba`.
pub fn commutator<const N: usize>(
    a: &SMatrix<f64, N, N>,
    b: &SMatrix<f64, N, N>,
) -> SMatrix<f64, N, N> {
    a * b - b * a
}
