//! Shared helpers for unit tests.

use nalgebra::{Dim, Matrix, RawStorage};

/// Largest absolute entrywise difference of two equally shaped matrices.
pub fn max_diff<R1: Dim, C1: Dim, R2: Dim, C2: Dim, S1, S2>(
    a: &Matrix<f64, R1, C1, S1>,
    b: &Matrix<f64, R2, C2, S2>,
) -> f64
where
    S1: RawStorage<f64, R1, C1>,
    S2: RawStorage<f64, R2, C2>,
{
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
