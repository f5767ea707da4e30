//! Small dense helpers shared by the group and diffusion code.

use nalgebra::DMatrix;

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
///
/// Intended for the small antisymmetric matrices that generate irreps; the
/// argument is scaled until its 1-norm is below 1/2, where 20 Taylor terms are
/// exact to rounding.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    let norm = one_norm(a);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let scaled = a * scale;
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

pub fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Block-diagonal assembly of square blocks.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        let d = b.nrows();
        out.view_mut((at, at), (d, d)).copy_from(b);
        at += d;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_planar_generator_is_rotation() {
        let theta = 2.7;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -theta, theta, 0.0]);
        let r = expm(&a);
        let expected = DMatrix::from_row_slice(
            2,
            2,
            &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
        );
        assert!((r - expected).norm() < 1e-14);
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let r = expm(&DMatrix::zeros(3, 3));
        assert_eq!(r, DMatrix::identity(3, 3));
    }

    #[test]
    fn expm_of_diagonal() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-3.0, 0.5, 2.0]));
        let r = expm(&a);
        for (i, v) in [-3.0f64, 0.5, 2.0].iter().enumerate() {
            assert!((r[(i, i)] - v.exp()).abs() < 1e-13 * v.exp().max(1.0));
        }
    }
}
