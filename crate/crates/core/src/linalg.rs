//! Small dense linear-algebra helpers. State dimensions are tiny (d ≤ a few),
//! so everything here works on `nalgebra` dynamic matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Operator 2-norm (largest singular value) of a real matrix.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    match (m.nrows(), m.ncols()) {
        (0, _) | (_, 0) => 0.0,
        (1, 1) => m[(0, 0)].abs(),
        _ => m
            .singular_values()
            .iter()
            .fold(0.0_f64, |acc, &s| acc.max(s)),
    }
}

/// Operator 2-norm of a row-major d×d block, with closed forms for d ≤ 2.
pub fn op_norm_slice(d: usize, m: &[f64]) -> f64 {
    match d {
        1 => m[0].abs(),
        2 => {
            let (a, b, c, e) = (m[0], m[1], m[2], m[3]);
            // largest singular value from the eigenvalues of MᵀM
            let s = a * a + b * b + c * c + e * e;
            let det = a * e - b * c;
            let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
            (0.5 * (s + disc)).sqrt()
        }
        _ => op_norm(&DMatrix::from_row_slice(d, d, m)),
    }
}

/// Operator 2-norm of a complex matrix.
pub fn op_norm_c(m: &DMatrix<Complex64>) -> f64 {
    match (m.nrows(), m.ncols()) {
        (0, _) | (_, 0) => 0.0,
        (1, 1) => m[(0, 0)].norm(),
        _ => m
            .clone()
            .singular_values()
            .iter()
            .fold(0.0_f64, |acc, &s| acc.max(s)),
    }
}

pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.singular_values()
        .iter()
        .fold(f64::INFINITY, |acc, &s| acc.min(s))
}

/// Largest eigenvalue of the symmetric part (A + Aᵀ)/2.
pub fn max_sym_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |acc, &s| acc.max(s))
}

/// Largest real part among the eigenvalues of a real square matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)];
    }
    a.complex_eigenvalues()
        .iter()
        .fold(f64::NEG_INFINITY, |acc, z| acc.max(z.re))
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// out += m · v for a row-major d×d matrix stored in `m`.
#[inline]
pub fn mat_vec_acc(m: &DMatrix<f64>, v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for i in 0..d {
        let mut acc = 0.0;
        for j in 0..d {
            acc += m[(i, j)] * v[j];
        }
        out[i] += acc;
    }
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Builds a d×d matrix from a row-major list.
pub fn matrix_from_rows(d: usize, rows: &[f64]) -> Option<DMatrix<f64>> {
    (rows.len() == d * d).then(|| DMatrix::from_row_slice(d, d, rows))
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_norm_diag() {
        let m = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 3.0]);
        assert!((op_norm(&m) - 3.0).abs() < 1e-12);
        assert!((smallest_singular_value(&m) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn op_norm_rotation_is_one() {
        let (s, c) = 0.3_f64.sin_cos();
        let m = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        assert!((op_norm(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_svd() {
        let m = [1.5, -0.3, 2.0, 0.7];
        let full = op_norm(&DMatrix::from_row_slice(2, 2, &m));
        assert!((op_norm_slice(2, &m) - full).abs() < 1e-12);
    }

    #[test]
    fn abscissa_of_rotation_generator() {
        let m = DMatrix::from_row_slice(2, 2, &[-0.5, 2.0, -2.0, -0.5]);
        assert!((spectral_abscissa(&m) + 0.5).abs() < 1e-12);
        assert!((max_sym_eigenvalue(&m) + 0.5).abs() < 1e-12);
    }
}
