use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::model::SignedMatrixMeasure;

const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// ∫_a^b e^{zs} ds, with a series for small |z(b−a)|.
fn cell_exp_integral(z: Complex64, a: f64, b: f64) -> Complex64 {
    let w = b - a;
    let u = z * w;
    if u.norm() < 1e-3 {
        // e^{za}·w·(e^u − 1)/u
        let phi = Complex64::new(1.0, 0.0) + u / 2.0 + u * u / 6.0 + u * u * u / 24.0;
        (z * a).exp() * w * phi
    } else {
        ((z * b).exp() - (z * a).exp()) / z
    }
}

/// ∫_a^b s e^{zs} ds.
fn cell_moment_integral(z: Complex64, a: f64, b: f64) -> Complex64 {
    let w = b - a;
    if (z * w).norm() < 1e-2 {
        let mid = 0.5 * (a + b);
        GL4.iter()
            .map(|&(x, wt)| {
                let s = mid + 0.5 * w * x;
                (z * s).exp() * (s * wt * 0.5 * w)
            })
            .sum()
    } else {
        let one = Complex64::new(1.0, 0.0);
        ((z * b).exp() * (z * b - one) - (z * a).exp() * (z * a - one)) / (z * z)
    }
}

fn accumulate(
    nu: &SignedMatrixMeasure,
    atom_weight: impl Fn(f64) -> Complex64,
    cell_weight: impl Fn(f64, f64) -> Complex64,
) -> DMatrix<Complex64> {
    let d = nu.dim();
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    for atom in nu.atoms() {
        let w = atom_weight(atom.theta);
        for (o, a) in m.iter_mut().zip(atom.matrix.iter()) {
            *o += w * *a;
        }
    }
    if let Some(dn) = nu.density() {
        let r0 = nu.r0();
        let cw = dn.cell_width(r0);
        for (k, cell) in dn.cells.iter().enumerate() {
            let a = -r0 + k as f64 * cw;
            let w = cell_weight(a, a + cw);
            for (o, v) in m.iter_mut().zip(cell.iter()) {
                *o += w * *v;
            }
        }
    }
    m
}

/// ∫e^{zs}ν(ds); densities are integrated exactly on each constant cell.
pub fn laplace_measure(nu: &SignedMatrixMeasure, z: Complex64) -> DMatrix<Complex64> {
    accumulate(nu, |theta| (z * theta).exp(), |a, b| cell_exp_integral(z, a, b))
}

/// Q_z = zI − ∫e^{zs}ν(ds).
pub fn char_matrix(nu: &SignedMatrixMeasure, z: Complex64) -> DMatrix<Complex64> {
    let mut q = -laplace_measure(nu, z);
    for i in 0..nu.dim() {
        q[(i, i)] += z;
    }
    q
}

/// dQ_z/dz = I − ∫s e^{zs}ν(ds).
pub fn char_matrix_derivative(nu: &SignedMatrixMeasure, z: Complex64) -> DMatrix<Complex64> {
    let mut q = -accumulate(
        nu,
        |theta| (z * theta).exp() * theta,
        |a, b| cell_moment_integral(z, a, b),
    );
    for i in 0..nu.dim() {
        q[(i, i)] += Complex64::new(1.0, 0.0);
    }
    q
}

pub fn char_det(nu: &SignedMatrixMeasure, z: Complex64) -> Complex64 {
    let q = char_matrix(nu, z);
    match q.nrows() {
        1 => q[(0, 0)],
        2 => q[(0, 0)] * q[(1, 1)] - q[(0, 1)] * q[(1, 0)],
        _ => q.determinant(),
    }
}

/// Q_z⁻¹, or None when numerically singular.
pub fn char_inverse(nu: &SignedMatrixMeasure, z: Complex64) -> Option<DMatrix<Complex64>> {
    let q = char_matrix(nu, z);
    if q.nrows() == 1 {
        let v = q[(0, 0)];
        return (v.norm() > 0.0).then(|| DMatrix::from_element(1, 1, v.inv()));
    }
    q.try_inverse()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PiecewiseDensity;

    #[test]
    fn dirac_at_origin() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let nu = SignedMatrixMeasure::dirac(1.0, 0.0, a.clone()).unwrap();
        let z = Complex64::new(0.3, -1.2);
        let q = char_matrix(&nu, z);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { z } else { Complex64::new(0.0, 0.0) } - a[(i, j)];
                assert!((q[(i, j)] - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn pure_delay_root_at_minus_one() {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(-1.0, -(-1.0f64).exp())]).unwrap();
        let q = char_det(&nu, Complex64::new(-1.0, 0.0));
        assert!(q.norm() < 1e-15);
    }

    #[test]
    fn empty_measure() {
        let nu = SignedMatrixMeasure::zero(1.0, 1).unwrap();
        let z = Complex64::new(2.0, 5.0);
        assert_eq!(char_det(&nu, z), z);
    }

    #[test]
    fn density_and_derivative_against_quadrature() {
        let nu = SignedMatrixMeasure::new(
            1.0,
            1,
            vec![],
            Some(PiecewiseDensity {
                cells: vec![
                    DMatrix::from_element(1, 1, 0.5),
                    DMatrix::from_element(1, 1, -1.0),
                ],
            }),
        )
        .unwrap();
        for z in [Complex64::new(0.4, 3.0), Complex64::new(1e-5, 0.0)] {
            // fine midpoint rule oracle
            let n = 200_000;
            let (mut f, mut df) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for i in 0..n {
                let s = -1.0 + (i as f64 + 0.5) / n as f64;
                let rho = if s < -0.5 { 0.5 } else { -1.0 };
                f += (z * s).exp() * rho / n as f64;
                df += (z * s).exp() * s * rho / n as f64;
            }
            assert!((laplace_measure(&nu, z)[(0, 0)] - f).norm() < 1e-9);
            let dq = char_matrix_derivative(&nu, z)[(0, 0)];
            assert!((dq - (Complex64::new(1.0, 0.0) - df)).norm() < 1e-9);
        }
    }
}
