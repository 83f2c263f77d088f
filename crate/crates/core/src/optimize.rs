//! One-dimensional search helpers shared by the certificate and spectral code.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of a unimodal `f` on [a, b].
/// Returns (argmax, max). The endpoints are compared too, so monotone
/// objectives return the better boundary.
pub fn golden_max(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (lo0, hi0) = (a.min(b), a.max(b));
    let (mut lo, mut hi) = (lo0, hi0);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iter = 0;
    while (hi - lo) > tol * (1.0 + lo.abs().max(hi.abs())) && iter < 200 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        iter += 1;
    }
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for x in [lo0, hi0] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Maximum of `f` over `n` equispaced points on [a, b]; returns (index, x, f).
pub fn grid_max(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> (usize, f64, f64) {
    let n = n.max(1);
    let mut best = (0, a, f64::NEG_INFINITY);
    for i in 0..n {
        let x = if n == 1 {
            a
        } else {
            a + (b - a) * i as f64 / (n - 1) as f64
        };
        let fx = f(x);
        if fx > best.2 {
            best = (i, x, fx);
        }
    }
    best
}

/// Grid scan followed by golden refinement on the bracketing cells.
pub fn grid_then_golden(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> (f64, f64) {
    let n = n.max(3);
    let (i, x, fx) = grid_max(&f, a, b, n);
    let step = (b - a) / (n - 1) as f64;
    let lo = if i == 0 { a } else { x - step };
    let hi = if i == n - 1 { b } else { x + step };
    let (xr, fr) = golden_max(&f, lo, hi, 1e-13);
    if fr >= fx {
        (xr, fr)
    } else {
        (x, fx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, fx) = golden_max(|x| -(x - 0.3) * (x - 0.3) + 2.0, -1.0, 4.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-6);
        assert!((fx - 2.0).abs() < 1e-12);
    }

    #[test]
    fn golden_prefers_boundary_for_monotone() {
        let (x, _) = golden_max(|x| x, 0.0, 1.0, 1e-12);
        assert_eq!(x, 1.0);
    }

    #[test]
    fn grid_then_golden_refines() {
        let (x, _) = grid_then_golden(|x| (x * 3.0).sin(), 0.0, 2.0, 17);
        assert!((x - std::f64::consts::FRAC_PI_6).abs() < 1e-6);
    }
}
