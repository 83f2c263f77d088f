use approx::assert_relative_eq;
use fsde_core::certify::{check_cor12, rate_thm11, rate_thm13, UnitCk, SEMI_LINEAR_GRID};
use fsde_core::model::{DelayDrift, FsdeModel, Grid, Model, PointDrift, Segment, SemiLinearModel, SignedMatrixMeasure};
use fsde_core::simulate::{representation_path, simulate, simulate_coupled, simulate_replica};
use fsde_core::spectral::{gamma_solve, lambda0, pp_bound, RootSearchConfig};
use fsde_core::verify::{ks_one_sample, mean_var, normal_cdf, weighted_fit};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn scalar(a: f64, b: f64, sigma: f64) -> FsdeModel {
    let delay = if b == 0.0 {
        DelayDrift::Zero
    } else {
        DelayDrift::DiscreteDelay(DMatrix::from_element(1, 1, b))
    };
    FsdeModel::new(
        1.0,
        PointDrift::Linear(DMatrix::from_element(1, 1, a)),
        delay,
        DMatrix::from_element(1, 1, sigma),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(cfg(64))]

    #[test]
    fn dissipative_rate_matches_grid_and_is_monotone(l1 in 0.01f64..6.0, l2 in 0.0f64..2.0, r0 in 0.1f64..4.0) {
        let c = rate_thm11(l1, l2, r0);
        let g = c.grid_lambda.unwrap();
        prop_assert!(c.lambda >= g - 1e-9);
        prop_assert!(c.lambda - g <= 1e-3 * (1.0 + c.lambda.abs()));
        prop_assert!(rate_thm11(l1 * 1.5, l2, r0).lambda >= c.lambda - 1e-12);
        prop_assert!(rate_thm11(l1, l2 * 1.5 + 1e-3, r0).lambda <= c.lambda + 1e-12);
        prop_assert!(c.lambda <= l1 + 1e-12);
    }

    #[test]
    fn lipschitz_split_margin_and_optimiser(k1 in 0.01f64..5.0, r0 in 0.01f64..5.0, frac in 0.0f64..2.0) {
        let base = check_cor12(k1, 0.0, r0);
        prop_assert!(base.rhs > 0.0);
        prop_assert!(base.s0 > 0.0 && base.s0 < 2.0 * k1);
        let k2 = frac * base.rhs.sqrt();
        let c = check_cor12(k1, k2, r0);
        prop_assert_eq!(c.applicable, frac < 1.0 && c.margin > 0.0);
        assert_relative_eq!(c.margin, base.rhs - k2 * k2, max_relative = 1e-12, epsilon = 1e-15);
        prop_assert!((c.s_grid - c.s0).abs() <= 1e-4 * (1.0 + c.s0));
    }

    #[test]
    fn scalar_ode_abscissa_and_bound(a in -5.0f64..-0.05) {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(0.0, a)]).unwrap();
        let root = lambda0(&nu, &RootSearchConfig::default()).unwrap();
        assert_relative_eq!(root.lambda0, a, epsilon = 1e-8);
        let pp = pp_bound(&nu, a, a / 2.0, 512).unwrap();
        prop_assert_eq!(pp.rho_lambda, 0.0);
        let table = gamma_solve(&nu, 4.0, 1.0 / 256.0).unwrap();
        for i in table.n..table.len() {
            let t = table.time(i);
            prop_assert!(table.norm_at_index(i) <= pp.bound * (a / 2.0 * t).exp());
        }
    }

    #[test]
    fn semi_linear_special_rate_below_abscissa(a in -3.0f64..-0.1) {
        let c = rate_thm13(a, 0.0, 1.0, &UnitCk, SEMI_LINEAR_GRID).unwrap();
        prop_assert!(c.applicable);
        prop_assert!(c.lambda <= -a + 1e-9);
        prop_assert!(c.lambda >= -a * 0.99);
    }
}

proptest! {
    #![proptest_config(cfg(16))]

    #[test]
    fn simulation_is_reproducible(seed in any::<u64>(), x0 in -3.0f64..3.0, b in -0.5f64..0.5) {
        let m = scalar(-1.0, b, 1.0);
        let grid = Grid::new(1.0, 1.0 / 32.0).unwrap();
        let xi = Segment::constant(grid, &[x0]).unwrap();
        let p = simulate(&m, &xi, 2.0, grid.h, seed).unwrap();
        let q = simulate(&m, &xi, 2.0, grid.h, seed).unwrap();
        prop_assert_eq!(p.states(), q.states());
        let r = simulate_replica(&m, &xi, 2.0, grid.h, seed, 1).unwrap();
        prop_assert_ne!(p.states(), r.states());
    }

    #[test]
    fn memory_window_is_deterministic(seed in any::<u64>(), slope in -2.0f64..2.0, k in 1usize..=32) {
        let m = scalar(-1.0, 0.3, 1.0);
        let grid = Grid::new(1.0, 1.0 / 32.0).unwrap();
        let xi = Segment::from_fn(grid, 1, |th| vec![slope * th]).unwrap();
        let p = simulate(&m, &xi, 1.0, grid.h, seed).unwrap();
        // the oldest point of X_t is ξ(t − r0) while t ≤ r0
        let oldest = p.segment_view(k).oldest()[0];
        prop_assert_eq!(oldest.to_bits(), xi.point(k)[0].to_bits());
    }

    #[test]
    fn synchronous_coupling_contracts_without_noise_effect(seed in any::<u64>(), gap in 0.1f64..3.0) {
        // linear drift: the difference of two synchronously coupled paths is deterministic
        let m = scalar(-1.0, 0.0, 1.0);
        let grid = Grid::new(1.0, 1.0 / 64.0).unwrap();
        let xi = Segment::constant(grid, &[gap]).unwrap();
        let eta = Segment::constant(grid, &[0.0]).unwrap();
        let (x, y) = simulate_coupled(&m, &xi, &eta, 2.0, grid.h, seed).unwrap();
        let steps = x.steps();
        let d = x.state(steps)[0] - y.state(steps)[0];
        let want = gap * (1.0 - grid.h).powi(steps as i32);
        assert_relative_eq!(d, want, max_relative = 1e-9);
    }
}

#[test]
fn representation_matches_euler_without_delay_drift() {
    let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(0.0, -1.0), (-1.0, 0.2)]).unwrap();
    let sl = SemiLinearModel::new(nu.clone(), DelayDrift::Zero, DMatrix::from_element(1, 1, 0.7), None).unwrap();
    let m = sl.to_fsde().unwrap();
    let h = 1.0 / 64.0;
    let grid = Grid::new(1.0, h).unwrap();
    let xi = Segment::from_fn(grid, 1, |th| vec![(3.0 * th).sin()]).unwrap();
    let table = gamma_solve(&nu, 3.0, h).unwrap();
    let rep = representation_path(&sl, &table, &xi, 3.0, h, 9).unwrap();
    let eul = simulate(&m, &xi, 3.0, h, 9).unwrap();
    for (a, b) in rep.states().iter().zip(eul.states()) {
        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
}

#[test]
fn ou_endpoint_law() {
    let m = scalar(-1.0, 0.0, 1.0);
    let h = 1.0 / 64.0;
    let grid = Grid::new(1.0, h).unwrap();
    let xi = Segment::constant(grid, &[1.0]).unwrap();
    let t = 1.0;
    let ends: Vec<f64> = (0..4000)
        .map(|r| {
            let p = simulate_replica(&m, &xi, t, h, 5, r).unwrap();
            p.state(p.steps())[0]
        })
        .collect();
    // Euler recursion x ← (1 − h)x + √h ζ
    let k = (t / h) as i32;
    let mean = (1.0 - h).powi(k);
    let var = (1.0 - (1.0 - h).powi(2 * k)) / (1.0 - (1.0 - h).powi(2)) * h;
    let (m_hat, v_hat) = mean_var(&ends);
    assert!((m_hat - mean).abs() < 4.0 * (var / 4000.0).sqrt());
    assert_relative_eq!(v_hat, var, max_relative = 0.1);
    let ks = ks_one_sample(&ends, |x| normal_cdf((x - mean) / var.sqrt()));
    assert!(ks.p_value > 0.01, "{ks:?}");
}

#[test]
fn weighted_fit_recovers_line() {
    let x: Vec<f64> = (0..10).map(f64::from).collect();
    let y: Vec<f64> = x.iter().map(|v| 1.5 - 2.0 * v).collect();
    let fit = weighted_fit(&x, &y, &vec![0.1; 10]).unwrap();
    assert_relative_eq!(fit.slope, -2.0, epsilon = 1e-12);
    assert_relative_eq!(fit.intercept, 1.5, epsilon = 1e-12);
}

#[test]
fn validation_rejects_singular_sigma() {
    let m = FsdeModel::new(1.0, PointDrift::Zero, DelayDrift::Zero, DMatrix::zeros(1, 1)).unwrap();
    assert!(m.validate().is_err());
}
