use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::{status, CheckReport, Curve, Status};
use super::stats::McEstimate;
use super::McConfig;
use crate::error::{FsdeError, Result};
use crate::model::segment::steps_of;
use crate::model::{DissipativityCert, Model, Segment};
use crate::simulate::{
    par_replicas, simulate_coupled_with, simulate_driven, simulate_with, Increments, PathRecord,
};

/// out[k] = max(v[k..k+w]).
pub fn window_max(v: &[f64], w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len().saturating_sub(w - 1));
    let mut dq: VecDeque<usize> = VecDeque::new();
    for i in 0..v.len() {
        while dq.back().is_some_and(|&j| v[j] <= v[i]) {
            dq.pop_back();
        }
        dq.push_back(i);
        if dq[0] + w <= i {
            dq.pop_front();
        }
        if i + 1 >= w {
            out.push(v[dq[0]]);
        }
    }
    out
}

fn sq_dists(a: &PathRecord, b: &PathRecord) -> Vec<f64> {
    let d = a.d;
    a.states()
        .chunks(d)
        .zip(b.states().chunks(d))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum())
        .collect()
}

/// Multiplier absorbing the O(h) Euler error in pathwise bounds.
pub fn discretisation_slack(cert: &DissipativityCert, h: f64) -> f64 {
    1.0 + 10.0 * h * (cert.lambda1 + cert.lambda2 + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub replica: u64,
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Pathwise ‖X_t − Y_t‖∞² ≤ ‖ξ − η‖∞²e^{λ₁r₀ − λt} under synchronous coupling,
/// at every grid time of every replica.
pub fn check_contraction(
    m: &dyn Model,
    cert: DissipativityCert,
    xi: &Segment,
    eta: &Segment,
    horizon: f64,
    mc: &McConfig,
) -> Result<CheckReport> {
    let r0 = m.r0();
    let lambda = cert.rate(r0);
    if !(lambda > 0.0) {
        return Err(FsdeError::InvalidParameter {
            name: "lambda",
            value: lambda,
            constraint: "contraction needs a positive rate",
        });
    }
    let dynm = m.dynamics(mc.h)?;
    let h = dynm.grid.h;
    let n = dynm.grid.n;
    let slack = discretisation_slack(&cert, h);
    let steps = steps_of("T", horizon, h)?;
    let rhs: Vec<f64> = (0..=steps)
        .map(|k| (cert.lambda1 * r0 - lambda * k as f64 * h).exp() * slack)
        .collect();

    let per: Vec<(Vec<f64>, Vec<Witness>)> = par_replicas(mc.n, |r| {
        let (x, y) = simulate_coupled_with(&dynm, xi, eta, horizon, mc.seed, r)?;
        let sup = window_max(&sq_dists(&x, &y), n + 1);
        let sup0 = sup[0];
        let mut ratios = Vec::with_capacity(sup.len());
        let mut wit = Vec::new();
        for (k, &lhs) in sup.iter().enumerate() {
            let bound = sup0 * rhs[k];
            ratios.push(if bound > 0.0 { lhs / bound } else { 0.0 });
            if lhs > bound {
                wit.push(Witness {
                    replica: r,
                    t: k as f64 * h,
                    lhs,
                    rhs: bound,
                });
            }
        }
        Ok((ratios, wit))
    })?;

    let mut curve = Curve::new(&["t", "max_ratio", "envelope"]);
    for k in 0..=steps {
        let worst = per.iter().map(|p| p.0[k]).fold(0.0, f64::max);
        curve.push(vec![k as f64 * h, worst, rhs[k] / slack]);
    }
    let worst = per
        .iter()
        .flat_map(|p| p.0.iter().copied())
        .fold(0.0, f64::max);
    let witnesses: Vec<Witness> = per.iter().flat_map(|p| p.1.iter().copied()).collect();
    let violating = per.iter().filter(|p| !p.1.is_empty()).count();
    Ok(CheckReport::new(
        "contraction",
        json!({"lambda1": cert.lambda1, "lambda2": cert.lambda2, "T": horizon, "h": h, "n": mc.n, "seed": mc.seed}),
        status(witnesses.is_empty()),
    )
    .numbers(worst, 1.0, 0.0)
    .details(json!({
        "rate": lambda,
        "slack": slack,
        "violating_replicas": violating,
        "violations": witnesses.len(),
        "witnesses": witnesses.iter().take(5).collect::<Vec<_>>(),
    }))
    .curve(curve))
}

/// f(ξ) = g(ξ(−r0)): for t ≤ r0 every replica returns g(ξ(t − r0)) exactly;
/// for t > r0 the noise enters and the values spread.
pub fn check_memory_passthrough(
    m: &dyn Model,
    g: &(dyn Fn(&[f64]) -> f64 + Sync),
    xi: &Segment,
    t: f64,
    mc: &McConfig,
) -> Result<CheckReport> {
    let dynm = m.dynamics(mc.h)?;
    let h = dynm.grid.h;
    let k = steps_of("t", t, h)?;
    let init = simulate_driven(&dynm, xi, &[])?;
    let exact_regime = k <= dynm.grid.n;
    let values = par_replicas(mc.n, |r| {
        let p = simulate_with(&dynm, xi, t, mc.seed, r)?;
        Ok(g(p.segment_view(k).oldest()))
    })?;
    let est = McEstimate::from_samples(&values);
    let var = est.stderr * est.stderr * values.len() as f64;
    let params = json!({"t": t, "h": h, "n": mc.n, "seed": mc.seed});
    if exact_regime {
        let want = g(init.state_at_index(k));
        let exact = values.iter().all(|v| v.to_bits() == want.to_bits());
        Ok(CheckReport::new("memory_passthrough", params, status(exact))
            .numbers(est.mean, want, var.sqrt())
            .details(json!({"regime": "exact", "variance": var, "distinct_values": distinct(&values)})))
    } else {
        Ok(CheckReport::new("memory_passthrough", params, status(var > 0.0))
            .numbers(est.mean, f64::NAN, var.sqrt())
            .details(json!({"regime": "memory_exhausted", "variance": var, "distinct_values": distinct(&values)})))
    }
}

fn distinct(v: &[f64]) -> usize {
    let mut b: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
    b.sort_unstable();
    b.dedup();
    b.len()
}

/// Restart coupling: X from ξ on [0, t₂] and X̄ restarted from ξ at t₂ − t₁
/// with the same noise satisfy
/// ‖X_{t₂} − X̄_{t₂}‖∞² ≤ e^{λ₁r₀}‖X_{t₂−t₁} − ξ‖∞²e^{−λt₁}.
pub fn check_restart_coupling(
    m: &dyn Model,
    cert: DissipativityCert,
    xi: &Segment,
    t1: f64,
    t2: f64,
    mc: &McConfig,
) -> Result<CheckReport> {
    if !(t2 > t1 && t1 > 0.0) {
        return Err(FsdeError::InvalidParameter {
            name: "t1",
            value: t1,
            constraint: "need 0 < t1 < t2",
        });
    }
    let r0 = m.r0();
    let lambda = cert.rate(r0);
    let dynm = m.dynamics(mc.h)?;
    let (h, d) = (dynm.grid.h, dynm.d);
    let s2 = steps_of("t2", t2, h)?;
    let s1 = steps_of("t1", t1, h)?;
    let shift = s2 - s1;
    let slack = discretisation_slack(&cert, h);
    let factor = (cert.lambda1 * r0 - lambda * t1).exp() * slack;
    let init = simulate_driven(&dynm, xi, &[])?;
    let xi_vals = init.segment_view(0);
    let pairs = par_replicas(mc.n, |r| {
        let mut dw = vec![0.0; s2 * d];
        Increments::new(mc.seed, r, h).fill(&mut dw);
        let x = simulate_driven(&dynm, xi, &dw)?;
        let xb = simulate_driven(&dynm, xi, &dw[shift * d..])?;
        let lhs = x.segment_view(s2).sup_dist(&xb.segment_view(s1));
        let start = x.segment_view(shift).sup_dist(&xi_vals);
        Ok((lhs * lhs, factor * start * start))
    })?;
    let violations = pairs.iter().filter(|(l, r)| l > r).count();
    let lhs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let rhs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let el = McEstimate::from_samples(&lhs);
    let er = McEstimate::from_samples(&rhs);
    let diff: Vec<f64> = pairs.iter().map(|(l, r)| l - r).collect();
    let mean_ok = McEstimate::from_samples(&diff).below(0.0);
    Ok(CheckReport::new(
        "restart_coupling",
        json!({"t1": t1, "t2": t2, "h": h, "n": mc.n, "seed": mc.seed}),
        if violations == 0 && mean_ok { Status::Pass } else { Status::Fail },
    )
    .numbers(el.mean, er.mean, el.stderr)
    .details(json!({"pathwise_violations": violations, "rate": lambda, "slack": slack})))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DelayDrift, FsdeModel, Grid, PointDrift};
    use nalgebra::DMatrix;

    fn model(b: DelayDrift) -> FsdeModel {
        FsdeModel::new(1.0, PointDrift::Linear(DMatrix::from_element(1, 1, -1.0)), b, DMatrix::identity(1, 1))
            .unwrap()
    }

    fn seg(f: impl Fn(f64) -> f64) -> Segment {
        Segment::from_fn(Grid::new(1.0, 1.0 / 64.0).unwrap(), 1, |t| vec![f(t)]).unwrap()
    }

    const MC: McConfig = McConfig { n: 40, h: 1.0 / 64.0, seed: 3 };

    #[test]
    fn ou_contraction_tight_certificate() {
        let m = model(DelayDrift::Zero);
        let (xi, eta) = (seg(|t| 2.0 + t), seg(|_| -1.0));
        let ok = check_contraction(&m, DissipativityCert::new(2.0, 0.0).unwrap(), &xi, &eta, 4.0, &MC).unwrap();
        assert!(ok.pass, "{:?}", ok.details);
        let bad = check_contraction(&m, DissipativityCert::new(4.0, 0.0).unwrap(), &xi, &eta, 4.0, &MC).unwrap();
        assert_eq!(bad.status, Status::Fail);
        assert!(bad.details["violations"].as_u64().unwrap() > 0);
    }

    #[test]
    fn memory_passthrough_regimes() {
        let m = model(DelayDrift::TanhDelay(vec![0.1]));
        let xi = seg(|t| (3.0 * t).sin());
        let g = |x: &[f64]| x[0];
        let exact = check_memory_passthrough(&m, &g, &xi, 0.5, &MC).unwrap();
        assert!(exact.pass);
        assert_eq!(exact.details["distinct_values"], 1);
        assert_eq!(exact.bound, Some((-1.5f64).sin()));
        let mixed = check_memory_passthrough(&m, &g, &xi, 1.5, &MC).unwrap();
        assert!(mixed.pass);
        assert!(mixed.details["distinct_values"].as_u64().unwrap() > 1);
    }

    #[test]
    fn restart_coupling_holds() {
        let m = model(DelayDrift::TanhDelay(vec![0.1]));
        let cert = m.dissipativity().unwrap();
        let r = check_restart_coupling(&m, cert, &seg(|t| 1.0 + t), 1.0, 3.0, &MC).unwrap();
        assert!(r.pass, "{:?}", r);
        assert!(matches!(
            check_restart_coupling(&m, cert, &seg(|_| 0.0), 2.0, 1.0, &MC),
            Err(FsdeError::InvalidParameter { .. })
        ));
    }

    #[test]
    fn window_max_brute_force() {
        let v = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0];
        for w in 1..=v.len() {
            let fast = window_max(&v, w);
            let slow: Vec<f64> = v.windows(w).map(|s| s.iter().copied().fold(f64::MIN, f64::max)).collect();
            assert_eq!(fast, slow, "w={w}");
        }
    }
}
