use serde_json::json;

use super::functional::TestFunctional;
use super::report::{finite, status, CheckReport, Curve, Status};
use super::stats::{mann_kendall, weighted_fit, McEstimate};
use super::McConfig;
use crate::certify::{best_harnack_exponent, HarnackInputs};
use crate::error::{FsdeError, Result};
use crate::model::segment::steps_of;
use crate::model::{FsdeModel, Model, Segment};
use crate::simulate::{
    distance_envelope, girsanov_coupling_with, par_replicas, simulate_coupled_with, simulate_driven,
    simulate_with,
};

/// Largest power of ‖X_t‖∞² whose exponential moment we attempt.
const TREND_ALPHA: f64 = 0.01;

/// E e^{ε‖X_t‖∞²} along a grid of times: bounded in t means no significant
/// upward Mann–Kendall trend at the largest ε whose estimates stay finite.
pub fn check_exp_moment(
    m: &dyn Model,
    xi: &Segment,
    eps_grid: &[f64],
    t_grid: &[f64],
    mc: &McConfig,
) -> Result<CheckReport> {
    let dynm = m.dynamics(mc.h)?;
    let h = dynm.grid.h;
    let ks: Vec<usize> = t_grid.iter().map(|&t| steps_of("t", t, h)).collect::<Result<_>>()?;
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let samples = par_replicas(mc.n, |r| {
        let p = simulate_with(&dynm, xi, kmax as f64 * h, mc.seed, r)?;
        Ok(ks
            .iter()
            .map(|&k| {
                let s = p.segment_view(k).sup_norm();
                let e = p.state(k).iter().map(|x| x * x).sum::<f64>();
                (s * s, e)
            })
            .collect::<Vec<_>>())
    })?;

    let mut cols = vec!["t".to_string()];
    for e in eps_grid {
        cols.push(format!("sup_eps_{e}"));
        cols.push(format!("end_eps_{e}"));
    }
    let mut curve = Curve {
        columns: cols,
        rows: vec![Vec::new(); ks.len()],
    };
    for (i, &t) in t_grid.iter().enumerate() {
        curve.rows[i].push(t);
    }
    let mut per_eps = Vec::new();
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for &eps in eps_grid {
        let mut sup_series = Vec::new();
        for (i, row) in curve.rows.iter_mut().enumerate() {
            let s: Vec<f64> = samples.iter().map(|v| (eps * v[i].0).exp()).collect();
            let e: Vec<f64> = samples.iter().map(|v| (eps * v[i].1).exp()).collect();
            let (ms, me) = (McEstimate::from_samples(&s), McEstimate::from_samples(&e));
            row.push(ms.mean);
            row.push(me.mean);
            sup_series.push(ms.mean);
        }
        let finite_all = sup_series.iter().all(|x| x.is_finite());
        let mk = finite_all.then(|| mann_kendall(&sup_series));
        per_eps.push(json!({
            "eps": eps,
            "finite": finite_all,
            "mk_p_increasing": mk.map(|m| m.p_increasing),
            "note": if finite_all { "" } else { "eps too large" },
        }));
        if let Some(mk) = mk {
            if best.as_ref().is_none_or(|b| eps > b.0) {
                best = Some((eps, mk.p_increasing, sup_series));
            }
        }
    }
    let params = json!({"eps_grid": eps_grid, "t_grid": t_grid, "h": h, "n": mc.n, "seed": mc.seed});
    let report = match &best {
        None => CheckReport::new("exp_moment", params, Status::Inconclusive),
        Some((eps, p, series)) => {
            let top = series.iter().copied().fold(f64::MIN, f64::max);
            CheckReport::new("exp_moment", params, status(*p > TREND_ALPHA)).numbers(top, f64::NAN, *p)
                .details(json!({"eps": eps, "mk_p_increasing": p}))
        }
    };
    let mut report = report.curve(curve);
    report.details = json!({"largest_finite": report.details, "per_eps": per_eps});
    Ok(report)
}

fn lipschitz_inputs(m: &FsdeModel, xi: &Segment, eta: &Segment, h: f64) -> Result<(HarnackInputs, Segment, Segment)> {
    m.validate()?;
    let lip = m
        .lipschitz()
        .ok_or(FsdeError::MissingCertificate("a Lipschitz certificate (k1, k2)"))?;
    let dynm = m.dynamics(h)?;
    let xs = simulate_driven(&dynm, xi, &[])?.segment_at(0);
    let ys = simulate_driven(&dynm, eta, &[])?.segment_at(0);
    let inp = HarnackInputs::from_segments(lip.k1, lip.k2, m.sigma_inv_norm(), &xs, &ys);
    Ok((inp, xs, ys))
}

/// (P_{t+r0}f(ξ))^p ≤ P_{t+r0}f^p(η)·e^Φ with Φ at the best δ, both sides
/// estimated from independent ensembles.
pub fn check_harnack(
    m: &FsdeModel,
    f: &TestFunctional,
    p: f64,
    t: f64,
    xi: &Segment,
    eta: &Segment,
    mc: &McConfig,
) -> Result<CheckReport> {
    let (inp, xs, ys) = lipschitz_inputs(m, xi, eta, mc.h)?;
    let (delta, phi) = best_harnack_exponent(p, t, &inp)?;
    let dynm = m.dynamics(mc.h)?;
    let h = dynm.grid.h;
    let horizon = t + m.r0();
    let k = steps_of("t + r0", horizon, h)?;
    let n = mc.n as u64;
    let fx = par_replicas(mc.n, |r| Ok(f.eval(simulate_with(&dynm, &xs, horizon, mc.seed, r)?.segment_view(k))))?;
    let fy = par_replicas(mc.n, |r| {
        Ok(f.eval(simulate_with(&dynm, &ys, horizon, mc.seed, n + r)?.segment_view(k)).powf(p))
    })?;
    let ex = McEstimate::from_samples(&fx);
    let ey = McEstimate::from_samples(&fy);
    let lhs = ex.mean.powf(p);
    let sl = p * ex.mean.powf(p - 1.0) * ex.stderr;
    let w = phi.exp();
    let rhs = ey.mean * w;
    let sr = ey.stderr * w;
    let sigma = (sl * sl + sr * sr).sqrt();
    Ok(CheckReport::new(
        "harnack",
        json!({"functional": f, "p": p, "t": t, "h": h, "n": mc.n, "seed": mc.seed}),
        status(lhs <= rhs + 3.0 * sigma),
    )
    .numbers(lhs, rhs, sigma)
    .details(json!({"delta": delta, "exponent": phi, "ratio": lhs / rhs, "inputs": inp})))
}

/// Girsanov coupling diagnostics at pre-horizon t:
/// τ ≤ t + h and the distance envelope on every replica, E R = 1,
/// E R^{p/(p−1)} below its closed-form bound, and E[R f(X)] = P f(η).
pub fn check_girsanov_moments(
    m: &FsdeModel,
    f: &TestFunctional,
    p: f64,
    t: f64,
    xi: &Segment,
    eta: &Segment,
    mc: &McConfig,
) -> Result<CheckReport> {
    let (inp, xs, ys) = lipschitz_inputs(m, xi, eta, mc.h)?;
    let (delta, phi) = best_harnack_exponent(p, t, &inp)?;
    let moment_exp = phi / (p - 1.0);
    let q = p / (p - 1.0);
    let dynm = m.dynamics(mc.h)?;
    let h = dynm.grid.h;
    let k1 = inp.k1;
    let horizon = t + m.r0();
    let k = steps_of("t + r0", horizon, h)?;
    let envelope_slack = 10.0 * h * (k1.abs() + 1.0) * inp.delta0;

    struct Rep {
        r: f64,
        tau_ok: bool,
        envelope_ok: bool,
        rf: f64,
    }
    let reps = par_replicas(mc.n, |rep| {
        let run = girsanov_coupling_with(&dynm, k1, &xs, &ys, t, mc.seed, rep)?;
        let tau_ok = run.tau.is_some_and(|tau| tau <= t + h * (1.0 + 1e-9));
        let envelope_ok = run
            .distances()
            .iter()
            .enumerate()
            .all(|(j, &dd)| dd <= distance_envelope(k1, inp.delta0, t, j as f64 * h) + envelope_slack);
        let fx = f.eval(run.x_path.segment_view(k));
        Ok(Rep {
            r: run.r,
            tau_ok,
            envelope_ok,
            rf: run.r * fx,
        })
    })?;
    let n = mc.n as u64;
    let direct = par_replicas(mc.n, |r| Ok(f.eval(simulate_with(&dynm, &ys, horizon, mc.seed, n + r)?.segment_view(k))))?;

    let rs: Vec<f64> = reps.iter().map(|x| x.r).collect();
    let rq: Vec<f64> = reps.iter().map(|x| x.r.powf(q)).collect();
    let rf: Vec<f64> = reps.iter().map(|x| x.rf).collect();
    let er = McEstimate::from_samples(&rs);
    let erq = McEstimate::from_samples(&rq);
    let erf = McEstimate::from_samples(&rf);
    let ed = McEstimate::from_samples(&direct);
    let tau_fail = reps.iter().filter(|x| !x.tau_ok).count();
    let envelope_fail = reps.iter().filter(|x| !x.envelope_ok).count();
    let mean_ok = er.matches(1.0);
    let bound = moment_exp.exp();
    let moment_ok = erq.below(bound);
    let identity_sigma = (erf.stderr.powi(2) + ed.stderr.powi(2)).sqrt();
    let identity_ok = (erf.mean - ed.mean).abs() <= 3.0 * identity_sigma;
    let pass = tau_fail == 0 && envelope_fail == 0 && mean_ok && moment_ok && identity_ok;
    Ok(CheckReport::new(
        "girsanov_moments",
        json!({"functional": f, "p": p, "t": t, "h": h, "n": mc.n, "seed": mc.seed}),
        status(pass),
    )
    .numbers(erq.mean, bound, erq.stderr)
    .details(json!({
        "tau_beyond_t_plus_h": tau_fail,
        "envelope_violations": envelope_fail,
        "mean_r": er,
        "mean_r_ok": mean_ok,
        "moment_r_q": erq,
        "moment_bound_log": moment_exp,
        "moment_ok": moment_ok,
        "delta": delta,
        "weighted_mean": erf,
        "direct_mean": ed,
        "identity_ok": identity_ok,
    })))
}

/// 2E|R − 1| for couplings restarted from the time-t segments of a
/// synchronous pair: an upper bound on the total-variation distance at
/// t + t_c + r0, expected to decay at least at rate λ/2.
pub fn tv_bound_estimate(
    m: &FsdeModel,
    xi: &Segment,
    eta: &Segment,
    t_grid: &[f64],
    t_c: f64,
    mc: &McConfig,
) -> Result<CheckReport> {
    let (inp0, xs, ys) = lipschitz_inputs(m, xi, eta, mc.h)?;
    let lambda = m
        .dissipativity()
        .ok_or(FsdeError::MissingCertificate("a dissipativity certificate"))?
        .rate(m.r0());
    let dynm = m.dynamics(mc.h)?;
    let h = dynm.grid.h;
    let ks: Vec<usize> = t_grid.iter().map(|&t| steps_of("t", t, h)).collect::<Result<_>>()?;
    let kmax = ks.iter().copied().max().unwrap_or(0);
    let nt = ks.len() as u64;
    let per = par_replicas(mc.n, |r| {
        let (x, y) = simulate_coupled_with(&dynm, &xs, &ys, kmax as f64 * h, mc.seed, r)?;
        let mut out = Vec::with_capacity(ks.len());
        for (i, &k) in ks.iter().enumerate() {
            let (a, b) = (x.segment_at(k), y.segment_at(k));
            let inp = HarnackInputs::from_segments(inp0.k1, inp0.k2, inp0.sigma_inv_norm, &a, &b);
            let c1 = best_harnack_exponent(2.0, t_c, &inp)?.1;
            let run = girsanov_coupling_with(&dynm, inp0.k1, &a, &b, t_c, mc.seed ^ 0x5bd1_e995, r * nt + i as u64)?;
            out.push(((run.r - 1.0).abs(), run.r * run.r, c1.exp()));
        }
        Ok(out)
    })?;

    let mut curve = Curve::new(&["t", "tv_bound", "tv_stderr", "mean_r_sq", "mean_exp_c1"]);
    let (mut ts, mut ys_log, mut sds) = (Vec::new(), Vec::new(), Vec::new());
    let mut moment_ok = true;
    for (i, &t) in t_grid.iter().enumerate() {
        let a: Vec<f64> = per.iter().map(|v| 2.0 * v[i].0).collect();
        let r2: Vec<f64> = per.iter().map(|v| v[i].1).collect();
        let c: Vec<f64> = per.iter().map(|v| v[i].2).collect();
        let (ea, er2, ec) = (
            McEstimate::from_samples(&a),
            McEstimate::from_samples(&r2),
            McEstimate::from_samples(&c),
        );
        moment_ok &= er2.mean <= ec.mean + 3.0 * (er2.stderr.powi(2) + ec.stderr.powi(2)).sqrt();
        curve.push(vec![t, ea.mean, ea.stderr, er2.mean, ec.mean]);
        if ea.mean > 3.0 * ea.stderr && ea.mean > 0.0 {
            ts.push(t);
            ys_log.push(ea.mean.ln());
            sds.push(ea.stderr / ea.mean);
        }
    }
    let params = json!({"t_grid": t_grid, "t_c": t_c, "h": h, "n": mc.n, "seed": mc.seed});
    let fit = (ts.len() >= 2).then(|| weighted_fit(&ts, &ys_log, &sds)).flatten();
    let report = match fit {
        None => CheckReport::new("tv_bound", params, if moment_ok { Status::Inconclusive } else { Status::Fail }),
        Some(fit) => {
            let rate = -fit.slope;
            let need = lambda / 2.0;
            let ok = rate >= need - 2.0 * fit.slope_stderr && moment_ok;
            CheckReport::new("tv_bound", params, status(ok)).numbers(rate, need, fit.slope_stderr)
        }
    };
    Ok(report
        .details(json!({"rate_certificate": finite(lambda), "moment_ok": moment_ok, "fit_points": ts.len()}))
        .curve(curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DelayDrift, Grid, PointDrift};
    use nalgebra::DMatrix;

    fn model() -> FsdeModel {
        FsdeModel::new(
            1.0,
            PointDrift::Linear(DMatrix::from_element(1, 1, -1.0)),
            DelayDrift::TanhDelay(vec![0.1]),
            DMatrix::identity(1, 1),
        )
        .unwrap()
    }

    fn seg(c: f64) -> Segment {
        Segment::constant(Grid::new(1.0, 1.0 / 64.0).unwrap(), &[c]).unwrap()
    }

    #[test]
    fn exp_moment_bounded_in_time() {
        let mc = McConfig { n: 400, h: 1.0 / 64.0, seed: 1 };
        let t: Vec<f64> = (1..=8).map(f64::from).collect();
        let r = check_exp_moment(&model(), &seg(1.0), &[0.05, 0.1], &t, &mc).unwrap();
        assert!(r.pass, "{:?}", r.details);
        assert_eq!(r.curve.as_ref().unwrap().rows.len(), 8);
    }

    #[test]
    fn harnack_inequality_holds() {
        let mc = McConfig { n: 2000, h: 1.0 / 64.0, seed: 2 };
        let f = TestFunctional::Tanh { v: vec![1.0] };
        let r = check_harnack(&model(), &f, 2.0, 1.0, &seg(1.0), &seg(-0.5), &mc).unwrap();
        assert!(r.pass, "{:?}", r);
        assert!(r.details["ratio"].as_f64().unwrap() < 1.0);
    }

    #[test]
    fn girsanov_weight_moments() {
        let mc = McConfig { n: 4000, h: 1.0 / 64.0, seed: 4 };
        let f = TestFunctional::Cosine { v: vec![1.5], theta: -0.5 };
        let r = check_girsanov_moments(&model(), &f, 2.0, 1.0, &seg(0.5), &seg(-0.5), &mc).unwrap();
        assert!(r.pass, "{:?}", r.details);
        assert_eq!(r.details["tau_beyond_t_plus_h"], 0);
        assert_eq!(r.details["envelope_violations"], 0);
    }

    #[test]
    fn tv_bound_decays() {
        let mc = McConfig { n: 1000, h: 1.0 / 32.0, seed: 5 };
        let r = tv_bound_estimate(&model(), &seg(2.0), &seg(-2.0), &[0.0, 1.0, 2.0, 3.0], 1.0, &mc).unwrap();
        assert_ne!(r.status, Status::Fail, "{:?}", r);
        let rows = &r.curve.as_ref().unwrap().rows;
        assert!(rows[3][1] < rows[0][1]);
    }

    #[test]
    fn missing_certificate_reported() {
        let m = FsdeModel::new(
            1.0,
            PointDrift::Custom { f: std::sync::Arc::new(|x: &[f64], o: &mut [f64]| o[0] = -x[0]), k1: None },
            DelayDrift::Zero,
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let mc = McConfig { n: 4, h: 1.0 / 64.0, seed: 0 };
        let f = TestFunctional::Constant { c: 1.0 };
        assert!(matches!(
            check_harnack(&m, &f, 2.0, 1.0, &seg(0.0), &seg(1.0), &mc),
            Err(FsdeError::MissingCertificate(_))
        ));
    }
}
