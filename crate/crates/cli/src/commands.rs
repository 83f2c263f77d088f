use std::fmt::Write as _;

use fsde_core::certify::{
    check_cor12, rate_lipschitz_split, rate_semi_linear_special, rate_thm11, rate_thm13, EmpiricalCk, PpCk, RateCert, SEMI_LINEAR_GRID,
};
use fsde_core::model::{DelayDrift, Model, PointDrift};
use fsde_core::simulate::{par_replicas, simulate_with};
use fsde_core::spectral::{gamma_solve, lambda0, pp_bound, RootSearchConfig};
use fsde_core::verify::{
    self, check_contraction, check_exp_moment, check_girsanov_moments, check_harnack, check_hyperbound,
    check_l2_decay, check_marginal_ks, check_memory_passthrough, check_restart_coupling, check_shift_invariance,
    linear_endpoint_oracle, mean_var, sample_invariant, tv_bound_estimate, CheckReport, InvariantEnsemble, McConfig,
    Status, TestFunctional,
};
use serde_json::{json, Value};

use crate::budget::Budget;
use crate::config::{BuiltModel, RunConfig};
use crate::error::CliError;

/// Resolved inputs shared by every command.
pub struct Context {
    pub cfg: RunConfig,
    pub built: BuiltModel,
    pub seed: u64,
    pub budget: Budget,
    pub h: f64,
    pub n: usize,
    pub checks: Vec<String>,
}

/// What a command produced: JSON result, CSV side files and a console summary.
pub struct Outcome {
    pub result: Value,
    pub exit_code: i32,
    pub files: Vec<(String, String)>,
    pub text: String,
}

pub const ALL_CHECKS: &[&str] = &[
    "contraction",
    "memory_passthrough",
    "restart_coupling",
    "exp_moment",
    "harnack",
    "girsanov_moments",
    "tv_bound",
    "stationary_marginal",
    "shift_invariance",
    "l2_decay",
    "hyperbound",
];

impl Context {
    pub fn new(cfg: RunConfig, seed: Option<u64>, budget: Budget, checks: Vec<String>) -> Result<Self, CliError> {
        let built = cfg.build_model()?;
        let r0 = cfg.model.r0;
        let h = cfg.sim.h.unwrap_or(r0 / budget.cells() as f64);
        let n = cfg.sim.n.unwrap_or(budget.replicas());
        let seed = seed.unwrap_or(cfg.sim.seed);
        let checks = if checks.is_empty() { cfg.verify.checks.clone() } else { checks };
        for c in &checks {
            if !ALL_CHECKS.contains(&c.as_str()) {
                return Err(CliError::Config(format!("unknown check '{c}'; known: {}", ALL_CHECKS.join(", "))));
            }
        }
        Ok(Self {
            cfg,
            built,
            seed,
            budget,
            h,
            n,
            checks,
        })
    }

    fn r0(&self) -> f64 {
        self.cfg.model.r0
    }

    fn root_config(&self) -> RootSearchConfig {
        RootSearchConfig {
            tol: self.cfg.spectral.tol,
            r_max: self.cfg.spectral.r_max,
            ..RootSearchConfig::default()
        }
    }

    fn mc(&self) -> McConfig {
        McConfig {
            n: self.n,
            h: self.h,
            seed: self.seed,
        }
    }

    /// Certified rate λ from the dissipativity certificate, when positive.
    fn rate(&self) -> Option<f64> {
        let c = self.built.fsde.dissipativity()?;
        let l = c.rate(self.r0());
        (l > 0.0).then_some(l)
    }

    /// Scalar dX = aX dt + σ dB with a < 0: (a, σ).
    fn scalar_ou(&self) -> Option<(f64, f64)> {
        let m = &self.built.fsde;
        if m.dim() != 1 || self.built.semi_linear.is_some() || !matches!(m.b(), DelayDrift::Zero) {
            return None;
        }
        match m.z() {
            PointDrift::Linear(a) if a[(0, 0)] < 0.0 => Some((a[(0, 0)], m.sigma()[(0, 0)])),
            _ => None,
        }
    }

    /// Linear Z and no delay: P_t of a linear functional is explicit.
    fn linear_no_delay(&self) -> Option<nalgebra::DMatrix<f64>> {
        let m = &self.built.fsde;
        if self.built.semi_linear.is_some() || !matches!(m.b(), DelayDrift::Zero) {
            return None;
        }
        match m.z() {
            PointDrift::Linear(a) => Some(a.clone()),
            _ => None,
        }
    }

    fn supported(&self, check: &str) -> bool {
        let m = &self.built.fsde;
        match check {
            "contraction" | "restart_coupling" | "exp_moment" | "shift_invariance" | "l2_decay" | "hyperbound" => {
                self.rate().is_some()
            }
            "harnack" | "girsanov_moments" => m.lipschitz().is_some() && m.validate().is_ok(),
            "tv_bound" => self.rate().is_some() && m.lipschitz().is_some() && m.validate().is_ok(),
            "stationary_marginal" => self.scalar_ou().is_some(),
            _ => true,
        }
    }

    pub fn selected_checks(&self) -> Vec<String> {
        if self.checks.is_empty() {
            ALL_CHECKS.iter().filter(|c| self.supported(c)).map(|c| c.to_string()).collect()
        } else {
            self.checks.clone()
        }
    }
}

fn cert_row(c: &RateCert) -> String {
    format!(
        "{:<22} {:<10} {:>14.6e} {:>14.6e}  {}",
        c.theorem.label(),
        if c.applicable { "yes" } else { "no" },
        c.lambda,
        c.optimizer,
        c.ck_source.map_or("-", |s| s.label())
    )
}

pub fn certify(ctx: &Context) -> Result<Outcome, CliError> {
    let m = &ctx.built.fsde;
    let r0 = ctx.r0();
    let mut certs = Vec::new();
    let mut result = serde_json::Map::new();
    let mut text = String::new();
    if let Some(c) = m.dissipativity() {
        certs.push(rate_thm11(c.lambda1, c.lambda2, r0));
    }
    if let Some(l) = m.lipschitz() {
        if l.k1 > 0.0 {
            let cor = check_cor12(l.k1, l.k2, r0);
            let _ = writeln!(text, "lipschitz-split margin: {:.6e} (k2^2 = {:.6e}, bound {:.6e})", cor.margin, l.k2 * l.k2, cor.rhs);
            result.insert("lipschitz_split".into(), json!(cor));
            certs.push(rate_lipschitz_split(l.k1, l.k2, r0));
        }
    }
    if let Some(nu) = &ctx.built.nu {
        let root = lambda0(nu, &ctx.root_config())?;
        let _ = writeln!(text, "spectral abscissa: {:.10}", root.lambda0);
        let k2 = ctx.built.k2_rest;
        if let Some(c) = rate_semi_linear_special(nu, root.lambda0, k2, SEMI_LINEAR_GRID)? {
            certs.push(c);
        }
        if k2 > 0.0 && root.lambda0 < 0.0 {
            let table = gamma_solve(nu, ctx.cfg.spectral.horizon * r0, ctx.h)?;
            certs.push(rate_thm13(root.lambda0, k2, r0, &EmpiricalCk(&table), SEMI_LINEAR_GRID)?);
            let pp = PpCk {
                nu,
                lambda0: root.lambda0,
                n_grid: ctx.cfg.spectral.pp_grid,
            };
            certs.push(rate_thm13(root.lambda0, k2, r0, &pp, SEMI_LINEAR_GRID)?);
        }
        result.insert("lambda0".into(), json!(root));
    }
    let applicable = certs.iter().any(|c| c.applicable);
    let mut table = format!("{:<22} {:<10} {:>14} {:>14}  {}\n", "theorem", "applicable", "lambda", "optimizer", "ck_source");
    for c in &certs {
        table.push_str(&cert_row(c));
        table.push('\n');
    }
    text.insert_str(0, &table);
    if certs.is_empty() {
        text.push_str("no certificate can be formed from this model\n");
    }
    result.insert("certificates".into(), json!(certs));
    result.insert("any_applicable".into(), json!(applicable));
    Ok(Outcome {
        result: Value::Object(result),
        exit_code: if applicable { 0 } else { 1 },
        files: Vec::new(),
        text,
    })
}

pub fn spectral(ctx: &Context) -> Result<Outcome, CliError> {
    let nu = ctx
        .built
        .nu
        .as_ref()
        .ok_or_else(|| CliError::Config("spectral analysis needs a linear model or a [measure] section".into()))?;
    let r0 = ctx.r0();
    let root = lambda0(nu, &ctx.root_config())?;
    let l0 = root.lambda0;
    let table = gamma_solve(nu, ctx.cfg.spectral.horizon * r0, ctx.h)?;
    let lambda = ctx.cfg.spectral.lambda.unwrap_or(if l0 < 0.0 { l0 / 2.0 } else { l0 + 1.0 });
    let pp = pp_bound(nu, l0, lambda, ctx.cfg.spectral.pp_grid)?;

    let mut ck_csv = String::from("k,ck_empirical,ck_pp\n");
    let mut ck = Vec::new();
    if l0 < 0.0 {
        for i in 0..16 {
            let k = -l0 * i as f64 / 16.0;
            let emp = table.ck_empirical(k).ck;
            let ppk = pp_bound(nu, l0, -k, ctx.cfg.spectral.pp_grid)?.bound;
            let _ = writeln!(ck_csv, "{k:.12e},{emp:.12e},{ppk:.12e}");
            ck.push(json!({"k": k, "ck_empirical": emp, "ck_pp": ppk}));
        }
    }
    let steps = (ctx.cfg.spectral.horizon.floor() as usize).max(1);
    let samples: Vec<Value> = (0..=steps)
        .filter_map(|j| {
            let t = j as f64 * r0;
            table.at(t).map(|g| json!({"t": t, "gamma": g.transpose().as_slice().to_vec()}))
        })
        .collect();
    let worst_ratio = (table.n..table.len())
        .map(|i| table.norm_at_index(i) / (pp.bound * (lambda * table.time(i)).exp()))
        .fold(0.0, f64::max);
    let text = format!(
        "lambda0 = {:.10} ({} root, multiplicity {})\nexplicit bound at lambda = {:.6}: {:.6e} (rho = {:.6e})\nmax |Gamma(t)| / (bound e^(lambda t)) over the table: {:.6e}\n",
        l0, root.method, root.multiplicity, lambda, pp.bound, pp.rho_lambda, worst_ratio
    );
    Ok(Outcome {
        result: json!({
            "lambda0": root,
            "pp_bound": pp,
            "pp_table_ratio_max": worst_ratio,
            "ck": ck,
            "gamma_horizon": table.horizon,
            "gamma_h": table.h,
            "gamma_samples": samples,
        }),
        exit_code: 0,
        files: vec![("gamma.csv".into(), table.to_csv()), ("ck.csv".into(), ck_csv)],
        text,
    })
}

pub fn simulate(ctx: &Context) -> Result<Outcome, CliError> {
    let m = &ctx.built.fsde;
    let dynm = m.dynamics(ctx.h)?;
    let xi = ctx.cfg.segment(&ctx.cfg.sim.xi, ctx.h)?;
    let horizon = ctx.cfg.sim.horizon;
    let first = simulate_with(&dynm, &xi, horizon, ctx.seed, 0)?;
    let ends = par_replicas(ctx.n, |r| Ok(simulate_with(&dynm, &xi, horizon, ctx.seed, r)?.state(first.steps()).to_vec()))?;
    let d = m.dim();
    let (mut means, mut vars) = (Vec::new(), Vec::new());
    for c in 0..d {
        let col: Vec<f64> = ends.iter().map(|e| e[c]).collect();
        let (mu, v) = mean_var(&col);
        means.push(mu);
        vars.push(v);
    }
    let text = format!(
        "{} replicas to T = {} with h = {}; endpoint mean {:?}, variance {:?}\n",
        ctx.n, horizon, first.h(), means, vars
    );
    Ok(Outcome {
        result: json!({
            "horizon": horizon,
            "h": first.h(),
            "steps": first.steps(),
            "replicas": ctx.n,
            "endpoint_mean": means,
            "endpoint_variance": vars,
            "replica0_endpoint": first.state(first.steps()),
        }),
        exit_code: 0,
        files: vec![("path.csv".into(), first.to_csv())],
        text,
    })
}

fn ensemble(ctx: &Context) -> Result<InvariantEnsemble, CliError> {
    let xi = ctx.cfg.segment(&ctx.cfg.sim.xi, ctx.h)?;
    let v = &ctx.cfg.verify;
    Ok(sample_invariant(
        &ctx.built.fsde,
        &xi,
        v.burn_in,
        v.spacing,
        ctx.budget.ensemble(),
        ctx.h,
        ctx.seed,
    )?)
}

fn unit_linear(d: usize, c: f64) -> TestFunctional {
    let mut v = vec![0.0; d];
    v[0] = 1.0;
    TestFunctional::Linear { v, theta: 0.0, c }
}

fn run_check(ctx: &Context, name: &str, ens: &mut Option<InvariantEnsemble>) -> Result<Vec<CheckReport>, CliError> {
    let m = &ctx.built.fsde;
    let v = &ctx.cfg.verify;
    let r0 = ctx.r0();
    let d = m.dim();
    let xi = ctx.cfg.segment(&ctx.cfg.sim.xi, ctx.h)?;
    let eta = ctx.cfg.segment(&ctx.cfg.sim.eta, ctx.h)?;
    let mc = ctx.mc();
    let need_cert = || {
        m.dissipativity()
            .ok_or(CliError::Model(fsde_core::FsdeError::MissingCertificate("a dissipativity certificate")))
    };
    let need_rate = || {
        ctx.rate().ok_or_else(|| CliError::Config(format!("check '{name}' needs a positive certified rate")))
    };
    let get_ens = |ens: &mut Option<InvariantEnsemble>| -> Result<InvariantEnsemble, CliError> {
        if ens.is_none() {
            *ens = Some(ensemble(ctx)?);
        }
        Ok(ens.clone().expect("just set"))
    };
    Ok(match name {
        "contraction" => vec![check_contraction(m, need_cert()?, &xi, &eta, v.contraction_horizon, &mc)?],
        "memory_passthrough" => {
            let g = |x: &[f64]| x[0];
            let h = m.dynamics(ctx.h)?.grid.h;
            [h, r0 / 2.0, r0, r0 + h]
                .iter()
                .map(|&t| check_memory_passthrough(m, &g, &xi, t, &mc))
                .collect::<Result<_, _>>()?
        }
        "restart_coupling" => {
            let [t1, t2] = v.restart;
            vec![check_restart_coupling(m, need_cert()?, &xi, t1, t2, &mc)?]
        }
        "exp_moment" => vec![check_exp_moment(m, &xi, &v.eps, &v.moment_times, &mc)?],
        "harnack" => {
            let mut out = Vec::new();
            for f in TestFunctional::default_set(d, r0) {
                for &p in &v.p {
                    out.push(check_harnack(m, &f, p, v.t, &xi, &eta, &mc)?);
                }
            }
            out
        }
        "girsanov_moments" => {
            let f = TestFunctional::Cosine { v: vec![1.5; d], theta: -0.5 * r0 };
            vec![check_girsanov_moments(m, &f, 2.0, v.t, &xi, &eta, &mc)?]
        }
        "tv_bound" => vec![tv_bound_estimate(m, &xi, &eta, &v.tv_times, v.t, &mc)?],
        "stationary_marginal" => {
            let (a, s) = ctx
                .scalar_ou()
                .ok_or_else(|| CliError::Config("stationary_marginal needs a scalar linear model without delay".into()))?;
            let sd = (s * s / (-2.0 * a)).sqrt();
            let e = get_ens(ens)?;
            vec![check_marginal_ks(&e, 0, 0.0, |x| verify::normal_cdf(x / sd), v.alpha)?]
        }
        "shift_invariance" => {
            need_rate()?;
            let e = get_ens(ens)?;
            let thetas: Vec<f64> = (0..5).map(|i| -r0 * i as f64 / 4.0).collect();
            vec![check_shift_invariance(m, &e, r0, &thetas, v.alpha, ctx.h)?]
        }
        "l2_decay" => {
            let lambda = match v.lambda {
                Some(l) => l,
                None => need_rate()?,
            };
            let e = get_ens(ens)?;
            let f = unit_linear(d, 0.0);
            match ctx.linear_no_delay() {
                Some(a) => {
                    let o = linear_endpoint_oracle(a, unit_vec(d), 0.0);
                    vec![check_l2_decay(m, &e, &f, &v.decay_times, lambda, &mc, Some(&o))?]
                }
                None => {
                    let (outer, inner) = ctx.budget.nested();
                    let sub = truncate(&e, outer);
                    let nmc = McConfig { n: inner, ..mc };
                    vec![check_l2_decay(m, &sub, &f, &v.decay_times, lambda, &nmc, None)?]
                }
            }
        }
        "hyperbound" => {
            need_rate()?;
            let e = get_ens(ens)?;
            let mean = e.segments.iter().map(|s| s.endpoint()[0]).sum::<f64>() / e.len() as f64;
            let f = unit_linear(d, -mean);
            match ctx.linear_no_delay() {
                Some(a) => {
                    let o = linear_endpoint_oracle(a, unit_vec(d), -mean);
                    vec![check_hyperbound(m, &e, &f, v.hyper_t, &mc, Some(&o))?]
                }
                None => {
                    let (outer, inner) = ctx.budget.nested();
                    let sub = truncate(&e, outer);
                    let nmc = McConfig { n: inner, ..mc };
                    vec![check_hyperbound(m, &sub, &f, v.hyper_t, &nmc, None)?]
                }
            }
        }
        other => return Err(CliError::Config(format!("unknown check '{other}'"))),
    })
}

fn unit_vec(d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[0] = 1.0;
    v
}

fn truncate(e: &InvariantEnsemble, n: usize) -> InvariantEnsemble {
    InvariantEnsemble {
        segments: e.segments.iter().take(n).cloned().collect(),
        ..e.clone()
    }
}

pub fn verify(ctx: &Context) -> Result<Outcome, CliError> {
    let checks = ctx.selected_checks();
    let mut ens = None;
    let mut reports = Vec::new();
    let mut files = Vec::new();
    let mut text = format!("{:<22} {:<13} {:>14} {:>14} {:>12}\n", "check", "status", "estimate", "bound", "sigma");
    for name in &checks {
        let rs = run_check(ctx, name, &mut ens)?;
        let many = rs.len() > 1;
        for (i, mut r) in rs.into_iter().enumerate() {
            if let Some(curve) = r.curve.take() {
                let file = if many { format!("verify_{name}_{i}.csv") } else { format!("verify_{name}.csv") };
                files.push((file, curve.to_csv()));
            }
            let num = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6e}"));
            let _ = writeln!(
                text,
                "{:<22} {:<13} {:>14} {:>14} {:>12}",
                r.check,
                format!("{:?}", r.status).to_lowercase(),
                num(r.estimate),
                num(r.bound),
                num(r.sigma)
            );
            reports.push(r);
        }
    }
    let failed = reports.iter().filter(|r| r.status == Status::Fail).count();
    let inconclusive = reports.iter().filter(|r| r.status == Status::Inconclusive).count();
    let _ = writeln!(text, "{} reports, {} failed, {} inconclusive", reports.len(), failed, inconclusive);
    Ok(Outcome {
        result: json!({
            "h": ctx.h,
            "replicas": ctx.n,
            "checks": checks,
            "reports": reports,
            "failed": failed,
            "inconclusive": inconclusive,
        }),
        exit_code: if failed == 0 { 0 } else { 1 },
        files: if ctx.cfg.output.csv { files } else { Vec::new() },
        text,
    })
}

/// certify, spectral (when a linear part exists) and verify in one document.
pub fn report(ctx: &Context) -> Result<Outcome, CliError> {
    let c = certify(ctx)?;
    let s = if ctx.built.nu.is_some() { Some(spectral(ctx)?) } else { None };
    let v = verify(ctx)?;
    let mut text = c.text.clone();
    let mut files = c.files;
    let mut exit = c.exit_code.max(v.exit_code);
    let spectral_json = match s {
        Some(s) => {
            text.push_str(&s.text);
            files.extend(s.files);
            exit = exit.max(s.exit_code);
            s.result
        }
        None => Value::Null,
    };
    text.push_str(&v.text);
    files.extend(v.files);
    Ok(Outcome {
        result: json!({"certify": c.result, "spectral": spectral_json, "verify": v.result}),
        exit_code: exit,
        files,
        text,
    })
}
