use std::path::Path;
use std::time::Instant;

use coupling_lab::bounds::{bound_report, gradient_envelope, hessian_envelope, BoundInputs, GradientMode, ScenarioBounds};
use coupling_lab::profiles::BuildOptions;
use coupling_lab::rng::derive_seed;
use coupling_lab::scenarios::{
    closed_form_oracle, load_scenario, validate_scenario, AssumptionMode, Scenario, ValidationGrid,
};
use coupling_lab::sde::{contraction_report, simulate_reflection_coupling, CoalescenceRule, DriftField, InitialPair, TimeGrid};
use coupling_lab::transport::{run_transport, FieldSource, TransportOptions};
use coupling_lab::value::{estimate_field, field_csv, hjb_residual, hjb_residual_oracle, FieldOptions, HjbGrid};
use coupling_lab::verify::{verify_all, VerifyBudget, VerifyOptions, SCHEMA_VERSION};
use serde_json::{json, Value};

use crate::{Cli, Command, Failure};

type Outcome = Result<(), Failure>;

pub fn run(cli: &Cli) -> Outcome {
    if let Command::Verify { quick, no_rerun, only } = &cli.command {
        return verify(cli, *quick, !*no_rerun, only);
    }
    let scenario = scenario(cli)?;
    let report = validate_scenario(&scenario, ValidationGrid { seed: scenario.sim.seed, ..ValidationGrid::default() })?;
    if !report.pass {
        let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
        return Err(Failure::Assumption(format!("assumption checks failed: {}", names.join(", "))));
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| Failure::Config(format!("--out {}: {e}", cli.out.display())))?;
    write_json(&cli.out, "validation.json", &serde_json::to_value(&report).map_err(num)?)?;
    match cli.command {
        Command::Constants => constants(cli, &scenario),
        Command::Bounds => bounds(cli, &scenario),
        Command::Couple => couple(cli, &scenario),
        Command::Value => value(cli, &scenario),
        Command::Transport => transport(cli, &scenario),
        Command::Verify { .. } => unreachable!(),
    }
}

fn num(e: impl std::fmt::Display) -> Failure {
    Failure::Numerical(e.to_string())
}

fn scenario(cli: &Cli) -> Result<Scenario, Failure> {
    let path = cli.scenario.as_ref().ok_or_else(|| Failure::Config("--scenario is required".into()))?;
    let mut s = load_scenario(path).map_err(|e| match e {
        coupling_lab::Error::Io(io) => Failure::Config(format!("{}: {io}", path.display())),
        other => other.into(),
    })?;
    if let Some(seed) = cli.seed {
        s.sim.seed = seed;
    }
    if let Some(dt) = cli.dt {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Failure::Config(format!("--dt must be positive, got {dt}")));
        }
        s.sim.dt = dt;
    }
    if let Some(n) = cli.n_paths {
        if n < 2 {
            return Err(Failure::Config(format!("--n-paths must be at least 2, got {n}")));
        }
        s.sim.n_paths = n;
    }
    Ok(s)
}

/// Writes `value` with `schema_version` as its first key.
fn write_json(dir: &Path, name: &str, value: &Value) -> Outcome {
    let mut obj = serde_json::Map::new();
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    match value {
        Value::Object(m) => {
            for (k, v) in m {
                if k != "schema_version" {
                    obj.insert(k.clone(), v.clone());
                }
            }
        }
        other => {
            obj.insert("data".into(), other.clone());
        }
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(obj)).map_err(num)?;
    text.push('\n');
    write(dir, name, text)
}

fn write(dir: &Path, name: &str, text: impl AsRef<[u8]>) -> Outcome {
    let p = dir.join(name);
    std::fs::write(&p, text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))
}

fn to_value(v: &impl serde::Serialize) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(num)
}

/// Collects named run-level checks and turns failures into exit status 5.
#[derive(Default)]
struct Checks(Vec<(String, bool)>);

impl Checks {
    fn add(&mut self, name: impl Into<String>, pass: bool) {
        self.0.push((name.into(), pass));
    }

    fn json(&self) -> Value {
        Value::Array(self.0.iter().map(|(n, p)| json!({ "name": n, "pass": p })).collect())
    }

    fn finish(self) -> Outcome {
        for (n, p) in &self.0 {
            println!("[{}] {n}", if *p { "PASS" } else { "FAIL" });
        }
        let failed: Vec<String> = self.0.into_iter().filter(|(_, p)| !p).map(|(n, _)| n).collect();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Failure::Acceptance(format!("failed checks: {}", failed.join("; "))))
        }
    }
}

fn scenario_bounds(s: &Scenario) -> Result<ScenarioBounds, Failure> {
    Ok(BoundInputs::from_scenario(s, BuildOptions::default())?)
}

fn constants(cli: &Cli, s: &Scenario) -> Outcome {
    let b = scenario_bounds(s)?;
    let mut checks = Checks::default();
    for (name, k) in [("kappa_u", &b.kappa_u), ("kappa_bar", &b.kappa_bar)] {
        write_json(&cli.out, &format!("{name}.json"), &to_value(&k.export())?)?;
        write(&cli.out, &format!("{name}.csv"), k.to_csv())?;
        let tol = cli.tol.unwrap_or(1e-6) + k.quad_error;
        let c = k.check_contraction_properties(tol);
        write_json(&cli.out, &format!("{name}_check.json"), &to_value(&c)?)?;
        checks.add(format!("{name}: contraction properties within {tol:e}"), c.pass);
        println!("{name}: R0 = {}, R1 = {}, lambda = {}, C = {}", k.r0, k.r1, k.lambda, k.c);
    }
    checks.finish()
}

fn bounds(cli: &Cli, s: &Scenario) -> Outcome {
    let b = scenario_bounds(s)?;
    let rep = bound_report(&b.inputs, s.sim.horizon, 101)?;
    write_json(&cli.out, "bounds.json", &to_value(&rep)?)?;
    write(&cli.out, "envelopes.csv", rep.envelope_csv())?;
    let mut checks = Checks::default();
    let l = rep.kernel_checks;
    checks.add("kernel estimates dominate quadrature", l.convolution.dominates && l.discounted.dominates && l.total.dominates);
    for lb in &rep.lipschitz {
        println!("{}: log closed = {}, log quadrature = {}", lb.case.as_str(), lb.log_closed, lb.log_quadrature);
        checks.add(format!("{}: constant >= 1", lb.case.as_str()), lb.log_closed >= 0.0);
    }
    checks.add(
        "envelopes nonnegative",
        rep.envelope.iter().all(|r| r.grad_env >= 0.0 && r.hess_env >= 0.0),
    );
    checks.finish()
}

fn unit_pair(d: usize) -> InitialPair {
    let mut x = vec![0.0; d];
    let mut xhat = vec![0.0; d];
    x[0] = 0.5;
    xhat[0] = -0.5;
    InitialPair::Point { x, xhat }
}

fn couple(cli: &Cli, s: &Scenario) -> Outcome {
    let b = scenario_bounds(s)?;
    let t = s.sim.horizon;
    let steps = (t / s.sim.dt).ceil().max(1.0) as usize;
    let grid = TimeGrid::uniform(0.0, t, s.sim.dt, (steps / 100).max(1))?;
    let start = Instant::now();
    let ens = simulate_reflection_coupling(
        &DriftField::from_potential(&s.potential),
        &unit_pair(s.dim()),
        &grid,
        s.sim.n_paths,
        derive_seed(s.sim.seed, 5),
        CoalescenceRule::default(),
    )?;
    let rep = contraction_report(&ens, &b.kappa_u)?;
    eprintln!("coupling: {} paths in {:.1} s", s.sim.n_paths, start.elapsed().as_secs_f64());
    write(&cli.out, "contraction.csv", rep.to_csv())?;
    write(&cli.out, "paths.csv", ens.path_dump_csv(20))?;
    let mut summary = to_value(&rep)?;
    if let Some((rate, se)) = rep.decay_rate() {
        summary["decay_rate"] = json!({ "estimate": rate, "se": se });
    }
    write_json(&cli.out, "contraction.json", &summary)?;
    let mut checks = Checks::default();
    checks.add(
        "mean f(|D_t|) <= e^{-lambda t} E f(|D_0|) + 3 SE",
        rep.rows.iter().all(|r| r.mean_f_delta <= r.envelope_f + 3.0 * r.se_f_delta),
    );
    checks.add(
        "P(D_t != 0) <= q_t E f(|D_0|) + 3 SE",
        rep.rows.iter().filter(|r| r.t > 0.0).all(|r| r.frac_distinct <= r.envelope_q + 3.0 * r.se_frac_distinct),
    );
    checks.finish()
}

fn box_points(d: usize, half: f64, n: usize) -> Vec<Vec<f64>> {
    HjbGrid::tensor(Vec::new(), d, -half, half, n, 0.0, 0.0).points
}

fn value(cli: &Cli, s: &Scenario) -> Outcome {
    let b = scenario_bounds(s)?;
    let horizon = s.sim.horizon;
    let d = s.dim();
    let (h_t, h_x) = (0.05, 0.1);
    if horizon < 2.0 * h_t + 0.1 {
        return Err(Failure::Config(format!("sim.T = {horizon} is too short for the value diagnostics")));
    }
    let per_axis = if d == 1 { 9 } else if d == 2 { 5 } else { 3 };
    let points = box_points(d, 2.0, per_axis);
    let times: Vec<f64> = (0..5).map(|k| (horizon - 2.0 * h_t) * k as f64 / 4.0).collect();
    let opts = FieldOptions {
        n_samples: s.sim.n_paths,
        seed: derive_seed(s.sim.seed, 60),
        dt: s.sim.dt,
        gradient: true,
        hessian: true,
        ..FieldOptions::default()
    };
    let est = estimate_field(s, &times, horizon, &points, opts)?;
    write(&cli.out, "field.csv", field_csv(&est))?;

    let mut checks = Checks::default();
    let grad_mode = match s.mode {
        AssumptionMode::A1A2PrimeUniformlyConvex => GradientMode::UniformlyConvex,
        _ => GradientMode::Generic,
    };
    let case = b.inputs.default_case();
    let mut grad_ok = true;
    let mut hess_ok = true;
    for e in &est {
        let genv = gradient_envelope(&b.inputs, e.t, horizon, grad_mode)?;
        let henv = hessian_envelope(&b.inputs, e.t, horizon, case)?;
        for i in 0..e.points.len() {
            let g = e.grad[i].iter().map(|v| v * v).sum::<f64>().sqrt();
            let se = e.se_grad[i].iter().map(|v| v * v).sum::<f64>().sqrt();
            grad_ok &= g <= genv + 3.0 * se + 1e-12;
            hess_ok &= e.hess_quot[i] <= henv + 3.0 * e.se_hess[i] + 1e-12;
        }
    }
    checks.add("|grad phi| <= gradient envelope + 3 SE", grad_ok);
    checks.add(format!("Hessian quotients <= {} envelope + 3 SE", case.as_str()), hess_ok);

    let mut summary = json!({ "horizon": horizon, "times": times, "n_samples": s.sim.n_paths, "dt": s.sim.dt });
    if d <= 2 {
        let grid = HjbGrid::tensor(times.clone(), d, -2.0, 2.0, per_axis, h_t, h_x);
        if let Some(o) = closed_form_oracle(s) {
            let tol = cli.tol.unwrap_or(1e-10);
            let tab = hjb_residual_oracle(&o, &grid.times, &grid.points, tol);
            write(&cli.out, "hjb_oracle.csv", tab.to_csv())?;
            summary["hjb_oracle"] = json!({ "max_abs_residual": tab.max_abs_residual, "tol": tol });
            checks.add(format!("oracle HJB residual <= {tol:e}"), tab.within_budget);
        }
        let tab = hjb_residual(s, &grid, horizon, FieldOptions { seed: derive_seed(s.sim.seed, 70), ..opts })?;
        write(&cli.out, "hjb.csv", tab.to_csv())?;
        summary["hjb"] = json!({
            "max_abs_residual": tab.max_abs_residual,
            "max_ratio": tab.max_ratio,
            "terminal_sup_diff": tab.terminal_sup_diff,
        });
        checks.add("MC HJB residual within budget", tab.within_budget);
        checks.add("terminal slice equals W", tab.terminal_sup_diff <= 3.0 * tab.terminal_se);
    } else {
        summary["hjb"] = json!("skipped: dense residual grids need d <= 2");
    }
    summary["checks"] = checks.json();
    write_json(&cli.out, "value.json", &summary)?;
    checks.finish()
}

fn transport(cli: &Cli, s: &Scenario) -> Outcome {
    let base = TransportOptions::default();
    let opts = TransportOptions {
        field: FieldSource::MonteCarlo,
        field_opts: FieldOptions {
            n_samples: cli.n_paths.unwrap_or(base.field_opts.n_samples),
            seed: derive_seed(s.sim.seed, 80),
            dt: cli.dt.unwrap_or(base.field_opts.dt),
            ..base.field_opts
        },
        plane_field_opts: FieldOptions {
            n_samples: cli.n_paths.unwrap_or(base.plane_field_opts.n_samples),
            seed: derive_seed(s.sim.seed, 80),
            dt: cli.dt.unwrap_or(base.plane_field_opts.dt),
            ..base.plane_field_opts
        },
        push_seed: derive_seed(s.sim.seed, 81),
        record_every: 10,
        ..base
    };
    let run = run_transport(s, &opts)?;
    write(&cli.out, "flow.csv", run.flow.to_csv())?;
    write(&cli.out, "maps.csv", run.maps.to_csv())?;
    write_json(&cli.out, "transport.json", &to_value(&run.report)?)?;
    let r = &run.report;
    println!("lip_S_emp = {}, lip_T_emp = {}, log bound = {}, KS = {}", r.lip_s_emp, r.lip_t_emp, r.log_lip_bound, r.ks_pushforward);
    let mut checks = Checks::default();
    checks.add("flow converged", r.converged);
    for b in &r.lip_bounds {
        checks.add(format!("{}: Lip(S), Lip(T) within bound", b.case), b.lip_s_ok && b.lip_t_ok);
    }
    checks.add("round trip T(S(x)) = x", r.roundtrip_error <= 1e-6);
    if let Some(p) = &r.plane_pushforward {
        println!("marginal KS = {:?}, correlation {} vs target {}", p.ks, p.corr_emp, p.corr_target);
        checks.add("correlation of T#mu matches nu", (p.corr_emp - p.corr_target).abs() <= p.corr_tol);
    }
    checks.finish()
}

fn verify(cli: &Cli, quick: bool, rerun: bool, only: &[u8]) -> Outcome {
    let mut seed = cli.seed.unwrap_or(0);
    if let Some(path) = &cli.scenario {
        let s = load_scenario(path)?;
        seed = cli.seed.unwrap_or(s.sim.seed);
    }
    let opts = VerifyOptions {
        seed,
        budget: if quick { VerifyBudget::quick() } else { VerifyBudget::full() },
        determinism_rerun: rerun,
        only: only.to_vec(),
    };
    let (summary, art) = verify_all(&opts, |r| {
        println!("{}", r.line());
        eprintln!("    ({:.1} s)", r.elapsed.as_secs_f64());
    })?;
    art.write_to(&cli.out)?;
    if summary.all_pass {
        Ok(())
    } else {
        let failed: Vec<String> = summary.criteria.iter().filter(|c| !c.pass).map(|c| c.id.to_string()).collect();
        Err(Failure::Acceptance(format!("criteria failed: {}", failed.join(", "))))
    }
}
