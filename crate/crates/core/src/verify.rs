//! The acceptance suite: each criterion runs its own fixed scenario and
//! reports measured values next to tolerances.
//!
//! Artifacts are collected in memory and written only by the caller, so that a
//! second run can be compared byte for byte. Wall-clock times are kept out of
//! the artifacts.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::bounds::{hessian_envelope, kernel_integrals, BoundInputs, HessianCase, KernelParams};
use crate::error::Result;
use crate::profiles::{build_constants, BuildOptions, ConvexityProfile, ProfileConstants};
use crate::rng::derive_seed;
use crate::scenarios::{AssumptionMode, OuLinearOracle, Potential, Scenario, SimParams};
use crate::sde::{contraction_report, simulate_reflection_coupling, CoalescenceRule, DriftField, InitialPair, TimeGrid};
use crate::transport::{run_transport, FieldSource, TransportOptions};
use crate::value::{estimate_field, field_csv, hjb_residual, hjb_residual_oracle, FieldOptions, HjbGrid};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn le(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, pass: measured <= tolerance }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Set when the criterion aborted.
    pub error: Option<String>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl CriterionResult {
    fn new(id: u8, name: &'static str, checks: Vec<Check>) -> Self {
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        Self { id, name, pass, checks, error: None, elapsed: Duration::ZERO }
    }

    fn failed(id: u8, name: &'static str, err: String) -> Self {
        Self { id, name, pass: false, checks: Vec::new(), error: Some(err), elapsed: Duration::ZERO }
    }

    /// `[PASS] 5 coupling-contraction: worst check ...`.
    pub fn line(&self) -> String {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        if let Some(e) = &self.error {
            return format!("[{tag}] {:>2} {}: error: {e}", self.id, self.name);
        }
        let worst = self
            .checks
            .iter()
            .find(|c| !c.pass)
            .or_else(|| self.checks.iter().max_by(|a, b| ratio(a).total_cmp(&ratio(b))));
        match worst {
            Some(c) => format!(
                "[{tag}] {:>2} {}: {} checks, {} = {:.6e} (tol {:.3e})",
                self.id,
                self.name,
                self.checks.len(),
                c.name,
                c.measured,
                c.tolerance
            ),
            None => format!("[{tag}] {:>2} {}: no checks", self.id, self.name),
        }
    }
}

fn ratio(c: &Check) -> f64 {
    if c.tolerance > 0.0 {
        c.measured / c.tolerance
    } else {
        c.measured
    }
}

/// Sample sizes; [`VerifyBudget::full`] is the acceptance scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyBudget {
    pub coupling_paths: usize,
    pub gradient_samples: usize,
    pub hjb_samples: usize,
    pub transport_samples: usize,
    pub hessian_samples: usize,
    pub nonconvex_field_samples: usize,
}

impl VerifyBudget {
    pub fn full() -> Self {
        Self {
            coupling_paths: 100_000,
            gradient_samples: 100_000,
            hjb_samples: 10_000,
            transport_samples: 10_000,
            hessian_samples: 20_000,
            nonconvex_field_samples: 5_000,
        }
    }

    /// Roughly a tenth of the work, for smoke tests.
    pub fn quick() -> Self {
        Self {
            coupling_paths: 10_000,
            gradient_samples: 10_000,
            hjb_samples: 2_000,
            transport_samples: 2_000,
            hessian_samples: 4_000,
            nonconvex_field_samples: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub budget: VerifyBudget,
    /// Run criteria 1–9 a second time and compare every artifact (criterion 10).
    pub determinism_rerun: bool,
    /// Restrict to these criteria; empty means all.
    pub only: Vec<u8>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { seed: 0, budget: VerifyBudget::full(), determinism_rerun: true, only: Vec::new() }
    }
}

/// Named artifact files.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Artifacts {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl Artifacts {
    pub fn put(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.insert(name.into(), bytes.into());
    }

    pub fn put_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.put(name, s);
        Ok(())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }

    /// Names of files that differ or exist on one side only.
    pub fn diff(&self, other: &Artifacts) -> Vec<String> {
        let mut out: Vec<String> =
            self.files.iter().filter(|(k, v)| other.files.get(*k) != Some(v)).map(|(k, _)| k.clone()).collect();
        out.extend(other.files.keys().filter(|k| !self.files.contains_key(*k)).cloned());
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifySummary {
    pub schema_version: u32,
    pub seed: u64,
    pub budget: VerifyBudget,
    pub criteria: Vec<CriterionResult>,
    pub all_pass: bool,
}

type Runner = fn(&VerifyOptions, &mut Artifacts) -> Result<Vec<Check>>;

const CRITERIA: [(u8, &str, Runner); 9] = [
    (1, "profile-constants", criterion_1),
    (2, "inverse-identity", criterion_2),
    (3, "contraction-properties", criterion_3),
    (4, "kernel-integrals", criterion_4),
    (5, "coupling-contraction", criterion_5),
    (6, "gradient-estimate", criterion_6),
    (7, "hjb-residual", criterion_7),
    (8, "transport-ou", criterion_8),
    (9, "nonconvex-bounds", criterion_9),
];

/// Wall-clock limits per criterion.
fn time_limit(id: u8) -> Option<Duration> {
    match id {
        1 => Some(Duration::from_secs(1)),
        5 => Some(Duration::from_secs(120)),
        9 => Some(Duration::from_secs(600)),
        _ => None,
    }
}

fn selected(opts: &VerifyOptions, id: u8) -> bool {
    opts.only.is_empty() || opts.only.contains(&id)
}

fn run_once(opts: &VerifyOptions, art: &mut Artifacts, mut progress: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let mut out = Vec::new();
    for (id, name, run) in CRITERIA {
        if !selected(opts, id) {
            continue;
        }
        let start = Instant::now();
        let mut r = match run(opts, art) {
            Ok(checks) => CriterionResult::new(id, name, checks),
            Err(e) => CriterionResult::failed(id, name, e.to_string()),
        };
        r.elapsed = start.elapsed();
        if let Some(limit) = time_limit(id) {
            if r.elapsed > limit {
                r.pass = false;
                r.error.get_or_insert_with(|| format!("runtime above the {} s limit", limit.as_secs()));
            }
        }
        progress(&r);
        out.push(r);
    }
    out
}

/// Runs the suite. `progress` sees every criterion as it finishes.
pub fn verify_all(opts: &VerifyOptions, mut progress: impl FnMut(&CriterionResult)) -> Result<(VerifySummary, Artifacts)> {
    let mut art = Artifacts::default();
    let mut criteria = run_once(opts, &mut art, &mut progress);
    if selected(opts, 10) {
        let r = if opts.determinism_rerun {
            let start = Instant::now();
            let mut again = Artifacts::default();
            let second = run_once(opts, &mut again, |_| {});
            let differing = art.diff(&again);
            let verdicts_equal = criteria.iter().zip(&second).all(|(a, b)| a.pass == b.pass);
            let mut r = CriterionResult::new(
                10,
                "determinism",
                vec![
                    Check::le("differing_artifacts", differing.len() as f64, 0.0),
                    Check::le("differing_verdicts", if verdicts_equal { 0.0 } else { 1.0 }, 0.0),
                ],
            );
            r.elapsed = start.elapsed();
            if !differing.is_empty() {
                r.error = Some(format!("differing files: {}", differing.join(", ")));
            }
            r
        } else {
            CriterionResult::failed(10, "determinism", "not run (determinism rerun disabled)".into())
        };
        progress(&r);
        criteria.push(r);
    }
    let all_pass = criteria.iter().all(|c| c.pass);
    let summary = VerifySummary { schema_version: SCHEMA_VERSION, seed: opts.seed, budget: opts.budget, criteria, all_pass };
    art.put_json("summary.json", &summary)?;
    Ok((summary, art))
}

fn constant_one() -> Result<ProfileConstants> {
    build_constants(&ConvexityProfile::constant(1.0), BuildOptions::default())
}

fn criterion_1(_: &VerifyOptions, art: &mut Artifacts) -> Result<Vec<Check>> {
    let k = constant_one()?;
    art.put_json("c01_constants.json", &k.export())?;
    let expect = [("R0", k.r0, 0.0), ("R1", k.r1, 2.0 * SQRT_2), ("lambda", k.lambda, 0.5), ("C", k.c, 0.5)];
    Ok(expect.iter().map(|&(n, got, want)| Check::le(format!("|{n} - {want}|"), (got - want).abs(), 1e-8)).collect())
}

fn criterion_2(_: &VerifyOptions, art: &mut Artifacts) -> Result<Vec<Check>> {
    let mut csv = String::from("alpha,C1W,C,expected,rel_err\n");
    let mut checks = Vec::new();
    for alpha in [0.5, 1.0, 2.0] {
        for c1w in [0.25, 0.5, 1.0] {
            let k = build_constants(&ConvexityProfile::affine_inverse(alpha, c1w), BuildOptions::default())?;
            let want = 0.5 * (-2.0 * c1w * c1w / alpha).exp();
            let rel = (k.c - want).abs() / want;
            csv.push_str(&format!("{alpha},{c1w},{},{want},{rel}\n", k.c));
            checks.push(Check::le(format!("rel_err(alpha={alpha},C1W={c1w})"), rel, 1e-6));
        }
    }
    art.put("c02_inverse.csv", csv);
    Ok(checks)
}

fn criterion_3(_: &VerifyOptions, art: &mut Artifacts) -> Result<Vec<Check>> {
    let cosine = ConvexityProfile::quadratic_plus_cosine(1.0);
    let profiles = [
        ("constant", ConvexityProfile::constant(1.0)),
        ("cosine-perturbed", ConvexityProfile::analytic(move |r| cosine.eval(r) - 8.0 * 0.5 / r)),
        ("double-well", ConvexityProfile::double_well(1.0, 1.0)),
    ];
    let mut checks = Vec::new();
    for (name, p) in profiles {
        let k = build_constants(&p, BuildOptions::default())?;
        let tol = 1e-6 + k.quad_error;
        let c = k.check_contraction_properties(tol);
        art.put(format!("c03_{name}.csv"), k.to_csv());
        checks.push(Check::le(format!("{name}: bounds"), c.bounds_violation, tol));
        checks.push(Check::le(format!("{name}: concavity"), c.concavity_violation, tol));
        checks.push(Check::le(format!("{name}: differential"), c.differential_violation, tol));
    }
    Ok(checks)
}

fn criterion_4(_: &VerifyOptions, art: &mut Artifacts) -> Result<Vec<Check>> {
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_total: f64 = 0.0;
    for lambda_bar in [0.1, 0.5, 1.0] {
        for p in [0.5, 1.0, 2.0] {
            let v = kernel_integrals(KernelParams { lambda_u: lambda_bar + p, lambda_bar, c_bar: 0.5, alpha: p, tau: 2.0 })?;
            for item in [v.convolution, v.discounted, v.total] {
                worst_excess = worst_excess.max((item.quadrature - item.closed - item.quad_error) / item.closed);
            }
            worst_total = worst_total.max((v.total.quadrature - v.total.closed).abs() / v.total.closed);
            rows.push(v);
        }
    }
    art.put_json("c04_kernel.json", &rows)?;
    checks.push(Check::le("max (quadrature - closed)/closed", worst_excess, 0.0));
    checks.push(Check::le("third item relative error", worst_total, 1e-6));
    Ok(checks)
}

fn criterion_5(opts: &VerifyOptions, art: &mut Artifacts) -> Result<Vec<Check>> {
    let k = constant_one()?;
    let drift = DriftField::from_potential(&Potential::quadratic(1, 1.0));
    let times = [0.5, 1.0, 2.0, 4.0];
    let grid = TimeGrid::with_records(0.0, 4.0, 1e-3, &[0.0, 0.5, 1.0, 2.0, 4.0])?;
    let zeta = InitialPair::Point { x: vec![0.5], xhat: vec![-0.5] };
    let ens = simulate_reflection_coupling(
        &drift,
        &zeta,
        &grid,
        opts.budget.coupling_paths,
        derive_seed(opts.seed, 5),
        CoalescenceRule::default(),
    )?;
    let rep = contraction_report(&ens, &k)?;
    art.put("c05_contraction.csv", rep.to_csv());
    let mut checks = Vec::new();
    for t in times {
        let r = rep.row_at(t).ok_or_else(|| crate::Error::invalid(format!("no record at t = {t}")))?;
        checks.push(Check::le(format!("mean f(|D|) at t={t}"), r.mean_f_delta, r.envelope_f * (1.0 + 3.0 * r.se_f_delta)));
        checks.push(Check::le(
            format!("P(distinct) at t={t}"),
            r.frac_distinct,
            r.envelope_q * (1.0 + 3.0 * r.se_frac_distinct),
        ));
    }
    Ok(checks)
}

fn criterion_6(opts: &VerifyOptions, art: &mut Artifacts) -> Result<Vec<Check>> {
    let s = Scenario::ou_linear(0.5, SimParams { horizon: 4.0, dt: 1e-3, ..SimParams::default() });
    let points: Vec<Vec<f64>> = (0..9).map(|i| vec![-2.0 + 0.5 * i as f64]).collect();
    let fo = FieldOptions {
        n_samples: opts.budget.gradient_samples,
        seed: derive_seed(opts.seed, 6),
        dt: 1e-3,
        h: 0.05,
        gradient: true,
        hessian: false,
        ..FieldOptions::default()
    };
    let est = estimate_field(&s, &[0.0, 1.0, 2.0, 3.0], 4.0, &points, fo)?;
    art.put("c06_gradient.csv", field_csv(&est));
    let mut checks = Vec::new();
    for e in &est {
        let (sup, se) = e.sup_grad().ok_or_else(|| crate::Error::invalid("no gradient estimates"))?;
        let exact = 0.5 * (-(4.0 - e.t)).exp();
        checks.push(Check::le(format!("|sup grad - bound| at t={}", e.t), (sup - exact).abs(), (3.0 * se).max(1e-3)));
    }
    Ok(checks)
}

fn criterion_7(opts: &VerifyOptions, art: &mut Artifacts) -> Result<Vec<Check>> {
    let horizon = 4.5;
    let times: Vec<f64> = (0..=40).map(|k| 0.1 * k as f64).collect();
    let grid = HjbGrid::tensor(times, 1, -2.0, 2.0, 41, 0.05, 0.1);
    let oracle = hjb_residual_oracle(&OuLinearOracle::new(vec![0.5], horizon), &grid.times, &grid.points, 1e-10);
    art.put("c07_hjb_oracle.csv", oracle.to_csv());
    let s = Scenario::ou_linear(0.5, SimParams { horizon, dt: 1e-3, ..SimParams::default() });
    let fo = FieldOptions {
        n_samples: opts.budget.hjb_samples,
        seed: derive_seed(opts.seed, 7),
        dt: 1e-3,
        ..FieldOptions::default()
    };
    let mc = hjb_residual(&s, &grid, horizon, fo)?;
    art.put("c07_hjb_mc.csv", mc.to_csv());
    Ok(vec![
        Check::le("oracle max |R|", oracle.max_abs_residual, 1e-10),
        Check::le("MC max |R|/budget", mc.max_ratio, 1.0),
        Check::le("MC terminal sup |phi - W|", mc.terminal_sup_diff, 3.0 * mc.terminal_se),
    ])
}

fn criterion_8(opts: &VerifyOptions, art: &mut Artifacts) -> Result<Vec<Check>> {
    let s = Scenario::ou_linear(0.5, SimParams::default());
    let mut checks = Vec::new();
    for (src, tag, tol) in [(FieldSource::Oracle, "oracle", 1e-3), (FieldSource::MonteCarlo, "mc", 5e-3)] {
        let base = TransportOptions::default();
        let to = TransportOptions {
            field: src,
            field_opts: FieldOptions {
                n_samples: opts.budget.transport_samples,
                seed: derive_seed(opts.seed, 80),
                ..base.field_opts
            },
            push_seed: derive_seed(opts.seed, 81),
            record_every: 10,
            ..base
        };
        let run = run_transport(&s, &to)?;
        art.put(format!("c08_flow_{tag}.csv"), run.flow.to_csv());
        art.put(format!("c08_maps_{tag}.csv"), run.maps.to_csv());
        art.put_json(format!("c08_report_{tag}.json"), &run.report)?;
        let r = &run.report;
        checks.push(Check::le(format!("{tag}: max |T(x) - (x - 0.5)|"), r.oracle_max_error.unwrap_or(f64::INFINITY), tol));
        checks.push(Check::le(format!("{tag}: KS(T#mu, nu)"), r.ks_pushforward, 0.02));
        let positive = r.lip_bounds.iter().find(|b| b.case == "positive-alpha");
        let bound = positive.map_or(f64::NAN, |b| b.closed);
        checks.push(Check::le(format!("{tag}: Lip(T) - (positive-alpha bound + slack)"), r.lip_t_emp - bound - r.lip_slack, 0.0));
    }
    Ok(checks)
}

fn criterion_9(opts: &VerifyOptions, art: &mut Artifacts) -> Result<Vec<Check>> {
    let horizon = 2.0;
    let s = Scenario::cosine_smooth_norm(0.5, SimParams { horizon, dt: 1e-3, ..SimParams::default() }, AssumptionMode::A1A2Prime);
    let inputs = BoundInputs::from_scenario(&s, BuildOptions::default())?.inputs;
    art.put_json("c09_inputs.json", &inputs)?;
    let points: Vec<Vec<f64>> = (0..13).map(|i| vec![-3.0 + 0.5 * i as f64]).collect();
    let taus = [0.5, 1.0, 2.0];
    let times: Vec<f64> = taus.iter().rev().map(|tau| horizon - tau).collect();
    let fo = FieldOptions {
        n_samples: opts.budget.hessian_samples,
        seed: derive_seed(opts.seed, 90),
        dt: 1e-3,
        h_hess: 0.2,
        gradient: false,
        hessian: true,
        ..FieldOptions::default()
    };
    let est = estimate_field(&s, &times, horizon, &points, fo)?;
    art.put("c09_hessian.csv", field_csv(&est));
    let mut checks = Vec::new();
    for case in [HessianCase::A2, HessianCase::A2Prime] {
        for e in &est {
            let env = hessian_envelope(&inputs, e.t, horizon, case)?;
            let excess = e.hess_quot.iter().zip(&e.se_hess).map(|(q, se)| q - env - 3.0 * se).fold(f64::NEG_INFINITY, f64::max);
            checks.push(Check::le(format!("{}: max(hess - env - 3SE) at T-t={}", case.as_str(), horizon - e.t), excess, 0.0));
        }
    }

    let base = TransportOptions::default();
    let to = TransportOptions {
        field: FieldSource::MonteCarlo,
        field_opts: FieldOptions {
            n_samples: opts.budget.nonconvex_field_samples,
            seed: derive_seed(opts.seed, 91),
            dt: 0.01,
            ..base.field_opts
        },
        lattice_dx: 0.25,
        t_max_cap: 10.0,
        push_seed: derive_seed(opts.seed, 92),
        record_every: 10,
        ..base
    };
    let run = run_transport(&s, &to)?;
    art.put("c09_maps.csv", run.maps.to_csv());
    art.put_json("c09_transport.json", &run.report)?;
    for b in &run.report.lip_bounds {
        // compare in log space: the constants overflow f64
        let excess = (run.report.lip_t_emp - run.report.lip_slack).max(1.0).ln() - b.log_closed;
        checks.push(Check::le(format!("{}: log Lip(T) - log bound", b.case), excess, 0.0));
    }
    checks.push(Check::le("KS(T#mu, nu)", run.report.ks_pushforward, 0.03));
    Ok(checks)
}
