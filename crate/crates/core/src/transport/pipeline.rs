//! End-to-end transport run: field, flow, maps, pushforward and Lipschitz checks.

use serde::Serialize;

use crate::bounds::{
    gradient_envelope_tau, hessian_envelope_tau, lipschitz_bound, BoundInputs, GradientMode, LipschitzCase,
};
use crate::error::{Error, Result};
use crate::numerics::quad::{integrate_to_infinity, QuadOptions};
use crate::profiles::BuildOptions;
use crate::scenarios::{closed_form_oracle, Scenario};
use crate::transport::flow::{anchor_grid, anchor_lattice, integrate_flow, FlowMap, FlowOptions};
use crate::transport::maps::{extract_plane_maps, extract_transport_maps, invert_plane, PlaneMaps, TransportMaps};
use crate::transport::pushforward::{
    plane_pushforward_check, pushforward_check, DensityCdf, MuSampler, PlaneDensity, PlanePushforwardReport,
};
use crate::value::{FieldOptions, GradientField, GriddedField, OracleField, PlaneField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldSource {
    Oracle,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransportOptions {
    pub field: FieldSource,
    /// Monte-Carlo field settings; `h` is the gradient difference step.
    pub field_opts: FieldOptions,
    pub lattice_dx: f64,
    pub lattice_dtau: f64,
    pub anchor_lo: f64,
    pub anchor_hi: f64,
    pub n_anchors: usize,
    pub ode_dt: f64,
    pub tol_flow: f64,
    /// Fixed flow horizon; otherwise chosen from the gradient bound.
    pub t_max: Option<f64>,
    pub t_max_cap: f64,
    pub grad_threshold: f64,
    pub n_push: usize,
    pub push_seed: u64,
    pub mu_sampler: MuSampler,
    /// Minimum separation of the probe pairs used for empirical Lipschitz constants.
    pub probe_spacing: f64,
    /// Window where `T` is compared with the closed form.
    pub check_lo: f64,
    pub check_hi: f64,
    pub record_every: usize,
    /// Planar runs: the anchor lattice is `plane_anchors²` points on `[check_lo, check_hi]²`.
    pub plane_anchors: usize,
    pub plane_field_opts: FieldOptions,
    pub plane_lattice_dx: f64,
    pub plane_lattice_dtau: f64,
    pub plane_n_push: usize,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            field: FieldSource::MonteCarlo,
            field_opts: FieldOptions { n_samples: 10_000, dt: 5e-3, ..FieldOptions::default() },
            lattice_dx: 0.2,
            lattice_dtau: 0.1,
            anchor_lo: -6.0,
            anchor_hi: 6.0,
            n_anchors: 241,
            ode_dt: 0.05,
            tol_flow: 1e-5,
            t_max: None,
            t_max_cap: 30.0,
            grad_threshold: 1e-4,
            n_push: 10_000,
            push_seed: 1,
            mu_sampler: MuSampler::default(),
            probe_spacing: 0.25,
            check_lo: -3.0,
            check_hi: 3.0,
            record_every: 1,
            plane_anchors: 25,
            plane_field_opts: FieldOptions { n_samples: 1000, dt: 1e-2, ..FieldOptions::default() },
            plane_lattice_dx: 0.5,
            plane_lattice_dtau: 0.25,
            plane_n_push: 5000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedBound {
    pub case: &'static str,
    /// May overflow to infinity; the comparison uses the logarithm.
    pub closed: f64,
    pub log_closed: f64,
    pub log_quadrature: f64,
    pub lip_s_ok: bool,
    pub lip_t_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportReport {
    #[serde(rename = "lip_S_emp")]
    pub lip_s_emp: f64,
    #[serde(rename = "lip_T_emp")]
    pub lip_t_emp: f64,
    /// Smallest closed-form constant over the declared cases.
    pub lip_bound: f64,
    pub log_lip_bound: f64,
    pub lip_bounds: Vec<NamedBound>,
    /// Added to the bound before comparing: field error propagated into the
    /// difference quotients.
    pub lip_slack: f64,
    pub ks_pushforward: f64,
    pub ks_n: usize,
    #[serde(rename = "T_max")]
    pub t_max: f64,
    /// `exp(∫_{T_max}^∞ Hessian envelope)`.
    pub truncation_factor: f64,
    pub log_truncation_factor: f64,
    pub converged: bool,
    pub last_change: f64,
    pub roundtrip_error: f64,
    /// `max |T(x) - T_exact(x)|` on the check window when a closed form exists.
    pub oracle_max_error: Option<f64>,
    pub field: FieldSource,
    pub field_max_se: f64,
    /// Planar runs only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plane_pushforward: Option<PlanePushforwardReport>,
}

/// Maps of a one-dimensional or planar run.
#[derive(Debug, Clone)]
pub enum Maps {
    Line(TransportMaps),
    Plane(PlaneMaps),
}

impl Maps {
    pub fn to_csv(&self) -> String {
        match self {
            Self::Line(m) => m.to_csv(),
            Self::Plane(m) => m.to_csv(),
        }
    }

    pub fn roundtrip_error(&self) -> f64 {
        match self {
            Self::Line(m) => m.roundtrip_error(),
            Self::Plane(m) => m.roundtrip_error,
        }
    }

    fn lip_nodes(&self, stride: usize) -> (f64, f64) {
        match self {
            Self::Line(m) => (m.lip_s_nodes(stride), m.lip_t_nodes(stride)),
            Self::Plane(m) => (m.lip_s_nodes(stride), m.lip_t_nodes(stride)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransportRun {
    pub flow: FlowMap,
    pub maps: Maps,
    pub report: TransportReport,
    pub inputs: BoundInputs,
}

/// First `t` with `C_U⁻¹ e^{-λ_U t} C1W < threshold`.
pub fn select_t_max(inputs: &BoundInputs, threshold: f64) -> f64 {
    if inputs.c1w == 0.0 {
        return 0.0;
    }
    ((inputs.c1w / (inputs.c_u * threshold)).ln() / inputs.lambda_u).max(0.0)
}

/// `∫_{T_max}^∞` of the Hessian envelope of the default case.
fn log_truncation_factor(inputs: &BoundInputs, t_max: f64) -> Result<f64> {
    let case = inputs.default_case();
    let mut failure = None;
    let r = integrate_to_infinity(
        |t| match hessian_envelope_tau(inputs, t, case) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        t_max.max(1e-12),
        QuadOptions::with_tol(1e-10),
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r.value)
}

/// Runs the transport pipeline on a one-dimensional or planar scenario.
pub fn run_transport(scenario: &Scenario, opts: &TransportOptions) -> Result<TransportRun> {
    let d = scenario.dim();
    if d > 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: d });
    }
    let inputs = BoundInputs::from_scenario(scenario, BuildOptions::default())?.inputs;
    let grad_mode = match scenario.mode {
        crate::scenarios::AssumptionMode::A1A2PrimeUniformlyConvex => GradientMode::UniformlyConvex,
        _ => GradientMode::Generic,
    };
    let t_max = opts
        .t_max
        .unwrap_or_else(|| select_t_max(&inputs, opts.grad_threshold).min(opts.t_max_cap))
        .max(opts.ode_dt);

    let (anchor_lo, anchor_hi, n_axis) =
        if d == 1 { (opts.anchor_lo, opts.anchor_hi, opts.n_anchors) } else { (opts.check_lo, opts.check_hi, opts.plane_anchors) };
    let oracle = closed_form_oracle(scenario);
    let (field, field_max_se): (Box<dyn GradientField>, f64) = match opts.field {
        FieldSource::Oracle => {
            let o = oracle.clone().ok_or_else(|| Error::invalid("no closed-form field for this scenario"))?;
            (Box::new(OracleField(o)), 0.0)
        }
        FieldSource::MonteCarlo => {
            // total displacement is at most ∫ sup|∇V_t| dt
            let reach = crate::numerics::quad::integrate(
                |t| gradient_envelope_tau(&inputs, t, grad_mode).unwrap_or(0.0),
                0.0,
                t_max,
                QuadOptions::with_tol(1e-8),
            )?
            .value;
            if d == 1 {
                let margin = reach + 2.0 * opts.lattice_dx;
                let g = GriddedField::build(
                    scenario,
                    anchor_lo - margin,
                    anchor_hi + margin,
                    opts.lattice_dx,
                    t_max,
                    opts.lattice_dtau,
                    opts.field_opts,
                )?;
                let se = g.max_se();
                (Box::new(g), se)
            } else {
                let margin = reach + 2.0 * opts.plane_lattice_dx;
                let g = PlaneField::build(
                    scenario,
                    anchor_lo - margin,
                    anchor_hi + margin,
                    opts.plane_lattice_dx,
                    t_max,
                    opts.plane_lattice_dtau,
                    opts.plane_field_opts,
                )?;
                let se = g.max_se();
                (Box::new(g), se)
            }
        }
    };

    let anchors = if d == 1 { anchor_grid(anchor_lo, anchor_hi, n_axis) } else { anchor_lattice(anchor_lo, anchor_hi, n_axis) };
    let flow_opts = FlowOptions { t_max, ode_dt: opts.ode_dt, tol_flow: opts.tol_flow, record_every: opts.record_every };
    let flow = integrate_flow(field.as_ref(), &anchors, flow_opts)?;
    let maps = if d == 1 {
        Maps::Line(extract_transport_maps(&flow)?)
    } else {
        Maps::Plane(extract_plane_maps(&flow, field.as_ref(), n_axis)?)
    };

    let spacing = (anchor_hi - anchor_lo) / (n_axis.max(2) - 1) as f64;
    let stride = (opts.probe_spacing / spacing - 1e-9).ceil().max(1.0) as usize;
    let (lip_s_emp, lip_t_emp) = maps.lip_nodes(stride);
    // 3 SE of field error integrated over the flow moves each endpoint; images
    // of probes are at least `stride·spacing / lip_s` apart for T.
    let lip_slack = 1e-9 + 2.0 * 3.0 * field_max_se * t_max / (stride as f64 * spacing) * lip_s_emp.max(1.0);

    let mut lip_bounds = Vec::new();
    for case in inputs.available_cases() {
        let lc = LipschitzCase::from_hessian_case(case);
        let b = lipschitz_bound(&inputs, lc)?;
        let within = |emp: f64| emp <= b.closed + lip_slack || (emp - lip_slack).max(1.0).ln() <= b.log_closed;
        lip_bounds.push(NamedBound {
            case: lc.as_str(),
            closed: b.closed,
            log_closed: b.log_closed,
            log_quadrature: b.log_quadrature,
            lip_s_ok: within(lip_s_emp),
            lip_t_ok: within(lip_t_emp),
        });
    }
    let log_lip_bound = lip_bounds.iter().map(|b| b.log_closed).fold(f64::INFINITY, f64::min);
    let log_trunc = log_truncation_factor(&inputs, t_max)?;

    let u = &scenario.potential;
    let w = &scenario.perturbation;
    let (ks, ks_n, plane_pushforward, oracle_max_error) = match &maps {
        Maps::Line(m) => {
            let target = DensityCdf::from_log_density(|x| -u.value(&[x]) - w.value(&[x]), -15.0, 15.0, 6000)?;
            let samples = opts.mu_sampler.sample(u, opts.n_push, opts.push_seed)?;
            let push = pushforward_check(|x| m.t(x), &samples, &target)?;
            let err = match &oracle {
                Some(o) => {
                    let n = ((opts.check_hi - opts.check_lo) / 0.01).round() as usize;
                    let mut worst: f64 = 0.0;
                    for i in 0..=n {
                        let x = opts.check_lo + (opts.check_hi - opts.check_lo) * i as f64 / n as f64;
                        worst = worst.max((m.t(x)? - o.transport(&[x])[0]).abs());
                    }
                    Some(worst)
                }
                None => None,
            };
            (push.ks, push.n, None, err)
        }
        Maps::Plane(m) => {
            let target = PlaneDensity::from_log_density(|x| -u.value(x) - w.value(x), -12.0, 12.0, 600)?;
            let samples = opts.mu_sampler.sample_points(u, opts.plane_n_push, opts.push_seed)?;
            let mapped = invert_plane(field.as_ref(), &samples, t_max, opts.ode_dt)?;
            let push = plane_pushforward_check(&mapped, &target)?;
            let err = oracle.as_ref().map(|o| {
                m.anchors
                    .iter()
                    .zip(&m.inverse)
                    .map(|(a, t)| {
                        let e = o.transport(a);
                        ((t[0] - e[0]).powi(2) + (t[1] - e[1]).powi(2)).sqrt()
                    })
                    .fold(0.0, f64::max)
            });
            (push.ks[0].max(push.ks[1]), push.n, Some(push), err)
        }
    };

    let report = TransportReport {
        lip_s_emp,
        lip_t_emp,
        lip_bound: log_lip_bound.exp(),
        log_lip_bound,
        lip_bounds,
        lip_slack,
        ks_pushforward: ks,
        ks_n,
        t_max,
        truncation_factor: log_trunc.exp(),
        log_truncation_factor: log_trunc,
        converged: flow.converged,
        last_change: flow.last_change,
        roundtrip_error: maps.roundtrip_error(),
        oracle_max_error,
        field: opts.field,
        field_max_se,
        plane_pushforward,
    };
    Ok(TransportRun { flow, maps, report, inputs })
}
