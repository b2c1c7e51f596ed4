use std::sync::Arc;

use coupling_lab::numerics::stats::ks_two_sample;
use coupling_lab::numerics::MonotoneCubic;
use coupling_lab::scenarios::{closed_form_oracle, AssumptionMode, OuLinearOracle, Potential, Scenario, SimParams};
use coupling_lab::sde::simulate_optimal_dynamics;
use coupling_lab::transport::{
    anchor_grid, anchor_lattice, empirical_lipschitz, extract_plane_maps, extract_transport_maps, integrate_flow,
    pushforward_check, DensityCdf, FlowOptions, MuSampler,
};
use coupling_lab::value::{FieldOptions, GradientField, GriddedField, OracleField};
use proptest::prelude::*;

fn oracle_field(a: Vec<f64>) -> OracleField {
    OracleField(OuLinearOracle::new(a, 4.0))
}

fn s_at(field: &OracleField, x: f64, t_max: f64, ode_dt: f64) -> f64 {
    let opts = FlowOptions { t_max, ode_dt, tol_flow: 0.0, record_every: usize::MAX };
    integrate_flow(field, &[vec![x]], opts).unwrap().terminal()[0][0]
}

#[test]
fn oracle_flow_reference_value() {
    let s = s_at(&oracle_field(vec![0.5]), 0.0, 4.0, 0.05);
    assert!((s - 0.490842).abs() < 1e-6, "{s}");
}

#[test]
fn flow_integration_is_fourth_order() {
    let field = oracle_field(vec![0.5]);
    let exact = 0.5 * (1.0 - (-4.0f64).exp());
    let e: Vec<f64> = [0.8, 0.4, 0.2].iter().map(|&dt| (s_at(&field, 0.0, 4.0, dt) - exact).abs()).collect();
    for w in e.windows(2) {
        let slope = (w[0] / w[1]).log2();
        assert!((3.7..=4.3).contains(&slope), "errors {e:?}");
    }
}

#[test]
fn oracle_transport_is_translation() {
    let field = oracle_field(vec![0.5]);
    let flow = integrate_flow(&field, &anchor_grid(-4.0, 4.0, 81), FlowOptions { t_max: 30.0, ..FlowOptions::default() }).unwrap();
    let maps = extract_transport_maps(&flow).unwrap();
    for i in 0..=60 {
        let y = -3.0 + 0.1 * i as f64;
        assert!((maps.t(y).unwrap() - (y - 0.5)).abs() < 1e-3);
    }
    assert!(maps.roundtrip_error() < 1e-9);

    let samples = MuSampler::default().sample(&Potential::quadratic(1, 1.0), 10_000, 2).unwrap();
    let target = DensityCdf::from_log_density(|x| -0.5 * (x + 0.5) * (x + 0.5), -12.0, 12.0, 4000).unwrap();
    let rep = pushforward_check(|x| Ok(x - 0.5), &samples, &target).unwrap();
    assert!(rep.ks <= 0.02, "{rep:?}");
}

#[test]
fn planar_oracle_transport_is_translation() {
    let a = vec![0.5, -0.3];
    let field = oracle_field(a.clone());
    let flow = integrate_flow(&field, &anchor_lattice(-2.0, 2.0, 5), FlowOptions { t_max: 30.0, ..FlowOptions::default() }).unwrap();
    let maps = extract_plane_maps(&flow, &field, 5).unwrap();
    for (x, t) in maps.anchors.iter().zip(&maps.inverse) {
        assert!((t[0] - (x[0] - a[0])).abs() < 1e-3 && (t[1] - (x[1] - a[1])).abs() < 1e-3, "{x:?} -> {t:?}");
    }
    assert!(maps.roundtrip_error < 1e-6);
    assert!((maps.lip_s_nodes(1) - 1.0).abs() < 1e-6);
}

#[test]
fn linear_lipschitz_examples() {
    let probes: Vec<(Vec<f64>, Vec<f64>)> = (0..20).map(|i| (vec![-2.0 + 0.2 * i as f64], vec![-1.9 + 0.3 * i as f64])).collect();
    let lip = |f: fn(f64) -> f64| empirical_lipschitz(|x| Ok(vec![f(x[0])]), &probes).unwrap();
    assert!((lip(|x| x - 0.5) - 1.0).abs() < 1e-12);
    assert!((lip(|x| 2.0 * x) - 2.0).abs() < 1e-12);
    assert!((lip(|x| 1.5 * x) - 1.5).abs() < 1e-12);
}

#[test]
fn flow_carries_terminal_law_to_intermediate_laws() {
    // law(X_T) of the controlled dynamics is pushed by S_t to law(X_{T-t})
    let horizon = 12.0;
    let s = Scenario::cosine_smooth_norm(0.5, SimParams { horizon, ..SimParams::default() }, AssumptionMode::A1A2Prime);
    let opts = FieldOptions { n_samples: 2000, seed: 1, dt: 1e-2, ..FieldOptions::default() };
    let field: Arc<dyn GradientField> = Arc::new(GriddedField::build(&s, -5.0, 5.0, 0.1, horizon, 0.1, opts).unwrap());

    let anchors = anchor_grid(-5.0, 5.0, 201);
    let flow = integrate_flow(field.as_ref(), &anchors, FlowOptions { t_max: 2.0, ode_dt: 0.05, tol_flow: 0.0, record_every: 1 }).unwrap();
    let xs: Vec<f64> = anchors.iter().map(|p| p[0]).collect();

    let run = |seed: u64| simulate_optimal_dynamics(&s, field.clone(), &[0.0], 0.0, horizon, 1e-2, seed, 10_000, 50).unwrap();
    let at = |ens: &coupling_lab::sde::PathEnsemble, t: f64| {
        let k = ens.times.iter().position(|&u| (u - t).abs() < 1e-9).unwrap();
        ens.coordinate(k, 0)
    };
    let terminal = at(&run(20), horizon);
    for (i, t) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let k = flow.times.iter().position(|&u| (u - t).abs() < 1e-9).unwrap();
        let map = MonotoneCubic::new(xs.clone(), flow.slices[k].iter().map(|p| p[0]).collect()).unwrap();
        let pushed: Vec<f64> = terminal.iter().map(|&x| map.eval(x.clamp(-5.0, 5.0))).collect();
        let ks = ks_two_sample(&pushed, &at(&run(21 + i as u64), horizon - t));
        assert!(ks <= 0.05, "t = {t}: KS = {ks}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn oracle_flow_matches_closed_form(a in -2.0f64..2.0, x in -3.0f64..3.0, t in 0.1f64..6.0) {
        let field = oracle_field(vec![a]);
        let want = closed_form_oracle(&Scenario::ou_linear(a, SimParams { horizon: 4.0, ..SimParams::default() }))
            .unwrap()
            .flow(t, &[x])[0];
        prop_assert!((s_at(&field, x, t, 0.01) - want).abs() < 1e-8);
    }

    #[test]
    fn scaling_maps_have_their_slope(c in 0.1f64..5.0, xs in proptest::collection::vec(-3.0f64..3.0, 2..10)) {
        let probes: Vec<(Vec<f64>, Vec<f64>)> = xs.windows(2).map(|w| (vec![w[0]], vec![w[1]])).collect();
        let lip = empirical_lipschitz(|x| Ok(vec![c * x[0] + 1.0]), &probes).unwrap();
        if probes.iter().any(|(p, q)| p != q) {
            prop_assert!((lip - c).abs() <= 1e-9 * c);
        }
    }
}
