use coupling_lab::bounds::{gradient_envelope_tau, BoundInputs, GradientMode};
use coupling_lab::profiles::BuildOptions;
use coupling_lab::scenarios::{closed_form_oracle, AssumptionMode, Perturbation, Potential, Scenario, SimParams};
use coupling_lab::value::{estimate_field, estimate_grad_phi, estimate_phi, hjb_residual_oracle, FieldOptions};
use proptest::prelude::*;

fn ou(horizon: f64) -> Scenario {
    Scenario::ou_linear(0.5, SimParams { horizon, dt: 1e-2, ..SimParams::default() })
}

fn cosine(horizon: f64) -> Scenario {
    Scenario::cosine_smooth_norm(0.5, SimParams { horizon, dt: 1e-2, ..SimParams::default() }, AssumptionMode::A1A2Prime)
}

fn grad_at(s: &Scenario, x: f64, h: f64) -> f64 {
    estimate_grad_phi(s, 0.0, s.sim.horizon, &[vec![x]], 4000, 9, h).unwrap().grad[0][0]
}

#[test]
fn rerun_reproduces_bitwise() {
    let s = cosine(1.0);
    let pts = vec![vec![-1.0], vec![0.0], vec![0.7]];
    let opts = FieldOptions { n_samples: 2000, seed: 5, dt: 1e-2, hessian: true, ..FieldOptions::default() };
    let a = estimate_field(&s, &[0.0, 0.5], 1.0, &pts, opts).unwrap();
    let b = estimate_field(&s, &[0.0, 0.5], 1.0, &pts, opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn oracle_difference_quotient_is_step_independent() {
    // φ̂ is affine in x for OU with linear W once the noise is shared, so the
    // central difference is exact in h and only the Euler bias remains
    let s = ou(1.0);
    let g: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&h| grad_at(&s, 0.3, h)).collect();
    for v in &g {
        assert!((v - g[0]).abs() < 1e-10, "{g:?}");
    }
    let exact = 0.5 * (-1.0f64).exp();
    let euler = 0.5 * 0.99f64.powi(100);
    assert!((g[0] - euler).abs() < 1e-10, "{} vs {euler}", g[0]);
    assert!((g[0] - exact).abs() < 1e-3);
}

#[test]
fn difference_quotient_converges_at_second_order() {
    // self-convergence on a nonlinear field: |g(h) - g(h/2)| ~ h²
    let s = cosine(0.5);
    let hs = [0.4, 0.2, 0.1, 0.05];
    let g: Vec<f64> = hs.iter().map(|&h| grad_at(&s, 0.8, h)).collect();
    let e: Vec<f64> = g.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let slope = |i: usize| (e[i] / e[i + 1]).ln() / 2f64.ln();
    let (s0, s1) = (slope(0), slope(1));
    assert!((1.7..=2.3).contains(&s0) && (1.7..=2.3).contains(&s1), "errors {e:?}, slopes {s0} {s1}");
}

#[test]
fn four_times_the_samples_halves_the_error() {
    let s = cosine(1.0);
    let pts = vec![vec![0.5]];
    let small = estimate_grad_phi(&s, 0.0, 1.0, &pts, 4000, 3, 0.05).unwrap();
    let large = estimate_grad_phi(&s, 0.0, 1.0, &pts, 16000, 3, 0.05).unwrap();
    let r_phi = small.se_phi[0] / large.se_phi[0];
    let r_grad = small.se_grad[0][0] / large.se_grad[0][0];
    assert!((1.7..=2.3).contains(&r_phi), "{r_phi}");
    assert!((1.7..=2.3).contains(&r_grad), "{r_grad}");
}

#[test]
fn oracle_saturates_gradient_bound() {
    let s = Scenario::ou_linear(0.5, SimParams { horizon: 4.0, ..SimParams::default() });
    let oracle = closed_form_oracle(&s).unwrap();
    let k = BoundInputs::from_scenario(&s, BuildOptions::default()).unwrap().inputs;
    let mut g = [0.0];
    for t in [0.0, 1.0, 2.0, 3.0, 4.0] {
        oracle.grad_phi(t, &[0.0], &mut g);
        let bound = gradient_envelope_tau(&k, 4.0 - t, GradientMode::UniformlyConvex).unwrap();
        assert!((g[0].abs() - bound).abs() <= 1e-12 * bound, "t = {t}: {} vs {bound}", g[0]);
    }
}

#[test]
fn oracle_solves_hjb() {
    let oracle = closed_form_oracle(&ou(4.0)).unwrap();
    let times: Vec<f64> = (0..41).map(|i| 4.0 * i as f64 / 40.0).collect();
    let pts: Vec<Vec<f64>> = (0..41).map(|i| vec![-2.0 + 0.1 * i as f64]).collect();
    let table = hjb_residual_oracle(&oracle, &times, &pts, 1e-10);
    assert!(table.max_abs_residual <= 1e-10, "{}", table.max_abs_residual);
    assert!(table.within_budget);
    assert!(table.terminal_sup_diff <= 1e-12);
}

#[test]
fn zero_perturbation_gives_zero_field() {
    let s = Scenario::new(Potential::quadratic(1, 1.0), Perturbation::zero(1), SimParams::default(), AssumptionMode::A1A2Prime)
        .unwrap();
    let opts = FieldOptions { n_samples: 500, dt: 1e-2, hessian: true, ..FieldOptions::default() };
    let e = &estimate_field(&s, &[0.0], 1.0, &[vec![0.4]], opts).unwrap()[0];
    assert_eq!(e.phi[0], 0.0);
    assert_eq!(e.grad[0][0], 0.0);
    assert_eq!(e.hess_quot[0], 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn inner_mean_is_positive(a in -20.0f64..20.0, x in -5.0f64..5.0, seed in any::<u64>()) {
        let s = Scenario::ou_linear(a, SimParams { horizon: 0.5, dt: 1e-2, ..SimParams::default() });
        let e = estimate_phi(&s, 0.0, 0.5, &[vec![x]], 200, seed).unwrap();
        prop_assert!(e.phi[0].is_finite(), "{}", e.phi[0]);
        prop_assert!(e.se_phi[0].is_finite() && e.se_phi[0] >= 0.0);
    }

    #[test]
    fn estimators_are_reproducible(seed in any::<u64>(), x in -2.0f64..2.0) {
        let s = cosine(0.5);
        let a = estimate_grad_phi(&s, 0.1, 0.5, &[vec![x]], 300, seed, 0.05).unwrap();
        let b = estimate_grad_phi(&s, 0.1, 0.5, &[vec![x]], 300, seed, 0.05).unwrap();
        prop_assert_eq!(a, b);
    }
}
