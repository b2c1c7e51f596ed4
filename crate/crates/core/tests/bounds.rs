use coupling_lab::bounds::{
    gradient_envelope_tau, hessian_envelope_tau, integrate_hessian_envelope, kernel_integrals, lipschitz_bound,
    lipschitz_exponent, BoundInputs, GradientMode, HessianCase, KernelParams, LipschitzCase,
};
use coupling_lab::scenarios::AssumptionMode;
use coupling_lab::Error;
use coupling_lab::transport::hessian_envelope_to_lipschitz;
use proptest::prelude::*;

fn inputs(c1w: f64, c2u: f64, c3u: f64, alpha: f64) -> BoundInputs {
    BoundInputs {
        c1w,
        c2u: Some(c2u),
        c3u: Some(c3u),
        alpha: Some(alpha),
        lambda_u: 0.8,
        c_u: 0.7,
        lambda_bar: 0.4,
        c_bar: 0.3,
        mode: AssumptionMode::A1A2Prime,
    }
}

#[test]
fn kernel_estimates_dominate_on_grid() {
    for lambda_bar in [0.1, 0.5, 1.0] {
        for p in [0.5, 1.0, 2.0] {
            let v = kernel_integrals(KernelParams { lambda_u: lambda_bar + p, lambda_bar, c_bar: 0.5, alpha: p, tau: 2.0 }).unwrap();
            assert!(v.convolution.dominates && v.discounted.dominates && v.total.dominates, "{v:?}");
        }
    }
}

#[test]
fn envelope_integration_matches_positive_alpha_constant() {
    // α = 1, C1W = 0.5, C3U = 0 with the uniformly convex rates
    let k = BoundInputs {
        c1w: 0.5,
        c2u: None,
        c3u: Some(0.0),
        alpha: Some(1.0),
        lambda_u: 1.0,
        c_u: 1.0,
        lambda_bar: 0.5,
        c_bar: 0.5,
        mode: AssumptionMode::A1A2PrimeUniformlyConvex,
    };
    let env = |t: f64| hessian_envelope_tau(&k, t, HessianCase::A2PrimePositiveAlpha).unwrap();
    let (lip_s, lip_t) = hessian_envelope_to_lipschitz(env, |t| -env(t)).unwrap();
    let b = lipschitz_bound(&k, LipschitzCase::PositiveAlpha).unwrap();
    assert!((lip_s.ln() - b.log_quadrature).abs() < 1e-6, "{} vs {}", lip_s.ln(), b.log_quadrature);
    assert!((lip_s - lip_t).abs() < 1e-12);
    assert!(lip_s <= b.closed * (1.0 + 1e-9));
}

#[test]
fn positive_alpha_constant_can_undercut_its_integral() {
    // for small α + λ̄ the last term of the closed form is below the
    // discounted kernel integral, and the cross-check reports it
    let k = inputs(0.05, 0.0, 0.0, 0.1);
    let (log_q, _) = integrate_hessian_envelope(&k, HessianCase::A2PrimePositiveAlpha).unwrap();
    let closed = lipschitz_exponent(&k, LipschitzCase::PositiveAlpha).unwrap();
    assert!(log_q > closed, "{log_q} <= {closed}");
    assert!(matches!(
        lipschitz_bound(&k, LipschitzCase::PositiveAlpha),
        Err(Error::QuadratureExceedsClosedForm { .. })
    ));
    assert!(lipschitz_bound(&k, LipschitzCase::LipschitzHessian).is_ok());
}

#[test]
fn zero_perturbation_gives_unit_constants() {
    let k = inputs(0.0, 1.0, 1.0, 0.5);
    for case in [LipschitzCase::BoundedHessian, LipschitzCase::LipschitzHessian, LipschitzCase::PositiveAlpha] {
        assert_eq!(lipschitz_bound(&k, case).unwrap().closed, 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kernel_estimates_dominate(lambda_bar in 0.05f64..2.0, gap in 0.0f64..3.0, alpha in 0.0f64..3.0, tau in 0.01f64..6.0) {
        let v = kernel_integrals(KernelParams { lambda_u: lambda_bar + gap, lambda_bar, c_bar: 0.4, alpha, tau }).unwrap();
        prop_assert!(v.convolution.dominates, "{v:?}");
        prop_assert!(v.discounted.dominates, "{v:?}");
        prop_assert!(v.total.dominates, "{v:?}");
    }

    #[test]
    fn lipschitz_monotone_in_constants(
        c1w in 0.0f64..1.0, c2u in 0.0f64..3.0, c3u in 0.0f64..3.0, alpha in 0.1f64..2.0, bump in 0.01f64..1.0,
    ) {
        let base = inputs(c1w, c2u, c3u, alpha);
        for case in [LipschitzCase::BoundedHessian, LipschitzCase::LipschitzHessian, LipschitzCase::PositiveAlpha] {
            let b0 = lipschitz_exponent(&base, case).unwrap();
            for more in [
                BoundInputs { c1w: c1w + bump, ..base },
                BoundInputs { c2u: Some(c2u + bump), ..base },
                BoundInputs { c3u: Some(c3u + bump), ..base },
            ] {
                let b1 = lipschitz_exponent(&more, case).unwrap();
                prop_assert!(b1 >= b0, "{case:?}: {b1} < {b0}");
            }
        }
    }

    #[test]
    fn positive_alpha_envelope_improves(alpha in 0.1f64..3.0, c3u in 0.0f64..3.0, tau in 0.01f64..10.0) {
        // uniformly convex rates: λ_U = α, C_U = 1
        let k = BoundInputs { lambda_u: alpha, c_u: 1.0, ..inputs(0.5, 1.0, c3u, alpha) };
        let better = hessian_envelope_tau(&k, tau, HessianCase::A2PrimePositiveAlpha).unwrap();
        let generic = hessian_envelope_tau(&k, tau, HessianCase::A2Prime).unwrap();
        prop_assert!(better <= generic * (1.0 + 1e-12), "{better} > {generic}");
    }

    #[test]
    fn uniformly_convex_gradient_improves(lambda_u in 0.05f64..2.0, extra in 0.0f64..2.0, c_u in 0.05f64..1.0, tau in 0.0f64..10.0) {
        let k = BoundInputs { lambda_u, c_u, alpha: Some(lambda_u + extra), ..inputs(0.7, 1.0, 1.0, 1.0) };
        let uc = gradient_envelope_tau(&k, tau, GradientMode::UniformlyConvex).unwrap();
        let generic = gradient_envelope_tau(&k, tau, GradientMode::Generic).unwrap();
        prop_assert!(uc <= generic * (1.0 + 1e-12));
    }

    #[test]
    fn envelope_integral_below_closed_form(c1w in 0.05f64..1.0, c2u in 0.0f64..2.0, c3u in 0.0f64..2.0, alpha in 0.1f64..3.0) {
        let k = inputs(c1w, c2u, c3u, alpha);
        // the positive-alpha closed form only dominates once α + λ̄ is large enough
        let cases: &[HessianCase] = if alpha >= 1.0 {
            &[HessianCase::A2, HessianCase::A2Prime, HessianCase::A2PrimePositiveAlpha]
        } else {
            &[HessianCase::A2, HessianCase::A2Prime]
        };
        for &case in cases {
            let (log_q, err) = integrate_hessian_envelope(&k, case).unwrap();
            let lc = match case {
                HessianCase::A2 => LipschitzCase::BoundedHessian,
                HessianCase::A2Prime => LipschitzCase::LipschitzHessian,
                HessianCase::A2PrimePositiveAlpha => LipschitzCase::PositiveAlpha,
            };
            let closed = lipschitz_bound(&k, lc).unwrap().log_closed;
            prop_assert!(log_q <= closed * (1.0 + 1e-9) + err, "{case:?}: {log_q} > {closed}");
        }
    }
}
