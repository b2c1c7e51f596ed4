use coupling_lab::profiles::{
    branch_point, build_constants, q_integral, q_kernel, wf_distance, BuildOptions, ConvexityProfile, WfMode,
};
use coupling_lab::numerics::{integrate_to_infinity, QuadOptions};
use proptest::prelude::*;

fn opts() -> BuildOptions {
    BuildOptions { nodes_per_segment: 48, ..BuildOptions::default() }
}

#[test]
fn constant_profile_reference() {
    let k = build_constants(&ConvexityProfile::constant(1.0), BuildOptions::default()).unwrap();
    assert_eq!(k.r0, 0.0);
    assert!((k.r1 - 8f64.sqrt()).abs() < 1e-10);
    assert!((k.lambda - 0.5).abs() < 1e-10);
    assert!((k.c - 0.5).abs() < 1e-10);
}

#[test]
fn affine_inverse_matches_exponential_formula() {
    // κ(r) = α - 8c/r gives C = e^{-2c²/α}/2
    for (alpha, c1w, want) in [(1.0, 0.5, 0.5 * (-0.5f64).exp()), (2.0, 1.0, 0.5 * (-1.0f64).exp())] {
        let k = build_constants(&ConvexityProfile::affine_inverse(alpha, c1w), BuildOptions::default()).unwrap();
        assert!(((k.c - want) / want).abs() < 1e-6, "{alpha} {c1w}: {} vs {want}", k.c);
    }
}

#[test]
fn q_kernel_integral_is_closed_form() {
    for (lambda, c) in [(0.5, 0.5), (0.1, 0.2), (2.0, 1.0)] {
        let head = coupling_lab::numerics::integrate(|t| q_kernel(lambda, c, t), 0.0, branch_point(lambda), QuadOptions::with_tol(1e-12))
            .unwrap()
            .value;
        let tail = integrate_to_infinity(|t| q_kernel(lambda, c, t), branch_point(lambda), QuadOptions::with_tol(1e-12)).unwrap().value;
        assert!(((head + tail) / q_integral(lambda, c) - 1.0).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn constants_satisfy_contraction_properties(alpha in 0.3f64..3.0, c in 0.0f64..0.6) {
        let k = build_constants(&ConvexityProfile::affine_inverse(alpha, c), opts()).unwrap();
        let check = k.check_contraction_properties(1e-6 + k.quad_error);
        prop_assert!(check.pass, "{check:?}");
        for row in k.rows() {
            prop_assert!(k.c * row.r <= row.f + 1e-9 && row.f <= row.r + 1e-9);
            prop_assert!(k.c <= row.fprime + 1e-9 && row.fprime <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn domination_orders_constants(alpha in 0.3f64..2.0, c_lo in 0.0f64..0.4, extra in 0.05f64..0.5) {
        // κ₁ = α - 8c/r ≥ κ₂ = α - 8(c + extra)/r everywhere
        let k1 = build_constants(&ConvexityProfile::affine_inverse(alpha, c_lo), opts()).unwrap();
        let k2 = build_constants(&ConvexityProfile::affine_inverse(alpha, c_lo + extra), opts()).unwrap();
        prop_assert!(k1.lambda >= k2.lambda - 1e-8, "{} < {}", k1.lambda, k2.lambda);
        prop_assert!(k1.c >= k2.c - 1e-8, "{} < {}", k1.c, k2.c);
    }

    #[test]
    fn constant_profiles_scale(a in 0.2f64..4.0, b in 0.2f64..4.0) {
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        let kh = build_constants(&ConvexityProfile::constant(hi), opts()).unwrap();
        let kl = build_constants(&ConvexityProfile::constant(lo), opts()).unwrap();
        prop_assert!(kh.lambda >= kl.lambda - 1e-8);
        prop_assert!(kh.c >= kl.c - 1e-8);
    }

    #[test]
    fn q_kernel_branches_meet(lambda in 0.01f64..5.0, c in 0.01f64..1.0) {
        let t = branch_point(lambda);
        let left = 1.0 / (2.0 * c * (std::f64::consts::PI * t).sqrt());
        prop_assert!((q_kernel(lambda, c, t) - left).abs() <= 1e-12 * left.max(1.0));
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let v = q_kernel(lambda, c, t * (1.0 + 0.2 * i as f64));
            prop_assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn exact_wf_below_monotone_pairing(
        a in proptest::collection::vec(-4.0f64..4.0, 1..9),
        shift in proptest::collection::vec(-4.0f64..4.0, 9),
    ) {
        let k = build_constants(&ConvexityProfile::constant(1.0), opts()).unwrap();
        let xs: Vec<Vec<f64>> = a.iter().map(|&v| vec![v]).collect();
        let ys: Vec<Vec<f64>> = shift.iter().take(a.len()).map(|&v| vec![v]).collect();
        let exact = wf_distance(&xs, &ys, &k, WfMode::default()).unwrap();
        let upper = wf_distance(&xs, &ys, &k, WfMode::MonotoneUpperBound1d).unwrap();
        prop_assert!(exact <= upper + 1e-12, "{exact} > {upper}");
    }
}
