use coupling_lab::numerics::stats::ks_two_sample;
use coupling_lab::profiles::{build_constants, BuildOptions, ConvexityProfile};
use coupling_lab::scenarios::{AssumptionMode, Potential, Scenario, SimParams};
use coupling_lab::sde::{
    contraction_report, simulate_drift, simulate_reflection_coupling, CoalescenceRule, DriftField, InitialPair, TimeGrid,
};
use proptest::prelude::*;

fn cosine() -> Potential {
    Scenario::cosine_smooth_norm(0.5, SimParams::default(), AssumptionMode::A1A2Prime).potential
}

#[test]
fn second_copy_has_the_langevin_law() {
    let drift = DriftField::from_potential(&cosine());
    let grid = TimeGrid::uniform(0.0, 1.0, 1e-3, 1000).unwrap();
    let pair = InitialPair::Point { x: vec![0.5], xhat: vec![-0.5] };
    let ens = simulate_reflection_coupling(&drift, &pair, &grid, 10_000, 11, CoalescenceRule::default()).unwrap();
    let k = ens.times.len() - 1;
    let xhat: Vec<f64> = ens.xhat[k].clone();
    let free = simulate_drift(&drift, &[-0.5], &grid, 10_000, 12).unwrap();
    let ks = ks_two_sample(&xhat, free.terminal());
    assert!(ks <= 0.02, "KS = {ks}");
}

#[test]
fn copies_agree_after_meeting() {
    let drift = DriftField::from_potential(&Potential::quadratic(2, 1.0));
    let grid = TimeGrid::uniform(0.0, 2.0, 1e-2, 5).unwrap();
    let pair = InitialPair::Point { x: vec![0.3, 0.0], xhat: vec![-0.3, 0.1] };
    let ens = simulate_reflection_coupling(&drift, &pair, &grid, 500, 4, CoalescenceRule::default()).unwrap();
    let met = ens.coalescence.iter().filter(|t| t.is_finite()).count();
    assert!(met > 100, "only {met} pairs met");
    for (i, &t0) in ens.coalescence.iter().enumerate() {
        for (k, &t) in ens.times.iter().enumerate() {
            if t >= t0 {
                assert_eq!(ens.x[k][2 * i..2 * i + 2], ens.xhat[k][2 * i..2 * i + 2], "path {i} at t = {t}");
            }
        }
    }
}

#[test]
fn ou_contraction_below_envelope() {
    let k = build_constants(&ConvexityProfile::constant(1.0), BuildOptions::default()).unwrap();
    let drift = DriftField::from_potential(&Potential::quadratic(1, 1.0));
    let grid = TimeGrid::with_records(0.0, 2.0, 1e-3, &[0.0, 0.5, 1.0, 2.0]).unwrap();
    let pair = InitialPair::Point { x: vec![0.5], xhat: vec![-0.5] };
    let ens = simulate_reflection_coupling(&drift, &pair, &grid, 20_000, 5, CoalescenceRule::default()).unwrap();
    let rep = contraction_report(&ens, &k).unwrap();
    for r in &rep.rows {
        assert!(r.mean_f_delta <= r.envelope_f + 3.0 * r.se_f_delta, "{r:?}");
        if r.t > 0.0 {
            assert!(r.frac_distinct <= r.envelope_q + 3.0 * r.se_frac_distinct, "{r:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn coupling_is_deterministic(seed in any::<u64>(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let drift = DriftField::from_potential(&cosine());
        let grid = TimeGrid::uniform(0.0, 0.3, 1e-2, 3).unwrap();
        let pair = InitialPair::Point { x: vec![x], xhat: vec![y] };
        let a = simulate_reflection_coupling(&drift, &pair, &grid, 64, seed, CoalescenceRule::default()).unwrap();
        let b = simulate_reflection_coupling(&drift, &pair, &grid, 64, seed, CoalescenceRule::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn distances_never_grow_past_start_for_ou_in_expectation(seed in 0u64..1000) {
        // synchronous OU after meeting and reflection before: |D| is a
        // nonnegative supermartingale, so its mean cannot exceed |D_0|
        let drift = DriftField::from_potential(&Potential::quadratic(1, 1.0));
        let grid = TimeGrid::uniform(0.0, 0.5, 1e-2, 50).unwrap();
        let pair = InitialPair::Point { x: vec![1.0], xhat: vec![-1.0] };
        let ens = simulate_reflection_coupling(&drift, &pair, &grid, 2000, seed, CoalescenceRule::default()).unwrap();
        let d = ens.distances(ens.times.len() - 1);
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        prop_assert!(mean <= 2.0, "{mean}");
    }
}
