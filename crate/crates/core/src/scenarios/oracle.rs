use crate::scenarios::perturbation::PerturbationFamily;
use crate::scenarios::potential::PotentialFamily;
use crate::scenarios::scenario::Scenario;

/// Exact solution for `U = |x|²/2`, `W = ⟨a, x⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuLinearOracle {
    pub a: Vec<f64>,
    pub horizon: f64,
}

impl OuLinearOracle {
    pub fn new(a: Vec<f64>, horizon: f64) -> Self {
        Self { a, horizon }
    }

    fn a2(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum()
    }

    /// `φ_t(x) = ⟨a, x⟩ e^{-(T-t)} - |a|²/2 (1 - e^{-2(T-t)})`.
    pub fn phi(&self, t: f64, x: &[f64]) -> f64 {
        let tau = self.horizon - t;
        let ax: f64 = self.a.iter().zip(x).map(|(p, q)| p * q).sum();
        ax * (-tau).exp() - 0.5 * self.a2() * (-(-2.0 * tau).exp_m1())
    }

    pub fn dphi_dt(&self, t: f64, x: &[f64]) -> f64 {
        let tau = self.horizon - t;
        let ax: f64 = self.a.iter().zip(x).map(|(p, q)| p * q).sum();
        ax * (-tau).exp() + self.a2() * (-2.0 * tau).exp()
    }

    pub fn grad_phi(&self, t: f64, _x: &[f64], out: &mut [f64]) {
        let e = (-(self.horizon - t)).exp();
        for (o, a) in out.iter_mut().zip(&self.a) {
            *o = a * e;
        }
    }

    /// `∇²φ ≡ 0`.
    pub fn hess_phi(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }

    /// `S_t(x) = x + a (1 - e^{-t})`, flow time `t`.
    pub fn flow(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let s = -(-t).exp_m1();
        x.iter().zip(&self.a).map(|(v, a)| v + a * s).collect()
    }

    /// `T(x) = x - a`.
    pub fn transport(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.a).map(|(v, a)| v - a).collect()
    }

    /// Mean of the optimally controlled dynamics started at `x0` at time `t0`, at time `s`.
    pub fn controlled_mean(&self, t0: f64, s: f64, x0: &[f64]) -> Vec<f64> {
        // m' = -m - 2 a e^{-(T-u)}
        let t = self.horizon;
        let decay = (-(s - t0)).exp();
        let forced = (-(t - s)).exp() - (-(t - t0)).exp() * (-(s - t0)).exp();
        x0.iter().zip(&self.a).map(|(m, a)| m * decay - a * forced).collect()
    }
}

/// The OU/linear-W oracle when the scenario matches it exactly.
pub fn closed_form_oracle(scenario: &Scenario) -> Option<OuLinearOracle> {
    match (scenario.potential.family(), scenario.perturbation.family()) {
        (PotentialFamily::Quadratic { scale }, PerturbationFamily::Linear { a }) if *scale == 1.0 => {
            Some(OuLinearOracle::new(a.clone(), scenario.sim.horizon))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::SimParams;

    #[test]
    fn reference_values() {
        let o = OuLinearOracle::new(vec![0.5], 1.0);
        let mut g = [0.0];
        o.grad_phi(0.0, &[3.0], &mut g);
        assert!((g[0] - 0.5 * (-1f64).exp()).abs() < 1e-15);
        assert!((o.phi(0.0, &[1.0]) - 0.075_856_63).abs() < 1e-8);
        assert!((o.flow(4.0, &[0.0])[0] - 0.490_842).abs() < 1e-6);
        assert_eq!(o.transport(&[1.0]), vec![0.5]);
    }

    #[test]
    fn controlled_mean_solves_the_ode() {
        let o = OuLinearOracle::new(vec![0.5], 4.0);
        let (t0, s, h) = (1.0, 2.5, 1e-5);
        let m = |u: f64| o.controlled_mean(t0, u, &[0.7])[0];
        let lhs = (m(s + h) - m(s - h)) / (2.0 * h);
        let rhs = -m(s) - 2.0 * 0.5 * (-(4.0 - s)).exp();
        assert!((lhs - rhs).abs() < 1e-8);
        assert!((m(t0) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn only_matches_ou_linear() {
        assert!(closed_form_oracle(&Scenario::ou_linear(0.5, SimParams::default())).is_some());
        let s = Scenario::cosine_smooth_norm(0.5, SimParams::default(), crate::scenarios::AssumptionMode::A1A2);
        assert!(closed_form_oracle(&s).is_none());
    }
}
