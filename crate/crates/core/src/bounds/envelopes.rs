use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::profiles::{
    build_constants, build_uniformly_convex, perturbed_profile, profile_of_potential, q_kernel, BuildOptions,
    ProfileConstants, SamplingOptions,
};
use crate::scenarios::{AssumptionMode, Scenario};

/// Everything the closed-form bounds depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    #[serde(rename = "C1W")]
    pub c1w: f64,
    #[serde(rename = "C2U")]
    pub c2u: Option<f64>,
    #[serde(rename = "C3U")]
    pub c3u: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda_u: f64,
    #[serde(rename = "C_u")]
    pub c_u: f64,
    pub lambda_bar: f64,
    #[serde(rename = "C_bar")]
    pub c_bar: f64,
    pub mode: AssumptionMode,
}

/// Which gradient estimate to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// `C_U⁻¹ e^{-λ_U τ} C1W`.
    Generic,
    /// `e^{-α τ} C1W`.
    UniformlyConvex,
}

/// Which Hessian estimate to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HessianCase {
    #[serde(rename = "A2")]
    A2,
    #[serde(rename = "A2prime")]
    A2Prime,
    #[serde(rename = "A2prime-positive-alpha")]
    A2PrimePositiveAlpha,
}

impl HessianCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::A2 => "A2",
            Self::A2Prime => "A2prime",
            Self::A2PrimePositiveAlpha => "A2prime-positive-alpha",
        }
    }
}

/// Constants for `κ_U` and `κ̄` together with the bound inputs.
#[derive(Debug, Clone)]
pub struct ScenarioBounds {
    pub inputs: BoundInputs,
    pub kappa_u: ProfileConstants,
    pub kappa_bar: ProfileConstants,
}

impl BoundInputs {
    /// Reads constants off a scenario and builds the two profiles.
    ///
    /// The uniformly convex mode uses `f = Id`, `C_U = 1`, `λ_U = α` for `κ_U`.
    pub fn from_scenario(scenario: &Scenario, opts: BuildOptions) -> Result<ScenarioBounds> {
        let req = scenario.required_constants()?;
        let c1w = scenario.perturbation.c1w;
        let r_grid: Vec<f64> = (1..=400).map(|i| 0.05 * i as f64).collect();
        let sampling = SamplingOptions { seed: scenario.sim.seed, ..SamplingOptions::default() };
        let profile = profile_of_potential(&scenario.potential, &r_grid, sampling)?;
        let kappa_u = match scenario.mode {
            AssumptionMode::A1A2PrimeUniformlyConvex => {
                build_uniformly_convex(&profile, req.alpha.ok_or(Error::MissingConstant("alpha"))?)?
            }
            _ => build_constants(&profile, opts)?,
        };
        let bar = perturbed_profile(&profile, c1w, kappa_u.c)?;
        let kappa_bar = build_constants(&bar, opts)?;
        let inputs = BoundInputs {
            c1w,
            c2u: req.c2u,
            c3u: req.c3u,
            alpha: req.alpha,
            lambda_u: kappa_u.lambda,
            c_u: kappa_u.c,
            lambda_bar: kappa_bar.lambda,
            c_bar: kappa_bar.c,
            mode: scenario.mode,
        };
        inputs.check()?;
        Ok(ScenarioBounds { inputs, kappa_u, kappa_bar })
    }

    pub(crate) fn check(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        pos(self.lambda_u, "lambda_u")?;
        pos(self.c_u, "C_u")?;
        pos(self.lambda_bar, "lambda_bar")?;
        pos(self.c_bar, "C_bar")?;
        if !(self.c1w >= 0.0) {
            return Err(Error::invalid(format!("C1W must be nonnegative, got {}", self.c1w)));
        }
        Ok(())
    }

    /// The Hessian case matching the assumption mode.
    pub fn default_case(&self) -> HessianCase {
        match self.mode {
            AssumptionMode::A1A2 => HessianCase::A2,
            AssumptionMode::A1A2Prime => HessianCase::A2Prime,
            AssumptionMode::A1A2PrimeUniformlyConvex => HessianCase::A2PrimePositiveAlpha,
        }
    }

    /// Hessian cases whose constants are all declared.
    pub fn available_cases(&self) -> Vec<HessianCase> {
        let mut out = Vec::new();
        if self.c2u.is_some() {
            out.push(HessianCase::A2);
        }
        if self.alpha.is_some() && self.c3u.is_some() {
            out.push(HessianCase::A2Prime);
            if self.alpha.is_some_and(|a| a > 0.0) {
                out.push(HessianCase::A2PrimePositiveAlpha);
            }
        }
        out
    }

    /// `q^κ̄_τ`.
    pub fn q_bar(&self, tau: f64) -> f64 {
        q_kernel(self.lambda_bar, self.c_bar, tau)
    }
}

/// `(e^{-aτ} - e^{-bτ}) / (b - a)`, with the limit `τ e^{-aτ}` when `a ≈ b`.
pub fn exp_difference_quotient(a: f64, b: f64, tau: f64) -> f64 {
    let gap = b - a;
    if gap.abs() < 1e-10 * a.abs().max(f64::MIN_POSITIVE) || gap == 0.0 {
        return tau * (-a * tau).exp();
    }
    -(-a * tau).exp() * (-gap * tau).exp_m1() / gap
}

/// Upper bound on `∫₀^τ e^{-λ_U(τ-u)} q^κ̄_u du`, valid for either ordering of
/// `λ_U` and `λ̄`.
pub fn convolution_bound(lambda_u: f64, lambda_bar: f64, c_bar: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let shift = (lambda_u / (2.0 * lambda_bar)).exp();
    let first = shift * (-lambda_u * tau).exp() / (c_bar * (2.0 * PI * lambda_bar).sqrt());
    let second = lambda_bar.sqrt() * shift * exp_difference_quotient(lambda_bar, lambda_u, tau) / (c_bar * (2.0 * PI).sqrt());
    first + second
}

fn tau_of(t: f64, horizon: f64) -> Result<f64> {
    let tau = horizon - t;
    if !(tau >= 0.0) {
        return Err(Error::invalid(format!("t = {t} lies after the horizon {horizon}")));
    }
    Ok(tau)
}

/// Bound on `‖∇φ_t‖_∞` at time `t` for horizon `horizon`.
pub fn gradient_envelope(inputs: &BoundInputs, t: f64, horizon: f64, mode: GradientMode) -> Result<f64> {
    gradient_envelope_tau(inputs, tau_of(t, horizon)?, mode)
}

/// [`gradient_envelope`] in time-to-go.
pub fn gradient_envelope_tau(inputs: &BoundInputs, tau: f64, mode: GradientMode) -> Result<f64> {
    if inputs.c1w == 0.0 {
        return Ok(0.0);
    }
    match mode {
        GradientMode::Generic => Ok(inputs.c1w * (-inputs.lambda_u * tau).exp() / inputs.c_u),
        GradientMode::UniformlyConvex => {
            let a = inputs.alpha.ok_or(Error::MissingConstant("alpha"))?;
            if !(a > 0.0) {
                return Err(Error::invalid(format!("uniformly convex gradient bound needs alpha > 0, got {a}")));
            }
            Ok(inputs.c1w * (-a * tau).exp())
        }
    }
}

/// Bound on `‖∇²φ_t‖_∞` at time `t` for horizon `horizon`.
pub fn hessian_envelope(inputs: &BoundInputs, t: f64, horizon: f64, case: HessianCase) -> Result<f64> {
    hessian_envelope_tau(inputs, tau_of(t, horizon)?, case)
}

/// [`hessian_envelope`] in time-to-go. Infinite at `τ = 0`.
pub fn hessian_envelope_tau(inputs: &BoundInputs, tau: f64, case: HessianCase) -> Result<f64> {
    let c1w = inputs.c1w;
    let (lu, lb, cu, cb) = (inputs.lambda_u, inputs.lambda_bar, inputs.c_u, inputs.c_bar);
    let value = match case {
        HessianCase::A2 => {
            let c2u = inputs.c2u.ok_or(Error::MissingConstant("C2U"))?;
            if c1w == 0.0 {
                return Ok(0.0);
            }
            2.0 * c1w * (inputs.q_bar(tau) + c2u / cu * convolution_bound(lu, lb, cb, tau))
        }
        HessianCase::A2Prime => {
            let c3u = inputs.c3u.ok_or(Error::MissingConstant("C3U"))?;
            let alpha = inputs.alpha.ok_or(Error::MissingConstant("alpha"))?;
            if c1w == 0.0 {
                return Ok(0.0);
            }
            let inner = c3u * exp_difference_quotient(lb, lu, tau) / cb + 2.0 * alpha.abs() * convolution_bound(lu, lb, cb, tau);
            c1w / cu * inner + 2.0 * c1w * inputs.q_bar(tau)
        }
        HessianCase::A2PrimePositiveAlpha => {
            let c3u = inputs.c3u.ok_or(Error::MissingConstant("C3U"))?;
            let alpha = inputs.alpha.ok_or(Error::MissingConstant("alpha"))?;
            if !(alpha > 0.0) {
                return Err(Error::invalid(format!("positive-alpha Hessian bound needs alpha > 0, got {alpha}")));
            }
            if c1w == 0.0 {
                return Ok(0.0);
            }
            c1w * (c3u / cb * exp_difference_quotient(lb, 2.0 * alpha, tau) + 2.0 * (-alpha * tau).exp() * inputs.q_bar(tau))
        }
    };
    Ok(value)
}
