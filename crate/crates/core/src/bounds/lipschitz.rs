use std::f64::consts::{E, PI};

use serde::Serialize;

use crate::bounds::envelopes::{hessian_envelope_tau, BoundInputs, HessianCase};
use crate::error::{Error, Result};
use crate::numerics::quad::{integrate, integrate_to_infinity, QuadOptions};
use crate::profiles::branch_point;

/// Which Lipschitz constant to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LipschitzCase {
    /// Under the bounded-Hessian assumption.
    #[serde(rename = "bounded-hessian")]
    BoundedHessian,
    /// Under the Lipschitz-Hessian assumption.
    #[serde(rename = "lipschitz-hessian")]
    LipschitzHessian,
    /// Lipschitz Hessian with `α > 0`.
    #[serde(rename = "positive-alpha")]
    PositiveAlpha,
}

impl LipschitzCase {
    pub fn hessian_case(&self) -> HessianCase {
        match self {
            Self::BoundedHessian => HessianCase::A2,
            Self::LipschitzHessian => HessianCase::A2Prime,
            Self::PositiveAlpha => HessianCase::A2PrimePositiveAlpha,
        }
    }

    pub fn from_hessian_case(case: HessianCase) -> Self {
        match case {
            HessianCase::A2 => Self::BoundedHessian,
            HessianCase::A2Prime => Self::LipschitzHessian,
            HessianCase::A2PrimePositiveAlpha => Self::PositiveAlpha,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::BoundedHessian => "bounded-hessian",
            Self::LipschitzHessian => "lipschitz-hessian",
            Self::PositiveAlpha => "positive-alpha",
        }
    }
}

/// A Lipschitz constant for both `S` and `T`, closed form and quadrature.
///
/// Values are also carried as logarithms since the closed forms overflow for
/// small `λ̄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzBound {
    pub case: LipschitzCase,
    pub log_closed: f64,
    pub closed: f64,
    /// `∫₀^∞` of the matching Hessian envelope.
    pub log_quadrature: f64,
    pub quadrature: f64,
    pub quad_error: f64,
}

impl LipschitzBound {
    /// `1 - log_quadrature / log_closed`, the share of the exponent the
    /// closed form gives away.
    pub fn exponent_gap(&self) -> f64 {
        if self.log_closed == 0.0 {
            0.0
        } else {
            1.0 - self.log_quadrature / self.log_closed
        }
    }
}

/// Exponent of the closed-form constant for `case`.
pub fn lipschitz_exponent(inputs: &BoundInputs, case: LipschitzCase) -> Result<f64> {
    inputs.check()?;
    let (c1w, lu, lb, cu, cb) = (inputs.c1w, inputs.lambda_u, inputs.lambda_bar, inputs.c_u, inputs.c_bar);
    let shift = (lu / (2.0 * lb)).exp();
    let root = (PI * lb).sqrt();
    let v = match case {
        LipschitzCase::BoundedHessian => {
            let c2u = inputs.c2u.ok_or(Error::MissingConstant("C2U"))?;
            2.0 * c1w / (root * cb) * (3.0 * shift * c2u / (2.0 * lu * cu) + 2f64.sqrt())
        }
        LipschitzCase::LipschitzHessian => {
            let c3u = inputs.c3u.ok_or(Error::MissingConstant("C3U"))?;
            let alpha = inputs.alpha.ok_or(Error::MissingConstant("alpha"))?;
            c1w / cb * (c3u / (lu * lb * cu) + 3.0 * alpha.abs() * shift / (root * lu * cu) + 2.0 * 2f64.sqrt() / root)
        }
        LipschitzCase::PositiveAlpha => {
            let c3u = inputs.c3u.ok_or(Error::MissingConstant("C3U"))?;
            let alpha = inputs.alpha.ok_or(Error::MissingConstant("alpha"))?;
            if !(alpha > 0.0) {
                return Err(Error::invalid(format!("positive-alpha constant needs alpha > 0, got {alpha}")));
            }
            c1w / cb * (c3u / (2.0 * lb * alpha) + 2f64.sqrt() / root + (2.0 * lb).sqrt() / (PI * E * (alpha + lb)).sqrt())
        }
    };
    Ok(v)
}

/// `∫₀^∞` of the Hessian envelope for `case`, with its error estimate.
pub fn integrate_hessian_envelope(inputs: &BoundInputs, case: HessianCase) -> Result<(f64, f64)> {
    // Surface missing constants before integrating.
    hessian_envelope_tau(inputs, 1.0, case)?;
    let env = |tau: f64| hessian_envelope_tau(inputs, tau, case).unwrap_or(f64::NAN);
    let opts = QuadOptions { abs_tol: 1e-12, rel_tol: 1e-11, max_intervals: 4000 };
    let b = branch_point(inputs.lambda_bar);
    let head = integrate(|s| 2.0 * s * env(s * s), 0.0, b.sqrt(), opts)?;
    let rate = match case {
        HessianCase::A2PrimePositiveAlpha => inputs.lambda_bar.min(inputs.alpha.unwrap_or(1.0)),
        _ => inputs.lambda_bar.min(inputs.lambda_u),
    };
    let scale = 1.0 / rate;
    let mid = integrate(env, b, b + 40.0 * scale, opts)?;
    let tail = integrate_to_infinity(|u| scale * env(b + 40.0 * scale + scale * u), 0.0, opts)?;
    let total = head.value + mid.value + tail.value;
    if !total.is_finite() {
        return Err(Error::Divergent(format!("Hessian envelope {} has no finite integral", case.as_str())));
    }
    Ok((total, head.error + mid.error + tail.error))
}

/// Closed-form Lipschitz constant for `case`, cross-checked against the
/// integral of the Hessian envelope it comes from.
pub fn lipschitz_bound(inputs: &BoundInputs, case: LipschitzCase) -> Result<LipschitzBound> {
    let log_closed = lipschitz_exponent(inputs, case)?;
    let (log_quadrature, quad_error) = if inputs.c1w == 0.0 {
        (0.0, 0.0)
    } else {
        integrate_hessian_envelope(inputs, case.hessian_case())?
    };
    if log_quadrature > log_closed * (1.0 + 1e-9) + quad_error {
        return Err(Error::QuadratureExceedsClosedForm {
            case: case.as_str().into(),
            closed: log_closed,
            quadrature: log_quadrature,
        });
    }
    Ok(LipschitzBound {
        case,
        log_closed,
        closed: log_closed.exp(),
        log_quadrature,
        quadrature: log_quadrature.exp(),
        quad_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::AssumptionMode;

    fn positive_alpha_inputs() -> BoundInputs {
        BoundInputs {
            c1w: 0.5,
            c2u: Some(1.0),
            c3u: Some(0.0),
            alpha: Some(1.0),
            lambda_u: 1.0,
            c_u: 1.0,
            lambda_bar: 0.152_175_748_725_409_8,
            c_bar: 0.303_265_329_856_316_7,
            mode: AssumptionMode::A1A2PrimeUniformlyConvex,
        }
    }

    #[test]
    fn positive_alpha_reference_exponents() {
        let b = lipschitz_bound(&positive_alpha_inputs(), LipschitzCase::PositiveAlpha).unwrap();
        assert!((b.log_closed - 3.662_179_977_805_820_4).abs() < 1e-10);
        assert!((b.log_quadrature - 1.648_299_467_096_972_4).abs() < 1e-8);
    }

    #[test]
    fn zero_perturbation_is_one() {
        let k = BoundInputs { c1w: 0.0, ..positive_alpha_inputs() };
        for case in [LipschitzCase::BoundedHessian, LipschitzCase::LipschitzHessian, LipschitzCase::PositiveAlpha] {
            let b = lipschitz_bound(&k, case).unwrap();
            assert_eq!(b.closed, 1.0);
            assert_eq!(b.quadrature, 1.0);
        }
    }

    #[test]
    fn quadrature_below_closed_form_all_cases() {
        for case in [LipschitzCase::BoundedHessian, LipschitzCase::LipschitzHessian, LipschitzCase::PositiveAlpha] {
            let b = lipschitz_bound(&positive_alpha_inputs(), case).unwrap();
            assert!(b.log_quadrature <= b.log_closed, "{case:?}: {b:?}");
        }
    }
}
