use std::f64::consts::PI;

use serde::Serialize;

use crate::bounds::envelopes::convolution_bound;
use crate::error::{Error, Result};
use crate::numerics::quad::{integrate, integrate_to_infinity, QuadOptions};
use crate::profiles::{branch_point, q_integral, q_kernel};

/// Parameters of the three `q`-integral estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelParams {
    pub lambda_u: f64,
    pub lambda_bar: f64,
    pub c_bar: f64,
    pub alpha: f64,
    /// Time-to-go `T - t` of the first estimate.
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelBound {
    pub closed: f64,
    pub quadrature: f64,
    pub quad_error: f64,
    /// `quadrature ≤ closed` up to the quadrature error.
    pub dominates: bool,
}

impl KernelBound {
    fn new(closed: f64, quadrature: f64, quad_error: f64) -> Self {
        let slack = quad_error + 1e-12 * closed.abs();
        Self { closed, quadrature, quad_error, dominates: quadrature <= closed + slack }
    }

    pub fn relative_gap(&self) -> f64 {
        (self.closed - self.quadrature) / self.closed.abs().max(f64::MIN_POSITIVE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelIntegrals {
    pub params: KernelParams,
    /// `∫₀^τ e^{-λ_U(τ-u)} q_u du`.
    pub convolution: KernelBound,
    /// `∫₀^∞ e^{-αt} q_t dt`.
    pub discounted: KernelBound,
    /// `∫₀^∞ q_t dt`.
    pub total: KernelBound,
}

fn opts() -> QuadOptions {
    QuadOptions { abs_tol: 1e-13, rel_tol: 1e-12, max_intervals: 4000 }
}

/// `∫₀^∞ h(t) q_t dt` split at the branch point, with the `1/√t` singularity
/// removed by `t = s²` on the first piece.
fn q_weighted_integral(lambda: f64, c: f64, h: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let b = branch_point(lambda);
    let head = integrate(|s| 2.0 * s * h(s * s) * q_kernel(lambda, c, s * s), 0.0, b.sqrt(), opts())?;
    let scale = 1.0 / lambda;
    let tail = integrate_to_infinity(|u| scale * h(b + scale * u) * q_kernel(lambda, c, b + scale * u), 0.0, opts())?;
    Ok((head.value + tail.value, head.error + tail.error))
}

/// Right-hand side of the discounted estimate:
/// `1/(C̄√(2πλ̄)) + √λ̄ e^{-α/(2λ̄)} / (C̄ √(2π) (α + λ̄))`.
pub fn discounted_bound(lambda_bar: f64, c_bar: f64, alpha: f64) -> f64 {
    1.0 / (c_bar * (2.0 * PI * lambda_bar).sqrt())
        + lambda_bar.sqrt() * (-alpha / (2.0 * lambda_bar)).exp() / (c_bar * (2.0 * PI).sqrt() * (alpha + lambda_bar))
}

/// Closed forms and quadratures of the three `q`-integrals.
pub fn kernel_integrals(p: KernelParams) -> Result<KernelIntegrals> {
    if !(p.lambda_bar > 0.0 && p.c_bar > 0.0 && p.lambda_u > 0.0) {
        return Err(Error::invalid("rates and C_bar must be positive"));
    }
    if !(p.alpha >= 0.0) {
        return Err(Error::invalid(format!("alpha must be nonnegative, got {}", p.alpha)));
    }
    if !(p.tau >= 0.0) {
        return Err(Error::invalid(format!("tau must be nonnegative, got {}", p.tau)));
    }
    let (lu, lb, cb) = (p.lambda_u, p.lambda_bar, p.c_bar);

    let conv = if p.tau == 0.0 {
        KernelBound::new(0.0, 0.0, 0.0)
    } else {
        let b = branch_point(lb).min(p.tau);
        let kernel = |u: f64| (-lu * (p.tau - u)).exp() * q_kernel(lb, cb, u);
        let head = integrate(|s| 2.0 * s * kernel(s * s), 0.0, b.sqrt(), opts())?;
        let tail = if p.tau > b {
            let r = integrate(kernel, b, p.tau, opts())?;
            (r.value, r.error)
        } else {
            (0.0, 0.0)
        };
        KernelBound::new(convolution_bound(lu, lb, cb, p.tau), head.value + tail.0, head.error + tail.1)
    };

    let (dq, de) = q_weighted_integral(lb, cb, |t| (-p.alpha * t).exp())?;
    let discounted = KernelBound::new(discounted_bound(lb, cb, p.alpha), dq, de);

    let (tq, te) = q_weighted_integral(lb, cb, |_| 1.0)?;
    let total = KernelBound::new(q_integral(lb, cb), tq, te);

    Ok(KernelIntegrals { params: p, convolution: conv, discounted, total })
}

/// `exp(10 C1W (1/√α + C1W/α + C3U/α²))`, the comparison constant for the
/// uniformly convex case.
pub fn fms_comparison(c1w: f64, alpha: f64, c3u: f64) -> Result<f64> {
    Ok(fms_exponent(c1w, alpha, c3u)?.exp())
}

pub fn fms_exponent(c1w: f64, alpha: f64, c3u: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("comparison constant needs alpha > 0, got {alpha}")));
    }
    Ok(10.0 * c1w * (1.0 / alpha.sqrt() + c1w / alpha + c3u / (alpha * alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_integral_is_exact() {
        let v = kernel_integrals(KernelParams { lambda_u: 1.0, lambda_bar: 0.5, c_bar: 0.5, alpha: 0.0, tau: 1.0 }).unwrap();
        assert!((v.total.quadrature - 2.256_758_334_191_025).abs() < 1e-9);
        assert!(v.total.relative_gap().abs() < 1e-9);
        // α = 0 collapses the discounted estimate onto the total one.
        assert!((v.discounted.closed - v.total.closed).abs() < 1e-12);
    }

    #[test]
    fn fms_reference() {
        assert!((fms_comparison(0.5, 1.0, 0.0).unwrap() - 1_808.042_414_456_063).abs() < 1e-9);
        assert_eq!(fms_comparison(0.0, 2.0, 1.0).unwrap(), 1.0);
        assert!(fms_comparison(0.5, 0.0, 0.0).is_err());
    }

    #[test]
    fn empty_interval() {
        let v = kernel_integrals(KernelParams { lambda_u: 1.0, lambda_bar: 0.2, c_bar: 0.3, alpha: 1.0, tau: 0.0 }).unwrap();
        assert_eq!(v.convolution.quadrature, 0.0);
        assert!(v.convolution.dominates);
    }
}
