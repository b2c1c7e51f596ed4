use crate::error::{Error, Result};
use crate::numerics::quad::{integrate, integrate_to_infinity, QuadOptions};

/// `max |map(x) - map(y)| / |x - y|` over probe pairs; a lower bound on the
/// Lipschitz constant. `map` reports probes outside its domain as errors.
pub fn empirical_lipschitz(map: impl Fn(&[f64]) -> Result<Vec<f64>>, probes: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for (x, y) in probes {
        let dx = dist(x, y);
        if dx == 0.0 {
            continue;
        }
        best = best.max(dist(&map(x)?, &map(y)?) / dx);
    }
    Ok(best)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// `∫₀^∞ f` with `t = s²` on `[0, 1]` to absorb `t^{-1/2}` behaviour at the origin.
fn integral(f: &dyn Fn(f64) -> f64) -> Result<f64> {
    let opts = QuadOptions::with_tol(1e-12);
    let head = integrate(|s| 2.0 * s * f(s * s), 0.0, 1.0, opts)?;
    let tail = integrate_to_infinity(f, 1.0, opts)?;
    let v = head.value + tail.value;
    if !v.is_finite() {
        return Err(Error::Divergent(format!("envelope integral is {v}")));
    }
    Ok(v)
}

/// `(exp ∫₀^∞ λ_max, exp(-∫₀^∞ λ_min))`.
pub fn hessian_envelope_to_lipschitz(lambda_max: impl Fn(f64) -> f64, lambda_min: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let up = integral(&lambda_max).map_err(divergent)?;
    let down = integral(&lambda_min).map_err(divergent)?;
    Ok((up.exp(), (-down).exp()))
}

fn divergent(e: Error) -> Error {
    match e {
        Error::QuadratureNonConvergence { value, error, .. } => {
            Error::Divergent(format!("envelope quadrature failed (estimate {value:e}, error {error:e})"))
        }
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_envelopes() {
        assert_eq!(hessian_envelope_to_lipschitz(|_| 0.0, |_| 0.0).unwrap(), (1.0, 1.0));
        let (s, t) = hessian_envelope_to_lipschitz(|t| (-t).exp(), |t| -(-t).exp()).unwrap();
        assert!((s - std::f64::consts::E).abs() < 1e-10);
        assert!((t - std::f64::consts::E).abs() < 1e-10);
    }

    #[test]
    fn non_integrable_envelope_is_reported() {
        assert!(matches!(hessian_envelope_to_lipschitz(|_| 1.0, |_| 0.0), Err(Error::Divergent(_))));
    }

    #[test]
    fn linear_maps() {
        let probes = vec![(vec![0.0], vec![1.0]), (vec![-2.0], vec![3.0])];
        let l = empirical_lipschitz(|x| Ok(vec![2.0 * x[0]]), &probes).unwrap();
        assert_eq!(l, 2.0);
        let l = empirical_lipschitz(|x| Ok(vec![x[0] - 0.5]), &probes).unwrap();
        assert_eq!(l, 1.0);
    }
}
