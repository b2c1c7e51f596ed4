use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::quad::{integrate, QuadOptions};
use crate::rng;
use crate::scenarios::{Potential, PotentialFamily};

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Where a profile came from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSource {
    AnalyticClosedForm,
    SampledInfimum,
    /// `base(r) - shift / r`.
    Perturbed { base: Box<ProfileSource>, shift: f64 },
}

/// A convexity profile `r ↦ κ(r)` on `(0, ∞)`.
#[derive(Clone)]
pub struct ConvexityProfile {
    eval: ScalarFn,
    source: ProfileSource,
    domain_cap: f64,
}

impl fmt::Debug for ConvexityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexityProfile")
            .field("source", &self.source)
            .field("domain_cap", &self.domain_cap)
            .finish()
    }
}

pub const DEFAULT_DOMAIN_CAP: f64 = 50.0;

impl ConvexityProfile {
    pub fn new(eval: impl Fn(f64) -> f64 + Send + Sync + 'static, source: ProfileSource, domain_cap: f64) -> Self {
        Self { eval: Arc::new(eval), source, domain_cap }
    }

    /// Closed-form profile with the default tabulation cap.
    pub fn analytic(eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(eval, ProfileSource::AnalyticClosedForm, DEFAULT_DOMAIN_CAP)
    }

    pub fn constant(value: f64) -> Self {
        Self::analytic(move |_| value)
    }

    /// `κ(r) = alpha - 4 c / r`.
    pub fn affine_inverse(alpha: f64, c: f64) -> Self {
        Self::analytic(move |r| alpha - 4.0 * c / r)
    }

    /// `κ(r) = 1 - 2 A |sin(r/2)| / r`, the profile of `x²/2 + A cos x`.
    pub fn quadratic_plus_cosine(amplitude: f64) -> Self {
        Self::analytic(move |r| 1.0 - amplitude * abs_sinc_half(r))
    }

    /// `κ(r) = c4 r² / 4 - c2`, the profile of `c4 |x|⁴/4 - c2 |x|²/2`.
    pub fn double_well(c4: f64, c2: f64) -> Self {
        Self::analytic(move |r| 0.25 * c4 * r * r - c2)
    }

    pub fn with_domain_cap(mut self, cap: f64) -> Self {
        self.domain_cap = cap;
        self
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        (self.eval)(r)
    }

    pub fn source(&self) -> &ProfileSource {
        &self.source
    }

    pub fn domain_cap(&self) -> f64 {
        self.domain_cap
    }

    pub(crate) fn closure(&self) -> ScalarFn {
        self.eval.clone()
    }

    /// Checks continuity on a dense grid, integrability of `r κ⁻` on `(0, 1]`
    /// and eventual positivity before `domain_cap`.
    pub fn check_class_k(&self) -> Result<()> {
        let grid = scan_grid(self.domain_cap);
        let mut prev: Option<(f64, f64)> = None;
        for &r in &grid {
            let k = self.eval(r);
            if !k.is_finite() {
                return Err(Error::NotInClassK(format!("κ({r}) is not finite")));
            }
            if let Some((rp, kp)) = prev {
                // a jump far beyond what a continuous profile could do on this spacing
                let scale = 1.0 + k.abs().max(kp.abs());
                if (k - kp).abs() > 1e3 * scale * (r - rp).max(1e-3) {
                    return Err(Error::NotInClassK(format!("κ jumps between r = {rp} and r = {r}")));
                }
            }
            prev = Some((r, k));
        }
        let f = |r: f64| r * (-self.eval(r)).max(0.0);
        let opts = QuadOptions { abs_tol: 1e-10, rel_tol: 1e-10, max_intervals: 400 };
        if integrate(f, 0.0, 1.0, opts).is_err() {
            return Err(Error::NotInClassK("∫₀¹ r κ⁻(r) dr does not converge".into()));
        }
        let tail_start = 0.9 * self.domain_cap;
        let tail_ok = grid.iter().filter(|&&r| r >= tail_start).all(|&r| self.eval(r) > 0.0);
        if !tail_ok || self.eval(self.domain_cap) <= 0.0 {
            return Err(Error::NotInClassK(format!(
                "κ is not positive near the domain cap {} (liminf condition)",
                self.domain_cap
            )));
        }
        Ok(())
    }
}

/// `2 |sin(r/2)| / r`, accurate near zero.
pub fn abs_sinc_half(r: f64) -> f64 {
    let h = 0.5 * r;
    if h.abs() < 1e-4 {
        1.0 - h * h / 6.0
    } else {
        (h.sin() / h).abs()
    }
}

/// Scan grid used for root bracketing: geometric on `[1e-6, 1]`, then step 0.01.
pub(crate) fn scan_grid(cap: f64) -> Vec<f64> {
    let mut g: Vec<f64> = (0..=120).map(|i| 1e-6 * 10f64.powf(6.0 * i as f64 / 120.0)).collect();
    let n = ((cap - 1.0) / 0.01).ceil().max(0.0) as usize;
    for i in 1..=n {
        g.push((1.0 + i as f64 * 0.01).min(cap));
    }
    g.dedup();
    g
}

/// `κ̄(r) = κ_U(r) - 4 C₁^W / (C_{κ_U} r)`, re-checked for membership in K.
pub fn perturbed_profile(kappa_u: &ConvexityProfile, c1w: f64, c_kappa_u: f64) -> Result<ConvexityProfile> {
    if !(c1w >= 0.0) {
        return Err(Error::invalid(format!("C1W must be nonnegative, got {c1w}")));
    }
    if !(c_kappa_u > 0.0 && c_kappa_u <= 1.0 + 1e-12) {
        return Err(Error::invalid(format!("C_kappaU must lie in (0, 1], got {c_kappa_u}")));
    }
    if c1w == 0.0 {
        return Ok(kappa_u.clone());
    }
    let shift = 4.0 * c1w / c_kappa_u;
    let base = kappa_u.closure();
    let out = ConvexityProfile {
        eval: Arc::new(move |r| base(r) - shift / r),
        source: ProfileSource::Perturbed { base: Box::new(kappa_u.source.clone()), shift },
        domain_cap: kappa_u.domain_cap,
    };
    out.check_class_k()?;
    Ok(out)
}

/// Sampling configuration for the infimum approximation of `κ_U`.
#[derive(Debug, Clone, Copy)]
pub struct SamplingOptions {
    pub midpoints: usize,
    pub directions: usize,
    pub seed: u64,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self { midpoints: 256, directions: 64, seed: 0 }
    }
}

/// Convexity profile of a scenario potential.
///
/// Builtin families with a known profile return the closed form. Otherwise
/// the infimum over pairs at distance `r` is replaced by a minimum over
/// sampled midpoints and directions, which is an upper bound on the true
/// profile. The sampled profile is linear between grid radii and constant
/// outside them.
pub fn profile_of_potential(potential: &Potential, r_grid: &[f64], opts: SamplingOptions) -> Result<ConvexityProfile> {
    if r_grid.is_empty() || r_grid.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::invalid("r-grid must be nonempty and strictly positive"));
    }
    if r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("r-grid must be strictly increasing"));
    }
    let cap = *r_grid.last().unwrap_or(&DEFAULT_DOMAIN_CAP);
    let closed = match potential.family() {
        PotentialFamily::Quadratic { scale } => Some(ConvexityProfile::constant(*scale)),
        PotentialFamily::QuadraticPlusCosine { amplitude } if potential.dim() == 1 => {
            Some(ConvexityProfile::quadratic_plus_cosine(*amplitude))
        }
        PotentialFamily::DoubleWell { c4, c2 } => Some(ConvexityProfile::double_well(*c4, *c2)),
        _ => None,
    };
    let profile = match closed {
        Some(p) => p.with_domain_cap(cap),
        None => sampled_infimum(potential, r_grid, opts)?,
    };
    profile.check_class_k()?;
    Ok(profile)
}

fn sampled_infimum(potential: &Potential, r_grid: &[f64], opts: SamplingOptions) -> Result<ConvexityProfile> {
    let d = potential.dim();
    let r_max = *r_grid.last().unwrap_or(&1.0);
    let radius = 4.0 * r_max;
    let mut gen = rng::stream(opts.seed, 0);
    let unit = |gen: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..d).map(|_| gen.sample::<f64, _>(StandardNormal)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-12 {
                return v.into_iter().map(|x| x / n).collect();
            }
        }
    };
    let mut mids: Vec<Vec<f64>> = vec![vec![0.0; d]];
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    if d == 1 {
        let m = opts.midpoints.max(2) - 1;
        for i in 0..m {
            let x = -radius + 2.0 * radius * i as f64 / (m - 1).max(1) as f64;
            if x != 0.0 {
                mids.push(vec![x]);
            }
        }
        dirs.push(vec![1.0]);
    } else {
        while mids.len() < opts.midpoints {
            let u = unit(&mut gen);
            let s: f64 = gen.gen::<f64>().powf(1.0 / d as f64) * radius;
            mids.push(u.into_iter().map(|x| x * s).collect());
        }
        for i in 0..d.min(opts.directions) {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            dirs.push(e);
        }
        while dirs.len() < opts.directions {
            dirs.push(unit(&mut gen));
        }
    }
    let mut gx = vec![0.0; d];
    let mut gy = vec![0.0; d];
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut values = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let mut best = f64::INFINITY;
        for m in &mids {
            for e in &dirs {
                for i in 0..d {
                    x[i] = m[i] + 0.5 * r * e[i];
                    y[i] = m[i] - 0.5 * r * e[i];
                }
                potential.grad(&x, &mut gx);
                potential.grad(&y, &mut gy);
                let num: f64 = (0..d).map(|i| (gx[i] - gy[i]) * (x[i] - y[i])).sum();
                let q = num / (r * r);
                if !q.is_finite() {
                    return Err(Error::invalid(format!("gradient is not finite near midpoint {m:?}")));
                }
                best = best.min(q);
            }
        }
        values.push(best);
    }
    let grid = r_grid.to_vec();
    let eval = move |r: f64| piecewise_linear(&grid, &values, r);
    Ok(ConvexityProfile::new(eval, ProfileSource::SampledInfimum, r_max))
}

fn piecewise_linear(x: &[f64], y: &[f64], t: f64) -> f64 {
    if t <= x[0] {
        return y[0];
    }
    let n = x.len();
    if t >= x[n - 1] {
        return y[n - 1];
    }
    let i = x.partition_point(|&v| v <= t) - 1;
    let s = (t - x[i]) / (x[i + 1] - x[i]);
    y[i] + s * (y[i + 1] - y[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_profile_small_r_limit() {
        let k = ConvexityProfile::quadratic_plus_cosine(1.0);
        assert!(k.eval(1e-9).abs() < 1e-12);
        assert!((k.eval(2.0) - (1.0 - 1f64.sin())).abs() < 1e-15);
    }

    #[test]
    fn zero_shift_returns_base() {
        let k = ConvexityProfile::constant(1.0);
        let p = perturbed_profile(&k, 0.0, 0.5).unwrap();
        assert_eq!(p.source(), &ProfileSource::AnalyticClosedForm);
        assert_eq!(p.eval(0.3), 1.0);
    }

    #[test]
    fn perturbed_matches_formula() {
        let p = perturbed_profile(&ConvexityProfile::constant(1.0), 0.5, 1.0).unwrap();
        assert!((p.eval(4.0) - 0.5).abs() < 1e-15);
        assert!(matches!(p.source(), ProfileSource::Perturbed { shift, .. } if (*shift - 2.0).abs() < 1e-15));
    }

    #[test]
    fn negative_liminf_rejected() {
        let k = ConvexityProfile::constant(-0.1);
        assert!(matches!(k.check_class_k(), Err(Error::NotInClassK(_))));
    }

    #[test]
    fn nonintegrable_singularity_rejected() {
        let k = ConvexityProfile::analytic(|r| 1.0 - 1.0 / (r * r));
        assert!(matches!(k.check_class_k(), Err(Error::NotInClassK(_))));
    }

    #[test]
    fn piecewise_linear_holds_ends() {
        let x = [1.0, 2.0];
        let y = [3.0, 5.0];
        assert_eq!(piecewise_linear(&x, &y, 0.5), 3.0);
        assert_eq!(piecewise_linear(&x, &y, 1.5), 4.0);
        assert_eq!(piecewise_linear(&x, &y, 9.0), 5.0);
    }
}
