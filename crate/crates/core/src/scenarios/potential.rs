use std::fmt;
use std::sync::Arc;

use serde::Serialize;

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Builtin and user supplied potential families.
#[derive(Clone)]
pub enum PotentialFamily {
    /// `U(x) = scale |x|² / 2`.
    Quadratic { scale: f64 },
    /// `U(x) = |x|²/2 + A Σ cos xᵢ`.
    QuadraticPlusCosine { amplitude: f64 },
    /// `U(x) = c4 |x|⁴/4 - c2 |x|²/2`.
    DoubleWell { c4: f64, c2: f64 },
    /// Callbacks; the Hessian (row-major) is optional.
    Custom { name: String, value: ValueFn, grad: VectorFn, hess: Option<VectorFn> },
}

impl fmt::Debug for PotentialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Quadratic { scale } => write!(f, "Quadratic {{ scale: {scale} }}"),
            Self::QuadraticPlusCosine { amplitude } => write!(f, "QuadraticPlusCosine {{ amplitude: {amplitude} }}"),
            Self::DoubleWell { c4, c2 } => write!(f, "DoubleWell {{ c4: {c4}, c2: {c2} }}"),
            Self::Custom { name, hess, .. } => write!(f, "Custom {{ name: {name:?}, hess: {} }}", hess.is_some()),
        }
    }
}

impl PotentialFamily {
    pub fn name(&self) -> &str {
        match self {
            Self::Quadratic { .. } => "quadratic",
            Self::QuadraticPlusCosine { .. } => "quadratic_plus_cosine",
            Self::DoubleWell { .. } => "double_well",
            Self::Custom { name, .. } => name,
        }
    }
}

/// Declared assumption constants. `None` means not declared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PotentialConstants {
    #[serde(rename = "C2U")]
    pub c2u: Option<f64>,
    pub alpha: Option<f64>,
    #[serde(rename = "C3U")]
    pub c3u: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Potential {
    family: PotentialFamily,
    dim: usize,
    pub constants: PotentialConstants,
}

impl Potential {
    pub fn quadratic(dim: usize, scale: f64) -> Self {
        Self {
            family: PotentialFamily::Quadratic { scale },
            dim,
            constants: PotentialConstants { c2u: Some(scale.abs()), alpha: Some(scale), c3u: Some(0.0) },
        }
    }

    pub fn quadratic_plus_cosine(dim: usize, amplitude: f64) -> Self {
        let a = amplitude.abs();
        Self {
            family: PotentialFamily::QuadraticPlusCosine { amplitude },
            dim,
            constants: PotentialConstants { c2u: Some((1.0 + a).max((1.0 - a).abs())), alpha: Some(1.0 - a), c3u: Some(a) },
        }
    }

    /// Hessian is unbounded, so no constants are declared by default.
    pub fn double_well(dim: usize, c4: f64, c2: f64) -> Self {
        Self {
            family: PotentialFamily::DoubleWell { c4, c2 },
            dim,
            constants: PotentialConstants { c2u: None, alpha: Some(-c2), c3u: None },
        }
    }

    pub fn custom(
        name: impl Into<String>,
        dim: usize,
        value: ValueFn,
        grad: VectorFn,
        hess: Option<VectorFn>,
        constants: PotentialConstants,
    ) -> Self {
        Self { family: PotentialFamily::Custom { name: name.into(), value, grad, hess }, dim, constants }
    }

    pub fn with_constants(mut self, constants: PotentialConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn family(&self) -> &PotentialFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_hessian(&self) -> bool {
        !matches!(&self.family, PotentialFamily::Custom { hess: None, .. })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let n2: f64 = x.iter().map(|v| v * v).sum();
        match &self.family {
            PotentialFamily::Quadratic { scale } => 0.5 * scale * n2,
            PotentialFamily::QuadraticPlusCosine { amplitude } => {
                0.5 * n2 + amplitude * x.iter().map(|v| v.cos()).sum::<f64>()
            }
            PotentialFamily::DoubleWell { c4, c2 } => 0.25 * c4 * n2 * n2 - 0.5 * c2 * n2,
            PotentialFamily::Custom { value, .. } => value(x),
        }
    }

    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        match &self.family {
            PotentialFamily::Quadratic { scale } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = scale * v;
                }
            }
            PotentialFamily::QuadraticPlusCosine { amplitude } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v - amplitude * v.sin();
                }
            }
            PotentialFamily::DoubleWell { c4, c2 } => {
                let n2: f64 = x.iter().map(|v| v * v).sum();
                for (o, v) in out.iter_mut().zip(x) {
                    *o = (c4 * n2 - c2) * v;
                }
            }
            PotentialFamily::Custom { grad, .. } => grad(x, out),
        }
    }

    /// Scalar derivative for one-dimensional potentials.
    #[inline]
    pub fn grad1(&self, x: f64) -> f64 {
        match &self.family {
            PotentialFamily::Quadratic { scale } => scale * x,
            PotentialFamily::QuadraticPlusCosine { amplitude } => x - amplitude * x.sin(),
            PotentialFamily::DoubleWell { c4, c2 } => (c4 * x * x - c2) * x,
            PotentialFamily::Custom { grad, .. } => {
                let mut o = [0.0];
                grad(&[x], &mut o);
                o[0]
            }
        }
    }

    /// Row-major Hessian into `out` (length `d²`). Returns false if unavailable.
    pub fn hess(&self, x: &[f64], out: &mut [f64]) -> bool {
        let d = self.dim;
        match &self.family {
            PotentialFamily::Quadratic { scale } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for i in 0..d {
                    out[i * d + i] = *scale;
                }
            }
            PotentialFamily::QuadraticPlusCosine { amplitude } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                for i in 0..d {
                    out[i * d + i] = 1.0 - amplitude * x[i].cos();
                }
            }
            PotentialFamily::DoubleWell { c4, c2 } => {
                let n2: f64 = x.iter().map(|v| v * v).sum();
                for i in 0..d {
                    for j in 0..d {
                        out[i * d + j] = 2.0 * c4 * x[i] * x[j] + if i == j { c4 * n2 - c2 } else { 0.0 };
                    }
                }
            }
            PotentialFamily::Custom { hess: Some(h), .. } => h(x, out),
            PotentialFamily::Custom { hess: None, .. } => return false,
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_gradients_match_finite_differences() {
        let pots = [Potential::quadratic(2, 1.5), Potential::quadratic_plus_cosine(2, 0.7), Potential::double_well(2, 1.0, 1.0)];
        let x = [0.3, -1.1];
        let h = 1e-5;
        for p in &pots {
            let mut g = [0.0; 2];
            p.grad(&x, &mut g);
            let mut hm = [0.0; 4];
            assert!(p.hess(&x, &mut hm));
            for i in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += h;
                xm[i] -= h;
                let fd = (p.value(&xp) - p.value(&xm)) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-8, "{:?}", p.family());
                let mut gp = [0.0; 2];
                let mut gm = [0.0; 2];
                p.grad(&xp, &mut gp);
                p.grad(&xm, &mut gm);
                for j in 0..2 {
                    assert!(((gp[j] - gm[j]) / (2.0 * h) - hm[j * 2 + i]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn grad1_agrees_with_grad() {
        let p = Potential::quadratic_plus_cosine(1, 1.0);
        let mut g = [0.0];
        p.grad(&[0.8], &mut g);
        assert_eq!(g[0], p.grad1(0.8));
    }
}
