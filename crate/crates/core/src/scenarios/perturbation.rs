use std::fmt;

use crate::scenarios::potential::{ValueFn, VectorFn};

#[derive(Clone)]
pub enum PerturbationFamily {
    Zero,
    /// `W(x) = ⟨a, x⟩`.
    Linear { a: Vec<f64> },
    /// `W(x) = c √(1 + |x|²)`.
    SmoothNorm { c: f64 },
    /// `W(x) = c tanh(⟨w, x⟩)`.
    TanhRidge { c: f64, w: Vec<f64> },
    Custom { name: String, value: ValueFn, grad: VectorFn },
}

impl fmt::Debug for PerturbationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Linear { a } => write!(f, "Linear {{ a: {a:?} }}"),
            Self::SmoothNorm { c } => write!(f, "SmoothNorm {{ c: {c} }}"),
            Self::TanhRidge { c, w } => write!(f, "TanhRidge {{ c: {c}, w: {w:?} }}"),
            Self::Custom { name, .. } => write!(f, "Custom {{ name: {name:?} }}"),
        }
    }
}

impl PerturbationFamily {
    pub fn name(&self) -> &str {
        match self {
            Self::Zero => "zero",
            Self::Linear { .. } => "linear",
            Self::SmoothNorm { .. } => "smooth_norm",
            Self::TanhRidge { .. } => "tanh_ridge",
            Self::Custom { name, .. } => name,
        }
    }
}

/// Log-Lipschitz perturbation `W` with declared constant `C₁^W`.
#[derive(Debug, Clone)]
pub struct Perturbation {
    family: PerturbationFamily,
    dim: usize,
    pub c1w: f64,
}

impl Perturbation {
    pub fn zero(dim: usize) -> Self {
        Self { family: PerturbationFamily::Zero, dim, c1w: 0.0 }
    }

    pub fn linear(a: Vec<f64>) -> Self {
        let c1w = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self { dim: a.len(), family: PerturbationFamily::Linear { a }, c1w }
    }

    pub fn smooth_norm(dim: usize, c: f64) -> Self {
        Self { family: PerturbationFamily::SmoothNorm { c }, dim, c1w: c.abs() }
    }

    pub fn tanh_ridge(c: f64, w: Vec<f64>) -> Self {
        let c1w = c.abs() * w.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self { dim: w.len(), family: PerturbationFamily::TanhRidge { c, w }, c1w }
    }

    pub fn custom(name: impl Into<String>, dim: usize, value: ValueFn, grad: VectorFn, c1w: f64) -> Self {
        Self { family: PerturbationFamily::Custom { name: name.into(), value, grad }, dim, c1w }
    }

    pub fn family(&self) -> &PerturbationFamily {
        &self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, PerturbationFamily::Zero)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match &self.family {
            PerturbationFamily::Zero => 0.0,
            PerturbationFamily::Linear { a } => a.iter().zip(x).map(|(p, q)| p * q).sum(),
            PerturbationFamily::SmoothNorm { c } => c * (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt(),
            PerturbationFamily::TanhRidge { c, w } => c * w.iter().zip(x).map(|(p, q)| p * q).sum::<f64>().tanh(),
            PerturbationFamily::Custom { value, .. } => value(x),
        }
    }

    #[inline]
    pub fn value1(&self, x: f64) -> f64 {
        match &self.family {
            PerturbationFamily::Zero => 0.0,
            PerturbationFamily::Linear { a } => a[0] * x,
            PerturbationFamily::SmoothNorm { c } => c * (1.0 + x * x).sqrt(),
            PerturbationFamily::TanhRidge { c, w } => c * (w[0] * x).tanh(),
            PerturbationFamily::Custom { value, .. } => value(&[x]),
        }
    }

    pub fn grad(&self, x: &[f64], out: &mut [f64]) {
        match &self.family {
            PerturbationFamily::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            PerturbationFamily::Linear { a } => out.copy_from_slice(a),
            PerturbationFamily::SmoothNorm { c } => {
                let s = (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt();
                for (o, v) in out.iter_mut().zip(x) {
                    *o = c * v / s;
                }
            }
            PerturbationFamily::TanhRidge { c, w } => {
                let t = w.iter().zip(x).map(|(p, q)| p * q).sum::<f64>().tanh();
                for (o, wi) in out.iter_mut().zip(w) {
                    *o = c * (1.0 - t * t) * wi;
                }
            }
            PerturbationFamily::Custom { grad, .. } => grad(x, out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn declared_constants() {
        assert_eq!(Perturbation::linear(vec![0.3, 0.4]).c1w, 0.5);
        assert_eq!(Perturbation::smooth_norm(1, -0.5).c1w, 0.5);
        assert!((Perturbation::tanh_ridge(2.0, vec![0.6, 0.8]).c1w - 2.0).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let ws = [Perturbation::smooth_norm(2, 0.5), Perturbation::tanh_ridge(1.5, vec![0.2, -0.7]), Perturbation::linear(vec![1.0, 2.0])];
        let x = [0.4, -0.9];
        for w in &ws {
            let mut g = [0.0; 2];
            w.grad(&x, &mut g);
            for i in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += 1e-6;
                xm[i] -= 1e-6;
                assert!(((w.value(&xp) - w.value(&xm)) / 2e-6 - g[i]).abs() < 1e-8);
            }
        }
    }
}
