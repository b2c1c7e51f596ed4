use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::interp::catmull_rom;
use crate::scenarios::{OuLinearOracle, Scenario};
use crate::value::engine::{FkProblem, Functional};
use crate::value::estimate::FieldOptions;

/// A provider of `∇V_τ`, `V_τ = -log P_τ e^{-W}`, in semigroup time `τ`.
///
/// The control problem's `∇φ_t` is `∇V_{T-t}`; the transport flow at flow time
/// `t` uses `∇V_t` directly.
pub trait GradientField: Send + Sync {
    fn dim(&self) -> usize;
    fn grad_v(&self, tau: f64, x: &[f64], out: &mut [f64]);
}

/// `∇V ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroField {
    pub dim: usize,
}

impl GradientField for ZeroField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn grad_v(&self, _tau: f64, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
}

/// Exact field of the OU/linear-`W` scenario, `∇V_τ = a e^{-τ}`.
#[derive(Debug, Clone)]
pub struct OracleField(pub OuLinearOracle);

impl GradientField for OracleField {
    fn dim(&self) -> usize {
        self.0.a.len()
    }

    fn grad_v(&self, tau: f64, x: &[f64], out: &mut [f64]) {
        self.0.grad_phi(self.0.horizon - tau, x, out);
    }
}

/// Field given by a closure `(τ, x, out)`.
#[derive(Clone)]
pub struct FnField {
    dim: usize,
    f: Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>,
}

impl FnField {
    pub fn new(dim: usize, f: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Self { dim, f: Arc::new(f) }
    }
}

impl fmt::Debug for FnField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnField").field("dim", &self.dim).finish()
    }
}

impl GradientField for FnField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn grad_v(&self, tau: f64, x: &[f64], out: &mut [f64]) {
        (self.f)(tau, x, out)
    }
}

/// Lattice of Monte-Carlo gradient estimates in one dimension, frozen at one
/// seed and interpolated by tensor Catmull–Rom splines.
///
/// Outside `[x_lo, x_hi]` the spatial coordinate is clamped; beyond `τ_max`
/// the field is zero.
#[derive(Debug, Clone, Serialize)]
pub struct GriddedField {
    pub x_lo: f64,
    pub dx: f64,
    pub nx: usize,
    pub dtau: f64,
    pub ntau: usize,
    /// `values[k * nx + j]` is `∇V` at `τ = k dtau`, `x = x_lo + j dx`.
    values: Vec<f64>,
    se: Vec<f64>,
    pub options: FieldOptions,
}

impl GriddedField {
    /// Estimates `∇V_τ` on `x_lo + j dx ≤ x_hi`, `τ = k dtau ≤ tau_max`.
    pub fn build(scenario: &Scenario, x_lo: f64, x_hi: f64, dx: f64, tau_max: f64, dtau: f64, opts: FieldOptions) -> Result<Self> {
        if scenario.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: scenario.dim() });
        }
        if !(dx > 0.0 && dtau > 0.0 && x_hi > x_lo && tau_max > 0.0) {
            return Err(Error::invalid("lattice needs positive spacings and a nonempty box"));
        }
        let nx = ((x_hi - x_lo) / dx + 1e-9).floor() as usize + 1;
        let ntau = (tau_max / dtau + 1e-9).floor() as usize + 1;
        let taus: Vec<f64> = (0..ntau).map(|k| k as f64 * dtau).collect();
        if scenario.perturbation.is_zero() {
            return Ok(Self {
                x_lo,
                dx,
                nx,
                dtau,
                ntau,
                values: vec![0.0; nx * ntau],
                se: vec![0.0; nx * ntau],
                options: opts,
            });
        }
        let h = opts.h;
        let starts: Vec<Vec<f64>> =
            (0..nx).flat_map(|j| {
                let x = x_lo + j as f64 * dx;
                [vec![x + h], vec![x - h]]
            })
            .collect();
        let problem = FkProblem {
            potential: &scenario.potential,
            perturbation: &scenario.perturbation,
            starts,
            taus,
            dt: opts.dt,
            n_samples: opts.n_samples,
            seed: opts.seed,
        };
        let functionals: Vec<Functional> = (0..ntau)
            .flat_map(|k| {
                let p = &problem;
                (0..nx).map(move |j| vec![(p.node(k, 2 * j), 0.5 / h), (p.node(k, 2 * j + 1), -0.5 / h)])
            })
            .collect();
        let m = problem.run(&functionals)?;
        let values = functionals.iter().map(|f| m.value(f)).collect();
        let se = functionals.iter().map(|f| m.se(f)).collect();
        Ok(Self { x_lo, dx, nx, dtau, ntau, values, se, options: opts })
    }

    pub fn tau_max(&self) -> f64 {
        (self.ntau - 1) as f64 * self.dtau
    }

    pub fn x_hi(&self) -> f64 {
        self.x_lo + (self.nx - 1) as f64 * self.dx
    }

    pub fn node_value(&self, k: usize, j: usize) -> f64 {
        self.values[k * self.nx + j]
    }

    pub fn node_se(&self, k: usize, j: usize) -> f64 {
        self.se[k * self.nx + j]
    }

    /// Largest standard error over the lattice.
    pub fn max_se(&self) -> f64 {
        self.se.iter().copied().fold(0.0, f64::max)
    }

    fn row(&self, k: usize, x: f64) -> f64 {
        let row = &self.values[k * self.nx..(k + 1) * self.nx];
        catmull_rom(row, self.x_lo, self.dx, x).unwrap_or(row[0])
    }

    pub fn eval(&self, tau: f64, x: f64) -> f64 {
        let tmax = self.tau_max();
        if tau > tmax * (1.0 + 1e-12) || tau < 0.0 {
            return 0.0;
        }
        let x = x.clamp(self.x_lo, self.x_hi());
        let u = (tau / self.dtau).min((self.ntau - 1) as f64);
        let i = (u.floor() as usize).min(self.ntau.saturating_sub(2));
        if self.ntau == 1 {
            return self.row(0, x);
        }
        let lo = i.saturating_sub(1);
        let hi = (i + 2).min(self.ntau - 1);
        let col: Vec<f64> = (lo..=hi).map(|k| self.row(k, x)).collect();
        catmull_rom(&col, lo as f64 * self.dtau, self.dtau, tau.min(tmax)).unwrap_or(col[0])
    }
}

impl GradientField for GriddedField {
    fn dim(&self) -> usize {
        1
    }

    fn grad_v(&self, tau: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.eval(tau, x[0]);
    }
}

/// Planar counterpart of [`GriddedField`] on the square `[lo, lo + (n-1) dx]²`.
///
/// The Monte-Carlo estimates are taken at the lattice nodes only and the
/// gradient is the lattice central difference (one-sided on the edges), so
/// a single common-random-number pass serves both components.
#[derive(Debug, Clone, Serialize)]
pub struct PlaneField {
    pub lo: f64,
    pub dx: f64,
    pub n: usize,
    pub dtau: f64,
    pub ntau: usize,
    /// `values[((k * n + i) * n + j) * 2 + c]`: component `c` at `τ_k`, `(x_i, x_j)`.
    values: Vec<f64>,
    se: Vec<f64>,
    pub options: FieldOptions,
}

impl PlaneField {
    pub fn build(scenario: &Scenario, lo: f64, hi: f64, dx: f64, tau_max: f64, dtau: f64, opts: FieldOptions) -> Result<Self> {
        if scenario.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: scenario.dim() });
        }
        if !(dx > 0.0 && dtau > 0.0 && hi > lo && tau_max > 0.0) {
            return Err(Error::invalid("lattice needs positive spacings and a nonempty box"));
        }
        let n = ((hi - lo) / dx + 1e-9).floor() as usize + 1;
        if n < 2 {
            return Err(Error::invalid("lattice needs at least two nodes per axis"));
        }
        let ntau = (tau_max / dtau + 1e-9).floor() as usize + 1;
        let len = ntau * n * n * 2;
        if scenario.perturbation.is_zero() {
            return Ok(Self { lo, dx, n, dtau, ntau, values: vec![0.0; len], se: vec![0.0; len], options: opts });
        }
        let at = |i: usize| lo + i as f64 * dx;
        let starts: Vec<Vec<f64>> = (0..n * n).map(|s| vec![at(s / n), at(s % n)]).collect();
        let problem = FkProblem {
            potential: &scenario.potential,
            perturbation: &scenario.perturbation,
            starts,
            taus: (0..ntau).map(|k| k as f64 * dtau).collect(),
            dt: opts.dt,
            n_samples: opts.n_samples,
            seed: opts.seed,
        };
        // central difference along one axis, one-sided at the edges
        let diff = |k: usize, i: usize, j: usize, c: usize| -> Functional {
            let idx = if c == 0 { i } else { j };
            let (a, b) = (idx.saturating_sub(1), (idx + 1).min(n - 1));
            let node = |m: usize| if c == 0 { problem.node(k, m * n + j) } else { problem.node(k, i * n + m) };
            let w = 1.0 / ((b - a) as f64 * dx);
            vec![(node(b), w), (node(a), -w)]
        };
        let functionals: Vec<Functional> = (0..ntau)
            .flat_map(|k| (0..n * n).flat_map(move |s| [(k, s, 0), (k, s, 1)]))
            .map(|(k, s, c)| diff(k, s / n, s % n, c))
            .collect();
        let m = problem.run(&functionals)?;
        let values = functionals.iter().map(|f| m.value(f)).collect();
        let se = functionals.iter().map(|f| m.se(f)).collect();
        Ok(Self { lo, dx, n, dtau, ntau, values, se, options: opts })
    }

    pub fn tau_max(&self) -> f64 {
        (self.ntau - 1) as f64 * self.dtau
    }

    pub fn hi(&self) -> f64 {
        self.lo + (self.n - 1) as f64 * self.dx
    }

    pub fn max_se(&self) -> f64 {
        self.se.iter().copied().fold(0.0, f64::max)
    }

    fn node(&self, k: usize, i: usize, j: usize, c: usize) -> f64 {
        self.values[((k * self.n + i) * self.n + j) * 2 + c]
    }

    fn slice(&self, k: usize, x: f64, y: f64, c: usize) -> f64 {
        let (wi, oi) = window(self.n, self.lo, self.dx, x);
        let (wj, oj) = window(self.n, self.lo, self.dx, y);
        let mut col = [0.0; 4];
        for (a, i) in wi.clone().enumerate() {
            let mut row = [0.0; 4];
            for (b, j) in wj.clone().enumerate() {
                row[b] = self.node(k, i, j, c);
            }
            col[a] = catmull_rom(&row[..wj.len()], oj, self.dx, y).unwrap_or(row[0]);
        }
        catmull_rom(&col[..wi.len()], oi, self.dx, x).unwrap_or(col[0])
    }

    pub fn eval(&self, tau: f64, x: &[f64], out: &mut [f64]) {
        let tmax = self.tau_max();
        if tau > tmax * (1.0 + 1e-12) || tau < 0.0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        let (px, py) = (x[0].clamp(self.lo, self.hi()), x[1].clamp(self.lo, self.hi()));
        let tau = tau.min(tmax);
        for (c, o) in out.iter_mut().enumerate().take(2) {
            *o = if self.ntau == 1 {
                self.slice(0, px, py, c)
            } else {
                let (wk, ok) = window(self.ntau, 0.0, self.dtau, tau);
                let mut col = [0.0; 4];
                for (a, k) in wk.clone().enumerate() {
                    col[a] = self.slice(k, px, py, c);
                }
                catmull_rom(&col[..wk.len()], ok, self.dtau, tau).unwrap_or(col[0])
            };
        }
    }
}

/// Up to four node indices around `t` on `x0 + k h`, `k < n`, and the
/// coordinate of the first one.
fn window(n: usize, x0: f64, h: f64, t: f64) -> (std::ops::Range<usize>, f64) {
    let u = ((t - x0) / h).clamp(0.0, (n - 1) as f64);
    let i = (u.floor() as usize).min(n - 2);
    let lo = i.saturating_sub(1);
    let hi = (i + 3).min(n);
    (lo..hi, x0 + lo as f64 * h)
}

impl GradientField for PlaneField {
    fn dim(&self) -> usize {
        2
    }

    fn grad_v(&self, tau: f64, x: &[f64], out: &mut [f64]) {
        self.eval(tau, x, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::SimParams;

    #[test]
    fn lattice_reproduces_ou_field() {
        let s = Scenario::ou_linear(0.5, SimParams::default());
        let opts = FieldOptions { n_samples: 200, seed: 4, dt: 1e-3, ..FieldOptions::default() };
        let f = GriddedField::build(&s, -2.0, 2.0, 0.5, 2.0, 0.1, opts).unwrap();
        for &(tau, x) in &[(0.0, 0.0), (0.37, 1.3), (1.55, -0.2), (2.0, 2.0)] {
            let exact = 0.5 * (-tau as f64).exp();
            assert!((f.eval(tau, x) - exact).abs() < 2e-3, "{tau} {x} {}", f.eval(tau, x));
        }
        assert_eq!(f.eval(2.5, 0.0), 0.0);
    }

    #[test]
    fn plane_lattice_reproduces_ou_field() {
        let sim = SimParams { d: 2, ..SimParams::default() };
        let s = Scenario::new(
            crate::scenarios::Potential::quadratic(2, 1.0),
            crate::scenarios::Perturbation::linear(vec![0.5, -0.25]),
            sim,
            crate::scenarios::AssumptionMode::A1A2PrimeUniformlyConvex,
        )
        .unwrap();
        let opts = FieldOptions { n_samples: 200, seed: 4, dt: 1e-3, ..FieldOptions::default() };
        let f = PlaneField::build(&s, -2.0, 2.0, 0.5, 1.0, 0.1, opts).unwrap();
        let mut g = [0.0; 2];
        for &(tau, x, y) in &[(0.0, 0.0, 0.0), (0.37, 1.3, -0.6), (0.95, -2.0, 2.0)] {
            f.eval(tau, &[x, y], &mut g);
            let e = (-tau as f64).exp();
            assert!((g[0] - 0.5 * e).abs() < 2e-3 && (g[1] + 0.25 * e).abs() < 2e-3, "{tau} {x} {y} {g:?}");
        }
        f.eval(1.5, &[0.0, 0.0], &mut g);
        assert_eq!(g, [0.0, 0.0]);
    }
}
