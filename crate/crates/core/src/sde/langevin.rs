use std::fmt;
use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::scenarios::{Potential, Scenario};
use crate::value::GradientField;

/// `(t, x, out)` vector field.
pub type TimeVectorFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// Drift `-(∇V_t(x)) + α_t(x)` of a controlled Langevin equation.
#[derive(Clone)]
pub struct DriftField {
    dim: usize,
    potential_grad: TimeVectorFn,
    control: Option<TimeVectorFn>,
    /// Declared one-sided Lipschitz constant of `∇V`; informational.
    pub one_sided_lipschitz: Option<f64>,
    /// Declared bound on `|α_t|`.
    pub control_cap: Option<f64>,
}

impl fmt::Debug for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftField")
            .field("dim", &self.dim)
            .field("control", &self.control.is_some())
            .field("one_sided_lipschitz", &self.one_sided_lipschitz)
            .field("control_cap", &self.control_cap)
            .finish()
    }
}

impl DriftField {
    pub fn new(dim: usize, potential_grad: TimeVectorFn) -> Self {
        Self { dim, potential_grad, control: None, one_sided_lipschitz: None, control_cap: None }
    }

    /// `∇V_t = ∇U`, no control.
    pub fn from_potential(u: &Potential) -> Self {
        let u = u.clone();
        Self::new(u.dim(), Arc::new(move |_, x, out| u.grad(x, out)))
    }

    /// `∇V_t = ∇U + 2∇φ_t`: the optimally controlled drift written as a
    /// time-dependent potential, so each copy feels its own control.
    pub fn optimal(u: &Potential, field: Arc<dyn GradientField>, horizon: f64) -> Self {
        let u = u.clone();
        let d = u.dim();
        Self::new(
            d,
            Arc::new(move |t, x, out| {
                u.grad(x, out);
                let mut g = [0.0; 8];
                let mut heap;
                let g: &mut [f64] = if d <= 8 {
                    &mut g[..d]
                } else {
                    heap = vec![0.0; d];
                    &mut heap
                };
                field.grad_v(horizon - t, x, g);
                for (o, gi) in out.iter_mut().zip(g.iter()) {
                    *o += 2.0 * gi;
                }
            }),
        )
    }

    /// Adds a control term `α_t(x)`; in a coupling it is read off the first copy.
    pub fn with_control(mut self, control: TimeVectorFn, cap: Option<f64>) -> Self {
        self.control = Some(control);
        self.control_cap = cap;
        self
    }

    pub fn with_one_sided_lipschitz(mut self, rho: f64) -> Self {
        self.one_sided_lipschitz = Some(rho);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_control(&self) -> bool {
        self.control.is_some()
    }

    /// `∇V_t(x)` into `out`.
    #[inline]
    pub fn potential_grad(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.potential_grad)(t, x, out)
    }

    /// `α_t(x)` into `out`; zero without a control.
    #[inline]
    pub fn control(&self, t: f64, x: &[f64], out: &mut [f64]) {
        match &self.control {
            Some(c) => c(t, x, out),
            None => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    /// Largest `|α_t(x)|` over the given space-time points, and whether it
    /// respects the declared cap.
    pub fn check_control(&self, times: &[f64], points: &[Vec<f64>]) -> (f64, bool) {
        let mut worst = 0.0f64;
        let mut out = vec![0.0; self.dim];
        for &t in times {
            for p in points {
                self.control(t, p, &mut out);
                worst = worst.max(out.iter().map(|v| v * v).sum::<f64>().sqrt());
            }
        }
        let ok = self.control_cap.map_or(!self.has_control(), |c| worst <= c * (1.0 + 1e-12));
        (worst, ok)
    }
}

/// Fixed-step grid `t0 + k·dt` with a set of recorded step indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
    record: Vec<usize>,
}

impl TimeGrid {
    /// `ceil((t1 - t0)/dt)` steps of equal length ending exactly at `t1`;
    /// records every `record_every`-th step plus both ends.
    pub fn uniform(t0: f64, t1: f64, dt: f64, record_every: usize) -> Result<Self> {
        let (steps, h) = Self::steps(t0, t1, dt)?;
        let k = record_every.max(1);
        let mut record: Vec<usize> = (0..=steps).step_by(k).collect();
        if record.last() != Some(&steps) {
            record.push(steps);
        }
        Ok(Self { t0, dt: h, steps, record })
    }

    /// Records the steps nearest to the requested times.
    pub fn with_records(t0: f64, t1: f64, dt: f64, times: &[f64]) -> Result<Self> {
        let (steps, h) = Self::steps(t0, t1, dt)?;
        let mut record: Vec<usize> = times
            .iter()
            .map(|&t| {
                if !(t >= t0 - 1e-12 && t <= t1 + 1e-12) {
                    return Err(Error::invalid(format!("record time {t} outside [{t0}, {t1}]")));
                }
                Ok((((t - t0) / h).round() as usize).min(steps))
            })
            .collect::<Result<_>>()?;
        record.sort_unstable();
        record.dedup();
        Ok(Self { t0, dt: h, steps, record })
    }

    fn steps(t0: f64, t1: f64, dt: f64) -> Result<(usize, f64)> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        let span = t1 - t0;
        if !(span >= 0.0 && span.is_finite()) {
            return Err(Error::invalid(format!("time window [{t0}, {t1}] is empty")));
        }
        if span == 0.0 {
            return Ok((0, dt));
        }
        let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
        Ok((steps, span / steps as f64))
    }

    pub fn time(&self, step: usize) -> f64 {
        self.t0 + step as f64 * self.dt
    }

    pub fn record_steps(&self) -> &[usize] {
        &self.record
    }

    pub fn record_times(&self) -> Vec<f64> {
        self.record.iter().map(|&k| self.time(k)).collect()
    }
}

/// Independent paths recorded on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub dim: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    /// `states[k][i*dim..(i+1)*dim]` is path `i` at `times[k]`.
    pub states: Vec<Vec<f64>>,
}

impl PathEnsemble {
    /// Coordinate `j` of every path at record `k`.
    pub fn coordinate(&self, k: usize, j: usize) -> Vec<f64> {
        self.states[k].iter().skip(j).step_by(self.dim).copied().collect()
    }

    pub fn terminal(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Euler–Maruyama for `dX = (-∇V_t(X) + α_t(X)) dt + √2 dB` from a fixed start.
pub fn simulate_drift(drift: &DriftField, x0: &[f64], grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    let d = drift.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    let per_path: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|i| run_path(drift, x0, grid, seed, i))
        .collect::<Result<_>>()?;
    let nrec = grid.record_steps().len();
    let mut states = vec![Vec::with_capacity(n_paths * d); nrec];
    for p in &per_path {
        for (k, s) in states.iter_mut().enumerate() {
            s.extend_from_slice(&p[k * d..(k + 1) * d]);
        }
    }
    Ok(PathEnsemble { dim: d, n_paths, seed, times: grid.record_times(), states })
}

fn run_path(drift: &DriftField, x0: &[f64], grid: &TimeGrid, seed: u64, path: usize) -> Result<Vec<f64>> {
    let d = x0.len();
    let mut g = rng::stream(seed, path as u64);
    let mut x = x0.to_vec();
    let mut b = vec![0.0; d];
    let mut a = vec![0.0; d];
    let rec = grid.record_steps();
    let mut out = Vec::with_capacity(rec.len() * d);
    let mut next = 0;
    let sd = (2.0 * grid.dt).sqrt();
    for step in 0..=grid.steps {
        if next < rec.len() && rec[next] == step {
            out.extend_from_slice(&x);
            next += 1;
        }
        if step == grid.steps {
            break;
        }
        let t = grid.time(step);
        drift.potential_grad(t, &x, &mut b);
        drift.control(t, &x, &mut a);
        for j in 0..d {
            let xi: f64 = StandardNormal.sample(&mut g);
            x[j] += (a[j] - b[j]) * grid.dt + sd * xi;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { path, t: grid.time(step + 1) });
        }
    }
    Ok(out)
}

/// Overdamped Langevin paths of `dX = -∇U(X) dt + √2 dB` started at `x0`.
pub fn simulate_langevin(
    scenario: &Scenario,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    seed: u64,
    n_paths: usize,
    record_every: usize,
) -> Result<PathEnsemble> {
    let grid = TimeGrid::uniform(0.0, horizon, dt, record_every)?;
    simulate_drift(&DriftField::from_potential(&scenario.potential), x0, &grid, n_paths, seed)
}

/// Optimally controlled paths `dX = (-∇U(X) - 2∇φ_s(X)) ds + √2 dB` on
/// `[t0, T]`, where `∇φ_s = ∇V_{T-s}` comes from `field`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_optimal_dynamics(
    scenario: &Scenario,
    field: Arc<dyn GradientField>,
    x0: &[f64],
    t0: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
    n_paths: usize,
    record_every: usize,
) -> Result<PathEnsemble> {
    let grid = TimeGrid::uniform(t0, horizon, dt, record_every)?;
    let drift = DriftField::optimal(&scenario.potential, field, horizon);
    simulate_drift(&drift, x0, &grid, n_paths, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::SimParams;

    #[test]
    fn zero_horizon_returns_start() {
        let s = Scenario::ou_linear(0.5, SimParams::default());
        let e = simulate_langevin(&s, &[2.0], 0.0, 1e-3, 1, 10, 1).unwrap();
        assert_eq!(e.times, vec![0.0]);
        assert!(e.terminal().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn grid_ends_on_horizon() {
        let g = TimeGrid::uniform(0.0, 1.0, 0.3, 2).unwrap();
        assert_eq!(g.steps, 4);
        assert!((g.time(g.steps) - 1.0).abs() < 1e-15);
        assert_eq!(g.record_steps(), &[0, 2, 4]);
        let r = TimeGrid::with_records(0.0, 4.0, 1e-3, &[0.5, 1.0, 4.0]).unwrap();
        assert_eq!(r.record_steps(), &[500, 1000, 4000]);
    }

    #[test]
    fn deterministic_given_seed() {
        let s = Scenario::ou_linear(0.5, SimParams::default());
        let a = simulate_langevin(&s, &[1.0], 0.5, 1e-2, 9, 64, 10).unwrap();
        let b = simulate_langevin(&s, &[1.0], 0.5, 1e-2, 9, 64, 10).unwrap();
        assert_eq!(a, b);
    }
}
