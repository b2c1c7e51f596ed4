//! Adjoint check: along optimally controlled paths, `Y_s = ∇φ_s(X_s)` solves
//! `dY = ∇²U(X) Y ds + √2 Z dB`. The martingale part is dropped and the
//! comparison is made in mean.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;
use crate::scenarios::Scenario;
use crate::sde::TimeGrid;
use crate::value::field::GradientField;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PontryaginRow {
    pub t: f64,
    /// `E |Y_s - ∇φ_s(X_s)|`.
    pub mean_discrepancy: f64,
    /// `|E Y_s - E ∇φ_s(X_s)|`.
    pub discrepancy_of_means: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PontryaginReport {
    pub t0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub rows: Vec<PontryaginRow>,
    pub max_discrepancy_of_means: f64,
    /// `|E Y_T - E ∇W(X_T)|`.
    pub terminal_discrepancy: f64,
}

impl PontryaginReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,mean_discrepancy,discrepancy_of_means\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.t, r.mean_discrepancy, r.discrepancy_of_means));
        }
        s
    }
}

struct PathTrace {
    /// Per record: `|Y - ∇φ|`, `Y`, `∇φ`.
    abs: Vec<f64>,
    y: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    y_terminal: Vec<f64>,
    w_terminal: Vec<f64>,
}

/// Simulates `dX = -(∇U + 2∇φ_s) ds + √2 dB` from `x0` at `t0` and integrates
/// the adjoint forward from `Y_{t0} = ∇φ_{t0}(x0)`.
#[allow(clippy::too_many_arguments)]
pub fn pontryagin_check(
    scenario: &Scenario,
    field: &dyn GradientField,
    x0: &[f64],
    t0: f64,
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    record_every: usize,
) -> Result<PontryaginReport> {
    let d = scenario.dim();
    if x0.len() != d || field.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: if x0.len() != d { x0.len() } else { field.dim() } });
    }
    if !scenario.potential.has_hessian() {
        return Err(Error::MissingHessian);
    }
    if n_paths == 0 {
        return Err(Error::invalid("need at least one path"));
    }
    let grid = TimeGrid::uniform(t0, horizon, dt, record_every.max(1))?;
    let rec = grid.record_steps();
    let times = grid.record_times();

    let traces: Vec<PathTrace> = (0..n_paths)
        .into_par_iter()
        .map(|path| {
            let mut g = rng::stream(seed, path as u64);
            let mut x = x0.to_vec();
            let mut y = vec![0.0; d];
            field.grad_v(horizon - t0, &x, &mut y);
            let mut grad = vec![0.0; d];
            let mut bu = vec![0.0; d];
            let mut hs = vec![0.0; d * d];
            let mut trace = PathTrace { abs: Vec::new(), y: Vec::new(), g: Vec::new(), y_terminal: vec![], w_terminal: vec![0.0; d] };
            let sd = (2.0 * grid.dt).sqrt();
            let mut next = 0;
            for step in 0..=grid.steps {
                let s = grid.time(step);
                field.grad_v(horizon - s, &x, &mut grad);
                if next < rec.len() && rec[next] == step {
                    let dist = y.iter().zip(&grad).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                    trace.abs.push(dist);
                    trace.y.push(y.clone());
                    trace.g.push(grad.clone());
                    next += 1;
                }
                if step == grid.steps {
                    break;
                }
                scenario.potential.grad(&x, &mut bu);
                scenario.potential.hess(&x, &mut hs);
                let hy: Vec<f64> = (0..d).map(|i| (0..d).map(|j| hs[i * d + j] * y[j]).sum()).collect();
                for i in 0..d {
                    y[i] += hy[i] * grid.dt;
                    let xi: f64 = StandardNormal.sample(&mut g);
                    x[i] += -(bu[i] + 2.0 * grad[i]) * grid.dt + sd * xi;
                }
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState { path, t: grid.time(step + 1) });
                }
            }
            scenario.perturbation.grad(&x, &mut trace.w_terminal);
            trace.y_terminal = y;
            Ok(trace)
        })
        .collect::<Result<_>>()?;

    let n = n_paths as f64;
    let mean_vec = |f: &dyn Fn(&PathTrace) -> &[f64]| -> Vec<f64> {
        let mut m = vec![0.0; d];
        for t in &traces {
            for (a, b) in m.iter_mut().zip(f(t)) {
                *a += b / n;
            }
        }
        m
    };
    let norm_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let rows: Vec<PontryaginRow> = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let ey = mean_vec(&|p| &p.y[k]);
            let eg = mean_vec(&|p| &p.g[k]);
            PontryaginRow {
                t,
                mean_discrepancy: traces.iter().map(|p| p.abs[k]).sum::<f64>() / n,
                discrepancy_of_means: norm_diff(&ey, &eg),
            }
        })
        .collect();
    let terminal_discrepancy = norm_diff(&mean_vec(&|p| &p.y_terminal), &mean_vec(&|p| &p.w_terminal));
    Ok(PontryaginReport {
        t0,
        horizon,
        dt: grid.dt,
        n_paths,
        max_discrepancy_of_means: rows.iter().map(|r| r.discrepancy_of_means).fold(0.0, f64::max),
        rows,
        terminal_discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{closed_form_oracle, SimParams};
    use crate::value::field::{OracleField, ZeroField};

    #[test]
    fn ou_adjoint_matches_to_first_order() {
        let s = Scenario::ou_linear(0.5, SimParams { horizon: 2.0, ..SimParams::default() });
        let f = OracleField(closed_form_oracle(&s).unwrap());
        let a = pontryagin_check(&s, &f, &[0.3], 0.0, 2.0, 1e-2, 50, 1, 10).unwrap();
        let b = pontryagin_check(&s, &f, &[0.3], 0.0, 2.0, 5e-3, 50, 1, 20).unwrap();
        assert!(a.max_discrepancy_of_means < 1e-2);
        let ratio = a.max_discrepancy_of_means / b.max_discrepancy_of_means;
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn zero_perturbation_has_zero_adjoint() {
        let s = Scenario::ou_linear(0.0, SimParams::default());
        let r = pontryagin_check(&s, &ZeroField { dim: 1 }, &[1.0], 0.0, 1.0, 1e-2, 10, 0, 10).unwrap();
        assert_eq!(r.max_discrepancy_of_means, 0.0);
        assert_eq!(r.terminal_discrepancy, 0.0);
    }
}
