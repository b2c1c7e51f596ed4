//! Finite-difference residual of `∂_t φ + Δφ - ⟨∇U, ∇φ⟩ - |∇φ|² = 0`.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenarios::{OuLinearOracle, Scenario};
use crate::sde::coord_header;
use crate::value::engine::{FkMoments, FkProblem, Functional};
use crate::value::estimate::FieldOptions;

/// Space–time points where the residual is evaluated.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HjbGrid {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// Time step of the centred `∂_t` quotient.
    pub h_t: f64,
    /// Space step of the centred gradient and Laplacian quotients.
    pub h_x: f64,
}

impl HjbGrid {
    /// Tensor grid `times × [lo, hi]^d` with `n` points per axis.
    pub fn tensor(times: Vec<f64>, d: usize, lo: f64, hi: f64, n: usize, h_t: f64, h_x: f64) -> Self {
        let axis: Vec<f64> =
            (0..n).map(|i| if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect();
        let mut points = vec![Vec::new()];
        for _ in 0..d {
            points = points.into_iter().flat_map(|p| axis.iter().map(move |&v| [p.clone(), vec![v]].concat())).collect();
        }
        Self { times, points, h_t, h_x }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub residual: f64,
    pub budget: f64,
    pub se: f64,
    /// Richardson estimate `|R_h - R_{2h}| / 3` of the difference-quotient error.
    pub fd_error: f64,
    /// `|R_{dt} - R_{2dt}|`.
    pub dt_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualTable {
    /// `"oracle"` or `"monte-carlo"`.
    pub mode: &'static str,
    pub horizon: f64,
    pub rows: Vec<ResidualRow>,
    pub max_abs_residual: f64,
    /// `max |R| / budget`.
    pub max_ratio: f64,
    pub within_budget: bool,
    /// `sup_x |φ̂_T(x) - W(x)|` over the grid points.
    pub terminal_sup_diff: f64,
    pub terminal_se: f64,
    pub n_samples: usize,
    pub dt: f64,
}

impl ResidualTable {
    fn from_rows(mode: &'static str, horizon: f64, rows: Vec<ResidualRow>, terminal: (f64, f64), n: usize, dt: f64) -> Self {
        let max_abs_residual = rows.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
        let max_ratio = rows
            .iter()
            .map(|r| if r.residual == 0.0 { 0.0 } else { r.residual.abs() / r.budget })
            .fold(0.0, f64::max);
        Self {
            mode,
            horizon,
            within_budget: rows.iter().all(|r| r.residual.abs() <= r.budget),
            rows,
            max_abs_residual,
            max_ratio,
            terminal_sup_diff: terminal.0,
            terminal_se: terminal.1,
            n_samples: n,
            dt,
        }
    }

    /// CSV with header `t,x...,residual,budget`.
    pub fn to_csv(&self) -> String {
        let d = self.rows.first().map_or(1, |r| r.x.len());
        let mut s = format!("t,{},residual,budget\n", coord_header("x", d));
        for r in &self.rows {
            s.push_str(&format!("{}", r.t));
            for v in &r.x {
                s.push_str(&format!(",{v}"));
            }
            s.push_str(&format!(",{},{}\n", r.residual, r.budget));
        }
        s
    }
}

/// Residual of the closed-form solution, with analytic derivatives.
pub fn hjb_residual_oracle(oracle: &OuLinearOracle, times: &[f64], points: &[Vec<f64>], tol: f64) -> ResidualTable {
    let d = oracle.a.len();
    let mut g = vec![0.0; d];
    let mut hs = vec![0.0; d * d];
    let mut rows = Vec::with_capacity(times.len() * points.len());
    for &t in times {
        for x in points {
            oracle.grad_phi(t, x, &mut g);
            oracle.hess_phi(t, x, &mut hs);
            let lap: f64 = (0..d).map(|j| hs[j * d + j]).sum();
            // U = |x|²/2, so ∇U = x.
            let drift: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
            let g2: f64 = g.iter().map(|v| v * v).sum();
            let residual = oracle.dphi_dt(t, x) + lap - drift - g2;
            rows.push(ResidualRow { t, x: x.clone(), residual, budget: tol, se: 0.0, fd_error: 0.0, dt_error: 0.0 });
        }
    }
    let terminal = points
        .iter()
        .map(|x| {
            let w: f64 = oracle.a.iter().zip(x).map(|(a, b)| a * b).sum();
            (oracle.phi(oracle.horizon, x) - w).abs()
        })
        .fold(0.0, f64::max);
    ResidualTable::from_rows("oracle", oracle.horizon, rows, (terminal, 0.0), 0, 0.0)
}

fn key(v: f64) -> i64 {
    (v * 1e9).round() as i64
}

#[derive(Default)]
struct Index<K> {
    map: HashMap<K, usize>,
}

impl<K: std::hash::Hash + Eq> Index<K> {
    fn get(&mut self, k: K, fresh: impl FnOnce() -> usize) -> usize {
        *self.map.entry(k).or_insert_with(fresh)
    }
}

/// Node indices of one residual stencil.
struct Stencil {
    centre: usize,
    plus: Vec<usize>,
    minus: Vec<usize>,
    later: usize,
    earlier: usize,
}

impl Stencil {
    fn nodes(&self) -> Vec<usize> {
        let mut v = vec![self.centre, self.later, self.earlier];
        v.extend(&self.plus);
        v.extend(&self.minus);
        v
    }

    /// Residual value and its linearization in the nodal values.
    fn residual(&self, phi: impl Fn(usize) -> f64, grad_u: &[f64], h: f64, h_t: f64) -> (f64, Functional) {
        let c = phi(self.centre);
        let mut r = (phi(self.later) - phi(self.earlier)) / (2.0 * h_t);
        let mut lin: Functional = vec![(self.later, 0.5 / h_t), (self.earlier, -0.5 / h_t), (self.centre, 0.0)];
        for j in 0..self.plus.len() {
            let (p, m) = (phi(self.plus[j]), phi(self.minus[j]));
            let dj = (p - m) / (2.0 * h);
            r += (p - 2.0 * c + m) / (h * h) - grad_u[j] * dj - dj * dj;
            let slope = (grad_u[j] + 2.0 * dj) / (2.0 * h);
            lin.push((self.plus[j], 1.0 / (h * h) - slope));
            lin.push((self.minus[j], 1.0 / (h * h) + slope));
            lin[2].1 -= 2.0 / (h * h);
        }
        (r, lin)
    }
}

/// Monte-Carlo residual of `φ̂` on `grid`, with error budget
/// `5 (SE + |R_h - R_{2h}|/3 + |R_{dt} - R_{2dt}|)` per point.
///
/// The `2dt` run reuses the seed, so its paths are a coarsening of the same
/// Brownian noise only in distribution; its difference is a conservative
/// time-step error estimate.
pub fn hjb_residual(scenario: &Scenario, grid: &HjbGrid, horizon: f64, opts: FieldOptions) -> Result<ResidualTable> {
    let d = scenario.dim();
    let (h, h_t) = (grid.h_x, grid.h_t);
    if !(h > 0.0 && h_t > 0.0) {
        return Err(Error::invalid("difference steps must be positive"));
    }
    if let Some(p) = grid.points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: p.len() });
    }
    if let Some(&t) = grid.times.iter().find(|&&t| horizon - t < 2.0 * h_t - 1e-12) {
        return Err(Error::invalid(format!("t = {t} leaves no room for the time stencil before T = {horizon}")));
    }

    let mut states: Vec<Vec<f64>> = Vec::new();
    let mut state_ix: Index<Vec<i64>> = Index::default();
    let mut taus: Vec<f64> = vec![0.0];
    let mut tau_ix: Index<i64> = Index::default();
    tau_ix.get(0, || 0);
    let mut state = |x: Vec<f64>| {
        let k = x.iter().map(|&v| key(v)).collect();
        let n = states.len();
        let i = state_ix.get(k, || n);
        if i == n {
            states.push(x);
        }
        i
    };
    let mut tau = |t: f64| {
        let n = taus.len();
        let i = tau_ix.get(key(t), || n);
        if i == n {
            taus.push(t);
        }
        i
    };
    // (point, stencil at h, stencil at 2h) with snapshot indices still unsorted
    let mut raw = Vec::new();
    for (pi, x) in grid.points.iter().enumerate() {
        let centre = state(x.clone());
        let mut shifted = |s: f64| -> (Vec<usize>, Vec<usize>) {
            (0..d)
                .map(|j| {
                    let mut p = x.clone();
                    p[j] += s;
                    let mut m = x.clone();
                    m[j] -= s;
                    (state(p), state(m))
                })
                .unzip()
        };
        let (p1, m1) = shifted(h);
        let (p2, m2) = shifted(2.0 * h);
        for &t in &grid.times {
            let tc = tau(horizon - t);
            let later1 = tau(horizon - t - h_t);
            let earlier1 = tau(horizon - t + h_t);
            let later2 = tau(horizon - t - 2.0 * h_t);
            let earlier2 = tau(horizon - t + 2.0 * h_t);
            raw.push((pi, t, centre, p1.clone(), m1.clone(), p2.clone(), m2.clone(), tc, [later1, earlier1, later2, earlier2]));
        }
    }
    let terminal_states: Vec<usize> = grid.points.iter().map(|x| state(x.clone())).collect();

    let mut order: Vec<usize> = (0..taus.len()).collect();
    order.sort_by(|&a, &b| taus[a].total_cmp(&taus[b]));
    let mut rank = vec![0; taus.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let sorted_taus: Vec<f64> = order.iter().map(|&i| taus[i]).collect();
    let n_states = states.len();
    let node = |k: usize, s: usize| rank[k] * n_states + s;

    let stencils: Vec<(usize, f64, Stencil, Stencil)> = raw
        .into_iter()
        .map(|(pi, t, c, p1, m1, p2, m2, tc, [l1, e1, l2, e2])| {
            let s1 = Stencil {
                centre: node(tc, c),
                plus: p1.iter().map(|&s| node(tc, s)).collect(),
                minus: m1.iter().map(|&s| node(tc, s)).collect(),
                later: node(l1, c),
                earlier: node(e1, c),
            };
            let s2 = Stencil {
                centre: node(tc, c),
                plus: p2.iter().map(|&s| node(tc, s)).collect(),
                minus: m2.iter().map(|&s| node(tc, s)).collect(),
                later: node(l2, c),
                earlier: node(e2, c),
            };
            (pi, t, s1, s2)
        })
        .collect();

    let terminal_w: Vec<f64> = terminal_states.iter().map(|&s| scenario.perturbation.value(&states[s])).collect();
    let functionals: Vec<Functional> =
        stencils.iter().map(|(_, _, s, _)| s.nodes().into_iter().map(|k| (k, 1.0)).collect()).collect();
    let fine = FkProblem {
        potential: &scenario.potential,
        perturbation: &scenario.perturbation,
        starts: states,
        taus: sorted_taus,
        dt: opts.dt,
        n_samples: opts.n_samples,
        seed: opts.seed,
    };
    let m = fine.run(&functionals)?;
    let coarse = FkProblem { dt: 2.0 * m.dt, ..fine };
    let m2 = coarse.run(&[])?;

    let mut grad_u = vec![0.0; d];
    let residual_at = |mm: &FkMoments, s: &Stencil, gu: &[f64], step: f64, step_t: f64| {
        s.residual(|k| mm.phi(k), gu, step, step_t)
    };
    let rows = stencils
        .iter()
        .map(|(pi, t, s1, s2)| {
            let x = &grid.points[*pi];
            scenario.potential.grad(x, &mut grad_u);
            let (r, lin) = residual_at(&m, s1, &grad_u, h, h_t);
            let (r2h, _) = residual_at(&m, s2, &grad_u, 2.0 * h, 2.0 * h_t);
            let (r2dt, _) = residual_at(&m2, s1, &grad_u, h, h_t);
            let se = m.se(&lin);
            let fd_error = (r - r2h).abs() / 3.0;
            let dt_error = (r - r2dt).abs();
            ResidualRow { t: *t, x: x.clone(), residual: r, budget: 5.0 * (se + fd_error + dt_error), se, fd_error, dt_error }
        })
        .collect();

    let k0 = tau_ix.get(0, || unreachable!());
    // lattice points are deduplicated up to rounding, so compare with W at the stored state
    let terminal = terminal_states
        .iter()
        .zip(&terminal_w)
        .map(|(&s, w)| (m.phi(node(k0, s)) - w).abs())
        .fold(0.0, f64::max);
    Ok(ResidualTable::from_rows("monte-carlo", horizon, rows, (terminal, 0.0), opts.n_samples, m.dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::SimParams;

    #[test]
    fn oracle_residual_vanishes() {
        let o = OuLinearOracle::new(vec![0.5], 4.5);
        let g = HjbGrid::tensor(vec![0.0, 1.0, 4.0], 1, -2.0, 2.0, 5, 0.05, 0.1);
        let tab = hjb_residual_oracle(&o, &g.times, &g.points, 1e-10);
        assert!(tab.max_abs_residual < 1e-12, "{}", tab.max_abs_residual);
        assert!(tab.within_budget);
        assert!(tab.terminal_sup_diff < 1e-15);
    }

    #[test]
    fn monte_carlo_residual_small_grid() {
        let s = Scenario::ou_linear(0.5, SimParams::default());
        let g = HjbGrid::tensor(vec![0.0, 2.0], 1, -1.0, 1.0, 3, 0.05, 0.1);
        let opts = FieldOptions { n_samples: 2000, seed: 3, dt: 2e-3, ..FieldOptions::default() };
        let tab = hjb_residual(&s, &g, 4.5, opts).unwrap();
        assert_eq!(tab.rows.len(), 6);
        assert!(tab.within_budget, "{:?}", tab.rows);
        assert_eq!(tab.terminal_sup_diff, 0.0);
        assert!(tab.to_csv().starts_with("t,x,residual,budget\n"));
    }
}
