use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;
use crate::scenarios::Scenario;
use crate::sde::coord_header;
use crate::value::engine::{FkProblem, Functional};

/// Monte-Carlo settings for the value-function estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldOptions {
    pub n_samples: usize,
    pub seed: u64,
    pub dt: f64,
    /// Finite-difference step of the gradient.
    pub h: f64,
    /// Finite-difference step of the Hessian quotients.
    pub h_hess: f64,
    /// Random unit directions per point on top of the coordinate axes (`d > 1` only).
    pub random_directions: usize,
    pub gradient: bool,
    pub hessian: bool,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self { n_samples: 100_000, seed: 0, dt: 1e-3, h: 0.05, h_hess: 0.2, random_directions: 8, gradient: true, hessian: false }
    }
}

/// Estimates of `φ_t`, `∇φ_t` and the largest Hessian Rayleigh quotient at a
/// set of points, one time slice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldEstimate {
    pub t: f64,
    pub horizon: f64,
    pub points: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    pub se_phi: Vec<f64>,
    /// Empty unless gradients were requested.
    pub grad: Vec<Vec<f64>>,
    pub se_grad: Vec<Vec<f64>>,
    /// `max_u |⟨u, ∇²φ̂ u⟩|` per point; empty unless requested.
    pub hess_quot: Vec<f64>,
    pub se_hess: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub h: f64,
    pub h_hess: f64,
    pub dt: f64,
}

impl FieldEstimate {
    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// `max_i |∇φ̂(x_i)|` and the standard error at the maximizer.
    pub fn sup_grad(&self) -> Option<(f64, f64)> {
        self.grad
            .iter()
            .zip(&self.se_grad)
            .map(|(g, s)| (g.iter().map(|v| v * v).sum::<f64>().sqrt(), s.iter().map(|v| v * v).sum::<f64>().sqrt()))
            .max_by(|a, b| a.0.total_cmp(&b.0))
    }

    /// CSV rows under the header `t,x...,phi,se_phi,grad...,se_grad,hess_quot,se_hess`;
    /// missing quantities are left empty.
    pub fn csv_rows(&self) -> String {
        let mut s = String::new();
        let d = self.dim();
        for i in 0..self.points.len() {
            s.push_str(&format!("{}", self.t));
            for v in &self.points[i] {
                s.push_str(&format!(",{v}"));
            }
            s.push_str(&format!(",{},{}", self.phi[i], self.se_phi[i]));
            for j in 0..d {
                match self.grad.get(i) {
                    Some(g) => s.push_str(&format!(",{}", g[j])),
                    None => s.push(','),
                }
            }
            for j in 0..d {
                match self.se_grad.get(i) {
                    Some(g) => s.push_str(&format!(",{}", g[j])),
                    None => s.push(','),
                }
            }
            match (self.hess_quot.get(i), self.se_hess.get(i)) {
                (Some(q), Some(e)) => s.push_str(&format!(",{q},{e}\n")),
                _ => s.push_str(",,\n"),
            }
        }
        s
    }
}

/// Header matching [`FieldEstimate::csv_rows`].
pub fn field_csv_header(d: usize) -> String {
    let se = if d == 1 { "se_grad".to_string() } else { coord_header("se_grad", d) };
    format!("t,{},phi,se_phi,{},{se},hess_quot,se_hess\n", coord_header("x", d), coord_header("grad", d))
}

/// Concatenated CSV for several slices.
pub fn field_csv(estimates: &[FieldEstimate]) -> String {
    let d = estimates.first().map_or(1, FieldEstimate::dim);
    let mut s = field_csv_header(d);
    for e in estimates {
        s.push_str(&e.csv_rows());
    }
    s
}

fn unit_directions(d: usize, extra: usize, seed: u64, point: usize) -> Vec<Vec<f64>> {
    let mut dirs: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            e
        })
        .collect();
    if d > 1 {
        let mut g = rng::stream(rng::derive_seed(seed, 0xD1), point as u64);
        for _ in 0..extra {
            let v: Vec<f64> = (0..d).map(|_| g.sample::<f64, _>(StandardNormal)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            dirs.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    dirs
}

struct PointLayout {
    center: usize,
    /// `(plus, minus)` per coordinate.
    grad: Vec<(usize, usize)>,
    /// `(plus, minus)` per direction.
    hess: Vec<(usize, usize)>,
}

/// `φ̂`, and optionally `∇φ̂` and Hessian quotients, at `times` for one horizon.
///
/// One set of paths serves every time slice and every point.
pub fn estimate_field(
    scenario: &Scenario,
    times: &[f64],
    horizon: f64,
    points: &[Vec<f64>],
    opts: FieldOptions,
) -> Result<Vec<FieldEstimate>> {
    let d = scenario.dim();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: p.len() });
    }
    if opts.n_samples < 2 {
        return Err(Error::invalid("n_samples must be at least 2"));
    }
    if (opts.gradient && !(opts.h > 0.0)) || (opts.hessian && !(opts.h_hess > 0.0)) {
        return Err(Error::invalid("finite-difference steps must be positive"));
    }
    for &t in times {
        if !(t >= 0.0 && t <= horizon) {
            return Err(Error::invalid(format!("need 0 <= t <= T, got t = {t}, T = {horizon}")));
        }
    }
    let blank = |t: f64| FieldEstimate {
        t,
        horizon,
        points: points.to_vec(),
        phi: vec![0.0; points.len()],
        se_phi: vec![0.0; points.len()],
        grad: if opts.gradient { vec![vec![0.0; d]; points.len()] } else { Vec::new() },
        se_grad: if opts.gradient { vec![vec![0.0; d]; points.len()] } else { Vec::new() },
        hess_quot: if opts.hessian { vec![0.0; points.len()] } else { Vec::new() },
        se_hess: if opts.hessian { vec![0.0; points.len()] } else { Vec::new() },
        n_samples: opts.n_samples,
        seed: opts.seed,
        h: opts.h,
        h_hess: opts.h_hess,
        dt: opts.dt,
    };
    if scenario.perturbation.is_zero() {
        return Ok(times.iter().map(|&t| blank(t)).collect());
    }

    let mut starts: Vec<Vec<f64>> = Vec::new();
    let mut push = |x: Vec<f64>| {
        starts.push(x);
        starts.len() - 1
    };
    let mut layout = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let center = push(p.clone());
        let shifted = |u: &[f64], h: f64| -> (Vec<f64>, Vec<f64>) {
            (p.iter().zip(u).map(|(a, b)| a + h * b).collect(), p.iter().zip(u).map(|(a, b)| a - h * b).collect())
        };
        let mut grad = Vec::new();
        if opts.gradient {
            for j in 0..d {
                let mut e = vec![0.0; d];
                e[j] = 1.0;
                let (a, b) = shifted(&e, opts.h);
                grad.push((push(a), push(b)));
            }
        }
        let mut hess = Vec::new();
        if opts.hessian {
            for u in unit_directions(d, opts.random_directions, opts.seed, i) {
                let (a, b) = shifted(&u, opts.h_hess);
                hess.push((push(a), push(b)));
            }
        }
        layout.push(PointLayout { center, grad, hess });
    }

    let mut taus: Vec<f64> = times.iter().map(|&t| horizon - t).collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    let problem = FkProblem {
        potential: &scenario.potential,
        perturbation: &scenario.perturbation,
        starts,
        taus: taus.clone(),
        dt: opts.dt,
        n_samples: opts.n_samples,
        seed: opts.seed,
    };
    let k_of = |t: f64| taus.iter().position(|&s| (s - (horizon - t)).abs() <= 1e-12 * (1.0 + s.abs())).expect("registered");

    let mut functionals: Vec<Functional> = Vec::new();
    for &t in times {
        let k = k_of(t);
        for l in &layout {
            functionals.push(vec![(problem.node(k, l.center), 1.0)]);
            for &(a, b) in &l.grad {
                functionals.push(vec![(problem.node(k, a), 0.5 / opts.h), (problem.node(k, b), -0.5 / opts.h)]);
            }
            let h2 = opts.h_hess * opts.h_hess;
            for &(a, b) in &l.hess {
                functionals.push(vec![
                    (problem.node(k, a), 1.0 / h2),
                    (problem.node(k, l.center), -2.0 / h2),
                    (problem.node(k, b), 1.0 / h2),
                ]);
            }
        }
    }
    let m = problem.run(&functionals)?;

    let mut out = Vec::with_capacity(times.len());
    let mut it = functionals.iter();
    for &t in times {
        let mut e = blank(t);
        e.dt = m.dt;
        for (i, l) in layout.iter().enumerate() {
            let f = it.next().expect("phi functional");
            e.phi[i] = m.value(f);
            e.se_phi[i] = m.se(f);
            for j in 0..l.grad.len() {
                let f = it.next().expect("grad functional");
                e.grad[i][j] = m.value(f);
                e.se_grad[i][j] = m.se(f);
            }
            let mut best = (f64::NEG_INFINITY, 0.0);
            for _ in 0..l.hess.len() {
                let f = it.next().expect("hess functional");
                let q = m.value(f).abs();
                if q > best.0 {
                    best = (q, m.se(f));
                }
            }
            if opts.hessian {
                e.hess_quot[i] = best.0;
                e.se_hess[i] = best.1;
            }
        }
        out.push(e);
    }
    Ok(out)
}

/// `φ̂_t(x) = -log((1/n) Σ e^{-W(X^{x,(i)}_{T-t})})`.
pub fn estimate_phi(
    scenario: &Scenario,
    t: f64,
    horizon: f64,
    points: &[Vec<f64>],
    n_samples: usize,
    seed: u64,
) -> Result<FieldEstimate> {
    let opts = FieldOptions { n_samples, seed, dt: scenario.sim.dt, gradient: false, hessian: false, ..FieldOptions::default() };
    Ok(estimate_field(scenario, &[t], horizon, points, opts)?.remove(0))
}

/// Central differences of [`estimate_phi`] with common random numbers.
pub fn estimate_grad_phi(
    scenario: &Scenario,
    t: f64,
    horizon: f64,
    points: &[Vec<f64>],
    n_samples: usize,
    seed: u64,
    h: f64,
) -> Result<FieldEstimate> {
    let opts = FieldOptions { n_samples, seed, dt: scenario.sim.dt, h, gradient: true, hessian: false, ..FieldOptions::default() };
    Ok(estimate_field(scenario, &[t], horizon, points, opts)?.remove(0))
}

/// Second differences `(φ̂(x+hu) - 2φ̂(x) + φ̂(x-hu))/h²` over coordinate and
/// random directions; reports the largest magnitude per point.
#[allow(clippy::too_many_arguments)]
pub fn estimate_hess_phi(
    scenario: &Scenario,
    t: f64,
    horizon: f64,
    points: &[Vec<f64>],
    random_directions: usize,
    n_samples: usize,
    seed: u64,
    h: f64,
) -> Result<FieldEstimate> {
    let opts = FieldOptions {
        n_samples,
        seed,
        dt: scenario.sim.dt,
        h_hess: h,
        random_directions,
        gradient: false,
        hessian: true,
        ..FieldOptions::default()
    };
    Ok(estimate_field(scenario, &[t], horizon, points, opts)?.remove(0))
}
