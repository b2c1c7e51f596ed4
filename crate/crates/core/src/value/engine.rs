//! Feynman–Kac sampler shared by every value-function estimator.
//!
//! All start states use the same Gaussian increments (common random numbers),
//! and all snapshot times come from the same paths. Besides the mean weight at
//! every (snapshot, state) node, the sampler accumulates the mixed second
//! moments needed by the delta-method standard error of each requested linear
//! functional of `φ̂`.

use std::collections::HashMap;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::scenarios::{Perturbation, Potential};
use crate::sde::TimeGrid;

/// Weights below this count as underflow.
pub const WEIGHT_FLOOR: f64 = 1e-300;

const CHUNK: usize = 256;

/// Sparse linear functional `Σ c_k φ̂(node_k)`.
pub(crate) type Functional = Vec<(usize, f64)>;

pub(crate) struct FkProblem<'a> {
    pub potential: &'a Potential,
    pub perturbation: &'a Perturbation,
    pub starts: Vec<Vec<f64>>,
    /// Semigroup times, sorted ascending, distinct.
    pub taus: Vec<f64>,
    pub dt: f64,
    pub n_samples: usize,
    pub seed: u64,
}

pub(crate) struct FkMoments {
    pub n: usize,
    pub n_states: usize,
    /// `W(start)`, subtracted inside every exponent.
    shift: Vec<f64>,
    sum: Vec<f64>,
    pair_sum: Vec<f64>,
    pair_index: HashMap<(usize, usize), usize>,
    /// Effective Euler step.
    pub dt: f64,
}

#[derive(Clone)]
struct Acc {
    sum: Vec<f64>,
    max_w: Vec<f64>,
    pair_sum: Vec<f64>,
}

impl FkProblem<'_> {
    pub fn node(&self, k: usize, s: usize) -> usize {
        k * self.starts.len() + s
    }

    /// Runs the sampler; `functionals` decide which mixed moments are kept.
    pub fn run(&self, functionals: &[Functional]) -> Result<FkMoments> {
        let d = self.potential.dim();
        let n_states = self.starts.len();
        let n_nodes = n_states * self.taus.len();
        if self.n_samples < 2 {
            return Err(Error::invalid("need at least two samples"));
        }
        if let Some(s) = self.starts.iter().find(|s| s.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: s.len() });
        }
        let mut pair_index = HashMap::new();
        let mut pairs = Vec::new();
        for f in functionals {
            for &(a, _) in f {
                for &(b, _) in f {
                    let key = (a.min(b), a.max(b));
                    pair_index.entry(key).or_insert_with(|| {
                        pairs.push(key);
                        pairs.len() - 1
                    });
                }
            }
        }
        let t_max = self.taus.last().copied().unwrap_or(0.0);
        let grid = TimeGrid::with_records(0.0, t_max, self.dt, &self.taus)?;
        if grid.record_steps().len() != self.taus.len() {
            return Err(Error::invalid("snapshot times collapse onto the same Euler step"));
        }
        let shift: Vec<f64> = self.starts.iter().map(|s| self.perturbation.value(s)).collect();

        let n_chunks = self.n_samples.div_ceil(CHUNK);
        let partials: Vec<Acc> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let mut acc = Acc { sum: vec![0.0; n_nodes], max_w: vec![0.0; n_nodes], pair_sum: vec![0.0; pairs.len()] };
                let mut w = vec![0.0; n_nodes];
                let lo = c * CHUNK;
                let hi = ((c + 1) * CHUNK).min(self.n_samples);
                for i in lo..hi {
                    self.path_weights(i, &grid, &shift, &mut w)?;
                    for (node, &v) in w.iter().enumerate() {
                        acc.sum[node] += v;
                        if v > acc.max_w[node] {
                            acc.max_w[node] = v;
                        }
                    }
                    for (p, &(a, b)) in pairs.iter().enumerate() {
                        acc.pair_sum[p] += w[a] * w[b];
                    }
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        let mut total = Acc { sum: vec![0.0; n_nodes], max_w: vec![0.0; n_nodes], pair_sum: vec![0.0; pairs.len()] };
        for p in partials {
            for (t, v) in total.sum.iter_mut().zip(p.sum) {
                *t += v;
            }
            for (t, v) in total.max_w.iter_mut().zip(p.max_w) {
                *t = t.max(v);
            }
            for (t, v) in total.pair_sum.iter_mut().zip(p.pair_sum) {
                *t += v;
            }
        }
        for (node, &m) in total.max_w.iter().enumerate() {
            if !(m >= WEIGHT_FLOOR) {
                return Err(Error::WeightUnderflow { point: node % n_states, min_w: -m.ln() });
            }
        }
        Ok(FkMoments {
            n: self.n_samples,
            n_states,
            shift,
            sum: total.sum,
            pair_sum: total.pair_sum,
            pair_index,
            dt: grid.dt,
        })
    }

    fn path_weights(&self, path: usize, grid: &TimeGrid, shift: &[f64], w: &mut [f64]) -> Result<()> {
        let d = self.potential.dim();
        let n_states = self.starts.len();
        let mut g = rng::stream(self.seed, path as u64);
        let mut x: Vec<f64> = self.starts.iter().flatten().copied().collect();
        let mut xi = vec![0.0; d];
        let mut b = vec![0.0; d];
        let sd = (2.0 * grid.dt).sqrt();
        let rec = grid.record_steps();
        let mut next = 0;
        for step in 0..=grid.steps {
            if next < rec.len() && rec[next] == step {
                for s in 0..n_states {
                    let xs = &x[s * d..(s + 1) * d];
                    w[next * n_states + s] = (-(self.perturbation.value(xs) - shift[s])).exp();
                }
                next += 1;
            }
            if step == grid.steps {
                break;
            }
            for v in xi.iter_mut() {
                *v = StandardNormal.sample(&mut g);
            }
            if d == 1 {
                let (z, u) = (sd * xi[0], &self.potential);
                for v in x.iter_mut() {
                    *v += -u.grad1(*v) * grid.dt + z;
                }
            } else {
                for s in 0..n_states {
                    let xs = &mut x[s * d..(s + 1) * d];
                    self.potential.grad(xs, &mut b);
                    for j in 0..d {
                        xs[j] += -b[j] * grid.dt + sd * xi[j];
                    }
                }
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { path, t: grid.time(step + 1) });
            }
        }
        Ok(())
    }
}

impl FkMoments {
    fn mean(&self, node: usize) -> f64 {
        self.sum[node] / self.n as f64
    }

    /// `φ̂ = W(start) - log(mean weight)`.
    pub fn phi(&self, node: usize) -> f64 {
        self.shift[node % self.n_states] - self.mean(node).ln()
    }

    /// Point value of a functional.
    pub fn value(&self, f: &Functional) -> f64 {
        f.iter().map(|&(k, c)| c * self.phi(k)).sum()
    }

    /// Delta-method standard error of a functional. Panics if the functional
    /// was not registered with [`FkProblem::run`].
    pub fn se(&self, f: &Functional) -> f64 {
        let n = self.n as f64;
        let mut var = 0.0;
        for &(a, ca) in f {
            for &(b, cb) in f {
                let p = self.pair_index[&(a.min(b), a.max(b))];
                let ma = self.mean(a);
                let mb = self.mean(b);
                var += ca * cb * (self.pair_sum[p] / n / (ma * mb) - 1.0);
            }
        }
        (var.max(0.0) * n / (n - 1.0) / n).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_snapshot_is_exact() {
        let u = Potential::quadratic(1, 1.0);
        let w = Perturbation::linear(vec![0.5]);
        let p = FkProblem {
            potential: &u,
            perturbation: &w,
            starts: vec![vec![1.0], vec![-1.0]],
            taus: vec![0.0, 0.5],
            dt: 0.01,
            n_samples: 100,
            seed: 1,
        };
        let f: Functional = vec![(p.node(0, 0), 1.0)];
        let m = p.run(&[f.clone()]).unwrap();
        assert!((m.phi(p.node(0, 0)) - 0.5).abs() < 1e-15);
        assert!((m.phi(p.node(0, 1)) + 0.5).abs() < 1e-15);
        assert_eq!(m.se(&f), 0.0);
    }

    #[test]
    fn crn_difference_of_translation_is_exact() {
        // For W linear and U quadratic the CRN difference has no noise at all.
        let u = Potential::quadratic(1, 1.0);
        let w = Perturbation::linear(vec![0.5]);
        let h = 0.05;
        let p = FkProblem {
            potential: &u,
            perturbation: &w,
            starts: vec![vec![1.0 + h], vec![1.0 - h]],
            taus: vec![1.0],
            dt: 1e-3,
            n_samples: 1000,
            seed: 2,
        };
        let f: Functional = vec![(0, 0.5 / h), (1, -0.5 / h)];
        let m = p.run(&[f.clone()]).unwrap();
        let exact = 0.5 * (1.0f64 - 1e-3).powi(1000);
        assert!((m.value(&f) - exact).abs() < 1e-10);
        assert!(m.se(&f) < 1e-6);
    }
}
