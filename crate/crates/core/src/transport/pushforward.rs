use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::quad::gk15;
use crate::numerics::stats::ks_one_sample;
use crate::rng;
use crate::scenarios::{Potential, PotentialFamily};
use crate::sde::{simulate_drift, DriftField, TimeGrid};

/// CDF of an unnormalized one-dimensional density, tabulated by Gauss–Kronrod
/// panels on `[lo, hi]` and interpolated linearly between panel edges.
#[derive(Debug, Clone)]
pub struct DensityCdf {
    edges: Vec<f64>,
    cdf: Vec<f64>,
    /// Normalizing constant relative to `exp(max log-density on the edges)`.
    pub norm: f64,
    /// Accumulated panel error estimate relative to `norm`.
    pub rel_error: f64,
}

impl DensityCdf {
    pub fn from_log_density(log_density: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(hi > lo) || cells == 0 {
            return Err(Error::invalid("density table needs hi > lo and at least one cell"));
        }
        let edges: Vec<f64> = (0..=cells).map(|i| lo + (hi - lo) * i as f64 / cells as f64).collect();
        let top = edges.iter().map(|&x| log_density(x)).fold(f64::NEG_INFINITY, f64::max);
        let mut dens = |x: f64| (log_density(x) - top).exp();
        let mut cdf = Vec::with_capacity(edges.len());
        cdf.push(0.0);
        let mut err = 0.0;
        for w in edges.windows(2) {
            let (v, e) = gk15(&mut dens, w[0], w[1]);
            err += e;
            cdf.push(cdf.last().unwrap() + v);
        }
        let norm = *cdf.last().unwrap();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::QuadratureNonConvergence { a: lo, b: hi, value: norm, error: err });
        }
        cdf.iter_mut().for_each(|c| *c /= norm);
        Ok(Self { edges, cdf, norm, rel_error: err / norm })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.edges.len();
        if x <= self.edges[0] {
            return 0.0;
        }
        if x >= self.edges[n - 1] {
            return 1.0;
        }
        let h = self.edges[1] - self.edges[0];
        let i = (((x - self.edges[0]) / h) as usize).min(n - 2);
        let s = (x - self.edges[i]) / h;
        self.cdf[i] + s * (self.cdf[i + 1] - self.cdf[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PushforwardReport {
    pub n: usize,
    pub ks: f64,
    /// `1.36/√n`, the 95% Kolmogorov quantile.
    pub ks_95: f64,
}

/// KS distance between `map(samples)` and the target CDF.
pub fn pushforward_check(map: impl Fn(f64) -> Result<f64>, samples: &[f64], target: &DensityCdf) -> Result<PushforwardReport> {
    if samples.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let mapped: Vec<f64> = samples.iter().map(|&x| map(x)).collect::<Result<_>>()?;
    let n = samples.len();
    Ok(PushforwardReport { n, ks: ks_one_sample(&mapped, |x| target.cdf(x)), ks_95: 1.36 / (n as f64).sqrt() })
}

/// How to draw samples of `μ ∝ e^{-U}` in one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuSampler {
    /// Langevin burn-in time from `x = 0` when no exact sampler applies.
    pub burn_in: f64,
    pub dt: f64,
}

impl Default for MuSampler {
    fn default() -> Self {
        Self { burn_in: 20.0, dt: 5e-3 }
    }
}

impl MuSampler {
    /// Exact Gaussian draws for quadratic `U`, otherwise the terminal states of
    /// independent Langevin runs.
    pub fn sample(&self, potential: &Potential, n: usize, seed: u64) -> Result<Vec<f64>> {
        if potential.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: potential.dim() });
        }
        Ok(self.sample_points(potential, n, seed)?.into_iter().map(|p| p[0]).collect())
    }

    /// Same draws in any dimension, one point per sample.
    pub fn sample_points(&self, potential: &Potential, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let d = potential.dim();
        if let PotentialFamily::Quadratic { scale } = potential.family() {
            let sd = 1.0 / scale.sqrt();
            return Ok((0..n)
                .map(|i| {
                    let mut g = rng::stream(seed, i as u64);
                    (0..d)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut g);
                            sd * z
                        })
                        .collect()
                })
                .collect());
        }
        let grid = TimeGrid::uniform(0.0, self.burn_in, self.dt, usize::MAX)?;
        let ens = simulate_drift(&DriftField::from_potential(potential), &vec![0.0; d], &grid, n, seed)?;
        Ok(ens.terminal().chunks(d).map(<[f64]>::to_vec).collect())
    }
}

/// Marginal CDFs and correlation of an unnormalized planar density, by the
/// midpoint rule on `[lo, hi]²`.
#[derive(Debug, Clone)]
pub struct PlaneDensity {
    lo: f64,
    h: f64,
    /// `marginal[c][i]`: CDF of coordinate `c` at `lo + i h`.
    marginal: [Vec<f64>; 2],
    pub mean: [f64; 2],
    pub corr: f64,
}

impl PlaneDensity {
    pub fn from_log_density(log_density: impl Fn(&[f64]) -> f64 + Sync, lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if !(hi > lo) || cells == 0 {
            return Err(Error::invalid("density table needs hi > lo and at least one cell"));
        }
        let h = (hi - lo) / cells as f64;
        let mid = |i: usize| lo + (i as f64 + 0.5) * h;
        let logs: Vec<f64> = (0..cells * cells).into_par_iter().map(|k| log_density(&[mid(k / cells), mid(k % cells)])).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let norm: f64 = w.iter().sum();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::QuadratureNonConvergence { a: lo, b: hi, value: norm, error: f64::NAN });
        }
        let mut m = [vec![0.0; cells], vec![0.0; cells]];
        let (mut s1, mut s2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (k, &v) in w.iter().enumerate() {
            let (i, j) = (k / cells, k % cells);
            let (x, y) = (mid(i), mid(j));
            m[0][i] += v;
            m[1][j] += v;
            s1 += v * x;
            s2 += v * y;
            s11 += v * x * x;
            s22 += v * y * y;
            s12 += v * x * y;
        }
        let mean = [s1 / norm, s2 / norm];
        let v1 = s11 / norm - mean[0] * mean[0];
        let v2 = s22 / norm - mean[1] * mean[1];
        let corr = (s12 / norm - mean[0] * mean[1]) / (v1 * v2).sqrt();
        let marginal = m.map(|row| {
            let mut cdf = Vec::with_capacity(cells + 1);
            cdf.push(0.0);
            for v in row {
                cdf.push(cdf.last().unwrap() + v / norm);
            }
            cdf
        });
        Ok(Self { lo, h, marginal, mean, corr })
    }

    /// CDF of coordinate `c`.
    pub fn cdf(&self, c: usize, x: f64) -> f64 {
        let t = &self.marginal[c];
        let u = (x - self.lo) / self.h;
        if u <= 0.0 {
            return 0.0;
        }
        if u >= (t.len() - 1) as f64 {
            return 1.0;
        }
        let i = u.floor() as usize;
        t[i] + (u - i as f64) * (t[i + 1] - t[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanePushforwardReport {
    pub n: usize,
    /// KS distance of each coordinate against the target marginal.
    pub ks: [f64; 2],
    pub ks_95: f64,
    pub corr_emp: f64,
    pub corr_target: f64,
    /// `3 (1 - ρ²)/√n`, three asymptotic standard errors of the sample correlation.
    pub corr_tol: f64,
}

/// Per-marginal KS and a correlation comparison for mapped planar samples.
pub fn plane_pushforward_check(mapped: &[Vec<f64>], target: &PlaneDensity) -> Result<PlanePushforwardReport> {
    let n = mapped.len();
    if n < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let col = |c: usize| -> Vec<f64> { mapped.iter().map(|p| p[c]).collect() };
    let (a, b) = (col(0), col(1));
    let ks = [ks_one_sample(&a, |x| target.cdf(0, x)), ks_one_sample(&b, |x| target.cdf(1, x))];
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let (ma, mb) = (mean(&a), mean(&b));
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
        sab += (x - ma) * (y - mb);
    }
    let corr_emp = if saa > 0.0 && sbb > 0.0 { sab / (saa * sbb).sqrt() } else { 0.0 };
    let rho = target.corr;
    Ok(PlanePushforwardReport {
        n,
        ks,
        ks_95: 1.36 / (n as f64).sqrt(),
        corr_emp,
        corr_target: rho,
        corr_tol: 3.0 * (1.0 - rho * rho) / (n as f64).sqrt(),
    })
}
