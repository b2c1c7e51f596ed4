//! Piecewise cubic Hermite interpolation.

use crate::error::{Error, Result};

/// Cubic Hermite interpolant on strictly increasing nodes.
///
/// Built either with Fritsch–Carlson limited slopes (monotone data stays
/// monotone) or with caller supplied exact derivatives. Outside the node
/// range it extends linearly with the end slope.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        check_nodes(&x, y.len())?;
        let d = fritsch_carlson_slopes(&x, &y);
        Ok(Self { x, y, d })
    }

    pub fn with_slopes(x: Vec<f64>, y: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        check_nodes(&x, y.len())?;
        if d.len() != x.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), got: d.len() });
        }
        Ok(Self { x, y, d })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn locate(&self, t: f64) -> usize {
        match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0] + self.d[0] * (t - self.x[0]);
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1] + self.d[n - 1] * (t - self.x[n - 1]);
        }
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.d[0];
        }
        if t >= self.x[n - 1] {
            return self.d[n - 1];
        }
        let i = self.locate(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let dh00 = (6.0 * s2 - 6.0 * s) / h;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = (-6.0 * s2 + 6.0 * s) / h;
        let dh11 = 3.0 * s2 - 2.0 * s;
        dh00 * self.y[i] + dh10 * self.d[i] + dh01 * self.y[i + 1] + dh11 * self.d[i + 1]
    }
}

fn check_nodes(x: &[f64], ny: usize) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::invalid("interpolation needs at least two nodes"));
    }
    if x.len() != ny {
        return Err(Error::DimensionMismatch { expected: x.len(), got: ny });
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("interpolation nodes must be strictly increasing"));
    }
    Ok(())
}

fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / (x[i + 1] - x[i])).collect();
    let mut d = vec![0.0; n];
    d[0] = delta[0];
    d[n - 1] = delta[n - 2];
    for i in 1..n - 1 {
        if delta[i - 1] * delta[i] <= 0.0 {
            d[i] = 0.0;
        } else {
            // weighted harmonic mean
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let w1 = 2.0 * h1 + h0;
            let w2 = h1 + 2.0 * h0;
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d
}

/// Catmull–Rom cubic on a uniform grid `x0 + k h`, `k = 0..n`.
pub(crate) fn catmull_rom(values: &[f64], x0: f64, h: f64, t: f64) -> Option<f64> {
    let n = values.len();
    let u = (t - x0) / h;
    if !(u >= 0.0 && u <= (n - 1) as f64) {
        return None;
    }
    let i = (u.floor() as usize).min(n - 2);
    let s = u - i as f64;
    let p1 = values[i];
    let p2 = values[i + 1];
    let p0 = if i > 0 { values[i - 1] } else { 2.0 * p1 - p2 };
    let p3 = if i + 2 < n { values[i + 2] } else { 2.0 * p2 - p1 };
    let m1 = 0.5 * (p2 - p0);
    let m2 = 0.5 * (p3 - p1);
    let s2 = s * s;
    let s3 = s2 * s;
    Some((2.0 * s3 - 3.0 * s2 + 1.0) * p1 + (s3 - 2.0 * s2 + s) * m1 + (-2.0 * s3 + 3.0 * s2) * p2 + (s3 - s2) * m2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_cubic_with_exact_slopes() {
        let x: Vec<f64> = (0..6).map(|i| i as f64 * 0.7).collect();
        let f = |t: f64| t * t * t - t;
        let df = |t: f64| 3.0 * t * t - 1.0;
        let m = MonotoneCubic::with_slopes(x.clone(), x.iter().map(|&t| f(t)).collect(), x.iter().map(|&t| df(t)).collect())
            .unwrap();
        for k in 0..50 {
            let t = k as f64 * 0.07;
            assert!((m.eval(t) - f(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unsorted_nodes() {
        assert!(MonotoneCubic::new(vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 2.0]).is_err());
    }

    #[test]
    fn catmull_rom_is_exact_on_quadratics_inside() {
        let h = 0.25;
        let vals: Vec<f64> = (0..9).map(|k| (k as f64 * h).powi(2)).collect();
        let v = catmull_rom(&vals, 0.0, h, 1.1).unwrap();
        assert!((v - 1.21).abs() < 1e-12);
        assert!(catmull_rom(&vals, 0.0, h, 2.5).is_none());
    }

    proptest! {
        #[test]
        fn monotone_data_gives_monotone_interpolant(steps in proptest::collection::vec(0.0f64..3.0, 3..12)) {
            let x: Vec<f64> = (0..steps.len()).map(|i| i as f64).collect();
            let mut acc = 0.0;
            let y: Vec<f64> = steps.iter().map(|s| { acc += s; acc }).collect();
            let m = MonotoneCubic::new(x, y).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=(10 * (steps.len() - 1)) {
                let v = m.eval(k as f64 / 10.0);
                prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
        }
    }
}
