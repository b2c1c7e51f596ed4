use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::ode::rk4_step_vec;
use crate::value::GradientField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowOptions {
    pub t_max: f64,
    pub ode_dt: f64,
    /// Convergence tolerance on the sup-norm change of the last step.
    pub tol_flow: f64,
    /// Keep every `record_every`-th slice (the last one is always kept).
    pub record_every: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { t_max: 10.0, ode_dt: 0.05, tol_flow: 1e-5, record_every: 1 }
    }
}

/// Trajectories `t ↦ S_t(x)` of `dS/dt = ∇V_t(S)`, `S_0 = Id`, for a set of anchors.
#[derive(Debug, Clone, Serialize)]
pub struct FlowMap {
    pub dim: usize,
    pub anchors: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    /// `slices[k][i] = S_{times[k]}(anchors[i])`.
    pub slices: Vec<Vec<Vec<f64>>>,
    pub converged: bool,
    /// `sup_i |S_{t_n}(x_i) - S_{t_{n-1}}(x_i)|` over the final step.
    pub last_change: f64,
    pub ode_dt: f64,
    pub t_max: f64,
}

impl FlowMap {
    pub fn terminal(&self) -> &[Vec<f64>] {
        self.slices.last().map_or(&[], Vec::as_slice)
    }

    /// CSV `t,anchor,x_S`. In one dimension `anchor` is the anchor position;
    /// otherwise it is the anchor index and `x_S` expands to `x_S1..x_Sd`.
    pub fn to_csv(&self) -> String {
        let head = if self.dim == 1 {
            "x_S".to_string()
        } else {
            (1..=self.dim).map(|j| format!("x_S{j}")).collect::<Vec<_>>().join(",")
        };
        let mut s = format!("t,anchor,{head}\n");
        for (k, &t) in self.times.iter().enumerate() {
            for (i, a) in self.anchors.iter().enumerate() {
                if self.dim == 1 {
                    s.push_str(&format!("{t},{},{}\n", a[0], self.slices[k][i][0]));
                } else {
                    let vals: Vec<String> = self.slices[k][i].iter().map(f64::to_string).collect();
                    s.push_str(&format!("{t},{i},{}\n", vals.join(",")));
                }
            }
        }
        s
    }
}

/// `n` equally spaced one-dimensional anchors on `[lo, hi]`.
pub fn anchor_grid(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| vec![if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }]).collect()
}

/// `n × n` planar anchors on `[lo, hi]²`; anchor `i * n + j` is `(x_i, x_j)`.
pub fn anchor_lattice(lo: f64, hi: f64, n: usize) -> Vec<Vec<f64>> {
    let axis = anchor_grid(lo, hi, n);
    axis.iter().flat_map(|a| axis.iter().map(move |b| vec![a[0], b[0]])).collect()
}

fn steps_for(t_max: f64, ode_dt: f64) -> Result<(usize, f64)> {
    if !(ode_dt > 0.0 && t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::invalid(format!("bad flow horizon {t_max} or step {ode_dt}")));
    }
    let n = ((t_max / ode_dt) - 1e-9).ceil().max(1.0) as usize;
    Ok((n, t_max / n as f64))
}

/// RK4 integration of every anchor through the (deterministic) field.
pub fn integrate_flow(field: &dyn GradientField, anchors: &[Vec<f64>], opts: FlowOptions) -> Result<FlowMap> {
    let d = field.dim();
    if let Some(a) = anchors.iter().find(|a| a.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: a.len() });
    }
    if anchors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("anchors must be finite"));
    }
    let (n, h) = steps_for(opts.t_max, opts.ode_dt)?;
    let every = opts.record_every.max(1);
    let recorded: Vec<usize> = (0..=n).filter(|k| k % every == 0 || *k == n || *k == n - 1).collect();

    // per anchor: recorded states
    let paths: Vec<Vec<Vec<f64>>> = anchors
        .par_iter()
        .map(|a| {
            let mut y = a.clone();
            let mut out = Vec::with_capacity(recorded.len());
            let mut next = 0;
            let mut rhs = |t: f64, x: &[f64], dx: &mut [f64]| field.grad_v(t, x, dx);
            for k in 0..=n {
                if recorded[next] == k {
                    out.push(y.clone());
                    next += 1;
                }
                if k == n {
                    break;
                }
                rk4_step_vec(&mut rhs, k as f64 * h, &mut y, h);
            }
            out
        })
        .collect();
    let times: Vec<f64> = recorded.iter().map(|&k| if k == n { opts.t_max } else { k as f64 * h }).collect();
    let mut slices: Vec<Vec<Vec<f64>>> = (0..recorded.len()).map(|_| Vec::with_capacity(anchors.len())).collect();
    for p in paths {
        for (k, y) in p.into_iter().enumerate() {
            slices[k].push(y);
        }
    }
    if let Some((k, i)) = find_crossing(anchors, &slices) {
        return Err(Error::MonotonicityViolation { anchor: i, t: times[k] });
    }
    let m = slices.len();
    let last_change = if m >= 2 && !anchors.is_empty() {
        slices[m - 1]
            .iter()
            .zip(&slices[m - 2])
            .map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    // the penultimate slice only serves the convergence test
    if m >= 2 && recorded[m - 2] % every != 0 {
        slices.remove(m - 2);
    }
    let times: Vec<f64> = {
        let mut t = times;
        if m >= 2 && recorded[m - 2] % every != 0 {
            t.remove(m - 2);
        }
        t
    };
    Ok(FlowMap {
        dim: d,
        anchors: anchors.to_vec(),
        times,
        slices,
        converged: last_change < opts.tol_flow,
        last_change,
        ode_dt: h,
        t_max: opts.t_max,
    })
}

/// In one dimension with sorted anchors, the first (slice, anchor) where the
/// order breaks.
fn find_crossing(anchors: &[Vec<f64>], slices: &[Vec<Vec<f64>>]) -> Option<(usize, usize)> {
    if anchors.first().map_or(true, |a| a.len() != 1) || anchors.windows(2).any(|w| w[1][0] <= w[0][0]) {
        return None;
    }
    slices.iter().enumerate().find_map(|(k, s)| s.windows(2).position(|w| w[1][0] <= w[0][0]).map(|i| (k, i + 1)))
}

/// `S_{t_max}^{-1}(y)` by integrating the same field backward from `t_max` to 0.
pub fn reverse_flow(field: &dyn GradientField, y: &[f64], t_max: f64, ode_dt: f64) -> Result<Vec<f64>> {
    if y.len() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: y.len() });
    }
    let (n, h) = steps_for(t_max, ode_dt)?;
    let mut z = y.to_vec();
    let mut rhs = |t: f64, x: &[f64], dx: &mut [f64]| field.grad_v(t, x, dx);
    for k in (1..=n).rev() {
        rk4_step_vec(&mut rhs, k as f64 * h, &mut z, -h);
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::OuLinearOracle;
    use crate::value::{OracleField, ZeroField};

    #[test]
    fn zero_field_is_identity() {
        let a = anchor_grid(-1.0, 1.0, 5);
        let f = integrate_flow(&ZeroField { dim: 1 }, &a, FlowOptions { t_max: 1.0, ..FlowOptions::default() }).unwrap();
        assert_eq!(f.terminal(), a.as_slice());
        assert!(f.converged);
    }

    #[test]
    fn ou_flow_reference_value() {
        let field = OracleField(OuLinearOracle::new(vec![0.5], 4.0));
        let f = integrate_flow(&field, &[vec![0.0]], FlowOptions { t_max: 4.0, ..FlowOptions::default() }).unwrap();
        assert!((f.terminal()[0][0] - 0.490_842).abs() < 1e-6);
        assert_eq!(f.slices[0][0][0], 0.0);
        let back = reverse_flow(&field, &f.terminal()[0], 4.0, 0.05).unwrap();
        assert!(back[0].abs() < 1e-12);
    }

    #[test]
    fn penultimate_slice_dropped_when_not_recorded() {
        let field = OracleField(OuLinearOracle::new(vec![0.5], 4.0));
        let opts = FlowOptions { t_max: 1.0, ode_dt: 0.1, record_every: 4, ..FlowOptions::default() };
        let f = integrate_flow(&field, &anchor_grid(0.0, 1.0, 3), opts).unwrap();
        assert_eq!(f.times.len(), 4);
        assert_eq!(*f.times.last().unwrap(), 1.0);
        assert!(f.to_csv().starts_with("t,anchor,x_S\n"));
    }
}
