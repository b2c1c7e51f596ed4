use serde::Serialize;

use crate::error::{Error, Result};
use rayon::prelude::*;

use crate::numerics::interp::MonotoneCubic;
use crate::transport::flow::{reverse_flow, FlowMap};
use crate::value::GradientField;

/// One-dimensional `S = S_{T_max}` and `T = S^{-1}`, both monotone cubic
/// interpolants through the anchor images.
#[derive(Debug, Clone)]
pub struct TransportMaps {
    s_map: MonotoneCubic,
    t_map: MonotoneCubic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapRow {
    pub x: f64,
    pub s: f64,
    /// `None` when `x` lies outside the image of the anchors.
    pub t: Option<f64>,
}

/// Extracts `(S, T)` from a converged one-dimensional flow.
pub fn extract_transport_maps(flow: &FlowMap) -> Result<TransportMaps> {
    if !flow.converged {
        return Err(Error::FlowNotConverged { t_max: flow.t_max, change: flow.last_change });
    }
    if flow.dim != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: flow.dim });
    }
    let x: Vec<f64> = flow.anchors.iter().map(|a| a[0]).collect();
    let y: Vec<f64> = flow.terminal().iter().map(|a| a[0]).collect();
    if let Some(i) = y.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::MonotonicityViolation { anchor: i + 1, t: flow.t_max });
    }
    Ok(TransportMaps { s_map: MonotoneCubic::new(x.clone(), y.clone())?, t_map: MonotoneCubic::new(y, x)? })
}

fn inside(dom: (f64, f64), x: f64) -> Result<()> {
    let slack = 1e-12 * (1.0 + dom.0.abs().max(dom.1.abs()));
    if x >= dom.0 - slack && x <= dom.1 + slack {
        Ok(())
    } else {
        Err(Error::OutsideDomain(vec![x]))
    }
}

impl TransportMaps {
    pub fn s_domain(&self) -> (f64, f64) {
        self.s_map.domain()
    }

    pub fn t_domain(&self) -> (f64, f64) {
        self.t_map.domain()
    }

    pub fn s(&self, x: f64) -> Result<f64> {
        inside(self.s_domain(), x)?;
        Ok(self.s_map.eval(x))
    }

    pub fn t(&self, y: f64) -> Result<f64> {
        inside(self.t_domain(), y)?;
        Ok(self.t_map.eval(y))
    }

    pub fn anchors(&self) -> &[f64] {
        self.s_map.nodes()
    }

    pub fn images(&self) -> &[f64] {
        self.s_map.values()
    }

    /// `max |T(S(x)) - x|` over points midway between anchors and the anchors themselves.
    pub fn roundtrip_error(&self) -> f64 {
        let a = self.anchors();
        let mids = a.windows(2).map(|w| 0.5 * (w[0] + w[1]));
        a.iter()
            .copied()
            .chain(mids)
            .map(|x| (self.t_map.eval(self.s_map.eval(x)) - x).abs())
            .fold(0.0, f64::max)
    }

    /// Rows `(x, S(x), T(x))` at the anchors.
    pub fn rows(&self) -> Vec<MapRow> {
        self.anchors().iter().map(|&x| MapRow { x, s: self.s_map.eval(x), t: self.t(x).ok() }).collect()
    }

    /// CSV `x,S(x),T(x)`; `T(x)` is empty outside the image of the anchors.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,S(x),T(x)\n");
        for r in self.rows() {
            match r.t {
                Some(t) => s.push_str(&format!("{},{},{}\n", r.x, r.s, t)),
                None => s.push_str(&format!("{},{},\n", r.x, r.s)),
            }
        }
        s
    }

    /// Largest nodal difference quotient of `S` over anchor pairs `stride` apart.
    pub fn lip_s_nodes(&self, stride: usize) -> f64 {
        quotients(self.anchors(), self.images(), stride)
    }

    /// Same for `T`, whose nodes are the anchor images.
    pub fn lip_t_nodes(&self, stride: usize) -> f64 {
        quotients(self.images(), self.anchors(), stride)
    }
}

fn quotients(x: &[f64], y: &[f64], stride: usize) -> f64 {
    let k = stride.max(1);
    (0..x.len().saturating_sub(k)).map(|i| ((y[i + k] - y[i]) / (x[i + k] - x[i])).abs()).fold(0.0, f64::max)
}

/// Planar `S` and `T` on a square anchor lattice. `S` is the flow image of
/// each anchor; `T` at an anchor comes from integrating the same field
/// backward in flow time.
#[derive(Debug, Clone, Serialize)]
pub struct PlaneMaps {
    /// Anchors per axis; anchor `i * n + j` sits at `(x_i, x_j)`.
    pub n: usize,
    pub anchors: Vec<Vec<f64>>,
    pub images: Vec<Vec<f64>>,
    pub inverse: Vec<Vec<f64>>,
    /// `max |T(S(x)) - x|` over the anchors.
    pub roundtrip_error: f64,
}

/// Extracts planar maps from a converged flow over an `n × n` anchor lattice.
pub fn extract_plane_maps(flow: &FlowMap, field: &dyn GradientField, n: usize) -> Result<PlaneMaps> {
    if !flow.converged {
        return Err(Error::FlowNotConverged { t_max: flow.t_max, change: flow.last_change });
    }
    if flow.dim != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: flow.dim });
    }
    if flow.anchors.len() != n * n {
        return Err(Error::invalid(format!("expected {} anchors, got {}", n * n, flow.anchors.len())));
    }
    let images = flow.terminal().to_vec();
    let inverse = invert_plane(field, &flow.anchors, flow.t_max, flow.ode_dt)?;
    let back = invert_plane(field, &images, flow.t_max, flow.ode_dt)?;
    let roundtrip_error = back
        .iter()
        .zip(&flow.anchors)
        .map(|(b, a)| dist(b, a))
        .fold(0.0, f64::max);
    Ok(PlaneMaps { n, anchors: flow.anchors.clone(), images, inverse, roundtrip_error })
}

/// `T(y)` for every `y` by backward integration from flow time `t_max`.
pub fn invert_plane(field: &dyn GradientField, ys: &[Vec<f64>], t_max: f64, ode_dt: f64) -> Result<Vec<Vec<f64>>> {
    ys.par_iter().map(|y| reverse_flow(field, y, t_max, ode_dt)).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl PlaneMaps {
    /// CSV `x1,x2,S1(x),S2(x),T1(x),T2(x)` at the anchors.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x1,x2,S1(x),S2(x),T1(x),T2(x)\n");
        for ((a, y), t) in self.anchors.iter().zip(&self.images).zip(&self.inverse) {
            s.push_str(&format!("{},{},{},{},{},{}\n", a[0], a[1], y[0], y[1], t[0], t[1]));
        }
        s
    }

    /// Largest quotient of `S` over anchor pairs `stride` apart along the
    /// axes and the two diagonals.
    pub fn lip_s_nodes(&self, stride: usize) -> f64 {
        self.quotients(&self.images, stride)
    }

    pub fn lip_t_nodes(&self, stride: usize) -> f64 {
        self.quotients(&self.inverse, stride)
    }

    fn quotients(&self, vals: &[Vec<f64>], stride: usize) -> f64 {
        let (n, k) = (self.n as isize, stride.max(1) as isize);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for (di, dj) in [(k, 0), (0, k), (k, k), (k, -k)] {
                    let (p, q) = (i + di, j + dj);
                    if p < 0 || p >= n || q < 0 || q >= n {
                        continue;
                    }
                    let (a, b) = ((i * n + j) as usize, (p * n + q) as usize);
                    worst = worst.max(dist(&vals[a], &vals[b]) / dist(&self.anchors[a], &self.anchors[b]));
                }
            }
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::OuLinearOracle;
    use crate::transport::flow::{anchor_grid, integrate_flow, FlowOptions};
    use crate::value::OracleField;

    #[test]
    fn ou_maps_are_translations() {
        let field = OracleField(OuLinearOracle::new(vec![0.5], 20.0));
        let flow = integrate_flow(&field, &anchor_grid(-6.0, 6.0, 241), FlowOptions { t_max: 20.0, ..FlowOptions::default() })
            .unwrap();
        let m = extract_transport_maps(&flow).unwrap();
        for x in [-3.0, -0.13, 0.0, 2.71, 3.0] {
            assert!((m.t(x).unwrap() - (x - 0.5)).abs() < 1e-6);
        }
        assert!(m.roundtrip_error() < 1e-10);
        assert!((m.lip_t_nodes(1) - 1.0).abs() < 1e-9);
        assert!(m.t(-6.0).is_err());
        assert!(m.to_csv().starts_with("x,S(x),T(x)\n"));
    }
}
