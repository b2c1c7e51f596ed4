use crate::error::{Error, Result};
use crate::numerics::assignment::hungarian;
use crate::profiles::constants::ProfileConstants;

pub const DEFAULT_EXACT_CAP: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WfMode {
    /// Optimal assignment, limited to `cap` samples.
    ExactSmallN { cap: usize },
    /// Sorted pairing of 1-d samples; an upper bound on the optimum.
    MonotoneUpperBound1d,
}

impl Default for WfMode {
    fn default() -> Self {
        WfMode::ExactSmallN { cap: DEFAULT_EXACT_CAP }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `W_f` distance between two empirical measures with equal sample counts.
pub fn wf_distance(a: &[Vec<f64>], b: &[Vec<f64>], constants: &ProfileConstants, mode: WfMode) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let d = a[0].len();
    if let Some(bad) = a.iter().chain(b).find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
    }
    let n = a.len();
    match mode {
        WfMode::ExactSmallN { cap } => {
            if n > cap {
                return Err(Error::ExactModeOverCap { n, cap });
            }
            let cost: Vec<Vec<f64>> =
                a.iter().map(|x| b.iter().map(|y| constants.f(dist(x, y))).collect()).collect();
            let (_, total) = hungarian(&cost);
            Ok(total / n as f64)
        }
        WfMode::MonotoneUpperBound1d => {
            if d != 1 {
                return Err(Error::DimensionMismatch { expected: 1, got: d });
            }
            let mut xs: Vec<f64> = a.iter().map(|p| p[0]).collect();
            let mut ys: Vec<f64> = b.iter().map(|p| p[0]).collect();
            xs.sort_by(f64::total_cmp);
            ys.sort_by(f64::total_cmp);
            Ok(xs.iter().zip(&ys).map(|(x, y)| constants.f((x - y).abs())).sum::<f64>() / n as f64)
        }
    }
}
