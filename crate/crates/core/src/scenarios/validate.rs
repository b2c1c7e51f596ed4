use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::linalg::{symmetric_eigenvalues, symmetric_norm};
use crate::profiles::{profile_of_potential, SamplingOptions};
use crate::rng;
use crate::scenarios::scenario::{AssumptionMode, Scenario};

/// Validation box and resolution.
#[derive(Debug, Clone, Copy)]
pub struct ValidationGrid {
    pub half_width: f64,
    pub points_per_axis: usize,
    /// Sample count used instead of a tensor grid when `d > 2`.
    pub mc_points: usize,
    pub seed: u64,
}

impl Default for ValidationGrid {
    fn default() -> Self {
        Self { half_width: 6.0, points_per_axis: 64, mc_points: 4096, seed: 0 }
    }
}

impl ValidationGrid {
    /// Points plus index pairs of neighbours used for difference quotients.
    fn points(&self, d: usize) -> (Vec<Vec<f64>>, Vec<(usize, usize)>) {
        let l = self.half_width;
        let n = self.points_per_axis.max(2);
        let axis: Vec<f64> = (0..n).map(|i| -l + 2.0 * l * i as f64 / (n - 1) as f64).collect();
        match d {
            1 => {
                let pts = axis.iter().map(|&x| vec![x]).collect();
                (pts, (1..n).map(|i| (i - 1, i)).collect())
            }
            2 => {
                let mut pts = Vec::with_capacity(n * n);
                let mut pairs = Vec::new();
                for i in 0..n {
                    for j in 0..n {
                        pts.push(vec![axis[i], axis[j]]);
                        let k = i * n + j;
                        if j > 0 {
                            pairs.push((k - 1, k));
                        }
                        if i > 0 {
                            pairs.push((k - n, k));
                        }
                    }
                }
                (pts, pairs)
            }
            _ => {
                let mut g = rng::stream(self.seed, 0);
                let pts: Vec<Vec<f64>> =
                    (0..self.mc_points).map(|_| (0..d).map(|_| g.gen_range(-l..=l)).collect()).collect();
                let pairs = (1..pts.len()).map(|i| (i - 1, i)).collect();
                (pts, pairs)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub pass: bool,
    pub measured: Option<f64>,
    pub declared: Option<f64>,
    pub witness: Option<Vec<f64>>,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub mode: AssumptionMode,
    pub grid: String,
    pub checks: Vec<AssumptionCheck>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

const REL: f64 = 1e-9;

fn within(measured: f64, declared: f64) -> bool {
    measured <= declared + REL * (1.0 + declared.abs())
}

/// Numerical spot check of the assumptions attached to a scenario.
pub fn validate_scenario(scenario: &Scenario, grid: ValidationGrid) -> Result<ValidationReport> {
    let d = scenario.dim();
    let u = &scenario.potential;
    let w = &scenario.perturbation;
    let (pts, pairs) = grid.points(d);
    let mut checks = Vec::new();

    // gradients finite, callbacks pure
    let mut g = vec![0.0; d];
    let mut g2 = vec![0.0; d];
    let mut bad = None;
    for p in &pts {
        u.grad(p, &mut g);
        u.grad(p, &mut g2);
        if g.iter().any(|v| !v.is_finite()) || g != g2 {
            bad = Some(p.clone());
            break;
        }
    }
    checks.push(AssumptionCheck {
        name: "grad U finite and deterministic".into(),
        pass: bad.is_none(),
        measured: None,
        declared: None,
        witness: bad,
        note: "double evaluation on the validation grid".into(),
    });

    // A1-(i)
    let r_grid: Vec<f64> = (1..=200).map(|i| 0.05 * i as f64).collect();
    let k = profile_of_potential(u, &r_grid, SamplingOptions::default());
    checks.push(AssumptionCheck {
        name: "A1-(i) convexity profile in K".into(),
        pass: k.is_ok(),
        measured: None,
        declared: None,
        witness: None,
        note: match &k {
            Ok(p) => format!("profile source {:?}", p.source()),
            Err(e) => e.to_string(),
        },
    });

    // A1-(ii)
    let mut worst = (0.0f64, None);
    for p in &pts {
        w.grad(p, &mut g);
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !n.is_finite() {
            return Err(Error::invalid(format!("grad W not finite at {p:?}")));
        }
        if n > worst.0 || worst.1.is_none() {
            worst = (n, Some(p.clone()));
        }
    }
    let ok = within(worst.0, w.c1w);
    checks.push(AssumptionCheck {
        name: "A1-(ii) |grad W| <= C1W".into(),
        pass: ok,
        measured: Some(worst.0),
        declared: Some(w.c1w),
        witness: if ok { None } else { worst.1 },
        note: String::new(),
    });

    // Hessian samples
    let need_hess = true;
    let mut hs: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    if need_hess && u.has_hessian() {
        let mut asym = None;
        for p in &pts {
            let mut h = vec![0.0; d * d];
            u.hess(p, &mut h);
            for i in 0..d {
                for j in 0..i {
                    if (h[i * d + j] - h[j * d + i]).abs() > 1e-12 * (1.0 + h[i * d + j].abs()) && asym.is_none() {
                        asym = Some(p.clone());
                    }
                }
            }
            hs.push(h);
        }
        checks.push(AssumptionCheck {
            name: "Hessian symmetric".into(),
            pass: asym.is_none(),
            measured: None,
            declared: None,
            witness: asym,
            note: String::new(),
        });
    }

    let consts = u.constants;
    let uses_a2 = scenario.mode == AssumptionMode::A1A2;
    let uses_a2p = !uses_a2;
    if uses_a2 || consts.c2u.is_some() {
        checks.push(hessian_sup_check(&pts, &hs, d, consts.c2u, u.has_hessian()));
    }
    if uses_a2p || consts.alpha.is_some() {
        checks.push(hessian_inf_check(&pts, &hs, d, consts.alpha, u.has_hessian()));
    }
    if uses_a2p || consts.c3u.is_some() {
        checks.push(hessian_lip_check(&pts, &pairs, &hs, d, consts.c3u, u.has_hessian()));
    }
    if scenario.mode == AssumptionMode::A1A2PrimeUniformlyConvex {
        let a = consts.alpha.unwrap_or(f64::NAN);
        checks.push(AssumptionCheck {
            name: "uniform convexity alpha > 0".into(),
            pass: a > 0.0,
            measured: None,
            declared: consts.alpha,
            witness: None,
            note: String::new(),
        });
    }

    let pass = checks.iter().all(|c| c.pass);
    let grid_desc = if d <= 2 {
        format!("[-{0}, {0}]^{d}, {1} points per axis (spot check)", grid.half_width, grid.points_per_axis)
    } else {
        format!("{} uniform samples in [-{}, {}]^{d} (spot check)", grid.mc_points, grid.half_width, grid.half_width)
    };
    Ok(ValidationReport { mode: scenario.mode, grid: grid_desc, checks, pass })
}

fn missing(name: &str) -> AssumptionCheck {
    AssumptionCheck {
        name: name.into(),
        pass: false,
        measured: None,
        declared: None,
        witness: None,
        note: "no Hessian callback available".into(),
    }
}

fn hessian_sup_check(pts: &[Vec<f64>], hs: &[Vec<f64>], d: usize, declared: Option<f64>, has: bool) -> AssumptionCheck {
    let name = "A2 sup |<u, Hess U u>| <= C2U";
    if !has {
        return missing(name);
    }
    let (mut best, mut at) = (f64::NEG_INFINITY, 0);
    for (i, h) in hs.iter().enumerate() {
        let v = symmetric_norm(h, d);
        if v > best {
            best = v;
            at = i;
        }
    }
    let pass = declared.map_or(false, |c| within(best, c));
    AssumptionCheck {
        name: name.into(),
        pass,
        measured: Some(best),
        declared,
        witness: if pass { None } else { Some(pts[at].clone()) },
        note: if declared.is_none() { "C2U not declared".into() } else { String::new() },
    }
}

fn hessian_inf_check(pts: &[Vec<f64>], hs: &[Vec<f64>], d: usize, declared: Option<f64>, has: bool) -> AssumptionCheck {
    let name = "A2'-(i) inf <u, Hess U u> >= alpha";
    if !has {
        return missing(name);
    }
    let (mut best, mut at) = (f64::INFINITY, 0);
    for (i, h) in hs.iter().enumerate() {
        let v = symmetric_eigenvalues(h, d)[0];
        if v < best {
            best = v;
            at = i;
        }
    }
    let pass = declared.map_or(false, |a| within(a, best));
    AssumptionCheck {
        name: name.into(),
        pass,
        measured: Some(best),
        declared,
        witness: if pass { None } else { Some(pts[at].clone()) },
        note: if declared.is_none() { "alpha not declared".into() } else { String::new() },
    }
}

fn hessian_lip_check(
    pts: &[Vec<f64>],
    pairs: &[(usize, usize)],
    hs: &[Vec<f64>],
    d: usize,
    declared: Option<f64>,
    has: bool,
) -> AssumptionCheck {
    let name = "A2'-(ii) Hess U Lipschitz with C3U";
    if !has {
        return missing(name);
    }
    let (mut best, mut at) = (0.0f64, 0);
    let mut diff = vec![0.0; d * d];
    for &(i, j) in pairs {
        for k in 0..d * d {
            diff[k] = hs[i][k] - hs[j][k];
        }
        let dist = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let q = symmetric_norm(&diff, d) / dist;
        if q > best {
            best = q;
            at = j;
        }
    }
    let pass = declared.map_or(false, |c| within(best, c));
    AssumptionCheck {
        name: name.into(),
        pass,
        measured: Some(best),
        declared,
        witness: if pass { None } else { Some(pts[at].clone()) },
        note: if declared.is_none() { "C3U not declared".into() } else { "adjacent grid difference quotients".into() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{Perturbation, Potential, SimParams};

    #[test]
    fn ou_linear_passes() {
        let s = Scenario::ou_linear(0.5, SimParams::default());
        let r = validate_scenario(&s, ValidationGrid::default()).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn cosine_scenario_passes_both_modes() {
        for mode in [AssumptionMode::A1A2, AssumptionMode::A1A2Prime] {
            let s = Scenario::cosine_smooth_norm(0.5, SimParams::default(), mode);
            let r = validate_scenario(&s, ValidationGrid::default()).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn double_well_fails_a2_at_the_edge() {
        let mut u = Potential::double_well(1, 1.0, 1.0);
        u.constants.c2u = Some(10.0);
        let s = Scenario::new(u, Perturbation::linear(vec![0.5]), SimParams::default(), AssumptionMode::A1A2).unwrap();
        let r = validate_scenario(&s, ValidationGrid::default()).unwrap();
        let a2 = r.checks.iter().find(|c| c.name.starts_with("A2 ")).unwrap();
        assert!(!a2.pass);
        let x = a2.witness.as_ref().unwrap()[0];
        assert_eq!(x.abs(), 6.0);
        assert!((a2.measured.unwrap() - (3.0 * 36.0 - 1.0)).abs() < 1e-9);
    }
}
