use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::quad::{integrate, QuadOptions};
use crate::numerics::MonotoneCubic;
use crate::profiles::kernel::q_kernel;
use crate::profiles::profile::{scan_grid, ConvexityProfile};

/// Tuning knobs for [`build_constants`].
#[derive(Debug, Clone, Copy)]
pub struct BuildOptions {
    /// Absolute and relative tolerance of every quadrature.
    pub tol: f64,
    /// Chebyshev–Lobatto nodes on `[0, R₀]` and on `[R₀, R₁]`.
    pub nodes_per_segment: usize,
    /// Upper limit for the `R₁` search; defaults to `1e3 · max(1, R₀)`.
    pub r1_cap: Option<f64>,
    /// Tabulation end; defaults to `2 R₁ + 1`.
    pub table_cap: Option<f64>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { tol: 1e-12, nodes_per_segment: 96, r1_cap: None, table_cap: None }
    }
}

impl BuildOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstantsMode {
    Generic,
    /// `f = Id`, `C = 1`, `λ = α`.
    UniformlyConvex { alpha: f64 },
}

/// One tabulated radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub r: f64,
    pub phi: f64,
    #[serde(rename = "Phi")]
    pub big_phi: f64,
    pub g: f64,
    pub f: f64,
    pub fprime: f64,
    #[serde(skip)]
    pub fsecond: f64,
    #[serde(skip)]
    pub kappa: f64,
}

/// Contraction constants and distance function for one convexity profile.
#[derive(Debug, Clone)]
pub struct ProfileConstants {
    pub r0: f64,
    pub r1: f64,
    pub z: f64,
    pub lambda: f64,
    pub c: f64,
    pub mode: ConstantsMode,
    pub table_cap: f64,
    /// Summed error estimates of all quadratures that fed the table.
    pub quad_error: f64,
    rows: Vec<GridRow>,
    phi0: f64,
    big_phi_r1: f64,
    f_r1: f64,
    interp: Option<Interpolants>,
}

#[derive(Debug, Clone)]
struct Interpolants {
    phi: MonotoneCubic,
    big_phi: MonotoneCubic,
    g: MonotoneCubic,
    f: MonotoneCubic,
    fprime: MonotoneCubic,
}

fn cheb_lobatto(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|k| {
            let x = a + (b - a) * 0.5 * (1.0 - (std::f64::consts::PI * k as f64 / (n - 1) as f64).cos());
            x.clamp(a, b)
        })
        .collect()
}

fn bisect<F: FnMut(f64) -> bool>(mut lo: f64, mut hi: f64, mut is_hi: F) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if is_hi(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `R₀ = inf{R ≥ 0 : inf_{r ≥ R} κ(r) ≥ 0}` on the scan grid, refined by bisection.
pub fn locate_r0(profile: &ConvexityProfile) -> Result<f64> {
    let grid = scan_grid(profile.domain_cap());
    let vals: Vec<f64> = grid.iter().map(|&r| profile.eval(r)).collect();
    let last_neg = vals.iter().rposition(|&k| k < 0.0);
    match last_neg {
        None => Ok(0.0),
        Some(j) if j + 1 >= grid.len() => Err(Error::NotInClassK("κ is negative at the domain cap".into())),
        Some(j) => Ok(bisect(grid[j], grid[j + 1], |r| profile.eval(r) >= 0.0)),
    }
}

/// `R₁ = inf{R ≥ R₀ : R (R - R₀) inf_{r ≥ R} κ(r) ≥ 8}`.
pub fn locate_r1(profile: &ConvexityProfile, r0: f64, cap: f64) -> Result<f64> {
    let mut grid: Vec<f64> = scan_grid(profile.domain_cap()).into_iter().filter(|&r| r > r0 && r <= cap).collect();
    let mut r = grid.last().copied().unwrap_or(r0.max(1e-6));
    while r < cap {
        r = (r * 1.01).min(cap);
        grid.push(r);
    }
    if grid.is_empty() {
        return Err(Error::R1BracketNotFound { cap });
    }
    let vals: Vec<f64> = grid.iter().map(|&r| profile.eval(r)).collect();
    let mut suffix = vals.clone();
    for i in (0..suffix.len().saturating_sub(1)).rev() {
        suffix[i] = suffix[i].min(suffix[i + 1]);
    }
    let suffix_min = |r: f64| -> f64 {
        let j = grid.partition_point(|&g| g <= r);
        let mut m = profile.eval(r);
        if j < grid.len() {
            let h = grid[j] - r;
            for k in 1..=4 {
                m = m.min(profile.eval(r + h * k as f64 / 5.0));
            }
            m = m.min(suffix[j]);
        }
        m
    };
    let h = |r: f64| suffix_min(r) * r * (r - r0) >= 8.0;
    let first = (0..grid.len()).find(|&i| suffix[i] * grid[i] * (grid[i] - r0) >= 8.0);
    let Some(i) = first else {
        return Err(Error::R1BracketNotFound { cap });
    };
    let lo = if i == 0 { r0 } else { grid[i - 1] };
    if h(lo) && lo > r0 {
        return Ok(lo);
    }
    Ok(bisect(lo, grid[i], h))
}

/// Running integrals of an integrand over a node set, with evaluation in between.
struct Cumulative {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl Cumulative {
    fn build<F: FnMut(f64) -> f64>(nodes: &[f64], mut f: F, opts: QuadOptions, err: &mut f64) -> Result<Self> {
        let mut values = vec![0.0; nodes.len()];
        for k in 1..nodes.len() {
            let r = integrate(&mut f, nodes[k - 1], nodes[k], opts)?;
            values[k] = values[k - 1] + r.value;
            *err += r.error;
        }
        Ok(Self { nodes: nodes.to_vec(), values })
    }

    /// Value at `s`; integration failures surface as NaN.
    fn at<F: FnMut(f64) -> f64>(&self, s: f64, f: F, opts: QuadOptions) -> f64 {
        let k = self.nodes.partition_point(|&x| x <= s).max(1) - 1;
        if s == self.nodes[k] {
            return self.values[k];
        }
        match integrate(f, self.nodes[k], s, opts) {
            Ok(r) => self.values[k] + r.value,
            Err(_) => f64::NAN,
        }
    }
}

/// `r κ⁻(r)`, continued to `r = 0` by a tiny positive radius.
fn r_kappa_minus(profile: &ConvexityProfile, r: f64) -> f64 {
    let r = if r > 0.0 { r } else { 1e-12 };
    r * (-profile.eval(r)).max(0.0)
}

/// Build `R₀, R₁, Z, λ, C` and the tables of `φ, Φ, g, f, f′`.
pub fn build_constants(profile: &ConvexityProfile, opts: BuildOptions) -> Result<ProfileConstants> {
    profile.check_class_k()?;
    let r0 = locate_r0(profile)?;
    let cap = opts.r1_cap.unwrap_or(1e3 * r0.max(1.0));
    let r1 = locate_r1(profile, r0, cap)?;
    let q = QuadOptions { abs_tol: opts.tol, rel_tol: opts.tol, max_intervals: 1000 };
    let inner = QuadOptions { max_intervals: 200, ..q };
    let mut quad_error = 0.0;

    // [0, R0]: nested running integrals; above R0 everything is explicit
    let (phi0, big_phi_r0, j_r0, k_r0, lower) = if r0 > 0.0 {
        let nodes = cheb_lobatto(0.0, r0, opts.nodes_per_segment);
        let psi = Cumulative::build(&nodes, |s| r_kappa_minus(profile, s), q, &mut quad_error)?;
        let phi = |s: f64| (-0.25 * psi.at(s, |u| r_kappa_minus(profile, u), inner)).exp();
        let big_phi = Cumulative::build(&nodes, phi, q, &mut quad_error)?;
        let big_phi_at = |s: f64| big_phi.at(s, phi, inner);
        let j = Cumulative::build(&nodes, |s| big_phi_at(s) / phi(s), q, &mut quad_error)?;
        let k = Cumulative::build(&nodes, |s| big_phi_at(s).powi(2) / phi(s), q, &mut quad_error)?;
        let n = nodes.len() - 1;
        let phi0 = (-0.25 * psi.values[n]).exp();
        let lower: Vec<(f64, f64, f64, f64, f64, f64)> = nodes
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                let ph = (-0.25 * psi.values[i]).exp();
                (r, ph, big_phi.values[i], j.values[i], k.values[i], r_kappa_minus(profile, r))
            })
            .collect();
        (phi0, big_phi.values[n], j.values[n], k.values[n], lower)
    } else {
        (1.0, 0.0, 0.0, 0.0, Vec::new())
    };
    if !(phi0 > 1e-300) || !phi0.is_finite() {
        return Err(Error::NotInClassK(format!("C_κ = φ(R₀)/2 vanishes numerically (φ(R₀) = {phi0:e})")));
    }
    let big_phi_above = |r: f64| big_phi_r0 + phi0 * (r - r0);
    let j_above = |r: f64| j_r0 + (big_phi_r0 * (r - r0) + 0.5 * phi0 * (r - r0).powi(2)) / phi0;
    let k_above = |r: f64| k_r0 + (big_phi_above(r).powi(3) - big_phi_r0.powi(3)) / (3.0 * phi0 * phi0);

    let z = j_above(r1);
    let lambda = 2.0 / z;
    let c = 0.5 * phi0;
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::QuadratureNonConvergence { a: 0.0, b: r1, value: z, error: quad_error });
    }

    let mut raw = lower;
    for r in cheb_lobatto(r0, r1, opts.nodes_per_segment) {
        if raw.last().map_or(true, |l| r > l.0) {
            raw.push((r, phi0, big_phi_above(r), j_above(r), k_above(r), 0.0));
        }
    }
    let mut rows: Vec<GridRow> = raw
        .iter()
        .map(|&(r, phi, big_phi, j, k, rkm)| {
            let g = 1.0 - j / (2.0 * z);
            let f = big_phi - (big_phi * j - k) / (2.0 * z);
            let fprime = phi * g;
            let fsecond = -0.25 * rkm * fprime - big_phi / (2.0 * z);
            let kappa = if r > 0.0 { profile.eval(r) } else { f64::NAN };
            GridRow { r, phi, big_phi, g, f, fprime, fsecond, kappa }
        })
        .collect();
    let last = *rows.last().expect("nonempty table");
    let f_r1 = last.f;
    let big_phi_r1 = last.big_phi;

    let interp = Interpolants {
        phi: MonotoneCubic::with_slopes(
            rows.iter().map(|w| w.r).collect(),
            rows.iter().map(|w| w.phi).collect(),
            raw.iter().map(|t| -0.25 * t.5 * t.1).collect(),
        )?,
        big_phi: MonotoneCubic::with_slopes(
            rows.iter().map(|w| w.r).collect(),
            rows.iter().map(|w| w.big_phi).collect(),
            rows.iter().map(|w| w.phi).collect(),
        )?,
        g: MonotoneCubic::with_slopes(
            rows.iter().map(|w| w.r).collect(),
            rows.iter().map(|w| w.g).collect(),
            rows.iter().map(|w| -w.big_phi / (2.0 * z * w.phi)).collect(),
        )?,
        f: MonotoneCubic::with_slopes(
            rows.iter().map(|w| w.r).collect(),
            rows.iter().map(|w| w.f).collect(),
            rows.iter().map(|w| w.fprime).collect(),
        )?,
        fprime: MonotoneCubic::with_slopes(
            rows.iter().map(|w| w.r).collect(),
            rows.iter().map(|w| w.fprime).collect(),
            rows.iter().map(|w| w.fsecond).collect(),
        )?,
    };

    // beyond R1 the table is affine; the one-sided f'' there is zero
    let table_cap = opts.table_cap.unwrap_or(2.0 * r1 + 1.0).max(r1);
    if let Some(end) = rows.last_mut() {
        end.fsecond = 0.0;
    }
    let n_tail = 32;
    for i in 1..=n_tail {
        let r = r1 + (table_cap - r1) * i as f64 / n_tail as f64;
        if r <= r1 {
            continue;
        }
        rows.push(GridRow {
            r,
            phi: phi0,
            big_phi: big_phi_r1 + phi0 * (r - r1),
            g: 0.5,
            f: f_r1 + c * (r - r1),
            fprime: c,
            fsecond: 0.0,
            kappa: profile.eval(r),
        });
    }

    Ok(ProfileConstants {
        r0,
        r1,
        z,
        lambda,
        c,
        mode: ConstantsMode::Generic,
        table_cap,
        quad_error,
        rows,
        phi0,
        big_phi_r1,
        f_r1,
        interp: Some(interp),
    })
}

/// Alternate constants for a profile bounded below by `alpha > 0`: `f = Id`, `C = 1`, `λ = α`.
pub fn build_uniformly_convex(profile: &ConvexityProfile, alpha: f64) -> Result<ProfileConstants> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("uniform convexity needs alpha > 0, got {alpha}")));
    }
    for r in scan_grid(profile.domain_cap()) {
        let k = profile.eval(r);
        if k < alpha * (1.0 - 1e-12) {
            return Err(Error::invalid(format!("κ({r}) = {k} is below alpha = {alpha}")));
        }
    }
    Ok(ProfileConstants::uniformly_convex(alpha))
}

impl ProfileConstants {
    /// Constants of the uniformly convex special case with rate `alpha`.
    pub fn uniformly_convex(alpha: f64) -> Self {
        let r1 = (8.0 / alpha).sqrt();
        let table_cap = 2.0 * r1 + 1.0;
        let rows = (0..=64)
            .map(|i| {
                let r = table_cap * i as f64 / 64.0;
                GridRow { r, phi: 1.0, big_phi: r, g: 1.0, f: r, fprime: 1.0, fsecond: 0.0, kappa: alpha }
            })
            .collect();
        Self {
            r0: 0.0,
            r1,
            z: 2.0 / alpha,
            lambda: alpha,
            c: 1.0,
            mode: ConstantsMode::UniformlyConvex { alpha },
            table_cap,
            quad_error: 0.0,
            rows,
            phi0: 1.0,
            big_phi_r1: r1,
            f_r1: r1,
            interp: None,
        }
    }

    pub fn rows(&self) -> &[GridRow] {
        &self.rows
    }

    pub fn f(&self, r: f64) -> f64 {
        match &self.interp {
            None => r,
            Some(_) if r >= self.r1 => self.f_r1 + self.c * (r - self.r1),
            Some(i) => i.f.eval(r.max(0.0)),
        }
    }

    pub fn fprime(&self, r: f64) -> f64 {
        match &self.interp {
            None => 1.0,
            Some(_) if r >= self.r1 => self.c,
            Some(i) => i.fprime.eval(r.max(0.0)),
        }
    }

    pub fn phi(&self, r: f64) -> f64 {
        match &self.interp {
            None => 1.0,
            Some(_) if r >= self.r0 => self.phi0,
            Some(i) => i.phi.eval(r.max(0.0)),
        }
    }

    #[allow(non_snake_case)]
    pub fn Phi(&self, r: f64) -> f64 {
        match &self.interp {
            None => r,
            Some(_) if r >= self.r1 => self.big_phi_r1 + self.phi0 * (r - self.r1),
            Some(i) => i.big_phi.eval(r.max(0.0)),
        }
    }

    pub fn g(&self, r: f64) -> f64 {
        match &self.interp {
            None => 1.0,
            Some(_) if r >= self.r1 => 0.5,
            Some(i) => i.g.eval(r.max(0.0)),
        }
    }

    /// `q_t` for these constants.
    pub fn q(&self, t: f64) -> f64 {
        q_kernel(self.lambda, self.c, t)
    }

    /// Checks concavity, `C r ≤ f ≤ r`, `C ≤ f′ ≤ 1` and
    /// `4 f″ − r κ f′ ≤ −λ f` at every tabulated radius.
    pub fn check_contraction_properties(&self, tol: f64) -> ContractionCheck {
        let mut out = ContractionCheck { tol, ..ContractionCheck::default() };
        let mut prev_fp = f64::INFINITY;
        for w in &self.rows {
            out.bounds_violation = out
                .bounds_violation
                .max(self.c * w.r - w.f)
                .max(w.f - w.r)
                .max(self.c - w.fprime)
                .max(w.fprime - 1.0);
            out.concavity_violation = out.concavity_violation.max(w.fprime - prev_fp);
            prev_fp = w.fprime;
            if w.r > 0.0 {
                let lhs = 4.0 * w.fsecond - w.r * w.kappa * w.fprime;
                let excess = lhs + self.lambda * w.f;
                if excess > out.differential_violation {
                    out.differential_violation = excess;
                    out.witness_r = Some(w.r);
                }
            }
            out.points += 1;
        }
        out.pass = out.bounds_violation <= tol && out.concavity_violation <= tol && out.differential_violation <= tol;
        out
    }

    pub fn export(&self) -> ConstantsExport {
        ConstantsExport {
            schema_version: 1,
            r0: self.r0,
            r1: self.r1,
            z: self.z,
            lambda: self.lambda,
            c: self.c,
            mode: self.mode,
            grid: self.rows.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,phi,Phi,g,f,fprime\n");
        for w in &self.rows {
            s.push_str(&format!("{},{},{},{},{},{}\n", w.r, w.phi, w.big_phi, w.g, w.f, w.fprime));
        }
        s
    }
}

/// Outcome of [`ProfileConstants::check_contraction_properties`]. Violations are
/// maxima of `lhs - rhs`, so nonpositive values mean the inequality holds.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ContractionCheck {
    pub points: usize,
    pub bounds_violation: f64,
    pub concavity_violation: f64,
    pub differential_violation: f64,
    pub witness_r: Option<f64>,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantsExport {
    pub schema_version: u32,
    #[serde(rename = "R0")]
    pub r0: f64,
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "Z")]
    pub z: f64,
    pub lambda: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub mode: ConstantsMode,
    pub grid: Vec<GridRow>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_profile_closed_form() {
        let k = build_constants(&ConvexityProfile::constant(1.0), BuildOptions::default()).unwrap();
        assert_eq!(k.r0, 0.0);
        assert!((k.r1 - 8f64.sqrt()).abs() < 1e-12);
        assert!((k.z - 4.0).abs() < 1e-12);
        assert!((k.lambda - 0.5).abs() < 1e-12);
        assert!((k.c - 0.5).abs() < 1e-15);
        assert!((k.f(1.0) - (1.0 - 1.0 / 48.0)).abs() < 1e-12);
        assert!((k.g(2.0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn uniformly_convex_is_identity() {
        let k = ProfileConstants::uniformly_convex(2.0);
        assert_eq!(k.f(1.7), 1.7);
        assert_eq!(k.lambda, 2.0);
        assert_eq!(k.c, 1.0);
    }

    #[test]
    fn uniformly_convex_requires_lower_bound() {
        assert!(build_uniformly_convex(&ConvexityProfile::affine_inverse(1.0, 0.1), 1.0).is_err());
        assert!(build_uniformly_convex(&ConvexityProfile::constant(1.0), 1.0).is_ok());
    }

    #[test]
    fn csv_header() {
        let k = ProfileConstants::uniformly_convex(1.0);
        assert!(k.to_csv().starts_with("r,phi,Phi,g,f,fprime\n"));
    }
}
