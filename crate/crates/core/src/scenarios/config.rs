//! TOML scenario files.
//!
//! ```toml
//! [potential]
//! family = "quadratic_plus_cosine"
//! amplitude = 1.0
//! [perturbation]
//! family = "smooth_norm"
//! c = 0.5
//! [sim]
//! dt = 1e-3
//! T = 8.0
//! n_paths = 100000
//! seed = 42
//! d = 1
//! [mode]
//! assumptions = "A1-A2prime"
//! ```

use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::scenarios::perturbation::Perturbation;
use crate::scenarios::potential::{Potential, PotentialConstants};
use crate::scenarios::scenario::{AssumptionMode, Scenario, SimParams};

fn cfg(key: &str, message: impl Into<String>) -> Error {
    Error::Config { key: key.into(), message: message.into() }
}

fn section<'a>(root: &'a Table, name: &str, required: bool) -> Result<Option<&'a Table>> {
    match root.get(name) {
        None if required => Err(cfg(name, "missing section")),
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(cfg(name, "expected a section")),
    }
}

fn check_keys(t: &Table, prefix: &str, allowed: &[&str]) -> Result<()> {
    for k in t.keys() {
        if !allowed.contains(&k.as_str()) {
            return Err(cfg(&format!("{prefix}.{k}"), "unknown key"));
        }
    }
    Ok(())
}

fn get_f64(t: &Table, prefix: &str, key: &str) -> Result<Option<f64>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Float(v)) => Ok(Some(*v)),
        Some(Value::Integer(v)) => Ok(Some(*v as f64)),
        Some(other) => Err(cfg(&format!("{prefix}.{key}"), format!("expected a number, got {}", other.type_str()))),
    }
}

fn get_uint(t: &Table, prefix: &str, key: &str) -> Result<Option<u64>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
        Some(Value::Float(v)) if *v >= 0.0 && v.fract() == 0.0 && *v < 9.0e15 => Ok(Some(*v as u64)),
        Some(other) => Err(cfg(&format!("{prefix}.{key}"), format!("expected a nonnegative integer, got {other}"))),
    }
}

fn get_str<'a>(t: &'a Table, prefix: &str, key: &str) -> Result<Option<&'a str>> {
    match t.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(cfg(&format!("{prefix}.{key}"), format!("expected a string, got {}", other.type_str()))),
    }
}

fn get_vec(t: &Table, prefix: &str, key: &str, d: usize) -> Result<Option<Vec<f64>>> {
    let full = format!("{prefix}.{key}");
    match t.get(key) {
        None => Ok(None),
        Some(Value::Float(v)) => Ok(Some(vec![*v; d])),
        Some(Value::Integer(v)) => Ok(Some(vec![*v as f64; d])),
        Some(Value::Array(a)) => {
            let v: Vec<f64> = a
                .iter()
                .map(|x| match x {
                    Value::Float(f) => Ok(*f),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(cfg(&full, "array entries must be numbers")),
                })
                .collect::<Result<_>>()?;
            if v.len() != d {
                return Err(cfg(&full, format!("expected {d} entries, got {}", v.len())));
            }
            Ok(Some(v))
        }
        Some(other) => Err(cfg(&full, format!("expected a number or array, got {}", other.type_str()))),
    }
}

fn require<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| cfg(key, "missing required key"))
}

/// Parse a scenario from TOML text.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        let key = e.span().map(|s| format!("byte {}", s.start)).unwrap_or_else(|| "<document>".into());
        cfg(&key, e.message().to_string())
    })?;
    check_keys(&root, "", &["potential", "perturbation", "sim", "mode"])
        .map_err(|e| match e { Error::Config { key, message } => cfg(key.trim_start_matches('.'), message), e => e })?;

    let sim = match section(&root, "sim", false)? {
        None => SimParams::default(),
        Some(t) => {
            check_keys(t, "sim", &["dt", "T", "n_paths", "seed", "d"])?;
            let def = SimParams::default();
            SimParams {
                dt: get_f64(t, "sim", "dt")?.unwrap_or(def.dt),
                horizon: get_f64(t, "sim", "T")?.unwrap_or(def.horizon),
                n_paths: get_uint(t, "sim", "n_paths")?.map(|v| v as usize).unwrap_or(def.n_paths),
                seed: get_uint(t, "sim", "seed")?.unwrap_or(def.seed),
                d: get_uint(t, "sim", "d")?.map(|v| v as usize).unwrap_or(def.d),
            }
        }
    };
    let d = sim.d;

    let pt = section(&root, "potential", true)?.expect("required");
    check_keys(pt, "potential", &["family", "scale", "amplitude", "c4", "c2", "C2U", "alpha", "C3U"])?;
    let family = require(get_str(pt, "potential", "family")?, "potential.family")?;
    let mut potential = match family {
        "quadratic" => Potential::quadratic(d, get_f64(pt, "potential", "scale")?.unwrap_or(1.0)),
        "quadratic_plus_cosine" => {
            Potential::quadratic_plus_cosine(d, require(get_f64(pt, "potential", "amplitude")?, "potential.amplitude")?)
        }
        "double_well" => Potential::double_well(
            d,
            get_f64(pt, "potential", "c4")?.unwrap_or(1.0),
            get_f64(pt, "potential", "c2")?.unwrap_or(1.0),
        ),
        other => return Err(cfg("potential.family", format!("unknown family {other:?}"))),
    };
    let declared = PotentialConstants {
        c2u: get_f64(pt, "potential", "C2U")?.or(potential.constants.c2u),
        alpha: get_f64(pt, "potential", "alpha")?.or(potential.constants.alpha),
        c3u: get_f64(pt, "potential", "C3U")?.or(potential.constants.c3u),
    };
    potential = potential.with_constants(declared);

    let wt = section(&root, "perturbation", true)?.expect("required");
    check_keys(wt, "perturbation", &["family", "a", "c", "w"])?;
    let wfam = require(get_str(wt, "perturbation", "family")?, "perturbation.family")?;
    let perturbation = match wfam {
        "zero" => Perturbation::zero(d),
        "linear" => Perturbation::linear(require(get_vec(wt, "perturbation", "a", d)?, "perturbation.a")?),
        "smooth_norm" => Perturbation::smooth_norm(d, require(get_f64(wt, "perturbation", "c")?, "perturbation.c")?),
        "tanh_ridge" => Perturbation::tanh_ridge(
            require(get_f64(wt, "perturbation", "c")?, "perturbation.c")?,
            require(get_vec(wt, "perturbation", "w", d)?, "perturbation.w")?,
        ),
        other => return Err(cfg("perturbation.family", format!("unknown family {other:?}"))),
    };

    let mode = match section(&root, "mode", false)? {
        None => AssumptionMode::A1A2Prime,
        Some(t) => {
            check_keys(t, "mode", &["assumptions"])?;
            match get_str(t, "mode", "assumptions")? {
                None => AssumptionMode::A1A2Prime,
                Some(s) => s.parse()?,
            }
        }
    };
    Scenario::new(potential, perturbation, sim, mode)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

/// Render a builtin scenario back to TOML.
pub fn scenario_to_toml(s: &Scenario) -> String {
    use crate::scenarios::perturbation::PerturbationFamily as W;
    use crate::scenarios::potential::PotentialFamily as U;
    let mut out = String::from("[potential]\n");
    match s.potential.family() {
        U::Quadratic { scale } => out.push_str(&format!("family = \"quadratic\"\nscale = {scale:?}\n")),
        U::QuadraticPlusCosine { amplitude } => {
            out.push_str(&format!("family = \"quadratic_plus_cosine\"\namplitude = {amplitude:?}\n"))
        }
        U::DoubleWell { c4, c2 } => out.push_str(&format!("family = \"double_well\"\nc4 = {c4:?}\nc2 = {c2:?}\n")),
        U::Custom { name, .. } => out.push_str(&format!("family = \"{name}\"\n")),
    }
    let k = s.potential.constants;
    for (name, v) in [("C2U", k.c2u), ("alpha", k.alpha), ("C3U", k.c3u)] {
        if let Some(v) = v {
            out.push_str(&format!("{name} = {v:?}\n"));
        }
    }
    out.push_str("\n[perturbation]\n");
    match s.perturbation.family() {
        W::Zero => out.push_str("family = \"zero\"\n"),
        W::Linear { a } => out.push_str(&format!("family = \"linear\"\na = {a:?}\n")),
        W::SmoothNorm { c } => out.push_str(&format!("family = \"smooth_norm\"\nc = {c:?}\n")),
        W::TanhRidge { c, w } => out.push_str(&format!("family = \"tanh_ridge\"\nc = {c:?}\nw = {w:?}\n")),
        W::Custom { name, .. } => out.push_str(&format!("family = \"{name}\"\n")),
    }
    let p = s.sim;
    out.push_str(&format!(
        "\n[sim]\ndt = {:?}\nT = {:?}\nn_paths = {}\nseed = {}\nd = {}\n\n[mode]\nassumptions = \"{}\"\n",
        p.dt, p.horizon, p.n_paths, p.seed, p.d, s.mode
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const COS: &str = r#"
[potential]
family = "quadratic_plus_cosine"
amplitude = 1.0
[perturbation]
family = "smooth_norm"
c = 0.5
[sim]
dt = 1e-3
T = 8.0
n_paths = 100000
seed = 42
d = 1
[mode]
assumptions = "A1-A2prime"
"#;

    #[test]
    fn parses_reference_file() {
        let s = parse_scenario(COS).unwrap();
        assert_eq!(s.sim.n_paths, 100_000);
        assert_eq!(s.sim.seed, 42);
        assert_eq!(s.mode, AssumptionMode::A1A2Prime);
        assert_eq!(s.perturbation.c1w, 0.5);
        assert_eq!(s.potential.constants.alpha, Some(0.0));
    }

    #[test]
    fn unknown_key_is_named() {
        let bad = COS.replace("amplitude = 1.0", "amplitud = 1.0");
        match parse_scenario(&bad) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "potential.amplitud"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_type_is_named() {
        let bad = COS.replace("dt = 1e-3", "dt = \"small\"");
        match parse_scenario(&bad) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "sim.dt"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let s = parse_scenario(COS).unwrap();
        let t = parse_scenario(&scenario_to_toml(&s)).unwrap();
        assert_eq!(s.sim, t.sim);
        assert_eq!(s.potential.constants, t.potential.constants);
    }
}
