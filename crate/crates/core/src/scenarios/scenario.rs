use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenarios::perturbation::Perturbation;
use crate::scenarios::potential::Potential;

/// Which regularity assumption on `U` a run relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AssumptionMode {
    #[serde(rename = "A1-A2")]
    A1A2,
    #[serde(rename = "A1-A2prime")]
    A1A2Prime,
    #[serde(rename = "A1-A2prime-uniformly-convex")]
    A1A2PrimeUniformlyConvex,
}

impl AssumptionMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::A1A2 => "A1-A2",
            Self::A1A2Prime => "A1-A2prime",
            Self::A1A2PrimeUniformlyConvex => "A1-A2prime-uniformly-convex",
        }
    }
}

impl fmt::Display for AssumptionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AssumptionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().replace('′', "prime").replace('\'', "prime").to_ascii_lowercase();
        match norm.as_str() {
            "a1-a2" => Ok(Self::A1A2),
            "a1-a2prime" => Ok(Self::A1A2Prime),
            "a1-a2prime-uniformly-convex" => Ok(Self::A1A2PrimeUniformlyConvex),
            _ => Err(Error::Config { key: "mode.assumptions".into(), message: format!("unknown assumption mode {s:?}") }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimParams {
    pub dt: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub d: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        Self { dt: 1e-3, horizon: 1.0, n_paths: 1000, seed: 0, d: 1 }
    }
}

/// A potential `U`, a perturbation `W` and simulation settings.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub potential: Potential,
    pub perturbation: Perturbation,
    pub sim: SimParams,
    pub mode: AssumptionMode,
}

impl Scenario {
    pub fn new(potential: Potential, perturbation: Perturbation, sim: SimParams, mode: AssumptionMode) -> Result<Self> {
        if potential.dim() != sim.d {
            return Err(Error::DimensionMismatch { expected: sim.d, got: potential.dim() });
        }
        if perturbation.dim() != sim.d {
            return Err(Error::DimensionMismatch { expected: sim.d, got: perturbation.dim() });
        }
        if !(sim.dt > 0.0 && sim.dt.is_finite()) {
            return Err(Error::Config { key: "sim.dt".into(), message: format!("must be positive, got {}", sim.dt) });
        }
        if !(sim.horizon >= 0.0 && sim.horizon.is_finite()) {
            return Err(Error::Config { key: "sim.T".into(), message: format!("must be nonnegative, got {}", sim.horizon) });
        }
        if sim.d == 0 {
            return Err(Error::Config { key: "sim.d".into(), message: "dimension must be at least 1".into() });
        }
        Ok(Self { potential, perturbation, sim, mode })
    }

    /// OU potential `|x|²/2` with linear `W(x) = a x` in one dimension.
    pub fn ou_linear(a: f64, sim: SimParams) -> Self {
        Self {
            potential: Potential::quadratic(1, 1.0),
            perturbation: Perturbation::linear(vec![a]),
            sim: SimParams { d: 1, ..sim },
            mode: AssumptionMode::A1A2PrimeUniformlyConvex,
        }
    }

    /// `U = x²/2 + cos x`, `W = c √(1 + x²)`.
    pub fn cosine_smooth_norm(c: f64, sim: SimParams, mode: AssumptionMode) -> Self {
        Self {
            potential: Potential::quadratic_plus_cosine(1, 1.0),
            perturbation: Perturbation::smooth_norm(1, c),
            sim: SimParams { d: 1, ..sim },
            mode,
        }
    }

    pub fn dim(&self) -> usize {
        self.sim.d
    }

    /// Constants the mode needs, or the first missing one.
    pub fn required_constants(&self) -> Result<RequiredConstants> {
        let k = self.potential.constants;
        match self.mode {
            AssumptionMode::A1A2 => Ok(RequiredConstants {
                c2u: Some(k.c2u.ok_or(Error::MissingConstant("C2U"))?),
                alpha: k.alpha,
                c3u: k.c3u,
            }),
            AssumptionMode::A1A2Prime => Ok(RequiredConstants {
                c2u: k.c2u,
                alpha: Some(k.alpha.ok_or(Error::MissingConstant("alpha"))?),
                c3u: Some(k.c3u.ok_or(Error::MissingConstant("C3U"))?),
            }),
            AssumptionMode::A1A2PrimeUniformlyConvex => {
                let alpha = k.alpha.ok_or(Error::MissingConstant("alpha"))?;
                if !(alpha > 0.0) {
                    return Err(Error::invalid(format!("uniformly convex mode needs alpha > 0, got {alpha}")));
                }
                Ok(RequiredConstants { c2u: k.c2u, alpha: Some(alpha), c3u: Some(k.c3u.ok_or(Error::MissingConstant("C3U"))?) })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RequiredConstants {
    pub c2u: Option<f64>,
    pub alpha: Option<f64>,
    pub c3u: Option<f64>,
}
