use serde::Serialize;

use crate::bounds::envelopes::{gradient_envelope_tau, hessian_envelope_tau, BoundInputs, GradientMode, HessianCase};
use crate::bounds::kernel::{fms_comparison, fms_exponent, kernel_integrals, KernelParams, KernelIntegrals};
use crate::bounds::lipschitz::{lipschitz_bound, LipschitzBound, LipschitzCase};
use crate::error::Result;
use crate::scenarios::AssumptionMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub t: f64,
    pub grad_env: f64,
    pub hess_env: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub log_value: f64,
    pub value: f64,
}

/// Every closed-form constant for one set of inputs.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub inputs: BoundInputs,
    pub horizon: f64,
    pub gradient_mode: GradientMode,
    pub hessian_case: HessianCase,
    pub lipschitz: Vec<LipschitzBound>,
    /// The comparison constant for the `α > 0` case.
    pub comparison: Option<Comparison>,
    pub kernel_checks: KernelIntegrals,
    pub envelope: Vec<EnvelopeRow>,
}

impl BoundReport {
    pub fn lipschitz_for(&self, case: LipschitzCase) -> Option<&LipschitzBound> {
        self.lipschitz.iter().find(|b| b.case == case)
    }

    /// The smallest available closed-form exponent.
    pub fn best_log_lipschitz(&self) -> Option<f64> {
        self.lipschitz.iter().map(|b| b.log_closed).reduce(f64::min)
    }

    /// CSV with header `t,grad_env,hess_env`, calendar time `t ∈ [0, T)`.
    pub fn envelope_csv(&self) -> String {
        let mut s = String::from("t,grad_env,hess_env\n");
        for r in &self.envelope {
            s.push_str(&format!("{},{},{}\n", r.t, r.grad_env, r.hess_env));
        }
        s
    }
}

/// Builds the full report; envelopes sampled at `n_times` calendar times in `[0, T)`.
pub fn bound_report(inputs: &BoundInputs, horizon: f64, n_times: usize) -> Result<BoundReport> {
    inputs.check()?;
    let gradient_mode = match inputs.mode {
        AssumptionMode::A1A2PrimeUniformlyConvex => GradientMode::UniformlyConvex,
        _ => GradientMode::Generic,
    };
    let hessian_case = inputs.default_case();
    let lipschitz = inputs
        .available_cases()
        .into_iter()
        .map(|c| lipschitz_bound(inputs, LipschitzCase::from_hessian_case(c)))
        .collect::<Result<Vec<_>>>()?;
    let comparison = match (inputs.alpha, inputs.c3u) {
        (Some(a), Some(c3)) if a > 0.0 => {
            Some(Comparison { log_value: fms_exponent(inputs.c1w, a, c3)?, value: fms_comparison(inputs.c1w, a, c3)? })
        }
        _ => None,
    };
    let kernel_checks = kernel_integrals(KernelParams {
        lambda_u: inputs.lambda_u,
        lambda_bar: inputs.lambda_bar,
        c_bar: inputs.c_bar,
        alpha: inputs.alpha.unwrap_or(0.0).abs(),
        tau: horizon,
    })?;
    let n = n_times.max(1);
    let envelope = (0..n)
        .map(|i| {
            let t = horizon * i as f64 / n as f64;
            let tau = horizon - t;
            Ok(EnvelopeRow {
                t,
                grad_env: gradient_envelope_tau(inputs, tau, gradient_mode)?,
                hess_env: hessian_envelope_tau(inputs, tau, hessian_case)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport {
        schema_version: 1,
        inputs: *inputs,
        horizon,
        gradient_mode,
        hessian_case,
        lipschitz,
        comparison,
        kernel_checks,
        envelope,
    })
}
