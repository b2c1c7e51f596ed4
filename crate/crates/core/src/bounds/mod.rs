//! Closed-form gradient, Hessian and Lipschitz bounds with quadrature cross-checks.

mod envelopes;
mod kernel;
mod lipschitz;
mod report;

pub use envelopes::{
    convolution_bound, exp_difference_quotient, gradient_envelope, gradient_envelope_tau, hessian_envelope,
    hessian_envelope_tau, BoundInputs, GradientMode, HessianCase, ScenarioBounds,
};
pub use kernel::{discounted_bound, fms_comparison, fms_exponent, kernel_integrals, KernelBound, KernelParams, KernelIntegrals};
pub use lipschitz::{integrate_hessian_envelope, lipschitz_bound, lipschitz_exponent, LipschitzBound, LipschitzCase};
pub use report::{bound_report, BoundReport, Comparison, EnvelopeRow};
