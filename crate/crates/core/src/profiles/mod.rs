//! Convexity profiles, the contraction constants built from them and the
//! non-coalescence kernel.

mod constants;
mod kernel;
mod profile;
mod wf;

pub use constants::{
    build_constants, build_uniformly_convex, locate_r0, locate_r1, BuildOptions, ConstantsExport, ConstantsMode,
    ContractionCheck, GridRow, ProfileConstants,
};
pub use kernel::{branch_point, q_integral, q_kernel};
pub use profile::{
    perturbed_profile, profile_of_potential, ConvexityProfile, ProfileSource, SamplingOptions, ScalarFn,
    DEFAULT_DOMAIN_CAP,
};
pub use wf::{wf_distance, WfMode, DEFAULT_EXACT_CAP};
