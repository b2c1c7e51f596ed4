//! Self-contained numerical kernels.

pub mod assignment;
pub mod interp;
pub mod linalg;
pub mod ode;
pub mod quad;
pub mod stats;

pub use interp::MonotoneCubic;
pub use quad::{integrate, integrate_to_infinity, integrate_with_breaks, QuadOptions, QuadResult};
