//! Reflection couplings, Langevin transport maps and their Lipschitz bounds.

pub mod bounds;
pub mod error;
pub mod numerics;
pub mod profiles;
pub mod rng;
pub mod scenarios;
pub mod sde;
pub mod transport;
pub mod verify;
pub mod value;

pub use error::{Error, Result};
