//! Euler–Maruyama simulation of Langevin, controlled and reflection-coupled dynamics.

mod coupling;
mod langevin;
mod report;

pub(crate) use coupling::coord_header;
pub use coupling::{simulate_reflection_coupling, CoalescenceRule, CoupledEnsemble, InitialPair};
pub use langevin::{
    simulate_drift, simulate_langevin, simulate_optimal_dynamics, DriftField, PathEnsemble, TimeGrid, TimeVectorFn,
};
pub use report::{contraction_report, ContractionReport, ContractionRow};
