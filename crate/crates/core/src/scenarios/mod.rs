//! Potentials, perturbations, assumption metadata and the OU/linear-W oracle.

mod config;
mod oracle;
mod perturbation;
mod potential;
mod scenario;
mod validate;

pub use config::{load_scenario, parse_scenario, scenario_to_toml};
pub use oracle::{closed_form_oracle, OuLinearOracle};
pub use perturbation::{Perturbation, PerturbationFamily};
pub use potential::{Potential, PotentialConstants, PotentialFamily, ValueFn, VectorFn};
pub use scenario::{AssumptionMode, RequiredConstants, Scenario, SimParams};
pub use validate::{validate_scenario, AssumptionCheck, ValidationGrid, ValidationReport};
