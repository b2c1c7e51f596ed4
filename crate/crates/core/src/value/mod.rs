//! Monte-Carlo value function `φ_t = -log P_{T-t} e^{-W}` and its derivatives.

mod engine;
mod estimate;
mod field;
mod hjb;
mod pontryagin;

pub use engine::WEIGHT_FLOOR;
pub use estimate::{
    estimate_field, estimate_grad_phi, estimate_hess_phi, estimate_phi, field_csv, field_csv_header, FieldEstimate,
    FieldOptions,
};
pub use field::{FnField, GradientField, GriddedField, OracleField, PlaneField, ZeroField};
pub use hjb::{hjb_residual, hjb_residual_oracle, HjbGrid, ResidualRow, ResidualTable};
pub use pontryagin::{pontryagin_check, PontryaginReport, PontryaginRow};
