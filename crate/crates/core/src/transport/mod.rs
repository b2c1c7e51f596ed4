//! Flow maps `S_t`, the transport map `T = S_∞⁻¹` and their diagnostics.
//!
//! One-dimensional runs invert `S` by monotone interpolation; planar runs
//! integrate the field backward.

mod flow;
mod lipschitz;
mod maps;
mod pipeline;
mod pushforward;

pub use flow::{anchor_grid, anchor_lattice, integrate_flow, reverse_flow, FlowMap, FlowOptions};
pub use lipschitz::{empirical_lipschitz, hessian_envelope_to_lipschitz};
pub use maps::{extract_plane_maps, extract_transport_maps, invert_plane, MapRow, PlaneMaps, TransportMaps};
pub use pipeline::{run_transport, select_t_max, FieldSource, Maps, NamedBound, TransportOptions, TransportReport, TransportRun};
pub use pushforward::{
    plane_pushforward_check, pushforward_check, DensityCdf, MuSampler, PlaneDensity, PlanePushforwardReport, PushforwardReport,
};
