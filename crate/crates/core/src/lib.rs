//! Thermodynamical material networks and their time-window circularity.
//!
//! - [`network`]: compartmental digraphs and the solids-chain topology check
//! - [`flows`]: materials, the disassembly mass split and batch schedules
//! - [`circularity`]: λ by exact integration, algebra and approximation,
//!   plus sensitivity sweeps

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circularity;
pub mod flows;
pub mod network;

pub use circularity::{
    alpha, format_tenth, lambda_approx, lambda_closed_form, lambda_numeric, round_to_tenth,
    sensitivity_sweep, CircularityError, CircularityInput, CircularityMethod, CircularityReport,
    MethodRegistry, SweepAxis, SweepRow, SweepVar,
};
pub use flows::{
    batch_mass_schedule, functionality_coefficient, split_by_success, weighted_initial_mass,
    BatchSchedule, DisassemblyOutcome, FlowError, FunctionalityWeighting, MaterialSpec,
    PiecewiseConstant, ScenarioParams, FAILED_DISASSEMBLY_STORAGE_S,
};
pub use network::{Compartment, CompartmentKind, Network, NetworkError, Role, TopologyCheck};
