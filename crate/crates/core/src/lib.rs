//! Static memory planning: assigning address offsets to buffers with known
//! sizes and lifetimes so they pack into the smallest possible address
//! space.
//!
//! The planner treats the problem as rectangle packing with the time axis
//! frozen. Instances with no overlaps or a single buffer size are solved
//! optimally in one pass. Everything else goes through a stochastic
//! box-unbox-place pipeline: buffers are recursively grouped into same-height
//! boxes, the boxes are row-stacked, the derived offsets diffuse back down
//! to the buffers, and a final first-fit squeeze compacts the result. A
//! sort-by-size first-fit bootstrap caps how bad any run can get.
//!
//! Entry points: [`plan::plan`] for full planning, [`plan::hardness`] for
//! the bootstrap-fragmentation hardness gauge, and the module-level pieces
//! (sweeps, heuristics, boxing, unboxing) for finer control.

pub mod boxing;
pub mod heuristics;
pub mod instance;
pub mod plan;
pub mod sweep;
pub mod unbox;

#[cfg(test)]
pub(crate) mod testutil;

pub use instance::{
    convert, overlaps, validate_job, ConversionError, Job, JobId, Placement, Semantics,
    ValidationError,
};
pub use plan::{hardness, plan, PlanConfig, PlanError, PlanResult};
pub use sweep::{
    build_events, count_conflicts, profile, Classification, EmptyInput, Event, EventKind,
    InstanceProfile,
};
