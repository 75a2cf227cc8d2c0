//! Model-free safety filters built on funnel control.
//!
//! The toolkit keeps the output `y` of a relative-degree-one system inside a
//! time-varying tube `‖y − y_r(t)‖ ≤ ψ(t)` around a reference, using only
//! output measurements. The barrier `b(t,y) = ½(ψ(t)² − ‖y − y_r(t)‖²)`
//! induces a segment-shaped set of admissible feedbacks
//! `{ k ∇_y b / b : k ∈ [k_min, k_max] }` that needs no model data; a
//! closed-form QP picks the element closest to a desired input.
//!
//! Modules:
//! - [`funnel`], [`mod@reference`], [`barrier`]: tube geometry and the barrier
//!   function, all computable from the output alone.
//! - [`control`]: candidate control sets, the funnel feedback element, and
//!   the minimally invasive safety filter.
//! - [`plant`]: benchmark plants, structural-assumption checks, and
//!   model-bound estimation (verification-side only; the controllers above
//!   never see model data).
//! - [`verify`]: sampled checks that the candidate set is contained in the
//!   set of barrier-admissible inputs, with explicit margins.
//! - [`sim`]: fixed-step closed-loop integration, trajectory logging, and
//!   input-MSE metrics.

pub mod barrier;
pub mod control;
pub mod funnel;
pub mod plant;
pub mod reference;
pub mod sampling;
pub mod sim;
pub mod verify;

pub use barrier::{
    barrier_gradient, barrier_time_derivative, barrier_value, safe_set_location, BarrierPoint,
    SetLocation, DEFAULT_BOUNDARY_TOL,
};
pub use control::{
    candidate_set, funnel_feedback, safety_filter, saturated_candidate_set, set_contains,
    ActiveClamp, CandidateControlSet, ControlError, FilterOutput, GainInterval, SaturationParam,
    SetOrigin,
};
pub use funnel::{FunnelBoundary, FunnelError, FunnelValidation};
pub use plant::{
    check_relative_degree_one, estimate_bounds, linear_demo_plant, usv, witness_input,
    DefinitenessReport, FullPlant, ModelBounds, NormalFormPlant, PlantError, PlantModel,
};
pub use reference::{ReferenceSignal, ReferenceValidation};
pub use sampling::{uniform_grid, SampleBox};
pub use sim::{
    compare_runs, compute_metrics, recovery_run, rk4_step, simulate_closed_loop, Controller,
    InputRef, Metrics, RecoveryOutcome, SimConfig, SimError, Trajectory, TrajectoryStatus,
};
pub use verify::{
    admissibility_margin, alpha_from_bounds, error_ratio_bound, inclusion_check, invariance_check,
    witness_check, ClassKeLinear, InclusionReport, VerifyError, WitnessReport,
};
