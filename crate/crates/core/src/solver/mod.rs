//! Radial finite-volume heat semigroup on `B_R` and the Duhamel machinery
//! built on it: supersolution iteration, existence horizon, lower-bound
//! functional and forward simulation.

mod duhamel;
mod grid;
mod horizon;
mod lower_bound;
mod propagator;
mod simulate;

pub use duhamel::{
    duhamel_iterate, duhamel_map, heat_flow, standard_supersolution, supersolution_check, IterateOptions,
    IterationTrace, SupersolutionReport, TimeField, OVERFLOW_GUARD,
};
pub use grid::{lq_norm, RadialField, RadialGrid, Snapshot};
pub use horizon::{
    find_existence_horizon, find_existence_horizon_with, horizon_integral, smoothing_constant, HorizonIntegral,
    HorizonOptions, HorizonReport,
};
pub use lower_bound::{
    duhamel_lower_bound, duhamel_lower_bound_at, warmup_shells, LowerBoundMode, LowerBoundOptions, LowerBoundReport,
    WarmupReport, WarmupShell,
};
pub use propagator::{build_propagator, semigroup_apply, ClampStats, HeatPropagator, CLAMP_FLOOR, MIN_CELLS};
pub use simulate::{simulate_forward, BlowupReason, NumericBlowup, SimulateOptions, Trajectory, TrajectorySample};
