//! Closed-loop numerical laboratory for feedback cooling of an optically
//! levitated nanoparticle under continuous position monitoring.
//!
//! The crate emulates the particle's conditional Gaussian dynamics and the
//! homodyne measurement record, tracks the state with a model-based filter,
//! applies parametric (quadratic) and electric (linear) feedback — including
//! receding-horizon bang-bang control selected by exhaustive branch
//! enumeration — and provides the experiment harness (runs, cooling-rate
//! fits, steady-state detection, parameter sweeps) on top.

pub mod analysis;
pub mod control;
pub mod emulate;
pub mod experiment;
pub mod params;
pub mod state;
pub mod sweep;
pub mod track;

pub use analysis::{
    fit_cooling_rate, steady_state_phonon, FitOptions, FitResult, SteadyState, SteadyStateOptions,
};
pub use control::{
    cold_damping, double_phase, enumerate_optimal, lookahead_propagate, ControlPlan, Controller,
    ControllerKind,
};
pub use emulate::{
    advance, diffusion, drift, homodyne_sample, step_euler_maruyama, step_srk4, EmulateOpts,
    EmulationState, HomodyneAccumulator, HomodyneSample, NoiseIncrements, RngStreams,
};
pub use experiment::{
    read_trace_csv, run, write_trace_csv, ConfigError, LoopTiming, PressureSpec, RunConfig,
    RunOutput, Termination, TraceRecord, TRACE_CSV_HEADER,
};
pub use params::{
    coupling_from_laser, gas_decoherence_rate, monitoring_strength, pressure_to_gamma, LaserParams,
    PhysicalParams, HBAR, K_B,
};
pub use state::{mean_energy, phonon_number, thermal_state, ControlInput, GaussianMoments};
pub use sweep::{sweep, sweep_point, RunStat, SweepAxis, SweepPoint, SweepResult, SweepSpec};
pub use track::{steady_state_variances, step_tracking, TrackerState, TrackingMode};
