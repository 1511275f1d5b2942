//! Closed-loop orchestration: thermal preparation, the
//! emulate/measure/track/control cycle, trace recording, and the trace CSV
//! format.
//!
//! One measurement interval dt = M dt_E runs M emulation sub-steps with the
//! controls held to the active schedule, closes the homodyne window into a
//! single sample J, advances the tracker through N sub-steps of dt_C = dt/N
//! holding that J, and then asks the controller for the next interval's
//! schedule. Feedback engages once t >= t_prep; before that the controls
//! are pinned to zero while the tracker converges.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{ControlPlan, Controller, ControllerKind};
use crate::emulate::{
    advance, EmulateError, EmulateOpts, EmulationState, HomodyneAccumulator, RngStreams,
};
use crate::params::{mbar_to_pascal, pressure_to_gamma, ParamError, PhysicalParams};
use crate::state::{mean_energy, phonon_number, thermal_state, GaussianMoments};
use crate::track::{step_tracking, TrackError, TrackerState, TrackingMode};

/// Loop timing: emulation step dt_E, M emulation steps per measurement,
/// N control sub-steps per measurement; derived dt = M dt_E and
/// dt_C = dt / N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopTiming {
    pub dt_e: f64,
    pub m: usize,
    pub n: usize,
    pub t_prep: f64,
    pub t_total: f64,
}

impl LoopTiming {
    pub fn dt(&self) -> f64 {
        self.m as f64 * self.dt_e
    }

    pub fn dt_c(&self) -> f64 {
        self.dt() / self.n as f64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt_e > 0.0) {
            return Err(ConfigError::BadTiming("dt_e must be positive"));
        }
        if self.m < 1 || self.n < 1 {
            return Err(ConfigError::BadTiming("M and N must be at least 1"));
        }
        if self.n > self.m {
            return Err(ConfigError::BadTiming("dt_C >= dt_E requires N <= M"));
        }
        if !(self.t_total > self.t_prep) || !(self.t_prep >= 0.0) {
            return Err(ConfigError::BadTiming("need t_total > t_prep >= 0"));
        }
        Ok(())
    }
}

/// Pressure knob: converted to gamma_c through the free-molecular drag
/// formula at run time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureSpec {
    pub mbar: f64,
    pub particle_radius: f64,
    pub gas_molar_mass: f64,
    pub c_drag: f64,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error("invalid loop timing: {0}")]
    BadTiming(&'static str),
    #[error("supply exactly one gas knob: gamma_c was set together with a pressure")]
    TwoGasKnobs,
    #[error("record_stride must be at least 1")]
    BadStride,
    #[error("sweep needs a pressure-based base config for a pressure axis")]
    PressureAxisWithoutPressure,
    #[error("sweep grid must be non-empty and repeats >= 1")]
    BadSweepGrid,
}

/// Full description of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: PhysicalParams,
    /// Optional pressure knob; exactly one of this and `params.gamma_c`
    /// carries the gas coupling.
    pub pressure: Option<PressureSpec>,
    pub timing: LoopTiming,
    pub controller: ControllerKind,
    pub tracking: TrackingMode,
    #[serde(default)]
    pub emulate: EmulateOpts,
    pub seed: u64,
    /// Record every `record_stride`-th measurement interval.
    pub record_stride: usize,
    /// Velocity normalization for cold damping; defaults to the RMS thermal
    /// velocity when absent.
    pub v_scale: Option<f64>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        self.timing.validate()?;
        if self.record_stride < 1 {
            return Err(ConfigError::BadStride);
        }
        if self.pressure.is_some() && self.params.gamma_c != 0.0 {
            return Err(ConfigError::TwoGasKnobs);
        }
        Ok(())
    }

    /// Physical parameters with the gas knob resolved into gamma_c.
    pub fn resolved_params(&self) -> Result<PhysicalParams, ConfigError> {
        self.validate()?;
        let mut p = self.params;
        if let Some(ps) = &self.pressure {
            p.gamma_c = pressure_to_gamma(
                mbar_to_pascal(ps.mbar),
                ps.particle_radius,
                ps.gas_molar_mass,
                p.temperature,
                p.mass,
                ps.c_drag,
            )?;
        }
        Ok(p)
    }
}

/// One recorded time sample of the closed loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub y: GaussianMoments,
    pub x: GaussianMoments,
    pub u: f64,
    pub v: f64,
    pub j: f64,
    pub energy_true: f64,
    pub energy_est: f64,
    pub phonons_true: f64,
}

/// How a run ended. Losses carry the failure time; the records up to that
/// point are preserved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    ParticleLost { t: f64 },
    TrackingLost { t: f64 },
}

impl Termination {
    pub fn is_lost(&self) -> bool {
        !matches!(self, Termination::Completed)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutput {
    pub records: Vec<TraceRecord>,
    pub termination: Termination,
    /// Gas knob resolved; what the loop actually used.
    pub resolved_params: PhysicalParams,
}

/// Execute one closed-loop run: thermal initialization for both the system
/// and the tracker, t_prep of free evolution with controls off, then the
/// configured controller until t_total (or until the particle/tracking is
/// lost).
pub fn run(config: &RunConfig) -> Result<RunOutput, ConfigError> {
    let p = config.resolved_params()?;
    let timing = config.timing;
    let dt = timing.dt();
    let dt_c = timing.dt_c();
    let total_intervals = (timing.t_total / dt).round() as usize;
    let prep_intervals = (timing.t_prep / dt).round() as usize;

    let thermal = thermal_state(&p);
    let mut y = EmulationState::new(thermal);
    let mut x = TrackerState::new(thermal, config.tracking);
    let mut streams = RngStreams::new(config.seed);
    let mut controller = Controller::new(config.controller, &p, config.v_scale);
    let mut plan = ControlPlan::zeros(timing.n);

    let mut records = Vec::with_capacity(total_intervals / config.record_stride + 1);
    let mut termination = Termination::Completed;

    'outer: for interval in 0..total_intervals {
        let feedback_on = interval >= prep_intervals;
        let active = if feedback_on { plan } else { ControlPlan::zeros(timing.n) };

        let mut acc = HomodyneAccumulator::new();
        for sub in 0..timing.m {
            let c = active.control_at(sub * timing.n / timing.m);
            if let Err(e) =
                advance(&mut y, c, &p, &config.emulate, timing.dt_e, &mut streams, Some(&mut acc))
            {
                termination = match e {
                    EmulateError::BadHomodyneWindow => unreachable!("k > 0 by construction"),
                    EmulateError::ParticleLost { time } | EmulateError::StepFailure { time } => {
                        Termination::ParticleLost { t: time }
                    }
                };
                break 'outer;
            }
        }
        let j = acc.finish(dt);

        for sub in 0..timing.n {
            match step_tracking(&x, j, active.control_at(sub), &p, dt_c) {
                Ok(next) => x = next,
                Err(TrackError::TrackingLost { time } | TrackError::StepFailure { time }) => {
                    termination = Termination::TrackingLost { t: time };
                    break 'outer;
                }
                Err(TrackError::NoConvergence) => unreachable!("stepping never root-finds"),
            }
        }

        let t = (interval + 1) as f64 * dt;
        if (interval + 1) % config.record_stride == 0 {
            let energy_true = mean_energy(&y.moments, p.mass, p.omega);
            let energy_est = mean_energy(&x.moments, p.mass, p.omega);
            records.push(TraceRecord {
                t,
                y: y.moments,
                x: x.moments,
                u: active.u_seq[0],
                v: active.v_seq[0],
                j,
                energy_true,
                energy_est,
                phonons_true: phonon_number(energy_true, p.omega),
            });
        }

        if interval + 1 >= prep_intervals {
            match controller.update(&x, &p, dt_c, timing.n) {
                Ok(next) => plan = next,
                Err(_) => {
                    // Every branch prediction diverged: the estimate is gone.
                    termination = Termination::TrackingLost { t };
                    break 'outer;
                }
            }
        }
    }

    Ok(RunOutput { records, termination, resolved_params: p })
}

/// Exact column set of the trace CSV, SI units throughout.
pub const TRACE_CSV_HEADER: &str = "t,y1,y2,y3,y4,y5,x1,x2,x3,x4,x5,u,v,J,E_true,E_est,n_true";

#[derive(Debug, Error)]
pub enum TraceIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("trace schema mismatch: expected header `{TRACE_CSV_HEADER}`, got `{0}`")]
    SchemaMismatch(String),
    #[error("malformed trace row {line}: {reason}")]
    BadRow { line: usize, reason: String },
}

/// Write records in the documented schema. Floats are printed in exponent
/// form with shortest round-trip mantissas, so identical records give
/// byte-identical files.
pub fn write_trace_csv<W: Write>(mut w: W, records: &[TraceRecord]) -> Result<(), TraceIoError> {
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    for r in records {
        let y = r.y.to_array();
        let x = r.x.to_array();
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.t,
            y[0],
            y[1],
            y[2],
            y[3],
            y[4],
            x[0],
            x[1],
            x[2],
            x[3],
            x[4],
            r.u,
            r.v,
            r.j,
            r.energy_true,
            r.energy_est,
            r.phonons_true
        )?;
    }
    Ok(())
}

pub fn read_trace_csv<R: BufRead>(r: R) -> Result<Vec<TraceRecord>, TraceIoError> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| TraceIoError::SchemaMismatch(String::new()))??;
    if header.trim() != TRACE_CSV_HEADER {
        return Err(TraceIoError::SchemaMismatch(header));
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 17 {
            return Err(TraceIoError::BadRow {
                line: idx + 2,
                reason: format!("expected 17 fields, got {}", fields.len()),
            });
        }
        let mut vals = [0.0f64; 17];
        for (i, f) in fields.iter().enumerate() {
            vals[i] = f.trim().parse().map_err(|e| TraceIoError::BadRow {
                line: idx + 2,
                reason: format!("field {i}: {e}"),
            })?;
        }
        records.push(TraceRecord {
            t: vals[0],
            y: GaussianMoments::from_array([vals[1], vals[2], vals[3], vals[4], vals[5]]),
            x: GaussianMoments::from_array([vals[6], vals[7], vals[8], vals[9], vals[10]]),
            u: vals[11],
            v: vals[12],
            j: vals[13],
            energy_true: vals[14],
            energy_est: vals[15],
            phonons_true: vals[16],
        });
    }
    Ok(records)
}
