//! Parameter sweeps: repeated seeded runs per grid point with aggregated
//! steady-state and cooling-rate statistics. Points and repeats execute in
//! parallel with RNG streams derived from (seed, point, repeat), so the
//! aggregate is independent of thread count and scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{fit_cooling_rate, steady_state_phonon, FitOptions, SteadyStateOptions};
use crate::emulate::derive_seed;
use crate::experiment::{run, ConfigError, RunConfig, Termination};
use crate::state::{phonon_number, thermal_state};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Beta,
    Delta,
    Pressure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub repeats: usize,
    pub base: RunConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.base.validate()?;
        if self.values.is_empty() || self.repeats < 1 {
            return Err(ConfigError::BadSweepGrid);
        }
        if self.axis == SweepAxis::Pressure && self.base.pressure.is_none() {
            return Err(ConfigError::PressureAxisWithoutPressure);
        }
        Ok(())
    }

    pub fn config_for(&self, value: f64, seed: u64) -> RunConfig {
        let mut cfg = self.base.clone();
        match self.axis {
            SweepAxis::Beta => cfg.params.beta = value,
            SweepAxis::Delta => cfg.params.delta = value,
            SweepAxis::Pressure => {
                if let Some(ps) = cfg.pressure.as_mut() {
                    ps.mbar = value;
                }
            }
        }
        cfg.seed = seed;
        cfg
    }
}

/// One run's contribution to a sweep point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStat {
    pub seed: u64,
    pub termination: Termination,
    pub steady_phonons: Option<f64>,
    pub steady_converged: bool,
    pub cooling_rate: Option<f64>,
    /// Steady level well above (2x) the free thermal phonon number, or the
    /// run diverged outright.
    pub heated: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub phonon_mean: Option<f64>,
    pub phonon_se: Option<f64>,
    pub rate_mean: Option<f64>,
    pub rate_se: Option<f64>,
    pub n_lost: usize,
    pub n_heated: usize,
    pub n_unconverged: usize,
    pub runs: Vec<RunStat>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    pub points: Vec<SweepPoint>,
}

fn mean_se(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (Some(mean), Some(0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some((var / n).sqrt()))
}

/// Execute one grid point: `repeats` runs in parallel with seeds derived
/// from (base seed, point index, repeat index), aggregated into the point
/// statistics. Exposed so a caller can stream results point by point; the
/// aggregate is identical to the corresponding entry of [`sweep`].
pub fn sweep_point(spec: &SweepSpec, point_idx: usize) -> Result<SweepPoint, ConfigError> {
    let onset = spec.base.timing.t_prep;
    let fit_opts = FitOptions { onset: Some(onset), ..FitOptions::default() };
    let ss_opts = SteadyStateOptions { onset, ..SteadyStateOptions::default() };
    let value = spec.values[point_idx];

    let runs: Result<Vec<RunStat>, ConfigError> = (0..spec.repeats)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(spec.base.seed, point_idx as u64, r as u64);
            let cfg = spec.config_for(value, seed);
            let out = run(&cfg)?;
            let p = out.resolved_params;
            let n_free = phonon_number(
                crate::state::mean_energy(&thermal_state(&p), p.mass, p.omega),
                p.omega,
            );
            let stat = if out.termination.is_lost() {
                RunStat {
                    seed,
                    termination: out.termination,
                    steady_phonons: None,
                    steady_converged: false,
                    cooling_rate: None,
                    heated: true,
                }
            } else {
                let ss = steady_state_phonon(&out.records, &ss_opts);
                let fit = fit_cooling_rate(&out.records, &fit_opts).ok();
                RunStat {
                    seed,
                    termination: out.termination,
                    steady_phonons: Some(ss.mean),
                    steady_converged: ss.converged,
                    cooling_rate: fit.map(|f| f.rate),
                    heated: ss.mean > 2.0 * n_free,
                }
            };
            Ok(stat)
        })
        .collect();
    let runs = runs?;

    let phonons: Vec<f64> = runs.iter().filter_map(|s| s.steady_phonons).collect();
    let rates: Vec<f64> = runs.iter().filter_map(|s| s.cooling_rate).collect();
    let (phonon_mean, phonon_se) = mean_se(&phonons);
    let (rate_mean, rate_se) = mean_se(&rates);
    Ok(SweepPoint {
        value,
        phonon_mean,
        phonon_se,
        rate_mean,
        rate_se,
        n_lost: runs.iter().filter(|s| s.termination.is_lost()).count(),
        n_heated: runs.iter().filter(|s| s.heated).count(),
        n_unconverged: runs.iter().filter(|s| !s.steady_converged).count(),
        runs,
    })
}

/// Execute the sweep. Individual run failures (particle lost, tracking
/// lost) are recorded on their point and the sweep continues.
pub fn sweep(spec: &SweepSpec) -> Result<SweepResult, ConfigError> {
    spec.validate()?;
    let points: Result<Vec<SweepPoint>, ConfigError> =
        (0..spec.values.len()).into_par_iter().map(|i| sweep_point(spec, i)).collect();
    Ok(SweepResult { spec: spec.clone(), points: points? })
}
