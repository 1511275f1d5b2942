//! Structured config files. Keys carry their units explicitly
//! (`omega_hz`, `pressure_mbar`, `t_prep_s`) and every conversion to SI is
//! applied exactly once, here at parse time. Unknown keys are errors.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use levcool_core::params::{AIR_MOLAR_MASS, EPSTEIN_SPECULAR};
use levcool_core::{
    ControllerKind, EmulateOpts, LoopTiming, PhysicalParams, PressureSpec, RunConfig, SweepAxis,
    SweepSpec, TrackingMode,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub particle: ParticleSection,
    pub gas: GasSection,
    pub monitoring: MonitoringSection,
    pub feedback: FeedbackSection,
    pub timing: TimingSection,
    #[serde(default)]
    pub emulation: EmulationSection,
    #[serde(default)]
    pub output: OutputSection,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSection {
    pub mass_kg: f64,
    /// Trap frequency in Hz; converted to rad/s on resolution.
    pub omega_hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSection {
    pub temperature_k: f64,
    /// Exactly one of `pressure_mbar` / `gamma_c_hz` supplies the gas
    /// coupling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure_mbar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_c_hz: Option<f64>,
    #[serde(default = "default_radius")]
    pub particle_radius_m: f64,
    #[serde(default = "default_molar_mass")]
    pub molar_mass_kg_per_mol: f64,
    /// Kinetic-theory drag coefficient; defaults to the Epstein
    /// specular-reflection value 32/3.
    #[serde(default = "default_drag")]
    pub drag_coefficient: f64,
}

fn default_radius() -> f64 {
    50e-9
}
fn default_molar_mass() -> f64 {
    AIR_MOLAR_MASS
}
fn default_drag() -> f64 {
    EPSTEIN_SPECULAR
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitoringSection {
    pub eta: f64,
    /// Monitoring coupling in 1/(m^2 s).
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSection {
    pub controller: ControllerKind,
    #[serde(default = "default_tracking")]
    pub tracking: TrackingMode,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub delta_n: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_scale_m_per_s: Option<f64>,
}

fn default_tracking() -> TrackingMode {
    TrackingMode::Modulated
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingSection {
    pub dt_emulation_s: f64,
    /// Emulation steps per measurement interval (M).
    pub steps_per_measurement: usize,
    /// Tracker/control sub-steps per measurement interval (N).
    pub control_substeps: usize,
    pub t_prep_s: f64,
    pub t_total_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmulationSection {
    #[serde(default = "default_true")]
    pub dissipative_gas_variance: bool,
    #[serde(default)]
    pub damp_covariance: bool,
}

fn default_true() -> bool {
    true
}

impl Default for EmulationSection {
    fn default() -> Self {
        Self { dissipative_gas_variance: true, damp_covariance: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_stride() -> usize {
    10
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { record_stride: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub repeats: usize,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).context("config parse failed")?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text)
    }

    /// Resolve into the core run description, converting units exactly once
    /// and validating every invariant.
    pub fn to_run_config(&self) -> Result<RunConfig> {
        let gas = &self.gas;
        let (gamma_c, pressure) = match (gas.gamma_c_hz, gas.pressure_mbar) {
            (Some(_), Some(_)) => {
                bail!("gas: set exactly one of `gamma_c_hz` and `pressure_mbar`, not both")
            }
            (None, None) => {
                bail!("gas: one of `gamma_c_hz` and `pressure_mbar` is required")
            }
            (Some(g), None) => (g, None),
            (None, Some(mbar)) => (
                0.0,
                Some(PressureSpec {
                    mbar,
                    particle_radius: gas.particle_radius_m,
                    gas_molar_mass: gas.molar_mass_kg_per_mol,
                    c_drag: gas.drag_coefficient,
                }),
            ),
        };
        let params = PhysicalParams {
            mass: self.particle.mass_kg,
            omega: 2.0 * std::f64::consts::PI * self.particle.omega_hz,
            temperature: gas.temperature_k,
            eta: self.monitoring.eta,
            alpha: self.monitoring.alpha,
            gamma_c,
            beta: self.feedback.beta,
            delta: self.feedback.delta_n,
        };
        let cfg = RunConfig {
            params,
            pressure,
            timing: LoopTiming {
                dt_e: self.timing.dt_emulation_s,
                m: self.timing.steps_per_measurement,
                n: self.timing.control_substeps,
                t_prep: self.timing.t_prep_s,
                t_total: self.timing.t_total_s,
            },
            controller: self.feedback.controller,
            tracking: self.feedback.tracking,
            emulate: EmulateOpts {
                dissipative_gas_variance: self.emulation.dissipative_gas_variance,
                damp_covariance: self.emulation.damp_covariance,
            },
            seed: self.run.seed,
            record_stride: self.output.record_stride,
            v_scale: self.feedback.v_scale_m_per_s,
        };
        cfg.validate().map_err(|e| anyhow::anyhow!("config validation failed: {e}"))?;
        Ok(cfg)
    }

    pub fn to_sweep_spec(&self) -> Result<SweepSpec> {
        let Some(sw) = &self.sweep else {
            bail!("config has no [sweep] section");
        };
        let spec = SweepSpec {
            axis: sw.axis,
            values: sw.values.clone(),
            repeats: sw.repeats,
            base: self.to_run_config()?,
        };
        spec.validate().map_err(|e| anyhow::anyhow!("sweep validation failed: {e}"))?;
        Ok(spec)
    }

    /// The same config with the seed replaced, for `--seed` overrides and
    /// for embedding the fully resolved document in run outputs.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.run.seed = seed;
        out
    }
}
