//! Physical parameters of the trapped-particle setup and the rate/coupling
//! conversions derived from them.
//!
//! Everything downstream (emulation, tracking, control, experiments) reads its
//! constants from [`PhysicalParams`]; the fundamental constants are fixed
//! CODATA values and deliberately not configurable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reduced Planck constant, J·s (CODATA 2018).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (exact, 2019 SI).
pub const K_B: f64 = 1.380_649e-23;
/// Avogadro constant, 1/mol (exact, 2019 SI).
pub const N_A: f64 = 6.022_140_76e23;
/// Speed of light, m/s (exact).
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Epstein free-molecular drag coefficient for a specularly reflecting
/// sphere, used as the default `c_drag` in [`pressure_to_gamma`].
pub const EPSTEIN_SPECULAR: f64 = 32.0 / 3.0;
/// Molar mass of air, kg/mol, the default gas for pressure conversions.
pub const AIR_MOLAR_MASS: f64 = 28.97e-3;

#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("{name} must be positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("detection efficiency eta must lie in (0, 1], got {0}")]
    EtaOutOfRange(f64),
    #[error("modulation depth beta must lie in [0, 1), got {0}")]
    BetaOutOfRange(f64),
    #[error("{name} must be non-negative, got {value}")]
    Negative { name: &'static str, value: f64 },
    #[error("control signal {name} must lie in [-1, 1], got {value}")]
    ControlOutOfRange { name: &'static str, value: f64 },
}

/// Particle, trap, gas and feedback constants.
///
/// `beta < 1` guarantees the modulated monitoring strength
/// `k = alpha (1 + beta u)` stays positive for every admissible control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// particle mass, kg
    pub mass: f64,
    /// trap angular frequency, rad/s
    pub omega: f64,
    /// gas temperature, K
    pub temperature: f64,
    /// detection efficiency, dimensionless in (0, 1]
    pub eta: f64,
    /// monitoring coupling, 1/(m^2 s)
    pub alpha: f64,
    /// gas damping rate, 1/s
    pub gamma_c: f64,
    /// quadratic (parametric) modulation depth, dimensionless
    pub beta: f64,
    /// linear (electric) feedback force amplitude, N
    pub delta: f64,
}

impl PhysicalParams {
    pub fn new(
        mass: f64,
        omega: f64,
        temperature: f64,
        eta: f64,
        alpha: f64,
        gamma_c: f64,
        beta: f64,
        delta: f64,
    ) -> Result<Self, ParamError> {
        let p = Self { mass, omega, temperature, eta, alpha, gamma_c, beta, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, value) in [
            ("mass", self.mass),
            ("omega", self.omega),
            ("temperature", self.temperature),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ParamError::NotPositive { name, value });
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(ParamError::EtaOutOfRange(self.eta));
        }
        if !(self.beta >= 0.0 && self.beta < 1.0) {
            return Err(ParamError::BetaOutOfRange(self.beta));
        }
        for (name, value) in
            [("alpha", self.alpha), ("gamma_c", self.gamma_c), ("delta", self.delta)]
        {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(ParamError::Negative { name, value });
            }
        }
        Ok(())
    }

    /// Typical values for a trapped ~50 nm silica particle at room
    /// temperature: m = 9.42e-19 kg, omega = 2 pi x 70 kHz, T = 300 K,
    /// eta = 0.003, alpha = 4.04e25. Gas damping and feedback strengths
    /// default to zero; set them per run.
    pub fn silica_70khz() -> Self {
        Self {
            mass: 9.42e-19,
            omega: 2.0 * std::f64::consts::PI * 70e3,
            temperature: 300.0,
            eta: 0.003,
            alpha: 4.04e25,
            gamma_c: 0.0,
            beta: 0.0,
            delta: 0.0,
        }
    }

    /// Gas position-decoherence rate Gamma = 4 m k_B T gamma_c / hbar^2,
    /// 1/(m^2 s).
    pub fn gas_decoherence_rate(&self) -> f64 {
        gas_decoherence_rate(self)
    }

    /// The imprecision contribution gamma_c / sqrt(Gamma) of the gas noise,
    /// written as hbar sqrt(gamma_c / (4 m k_B T)) so the gamma_c -> 0 limit
    /// is exact instead of 0/0.
    pub fn gas_imprecision(&self) -> f64 {
        HBAR * (self.gamma_c / (4.0 * self.mass * K_B * self.temperature)).sqrt()
    }

    /// Likewise gamma_c^2 / Gamma = hbar^2 gamma_c / (4 m k_B T), the
    /// position-variance floor term of the tracking equations.
    pub fn gas_variance_floor(&self) -> f64 {
        HBAR * HBAR * self.gamma_c / (4.0 * self.mass * K_B * self.temperature)
    }
}

/// Laser beam constants, only needed when deriving `alpha` from the optical
/// setup; `alpha` may always be supplied directly instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserParams {
    /// wavelength, m
    pub wavelength: f64,
    /// optical power, W
    pub power: f64,
    /// scattering cross-section, m^2
    pub cross_section: f64,
    /// beam waist, m
    pub waist: f64,
    /// optical angular frequency, rad/s
    pub omega_laser: f64,
}

impl LaserParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        for (name, value) in [
            ("wavelength", self.wavelength),
            ("power", self.power),
            ("cross_section", self.cross_section),
            ("waist", self.waist),
            ("omega_laser", self.omega_laser),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ParamError::NotPositive { name, value });
            }
        }
        Ok(())
    }
}

/// Gamma = 4 m k_B T gamma_c / hbar^2.
pub fn gas_decoherence_rate(p: &PhysicalParams) -> f64 {
    4.0 * p.mass * K_B * p.temperature * p.gamma_c / (HBAR * HBAR)
}

/// Modulated monitoring strength k = alpha (1 + beta u).
///
/// Rejects beta outside [0, 1): the modulation then could drive the laser
/// power, and with it k, non-positive.
pub fn monitoring_strength(alpha: f64, beta: f64, u: f64) -> Result<f64, ParamError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(ParamError::BetaOutOfRange(beta));
    }
    if !(-1.0..=1.0).contains(&u) {
        return Err(ParamError::ControlOutOfRange { name: "u", value: u });
    }
    Ok(alpha * (1.0 + beta * u))
}

/// Monitoring coupling from the beam constants,
/// alpha = (12 pi^2 / 5 lambda^2) (sigma P / pi w0^2 omega_L).
pub fn coupling_from_laser(lp: &LaserParams) -> f64 {
    let pi = std::f64::consts::PI;
    (12.0 * pi * pi / (5.0 * lp.wavelength * lp.wavelength))
        * (lp.cross_section * lp.power / (pi * lp.waist * lp.waist * lp.omega_laser))
}

/// Free-molecular (Epstein) drag: gamma_c = c_drag P r^2 / (m v_th) with the
/// mean thermal gas speed v_th = sqrt(8 k_B T / (pi m_gas)).
///
/// `c_drag` is a kinetic-theory coefficient; pass
/// [`EPSTEIN_SPECULAR`] (= 32/3) for the specular-reflection default.
/// Strictly linear and homogeneous in pressure.
pub fn pressure_to_gamma(
    pressure: f64,
    particle_radius: f64,
    gas_molar_mass: f64,
    temperature: f64,
    mass: f64,
    c_drag: f64,
) -> Result<f64, ParamError> {
    if !(pressure >= 0.0) {
        return Err(ParamError::Negative { name: "pressure", value: pressure });
    }
    let m_gas = gas_molar_mass / N_A;
    let v_th = (8.0 * K_B * temperature / (std::f64::consts::PI * m_gas)).sqrt();
    Ok(c_drag * pressure * particle_radius * particle_radius / (mass * v_th))
}

/// Convert a pressure quoted in mbar to Pa.
pub fn mbar_to_pascal(mbar: f64) -> f64 {
    mbar * 100.0
}
