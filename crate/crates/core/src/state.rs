//! Gaussian state representation shared by the emulated ("true") system and
//! the tracker, plus the energy and phonon-number observables.

use serde::{Deserialize, Serialize};

use crate::params::{ParamError, PhysicalParams, HBAR, K_B};

/// First and second moments of a Gaussian state of the 1-d motion:
/// means of position and momentum, their variances, and the symmetrized
/// covariance. All SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMoments {
    /// <z>, m
    pub mean_z: f64,
    /// <p>, kg m/s
    pub mean_p: f64,
    /// Var(z), m^2
    pub var_z: f64,
    /// Var(p), (kg m/s)^2
    pub var_p: f64,
    /// Cov(z, p), units of hbar
    pub cov: f64,
}

impl GaussianMoments {
    pub fn new(mean_z: f64, mean_p: f64, var_z: f64, var_p: f64, cov: f64) -> Self {
        Self { mean_z, mean_p, var_z, var_p, cov }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.mean_z, self.mean_p, self.var_z, self.var_p, self.cov]
    }

    pub fn from_array(m: [f64; 5]) -> Self {
        Self { mean_z: m[0], mean_p: m[1], var_z: m[2], var_p: m[3], cov: m[4] }
    }

    /// Var(z) Var(p) - Cov^2, compared against hbar^2/4 by the uncertainty
    /// relation.
    pub fn uncertainty_product(&self) -> f64 {
        self.var_z * self.var_p - self.cov * self.cov
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Variances positive and all components finite.
    pub fn is_physical(&self) -> bool {
        self.is_finite() && self.var_z > 0.0 && self.var_p > 0.0
    }
}

/// The pair of dimensionless feedback signals: `u` drives the quadratic
/// (laser-power) channel, `v` the linear (electric) channel. Actuator
/// outputs are `beta u` and `delta v`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub u: f64,
    pub v: f64,
}

impl ControlInput {
    pub const OFF: ControlInput = ControlInput { u: 0.0, v: 0.0 };

    pub fn new(u: f64, v: f64) -> Result<Self, ParamError> {
        if !(-1.0..=1.0).contains(&u) {
            return Err(ParamError::ControlOutOfRange { name: "u", value: u });
        }
        if !(-1.0..=1.0).contains(&v) {
            return Err(ParamError::ControlOutOfRange { name: "v", value: v });
        }
        Ok(Self { u, v })
    }
}

/// Gaussian thermal state of the trap at the gas temperature:
/// zero means, Var(z) = (hbar / 2 m omega) coth(hbar omega / 2 k_B T),
/// Var(p) = (hbar m omega / 2) coth(hbar omega / 2 k_B T), zero covariance.
pub fn thermal_state(p: &PhysicalParams) -> GaussianMoments {
    let x = HBAR * p.omega / (2.0 * K_B * p.temperature);
    let coth = 1.0 / x.tanh();
    GaussianMoments {
        mean_z: 0.0,
        mean_p: 0.0,
        var_z: HBAR / (2.0 * p.mass * p.omega) * coth,
        var_p: HBAR * p.mass * p.omega / 2.0 * coth,
        cov: 0.0,
    }
}

/// Mean oscillator energy
/// E = (<p>^2 + Var p) / 2m + (m omega^2 / 2)(<z>^2 + Var z).
///
/// Momentum moments pair with the kinetic prefactor 1/2m and position
/// moments with the potential prefactor; any other pairing is dimensionally
/// inconsistent.
pub fn mean_energy(s: &GaussianMoments, mass: f64, omega: f64) -> f64 {
    (s.mean_p * s.mean_p + s.var_p) / (2.0 * mass)
        + 0.5 * mass * omega * omega * (s.mean_z * s.mean_z + s.var_z)
}

/// Phonon number n = E / (hbar omega) - 1/2, clamped to >= 0 for reporting.
pub fn phonon_number(energy: f64, omega: f64) -> f64 {
    (energy / (HBAR * omega) - 0.5).max(0.0)
}
