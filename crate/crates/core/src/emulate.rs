//! Emulation of the "true" monitored particle: the stochastic moment
//! equations driven by three independent Wiener processes (detected photons,
//! undetected photons, gas collisions), plus the synthetic homodyne current.
//!
//! The moment equations have two very different regimes. The means rotate at
//! the trap frequency and are never stiff. The variances obey a Riccati-type
//! system whose contraction rate `(8k + 4 Gamma) Var(z)` is enormous while
//! the conditional variance collapses from its thermal initial value down to
//! the measurement-limited fixed point (it can exceed 1e18 1/s at moderate
//! pressure). No fixed-step explicit scheme survives that transient at the
//! nanosecond step sizes used here, so the integration driver [`advance`]
//! sub-divides each step adaptively: sub-step sizes follow the local
//! stiffness rate, and each sub-step draws its own Wiener increments so the
//! large back-action kick that transfers the thermal spread from the
//! variances into the means is resolved rather than aliased.
//!
//! [`step_euler_maruyama`] and [`step_srk4`] are the raw single-step
//! schemes; they are exact to their contracts and are what the driver
//! applies per sub-step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::PhysicalParams;
use crate::state::{ControlInput, GaussianMoments};

#[derive(Debug, Error, PartialEq)]
pub enum EmulateError {
    /// Any non-finite component terminates the run: the numerical analogue
    /// of losing the particle from the trap. No clamping.
    #[error("particle lost: non-finite state at t = {time:.6e} s")]
    ParticleLost { time: f64 },
    /// The adaptive driver could not find an acceptable sub-step.
    #[error("integration stalled at t = {time:.6e} s")]
    StepFailure { time: f64 },
    #[error("homodyne sample requires k > 0 and eta > 0")]
    BadHomodyneWindow,
}

/// Wiener increments over one step: detected-photon back-action (`dw`),
/// undetected photons (`dv`), gas collisions (`dz`). Each is Gaussian with
/// zero mean and variance equal to the step length; the three streams are
/// mutually independent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseIncrements {
    pub dw: f64,
    pub dv: f64,
    pub dz: f64,
}

impl NoiseIncrements {
    pub const ZERO: NoiseIncrements = NoiseIncrements { dw: 0.0, dv: 0.0, dz: 0.0 };
}

/// Emulated system state: Gaussian moments plus the current time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmulationState {
    pub moments: GaussianMoments,
    pub time: f64,
}

impl EmulationState {
    pub fn new(moments: GaussianMoments) -> Self {
        Self { moments, time: 0.0 }
    }
}

/// Model variants for terms whose damping structure admits two readings.
///
/// * `dissipative_gas_variance` (default on): the gas term in the Var(z)
///   equation damps, `-2 gamma_c Var(z)`; switching it off flips the sign to
///   the anti-damped `+2 gamma_c Var(z)` variant.
/// * `damp_covariance` (default off): adds `-2 gamma_c Cov` to the
///   covariance equation, matching the damping structure of the tracking
///   equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmulateOpts {
    pub dissipative_gas_variance: bool,
    pub damp_covariance: bool,
}

impl Default for EmulateOpts {
    fn default() -> Self {
        Self { dissipative_gas_variance: true, damp_covariance: false }
    }
}

/// Deterministic part of the moment equations.
///
/// With k = alpha (1 + beta u), Gamma the gas decoherence rate,
/// q = 8k + 4 Gamma and w2 = m omega^2 (1 + beta u):
///
/// ```text
/// d<z>    = <p>/m - gamma_c <z>
/// d<p>    = -w2 <z> - gamma_c <p> + delta v
/// dVar z  = 2 Cov/m -/+ 2 gamma_c Var z - q Var z^2
/// dVar p  = -2 w2 Cov - 2 gamma_c Var p + hbar^2 (2k + Gamma) - q Cov^2
/// dCov    = Var p / m - w2 Var z - q Var z Cov  [- 2 gamma_c Cov]
/// ```
pub fn drift(
    y: &[f64; 5],
    c: ControlInput,
    p: &PhysicalParams,
    opts: &EmulateOpts,
) -> [f64; 5] {
    let modulation = 1.0 + p.beta * c.u;
    let k = p.alpha * modulation;
    let big_gamma = p.gas_decoherence_rate();
    let q = 8.0 * k + 4.0 * big_gamma;
    let w2 = p.mass * p.omega * p.omega * modulation;
    let gc = p.gamma_c;
    let var_sign = if opts.dissipative_gas_variance { -1.0 } else { 1.0 };
    let hbar2 = crate::params::HBAR * crate::params::HBAR;

    [
        y[1] / p.mass - gc * y[0],
        -w2 * y[0] - gc * y[1] + p.delta * c.v,
        2.0 * y[4] / p.mass + var_sign * 2.0 * gc * y[2] - q * y[2] * y[2],
        -2.0 * w2 * y[4] - 2.0 * gc * y[3] + hbar2 * (2.0 * k + big_gamma) - q * y[4] * y[4],
        y[3] / p.mass
            - w2 * y[2]
            - q * y[2] * y[4]
            - if opts.damp_covariance { 2.0 * gc * y[4] } else { 0.0 },
    ]
}

/// Noise coefficient matrix: rows for the five moments, columns for
/// (dW, dV, dZ). Only the mean equations carry noise; the variance equations
/// are deterministic.
///
/// The gas column of the position row is `2 sqrt(Gamma) Var z - gamma_c /
/// sqrt(Gamma)`; the second term is evaluated as
/// `hbar sqrt(gamma_c / 4 m k_B T)` so the gamma_c -> 0 limit is exact.
pub fn diffusion(y: &[f64; 5], c: ControlInput, p: &PhysicalParams) -> [[f64; 3]; 5] {
    let k = p.alpha * (1.0 + p.beta * c.u);
    let big_gamma = p.gas_decoherence_rate();
    let c_dw = (8.0 * p.eta * k).sqrt();
    let c_dv = (8.0 * (1.0 - p.eta) * k).sqrt();
    let sqrt_gamma = big_gamma.sqrt();
    let mut b = [[0.0; 3]; 5];
    b[0] = [c_dw * y[2], c_dv * y[2], 2.0 * sqrt_gamma * y[2] - p.gas_imprecision()];
    b[1] = [c_dw * y[4], c_dv * y[4], 2.0 * sqrt_gamma * y[4]];
    b
}

/// Local stiffness rate used by the adaptive driver: the dominant
/// contraction rate of the variance subsystem plus the rotation rates of
/// both the bare trap and the covariance coupling.
fn stiff_rate(y: &[f64; 5], c: ControlInput, p: &PhysicalParams) -> f64 {
    let modulation = 1.0 + p.beta * c.u;
    let k = p.alpha * modulation;
    let q = 8.0 * k + 4.0 * p.gas_decoherence_rate();
    let w2 = p.mass * p.omega * p.omega * modulation;
    let var_p_floor = y[3].abs().max(f64::MIN_POSITIVE);
    let contraction = 2.0 * p.gamma_c + q * (y[2].abs() + y[4] * y[4] / var_p_floor);
    let rotation = (2.0 / p.mass * (w2 + q * y[4].abs())).sqrt();
    contraction + rotation + 2.0 * p.omega
}

/// Classical 4-stage Runge-Kutta step on the drift. Returns the advanced
/// deterministic state together with the second-order midpoint estimate
/// (the third-stage input), which is where the driver evaluates the noise
/// coefficients.
fn rk4_deterministic(
    y: &[f64; 5],
    c: ControlInput,
    p: &PhysicalParams,
    opts: &EmulateOpts,
    dt: f64,
) -> ([f64; 5], [f64; 5]) {
    let k1 = drift(y, c, p, opts);
    let mut y2 = *y;
    for i in 0..5 {
        y2[i] += 0.5 * dt * k1[i];
    }
    let k2 = drift(&y2, c, p, opts);
    let mut y3 = *y;
    for i in 0..5 {
        y3[i] += 0.5 * dt * k2[i];
    }
    let k3 = drift(&y3, c, p, opts);
    let mut y4 = *y;
    for i in 0..5 {
        y4[i] += dt * k3[i];
    }
    let k4 = drift(&y4, c, p, opts);
    let mut out = *y;
    for i in 0..5 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    (out, y3)
}

fn finite5(y: &[f64; 5]) -> bool {
    y.iter().all(|v| v.is_finite())
}

/// Acceptance test for a trial deterministic sub-step: variances stay
/// positive, nothing blows up, and no variance moves by more than ~an
/// order of magnitude at once.
fn variance_step_ok(old: &[f64; 5], new: &[f64; 5]) -> bool {
    if !finite5(new) || new[2] <= 0.0 || new[3] <= 0.0 {
        return false;
    }
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    rel(new[2], old[2]) < 0.9 && rel(new[3], old[3]) < 0.9
}

/// One Euler-Maruyama step: y' = y + drift dt + diffusion [dW, dV, dZ].
/// The reference low-order scheme; diffusion is evaluated at the left point.
pub fn step_euler_maruyama(
    state: &EmulationState,
    c: ControlInput,
    noise: &NoiseIncrements,
    dt: f64,
    p: &PhysicalParams,
    opts: &EmulateOpts,
) -> Result<EmulationState, EmulateError> {
    let y = state.moments.to_array();
    let d = drift(&y, c, p, opts);
    let b = diffusion(&y, c, p);
    let mut out = y;
    for i in 0..5 {
        out[i] += d[i] * dt + b[i][0] * noise.dw + b[i][1] * noise.dv + b[i][2] * noise.dz;
    }
    if !finite5(&out) {
        return Err(EmulateError::ParticleLost { time: state.time + dt });
    }
    Ok(EmulationState { moments: GaussianMoments::from_array(out), time: state.time + dt })
}

/// One hybrid step: classical RK4 on the drift, Euler-Maruyama noise with
/// the diffusion evaluated at the step-midpoint state. The coefficients ride
/// only on the deterministic components, so the midpoint evaluation stays an
/// Ito discretization.
pub fn step_srk4(
    state: &EmulationState,
    c: ControlInput,
    noise: &NoiseIncrements,
    dt: f64,
    p: &PhysicalParams,
    opts: &EmulateOpts,
) -> Result<EmulationState, EmulateError> {
    let y = state.moments.to_array();
    let (mut out, mid) = rk4_deterministic(&y, c, p, opts, dt);
    let b = diffusion(&mid, c, p);
    for i in 0..2 {
        out[i] += b[i][0] * noise.dw + b[i][1] * noise.dv + b[i][2] * noise.dz;
    }
    if !finite5(&out) {
        return Err(EmulateError::ParticleLost { time: state.time + dt });
    }
    Ok(EmulationState { moments: GaussianMoments::from_array(out), time: state.time + dt })
}

/// Per-sub-step record consumed by the homodyne accumulator: the position
/// mean at the start of the sub-step, the detected-photon increment that
/// drove it, the monitoring strength active during it, and its length.
#[derive(Debug, Clone, Copy)]
pub struct HomodyneSample {
    pub y1: f64,
    pub dw: f64,
    pub k: f64,
    pub dt: f64,
}

/// Running sum of instantaneous homodyne current over a measurement window,
/// J = (1/dt_total) sum_i [ y1_i dt_i + dW_i / sqrt(8 eta k_i) ].
///
/// The same dW increments that drive the emulation are reused here, so the
/// measurement back-action correlation is preserved.
#[derive(Debug, Clone, Copy, Default)]
pub struct HomodyneAccumulator {
    sum: f64,
}

impl HomodyneAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, s: HomodyneSample, eta: f64) -> Result<(), EmulateError> {
        if !(s.k > 0.0 && eta > 0.0) {
            return Err(EmulateError::BadHomodyneWindow);
        }
        self.sum += s.y1 * s.dt + s.dw / (8.0 * eta * s.k).sqrt();
        Ok(())
    }

    /// Close the window: the time-average current over `dt_total`.
    pub fn finish(self, dt_total: f64) -> f64 {
        self.sum / dt_total
    }
}

/// Window-averaged homodyne current over one measurement interval.
pub fn homodyne_sample(
    window: &[HomodyneSample],
    eta: f64,
    dt_total: f64,
) -> Result<f64, EmulateError> {
    let mut acc = HomodyneAccumulator::new();
    for s in window {
        acc.add(*s, eta)?;
    }
    Ok(acc.finish(dt_total))
}

/// Three independently seeded Gaussian increment streams. Identical seed
/// gives identical increment sequences, bit-exact, on any platform (ChaCha
/// core, fixed key derivation).
#[derive(Debug, Clone)]
pub struct RngStreams {
    seed: u64,
    w: ChaCha12Rng,
    v: ChaCha12Rng,
    z: ChaCha12Rng,
}

/// splitmix64, the key/seed mixing function used throughout.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-run seed for sweep point `a`, repeat `b`.
pub fn derive_seed(base: u64, a: u64, b: u64) -> u64 {
    let mut s = base ^ a.wrapping_mul(0xA076_1D64_78BD_642F) ^ b.wrapping_mul(0xE703_7ED1_A0B4_28DB);
    splitmix64(&mut s)
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        let key = |tag: u64| {
            let mut s = seed ^ tag;
            let mut bytes = [0u8; 32];
            for chunk in bytes.chunks_exact_mut(8) {
                chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
            }
            ChaCha12Rng::from_seed(bytes)
        };
        Self {
            seed,
            w: key(0x5748_4954_454E_4F57), // stream tags; arbitrary fixed
            v: key(0x554E_4445_5445_4354),
            z: key(0x4741_5343_4F4C_4C49),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Draw one increment triple for a step of length `dt`.
    pub fn draw(&mut self, dt: f64) -> NoiseIncrements {
        let s = dt.sqrt();
        NoiseIncrements {
            dw: s * self.w.sample::<f64, _>(StandardNormal),
            dv: s * self.v.sample::<f64, _>(StandardNormal),
            dz: s * self.z.sample::<f64, _>(StandardNormal),
        }
    }
}

/// Courant-style safety factor on the stiffness rate.
const CFL: f64 = 0.8;
/// Runaway guard only; legitimate calls (even millisecond-long relaxation
/// studies at high pressure) stay far below this.
const MAX_SUBSTEPS: usize = 50_000_000;

/// Advance the emulation by `dt` with the controls held, sub-dividing
/// adaptively wherever the variance dynamics are stiff. Each sub-step draws
/// its own Wiener increments (variance `h`) and feeds the homodyne
/// accumulator, so the window-average current stays exact over non-uniform
/// sub-steps.
pub fn advance(
    state: &mut EmulationState,
    c: ControlInput,
    p: &PhysicalParams,
    opts: &EmulateOpts,
    dt: f64,
    streams: &mut RngStreams,
    mut homodyne: Option<&mut HomodyneAccumulator>,
) -> Result<(), EmulateError> {
    let k = p.alpha * (1.0 + p.beta * c.u);
    let t_end = state.time + dt;
    let mut remaining = dt;
    for _ in 0..MAX_SUBSTEPS {
        if remaining <= 0.0 {
            state.time = t_end;
            return Ok(());
        }
        let y = state.moments.to_array();
        if !finite5(&y) {
            return Err(EmulateError::ParticleLost { time: state.time });
        }
        let mut h = remaining.min(CFL / stiff_rate(&y, c, p));
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
        }
        let (mut out, mid) = loop {
            let (trial, mid) = rk4_deterministic(&y, c, p, opts, h);
            if variance_step_ok(&y, &trial) {
                break (trial, mid);
            }
            h *= 0.5;
            if h < 1e-12 * dt {
                return Err(EmulateError::StepFailure { time: state.time });
            }
        };
        let noise = streams.draw(h);
        let b = diffusion(&mid, c, p);
        for i in 0..2 {
            out[i] += b[i][0] * noise.dw + b[i][1] * noise.dv + b[i][2] * noise.dz;
        }
        if !finite5(&out) {
            return Err(EmulateError::ParticleLost { time: state.time + h });
        }
        if let Some(acc) = homodyne.as_deref_mut() {
            acc.add(HomodyneSample { y1: y[0], dw: noise.dw, k, dt: h }, p.eta)?;
        }
        state.moments = GaussianMoments::from_array(out);
        state.time += h;
        remaining -= h;
    }
    Err(EmulateError::StepFailure { time: state.time })
}

/// Deterministic variant of [`advance`]: no noise, no current. Used for
/// variance-relaxation studies and by tests.
pub fn advance_deterministic(
    state: &mut EmulationState,
    c: ControlInput,
    p: &PhysicalParams,
    opts: &EmulateOpts,
    dt: f64,
) -> Result<(), EmulateError> {
    let t_end = state.time + dt;
    let mut remaining = dt;
    for _ in 0..MAX_SUBSTEPS {
        if remaining <= 0.0 {
            state.time = t_end;
            return Ok(());
        }
        let y = state.moments.to_array();
        if !finite5(&y) {
            return Err(EmulateError::ParticleLost { time: state.time });
        }
        let mut h = remaining.min(CFL / stiff_rate(&y, c, p));
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
        }
        let out = loop {
            let (trial, _) = rk4_deterministic(&y, c, p, opts, h);
            if variance_step_ok(&y, &trial) {
                break trial;
            }
            h *= 0.5;
            if h < 1e-12 * dt {
                return Err(EmulateError::StepFailure { time: state.time });
            }
        };
        state.moments = GaussianMoments::from_array(out);
        state.time += h;
        remaining -= h;
    }
    Err(EmulateError::StepFailure { time: state.time })
}
