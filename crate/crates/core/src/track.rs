//! Model-based tracker: converts the homodyne current into a running best
//! estimate of the particle state by integrating the conditional moment
//! equations between measurement samples.
//!
//! In `Modulated` mode the filter knows the actuated modulation depth and
//! folds `1 + beta u` into its stiffness, innovation gain and back-action
//! terms; in `Unmodulated` mode it runs with beta = 0 regardless of what is
//! actuated, which is the phase-locked-loop-style filter that loses lock at
//! larger modulation depths.
//!
//! The tracker variances undergo the same stiff thermal-to-conditional
//! collapse as the emulation (contraction rate `8 eta k Var(z)`), so
//! [`step_tracking`] sub-divides its Runge-Kutta step adaptively exactly as
//! the emulation driver does; away from the transient it performs the plain
//! classical step.

use thiserror::Error;

use crate::params::{PhysicalParams, HBAR};
use crate::state::{ControlInput, GaussianMoments};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingMode {
    Modulated,
    Unmodulated,
}

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("tracking lost: non-finite estimate at t = {time:.6e} s")]
    TrackingLost { time: f64 },
    #[error("tracker step stalled at t = {time:.6e} s")]
    StepFailure { time: f64 },
    #[error("steady-state variance iteration did not converge")]
    NoConvergence,
}

/// Tracker estimate: Gaussian moments, the filter mode, current time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerState {
    pub moments: GaussianMoments,
    pub mode: TrackingMode,
    pub time: f64,
}

impl TrackerState {
    pub fn new(moments: GaussianMoments, mode: TrackingMode) -> Self {
        Self { moments, mode, time: 0.0 }
    }

    fn effective_beta(&self, p: &PhysicalParams) -> f64 {
        match self.mode {
            TrackingMode::Modulated => p.beta,
            TrackingMode::Unmodulated => 0.0,
        }
    }
}

/// Right-hand side of the tracking equations for a held current sample `j`.
///
/// With the mode-effective beta, k = alpha (1 + beta u),
/// g = 8 eta k (innovation gain), w2 = m omega^2 (1 + beta u),
/// Gamma the gas decoherence rate and the gas variance floor
/// gamma_c^2 / Gamma evaluated in its removable form:
///
/// ```text
/// d x1 = x2/m - gamma_c x1 - g (x1 - J) x3
/// d x2 = -w2 x1 - gamma_c x2 - g (x1 - J) x5 + delta v
/// d x3 = 2 x5/m - 2 gamma_c x3 + gamma_c^2/Gamma - g x3^2
/// d x4 = -2 w2 x5 - 2 gamma_c x4 + hbar^2 Gamma - g x5^2 + 2 hbar^2 k
/// d x5 = x4/m - w2 x3 - 2 gamma_c x5 - g x3 x5
/// ```
pub fn tracking_drift(
    x: &[f64; 5],
    j: f64,
    c: ControlInput,
    beta_eff: f64,
    p: &PhysicalParams,
) -> [f64; 5] {
    let modulation = 1.0 + beta_eff * c.u;
    let k = p.alpha * modulation;
    let g = 8.0 * p.eta * k;
    let w2 = p.mass * p.omega * p.omega * modulation;
    let gc = p.gamma_c;
    let big_gamma = p.gas_decoherence_rate();
    let hbar2 = HBAR * HBAR;
    let residual = x[0] - j;
    [
        x[1] / p.mass - gc * x[0] - g * residual * x[2],
        -w2 * x[0] - gc * x[1] - g * residual * x[4] + p.delta * c.v,
        2.0 * x[4] / p.mass - 2.0 * gc * x[2] + p.gas_variance_floor() - g * x[2] * x[2],
        -2.0 * w2 * x[4] - 2.0 * gc * x[3] + hbar2 * big_gamma - g * x[4] * x[4]
            + 2.0 * hbar2 * k,
        x[3] / p.mass - w2 * x[2] - 2.0 * gc * x[4] - g * x[2] * x[4],
    ]
}

/// Zero-innovation right-hand side: the mean prediction used when
/// propagating the estimate forward past the last measurement (the future
/// current is unknown, so the residual is pinned to zero).
pub fn prediction_drift(x: &[f64; 5], c: ControlInput, beta_eff: f64, p: &PhysicalParams) -> [f64; 5] {
    let modulation = 1.0 + beta_eff * c.u;
    let k = p.alpha * modulation;
    let g = 8.0 * p.eta * k;
    let w2 = p.mass * p.omega * p.omega * modulation;
    let gc = p.gamma_c;
    let big_gamma = p.gas_decoherence_rate();
    let hbar2 = HBAR * HBAR;
    [
        x[1] / p.mass - gc * x[0],
        -w2 * x[0] - gc * x[1] + p.delta * c.v,
        2.0 * x[4] / p.mass - 2.0 * gc * x[2] + p.gas_variance_floor() - g * x[2] * x[2],
        -2.0 * w2 * x[4] - 2.0 * gc * x[3] + hbar2 * big_gamma - g * x[4] * x[4]
            + 2.0 * hbar2 * k,
        x[3] / p.mass - w2 * x[2] - 2.0 * gc * x[4] - g * x[2] * x[4],
    ]
}

fn tracker_stiff_rate(x: &[f64; 5], c: ControlInput, beta_eff: f64, p: &PhysicalParams) -> f64 {
    let modulation = 1.0 + beta_eff * c.u;
    let g = 8.0 * p.eta * p.alpha * modulation;
    let w2 = p.mass * p.omega * p.omega * modulation;
    let var_p_floor = x[3].abs().max(f64::MIN_POSITIVE);
    let contraction = 2.0 * p.gamma_c + g * (x[2].abs() + x[4] * x[4] / var_p_floor);
    let rotation = (2.0 / p.mass * (w2 + g * x[4].abs())).sqrt();
    contraction + rotation + 2.0 * p.omega
}

fn rk4<F: Fn(&[f64; 5]) -> [f64; 5]>(x: &[f64; 5], f: F, dt: f64) -> [f64; 5] {
    let k1 = f(x);
    let mut x2 = *x;
    for i in 0..5 {
        x2[i] += 0.5 * dt * k1[i];
    }
    let k2 = f(&x2);
    let mut x3 = *x;
    for i in 0..5 {
        x3[i] += 0.5 * dt * k2[i];
    }
    let k3 = f(&x3);
    let mut x4 = *x;
    for i in 0..5 {
        x4[i] += dt * k3[i];
    }
    let k4 = f(&x4);
    let mut out = *x;
    for i in 0..5 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn step_ok(old: &[f64; 5], new: &[f64; 5]) -> bool {
    if !new.iter().all(|v| v.is_finite()) || new[2] <= 0.0 || new[3] <= 0.0 {
        return false;
    }
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    rel(new[2], old[2]) < 0.9 && rel(new[3], old[3]) < 0.9
}

const CFL: f64 = 0.8;
const MAX_SUBSTEPS: usize = 50_000_000;

fn advance_rhs<F: Fn(&[f64; 5]) -> [f64; 5]>(
    x: &mut [f64; 5],
    rhs: F,
    rate: impl Fn(&[f64; 5]) -> f64,
    dt: f64,
    time: f64,
) -> Result<(), TrackError> {
    let mut remaining = dt;
    for _ in 0..MAX_SUBSTEPS {
        if remaining <= 0.0 {
            return Ok(());
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(TrackError::TrackingLost { time });
        }
        let mut h = remaining.min(CFL / rate(x));
        if h >= remaining * (1.0 - 1e-12) {
            h = remaining;
        }
        let out = loop {
            let trial = rk4(x, &rhs, h);
            if step_ok(x, &trial) {
                break trial;
            }
            h *= 0.5;
            if h < 1e-12 * dt {
                return Err(TrackError::StepFailure { time });
            }
        };
        *x = out;
        remaining -= h;
    }
    Err(TrackError::StepFailure { time })
}

/// Advance the tracker by one control sub-step with the measurement sample
/// held constant. Deterministic; identical inputs give bit-identical output.
pub fn step_tracking(
    x: &TrackerState,
    j: f64,
    c: ControlInput,
    p: &PhysicalParams,
    dt: f64,
) -> Result<TrackerState, TrackError> {
    let beta_eff = x.effective_beta(p);
    let mut arr = x.moments.to_array();
    advance_rhs(
        &mut arr,
        |v| tracking_drift(v, j, c, beta_eff, p),
        |v| tracker_stiff_rate(v, c, beta_eff, p),
        dt,
        x.time,
    )?;
    if !arr.iter().all(|v| v.is_finite()) {
        return Err(TrackError::TrackingLost { time: x.time + dt });
    }
    Ok(TrackerState { moments: GaussianMoments::from_array(arr), mode: x.mode, time: x.time + dt })
}

/// Zero-innovation prediction step, the propagation primitive of the
/// look-ahead controller.
pub fn step_prediction(
    x: &TrackerState,
    c: ControlInput,
    p: &PhysicalParams,
    dt: f64,
) -> Result<TrackerState, TrackError> {
    let beta_eff = x.effective_beta(p);
    let mut arr = x.moments.to_array();
    advance_rhs(
        &mut arr,
        |v| prediction_drift(v, c, beta_eff, p),
        |v| tracker_stiff_rate(v, c, beta_eff, p),
        dt,
        x.time,
    )?;
    Ok(TrackerState { moments: GaussianMoments::from_array(arr), mode: x.mode, time: x.time + dt })
}

/// Stable root of the algebraic system obtained by zeroing the tracker
/// variance equations at a constant control `u_const`. Newton iteration with
/// the analytic Jacobian, seeded from the closed-form gamma_c = 0 solution.
///
/// The time-propagated tracker variances converge to this root from any
/// positive initialization.
pub fn steady_state_variances(
    p: &PhysicalParams,
    u_const: f64,
) -> Result<(f64, f64, f64), TrackError> {
    let modulation = 1.0 + p.beta * u_const;
    let k = p.alpha * modulation;
    let g = 8.0 * p.eta * k;
    let w2 = p.mass * p.omega * p.omega * modulation;
    let gc = p.gamma_c;
    let big_gamma = p.gas_decoherence_rate();
    let floor = p.gas_variance_floor();
    let hbar2 = HBAR * HBAR;
    let m = p.mass;
    let pumping = hbar2 * big_gamma + 2.0 * hbar2 * k;

    if g == 0.0 {
        return Err(TrackError::NoConvergence);
    }

    // gamma_c = 0 closed form as the Newton seed.
    let x5_seed = (-w2 + (w2 * w2 + g * pumping).sqrt()) / g;
    let x3_seed = (2.0 * x5_seed / (m * g)).sqrt();
    let mut v = [x3_seed, m * (w2 * x3_seed + g * x3_seed * x5_seed), x5_seed];

    let residual = |v: &[f64; 3]| -> [f64; 3] {
        [
            2.0 * v[2] / m - 2.0 * gc * v[0] + floor - g * v[0] * v[0],
            -2.0 * w2 * v[2] - 2.0 * gc * v[1] + pumping - g * v[2] * v[2],
            v[1] / m - w2 * v[0] - 2.0 * gc * v[2] - g * v[0] * v[2],
        ]
    };

    let mut converged = false;
    for _ in 0..200 {
        let f = residual(&v);
        let jac = [
            [-2.0 * gc - 2.0 * g * v[0], 0.0, 2.0 / m],
            [0.0, -2.0 * gc, -2.0 * w2 - 2.0 * g * v[2]],
            [-w2 - g * v[2], 1.0 / m, -2.0 * gc - g * v[0]],
        ];
        let Some(dv) = solve3(&jac, &f) else {
            return Err(TrackError::NoConvergence);
        };
        let mut step_rel: f64 = 0.0;
        for i in 0..3 {
            v[i] -= dv[i];
            step_rel = step_rel.max((dv[i] / v[i].abs().max(f64::MIN_POSITIVE)).abs());
        }
        if step_rel < 1e-13 {
            converged = true;
            break;
        }
    }
    if !converged || !(v[0] > 0.0 && v[1] > 0.0) || v.iter().any(|x| !x.is_finite()) {
        return Err(TrackError::NoConvergence);
    }
    Ok((v[0], v[1], v[2]))
}

fn solve3(a: &[[f64; 3]; 3], b: &[f64; 3]) -> Option<[f64; 3]> {
    let mut m = *a;
    let mut r = *b;
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col] == 0.0 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for cc in col..3 {
                m[row][cc] -= f * m[col][cc];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut acc = r[row];
        for cc in row + 1..3 {
            acc -= m[row][cc] * x[cc];
        }
        x[row] = acc / m[row][row];
    }
    Some(x)
}
