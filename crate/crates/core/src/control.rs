//! Feedback signal generation: the classic double-phase parametric signal
//! and cold damping, plus receding-horizon bang-bang control found by
//! exhaustively enumerating every sign sequence over the look-ahead horizon
//! and keeping the one whose predicted mean energy is lowest.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::{PhysicalParams, HBAR, K_B};
use crate::state::{mean_energy, ControlInput};
use crate::track::{step_prediction, TrackerState};

/// Hard cap on the look-ahead horizon; the enumeration is exponential.
pub const MAX_HORIZON: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("horizon {0} exceeds the enumeration guard of {MAX_HORIZON}")]
    HorizonTooLong(usize),
    #[error("control infeasible: every branch prediction diverged")]
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    Off,
    DoublePhase,
    ColdDamping,
    OptimalQuadratic,
    OptimalLinear,
    OptimalCombined,
}

impl ControllerKind {
    /// Does this controller drive the quadratic channel?
    pub fn uses_u(self) -> bool {
        matches!(
            self,
            ControllerKind::DoublePhase
                | ControllerKind::OptimalQuadratic
                | ControllerKind::OptimalCombined
        )
    }

    /// Does this controller drive the linear channel?
    pub fn uses_v(self) -> bool {
        matches!(
            self,
            ControllerKind::ColdDamping
                | ControllerKind::OptimalLinear
                | ControllerKind::OptimalCombined
        )
    }
}

/// A full control schedule for one measurement interval: `n` sub-steps of
/// length dt_C with per-sub-step values for both channels, plus the
/// predicted cost used to select it. Enumerated (bang-bang) plans carry
/// entries in {-1, +1} on active channels and 0 on inactive ones; the
/// classic controllers replicate their continuous scalar across the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlPlan {
    pub n: usize,
    pub u_seq: [f64; MAX_HORIZON],
    pub v_seq: [f64; MAX_HORIZON],
    pub cost: f64,
}

impl ControlPlan {
    pub fn zeros(n: usize) -> Self {
        Self { n, u_seq: [0.0; MAX_HORIZON], v_seq: [0.0; MAX_HORIZON], cost: f64::NAN }
    }

    pub fn constant(n: usize, u: f64, v: f64) -> Self {
        Self { n, u_seq: [u; MAX_HORIZON], v_seq: [v; MAX_HORIZON], cost: f64::NAN }
    }

    pub fn control_at(&self, sub_step: usize) -> ControlInput {
        ControlInput { u: self.u_seq[sub_step], v: self.v_seq[sub_step] }
    }
}

/// Double-phase parametric signal u = omega x1 x2 / E with
/// E = x2^2/2m + m omega^2 x1^2 / 2; |u| <= 1 by the AM-GM inequality.
/// Returns 0 below the energy floor (default 1e-3 hbar omega) where the
/// ratio degenerates to 0/0.
pub fn double_phase(x: &TrackerState, mass: f64, omega: f64, energy_floor: f64) -> f64 {
    let x1 = x.moments.mean_z;
    let x2 = x.moments.mean_p;
    let energy = x2 * x2 / (2.0 * mass) + 0.5 * mass * omega * omega * x1 * x1;
    if energy < energy_floor {
        return 0.0;
    }
    (omega * x1 * x2 / energy).clamp(-1.0, 1.0)
}

/// Default energy floor for [`double_phase`].
pub fn default_energy_floor(omega: f64) -> f64 {
    1e-3 * HBAR * omega
}

/// Cold damping: v = -x2 / (m v_scale), clipped to [-1, 1]. The sign
/// opposes the estimated momentum so that the +delta v force term damps;
/// `v_scale` normalizes the velocity (default: RMS thermal velocity).
pub fn cold_damping(x: &TrackerState, mass: f64, v_scale: f64) -> f64 {
    (-x.moments.mean_p / (mass * v_scale)).clamp(-1.0, 1.0)
}

/// Default velocity normalization for [`cold_damping`]:
/// sqrt(k_B T / m), the RMS thermal velocity.
pub fn default_v_scale(p: &PhysicalParams) -> f64 {
    (K_B * p.temperature / p.mass).sqrt()
}

/// Propagate a copy of the estimate through the plan with zero innovation
/// (J := x1 at every sub-step) and return the predicted mean energy at the
/// horizon end. Non-finite predictions cost +infinity and the branch is
/// discarded.
pub fn lookahead_propagate(
    x: &TrackerState,
    plan: &ControlPlan,
    p: &PhysicalParams,
    dt_c: f64,
) -> f64 {
    let mut state = *x;
    for s in 0..plan.n {
        match step_prediction(&state, plan.control_at(s), p, dt_c) {
            Ok(next) => state = next,
            Err(_) => return f64::INFINITY,
        }
    }
    let e = mean_energy(&state.moments, p.mass, p.omega);
    if e.is_finite() {
        e
    } else {
        f64::INFINITY
    }
}

fn plan_from_masks(kind: ControllerKind, n: usize, u_mask: u32, v_mask: u32) -> ControlPlan {
    let mut plan = ControlPlan::zeros(n);
    for s in 0..n {
        if kind.uses_u() {
            plan.u_seq[s] = if u_mask >> s & 1 == 1 { 1.0 } else { -1.0 };
        }
        if kind.uses_v() {
            plan.v_seq[s] = if v_mask >> s & 1 == 1 { 1.0 } else { -1.0 };
        }
    }
    plan
}

/// Sign mismatches against the previous plan, summed over both channels.
fn switches_vs_prev(plan: &ControlPlan, prev: Option<&ControlPlan>) -> usize {
    let Some(prev) = prev else { return 0 };
    let mut count = 0;
    for s in 0..plan.n.min(prev.n) {
        if plan.u_seq[s] != prev.u_seq[s] {
            count += 1;
        }
        if plan.v_seq[s] != prev.v_seq[s] {
            count += 1;
        }
    }
    count
}

/// Lexicographic preference with +1 ahead of -1, u channel first.
fn lex_preferred(a: &ControlPlan, b: &ControlPlan) -> bool {
    for s in 0..a.n {
        if a.u_seq[s] != b.u_seq[s] {
            return a.u_seq[s] > b.u_seq[s];
        }
    }
    for s in 0..a.n {
        if a.v_seq[s] != b.v_seq[s] {
            return a.v_seq[s] > b.v_seq[s];
        }
    }
    false
}

/// Exhaustive receding-horizon selection: evaluate the predicted cost of
/// every bang-bang sequence (2^N for a single channel, 4^N combined) and
/// return the minimal-cost plan.
///
/// Ties within 1e-12 relative cost are broken by fewest sign switches
/// against `prev`, then lexicographically with +1 before -1 — so a control
/// channel with no effect (e.g. beta = 0 on the quadratic channel) yields
/// the continuation of the previous plan rather than chatter. The branch
/// costs are evaluated independently and the selection is a deterministic
/// function of the full cost table: evaluation order cannot change the
/// result.
pub fn enumerate_optimal(
    x: &TrackerState,
    p: &PhysicalParams,
    dt_c: f64,
    n: usize,
    kind: ControllerKind,
    prev: Option<&ControlPlan>,
) -> Result<ControlPlan, ControlError> {
    if n > MAX_HORIZON {
        return Err(ControlError::HorizonTooLong(n));
    }
    debug_assert!(matches!(
        kind,
        ControllerKind::OptimalQuadratic | ControllerKind::OptimalLinear | ControllerKind::OptimalCombined
    ));

    let u_branches: u32 = if kind.uses_u() { 1 << n } else { 1 };
    let v_branches: u32 = if kind.uses_v() { 1 << n } else { 1 };
    let total = (u_branches as usize) * (v_branches as usize);

    let mut costs = vec![0.0f64; total];
    let mut best_cost = f64::INFINITY;
    for vm in 0..v_branches {
        for um in 0..u_branches {
            let plan = plan_from_masks(kind, n, um, vm);
            let cost = lookahead_propagate(x, &plan, p, dt_c);
            costs[(vm * u_branches + um) as usize] = cost;
            if cost < best_cost {
                best_cost = cost;
            }
        }
    }
    if !best_cost.is_finite() {
        return Err(ControlError::Infeasible);
    }

    // Second pass over the tied set only; the tie-break is a total order, so
    // the outcome is independent of enumeration order.
    let tie = 1e-12 * best_cost.abs();
    let mut selected: Option<(ControlPlan, usize)> = None;
    for vm in 0..v_branches {
        for um in 0..u_branches {
            let cost = costs[(vm * u_branches + um) as usize];
            if cost > best_cost + tie {
                continue;
            }
            let mut plan = plan_from_masks(kind, n, um, vm);
            plan.cost = cost;
            let sw = switches_vs_prev(&plan, prev);
            let better = match &selected {
                None => true,
                Some((cur, cur_sw)) => {
                    sw < *cur_sw || (sw == *cur_sw && lex_preferred(&plan, cur))
                }
            };
            if better {
                selected = Some((plan, sw));
            }
        }
    }
    Ok(selected.expect("tied set is non-empty").0)
}

/// Stateful dispatcher: produces the schedule for the next measurement
/// interval from the current estimate. Holds nothing but the previous plan
/// (the bang-bang tie-break reference) and the classic controllers'
/// normalization constants.
#[derive(Debug, Clone)]
pub struct Controller {
    pub kind: ControllerKind,
    prev: Option<ControlPlan>,
    v_scale: f64,
    energy_floor: f64,
}

impl Controller {
    pub fn new(kind: ControllerKind, p: &PhysicalParams, v_scale: Option<f64>) -> Self {
        Self {
            kind,
            prev: None,
            v_scale: v_scale.unwrap_or_else(|| default_v_scale(p)),
            energy_floor: default_energy_floor(p.omega),
        }
    }

    pub fn update(
        &mut self,
        x: &TrackerState,
        p: &PhysicalParams,
        dt_c: f64,
        n: usize,
    ) -> Result<ControlPlan, ControlError> {
        let plan = match self.kind {
            ControllerKind::Off => ControlPlan::zeros(n),
            ControllerKind::DoublePhase => {
                ControlPlan::constant(n, double_phase(x, p.mass, p.omega, self.energy_floor), 0.0)
            }
            ControllerKind::ColdDamping => {
                ControlPlan::constant(n, 0.0, cold_damping(x, p.mass, self.v_scale))
            }
            ControllerKind::OptimalQuadratic
            | ControllerKind::OptimalLinear
            | ControllerKind::OptimalCombined => {
                enumerate_optimal(x, p, dt_c, n, self.kind, self.prev.as_ref())?
            }
        };
        self.prev = Some(plan);
        Ok(plan)
    }
}
