//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers (run with `--nocapture` to see them on success).
//!
//! Closed-loop criteria use the validated coarse emulation step (5 ns)
//! except where the fine step is the point of the check; multi-seed
//! batches run in parallel and every seed is fixed, so the whole suite is
//! deterministic.

use rayon::prelude::*;

use levcool_core::emulate::advance_deterministic;
use levcool_core::params::{AIR_MOLAR_MASS, EPSTEIN_SPECULAR, HBAR, K_B};
use levcool_core::*;

/// Paper-parameter base: silica particle, omega = 2 pi x 70 kHz, T = 300 K,
/// eta = 0.003, alpha = 4.04e25, gas via the pressure knob.
fn reference_config(pressure_mbar: f64) -> RunConfig {
    RunConfig {
        params: PhysicalParams::silica_70khz(),
        pressure: Some(PressureSpec {
            mbar: pressure_mbar,
            particle_radius: 50e-9,
            gas_molar_mass: AIR_MOLAR_MASS,
            c_drag: EPSTEIN_SPECULAR,
        }),
        timing: LoopTiming { dt_e: 5e-9, m: 200, n: 5, t_prep: 5e-3, t_total: 30e-3 },
        controller: ControllerKind::DoublePhase,
        tracking: TrackingMode::Modulated,
        emulate: EmulateOpts::default(),
        seed: 0,
        record_stride: 10,
        v_scale: None,
    }
}

fn fine_timing() -> LoopTiming {
    LoopTiming { dt_e: 0.5e-9, m: 2000, n: 5, t_prep: 5e-3, t_total: 30e-3 }
}

fn run_seeds(base: &RunConfig, seeds: &[u64]) -> Vec<RunOutput> {
    seeds
        .par_iter()
        .map(|&s| {
            let mut cfg = base.clone();
            cfg.seed = s;
            run(&cfg).expect("valid config")
        })
        .collect()
}

/// Pointwise ensemble average of the phonon trace over aligned runs; the
/// initial energy is a thermal draw per seed, so single traces start
/// anywhere in the exponential energy distribution while the ensemble mean
/// decays cleanly from near k_B T.
fn ensemble_average(outputs: &[RunOutput]) -> Vec<TraceRecord> {
    let len = outputs.iter().map(|o| o.records.len()).min().unwrap();
    (0..len)
        .map(|i| {
            let mut rec = outputs[0].records[i];
            rec.phonons_true =
                outputs.iter().map(|o| o.records[i].phonons_true).sum::<f64>() / outputs.len() as f64;
            rec
        })
        .collect()
}

/// Mean and standard error of the per-run steady-state phonon numbers.
fn pooled_steady(outputs: &[RunOutput], onset: f64) -> (f64, f64, usize) {
    let opts = SteadyStateOptions { onset, ..Default::default() };
    let means: Vec<f64> = outputs
        .iter()
        .filter(|o| !o.termination.is_lost())
        .map(|o| steady_state_phonon(&o.records, &opts).mean)
        .collect();
    let unconverged = outputs
        .iter()
        .filter(|o| {
            o.termination.is_lost() || !steady_state_phonon(&o.records, &opts).converged
        })
        .count();
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    let se = if means.len() > 1 {
        (means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    (mean, se, unconverged)
}

fn fit_ensemble(outputs: &[RunOutput], onset: f64, fraction: f64) -> FitResult {
    let avg = ensemble_average(outputs);
    fit_cooling_rate(
        &avg,
        &FitOptions { onset: Some(onset), decay_fraction: fraction, min_samples: 5 },
    )
    .expect("ensemble trace decays")
}

/// Criterion 1: cooling-rate reproduction at the reference protocol
/// (beta = 0.01, double phase, dt_E = 0.5 ns, M = 2000, N = 5,
/// t_prep = 5 ms, 1e-2 mbar reference pressure): fitted r_c within
/// [7e2, 6e3] 1/s. Also validates the 5 ns coarse mode: steady-state
/// phonon shift below 5% against the fine mode (checked at beta = 0.1,
/// where steady-state fluctuations are small enough to resolve 5%).
#[test]
fn criterion_1_cooling_rate_and_coarse_mode() {
    // Fine-mode rate fit over five seeds. The cooled floor at the
    // reference pressure sits ~e^2.8 below thermal, so the fit window uses
    // the configurable fraction e^-2.
    let mut fine = reference_config(1e-2);
    fine.params.beta = 0.01;
    fine.timing = fine_timing();
    fine.timing.t_total = 12e-3;
    fine.record_stride = 1;
    let outs = run_seeds(&fine, &[11, 12, 13, 14, 15]);
    for o in &outs {
        assert!(!o.termination.is_lost(), "fine run lost: {:?}", o.termination);
    }
    let fit = fit_ensemble(&outs, 5e-3, (-2.0f64).exp());
    println!(
        "criterion 1a: fine-mode ensemble r_c = {:.0} 1/s (band [700, 6000]) -> {}",
        fit.rate,
        verdict(fit.rate > 7e2 && fit.rate < 6e3)
    );
    assert!(fit.rate > 7e2 && fit.rate < 6e3, "r_c = {} outside the band", fit.rate);

    // Coarse-mode validation at beta = 0.1.
    let seeds: Vec<u64> = (21..33).collect();
    let mut coarse = reference_config(1e-2);
    coarse.params.beta = 0.1;
    coarse.timing.t_total = 40e-3;
    let mut fine10 = coarse.clone();
    fine10.timing = fine_timing();
    fine10.timing.t_total = 40e-3;
    let (coarse_outs, fine_outs) =
        rayon::join(|| run_seeds(&coarse, &seeds), || run_seeds(&fine10, &seeds));
    let (n_coarse, se_c, _) = pooled_steady(&coarse_outs, 5e-3);
    let (n_fine, se_f, _) = pooled_steady(&fine_outs, 5e-3);
    let shift = (n_coarse / n_fine - 1.0).abs();
    println!(
        "criterion 1b: coarse-mode steady n {n_coarse:.3e} (se {se_c:.1e}) vs fine {n_fine:.3e} (se {se_f:.1e}), shift {:.1}% (< 5%) -> {}",
        shift * 100.0,
        verdict(shift < 0.05)
    );
    assert!(shift < 0.05, "coarse-mode shift {shift:.3} exceeds 5%");
}

/// Criterion 2: at beta = 0.01 the steady-state phonon numbers of
/// optimal quadratic and double-phase feedback agree within a factor of 2
/// (5 seeds each).
#[test]
fn criterion_2_optimal_matches_double_phase() {
    let seeds = [31, 32, 33, 34, 35];
    let mut dp = reference_config(1e-2);
    dp.params.beta = 0.01;
    let mut oq = dp.clone();
    oq.controller = ControllerKind::OptimalQuadratic;
    let (dp_outs, oq_outs) = rayon::join(|| run_seeds(&dp, &seeds), || run_seeds(&oq, &seeds));
    let (n_dp, se_dp, _) = pooled_steady(&dp_outs, 5e-3);
    let (n_oq, se_oq, _) = pooled_steady(&oq_outs, 5e-3);
    let ratio = n_oq / n_dp;
    println!(
        "criterion 2: optimal quadratic n = {n_oq:.3e} (se {se_oq:.1e}), double phase n = {n_dp:.3e} (se {se_dp:.1e}), ratio {ratio:.2} (within [0.5, 2]) -> {}",
        verdict(ratio > 0.5 && ratio < 2.0)
    );
    assert!(ratio > 0.5 && ratio < 2.0, "ratio {ratio} outside factor-2 band");
}

/// Criterion 3: with unmodulated tracking, raising beta from 0.01 to 0.05
/// degrades the cooling (steady n increases; the filter loses lock), while
/// modulated tracking keeps improving. Checked in the photon-dominated
/// regime (1e-7 mbar) where the tracker gain is low enough for lock loss
/// to occur.
#[test]
fn criterion_3_modulated_vs_unmodulated_tracking() {
    let seeds = [41, 42, 43, 44, 45];
    let steady_or_inf = |outs: &[RunOutput]| -> (f64, usize) {
        let opts = SteadyStateOptions { onset: 5e-3, ..Default::default() };
        let mut lost = 0;
        let vals: Vec<f64> = outs
            .iter()
            .map(|o| {
                if o.termination.is_lost() {
                    lost += 1;
                    f64::INFINITY
                } else {
                    steady_state_phonon(&o.records, &opts).mean
                }
            })
            .collect();
        // median is robust against a single diverged-to-infinity run
        let mut sorted = vals.clone();
        sorted.sort_by(f64::total_cmp);
        (sorted[sorted.len() / 2], lost)
    };
    let mut cases = Vec::new();
    for (mode, beta) in [
        (TrackingMode::Modulated, 0.01),
        (TrackingMode::Modulated, 0.05),
        (TrackingMode::Unmodulated, 0.01),
        (TrackingMode::Unmodulated, 0.05),
    ] {
        let mut cfg = reference_config(1e-7);
        cfg.params.beta = beta;
        cfg.tracking = mode;
        cases.push((mode, beta, run_seeds(&cfg, &seeds)));
    }
    let (n_mod_lo, _) = steady_or_inf(&cases[0].2);
    let (n_mod_hi, _) = steady_or_inf(&cases[1].2);
    let (n_unm_lo, _) = steady_or_inf(&cases[2].2);
    let (n_unm_hi, lost_hi) = steady_or_inf(&cases[3].2);
    println!(
        "criterion 3: modulated n(0.01) = {n_mod_lo:.3e} -> n(0.05) = {n_mod_hi:.3e} (improves); unmodulated n(0.01) = {n_unm_lo:.3e} -> n(0.05) = {n_unm_hi:.3e} ({lost_hi} lost) (degrades) -> {}",
        verdict(n_mod_hi < n_mod_lo && n_unm_hi > n_unm_lo)
    );
    assert!(n_mod_hi < n_mod_lo, "modulated tracking failed to improve with beta");
    assert!(n_unm_hi > n_unm_lo, "unmodulated tracking failed to degrade with beta");
}

/// Criterion 4: the linear-feedback strength sweep (4 decades) has an
/// interior phonon minimum with statistical significance over 5 seeds, and
/// cold damping diverges beyond a critical strength.
#[test]
fn criterion_4_linear_feedback_optimal_range() {
    let mut base = reference_config(1e-2);
    base.controller = ControllerKind::OptimalLinear;
    base.seed = 4000;
    let spec = SweepSpec {
        axis: SweepAxis::Delta,
        values: vec![1e-17, 1e-16, 1e-15, 1e-14, 1e-13],
        repeats: 5,
        base,
    };
    let result = sweep(&spec).unwrap();
    let n = |i: usize| result.points[i].phonon_mean.unwrap();
    let se = |i: usize| result.points[i].phonon_se.unwrap();
    // interior minimum at delta* = 1e-14 (index 3)
    let sig_below = |a: usize, b: usize| n(a) + 2.0 * se(a) < n(b) - 2.0 * se(b);
    let min_ok = sig_below(3, 2) && sig_below(3, 4);
    println!(
        "criterion 4a: optimal linear n over delta grid = [{}], interior minimum at 1e-14 -> {}",
        result
            .points
            .iter()
            .map(|p| format!("{:.2e}", p.phonon_mean.unwrap()))
            .collect::<Vec<_>>()
            .join(", "),
        verdict(min_ok)
    );
    assert!(min_ok, "no significant interior minimum");

    let mut cold = reference_config(1e-2);
    cold.controller = ControllerKind::ColdDamping;
    cold.seed = 4100;
    let cold_spec = SweepSpec {
        axis: SweepAxis::Delta,
        values: vec![1e-14, 1e-13, 1e-12],
        repeats: 3,
        base: cold,
    };
    let cold_result = sweep(&cold_spec).unwrap();
    let last = cold_result.points.last().unwrap();
    let diverged = last.n_heated + last.n_lost == last.runs.len();
    let cooled_somewhere = cold_result.points[0].phonon_mean.unwrap() < 1e6;
    println!(
        "criterion 4b: cold damping n = [{}], all runs heated/lost at delta = 1e-12 -> {}",
        cold_result
            .points
            .iter()
            .map(|p| format!("{:.2e}", p.phonon_mean.unwrap_or(f64::NAN)))
            .collect::<Vec<_>>()
            .join(", "),
        verdict(diverged && cooled_somewhere)
    );
    assert!(cooled_somewhere, "cold damping never cooled below 1e6 phonons");
    assert!(diverged, "cold damping did not diverge beyond the critical strength");
}

/// Criterion 5: cooling-rate scalings. (a) log-log slope of r_c vs beta in
/// [0.8, 1.2] over one decade for quadratic feedback; (b) r_c vs delta at
/// dt = 1 us saturates (last-decade slope < 0.3); (c) at dt = 10 ns the
/// same range stays near-linear (slope > 0.7). Run at 1e-3 mbar so the
/// cooled floors stay well below the fit windows.
#[test]
fn criterion_5_rate_scalings() {
    let betas = [0.01, 0.01778, 0.03162, 0.05623, 0.1];
    let seeds = [51, 52, 53, 54];
    let rates_beta: Vec<f64> = betas
        .iter()
        .map(|&beta| {
            let mut cfg = reference_config(1e-3);
            cfg.params.beta = beta;
            cfg.timing.t_total = 10e-3;
            cfg.record_stride = 1;
            fit_ensemble(&run_seeds(&cfg, &seeds), 5e-3, (-3.0f64).exp()).rate
        })
        .collect();
    let slope_beta = loglog_slope(&betas, &rates_beta);
    println!(
        "criterion 5a: r_c vs beta = {:?}, log-log slope {slope_beta:.2} (in [0.8, 1.2]) -> {}",
        rates_beta.iter().map(|r| *r as i64).collect::<Vec<_>>(),
        verdict((0.8..=1.2).contains(&slope_beta))
    );
    assert!((0.8..=1.2).contains(&slope_beta), "beta slope {slope_beta}");

    // (b) delta sweep at dt = 1 us (coarse loop timing).
    let deltas = [1e-15, 3.162e-15, 1e-14, 3.162e-14, 1e-13];
    let rate_for = |delta: f64, timing: LoopTiming, stride: usize, seeds: &[u64]| -> f64 {
        let mut cfg = reference_config(1e-3);
        cfg.controller = ControllerKind::OptimalLinear;
        cfg.params.delta = delta;
        cfg.timing = timing;
        cfg.record_stride = stride;
        fit_ensemble(&run_seeds(&cfg, seeds), 5e-3, (-3.0f64).exp()).rate
    };
    let slow = LoopTiming { dt_e: 5e-9, m: 200, n: 5, t_prep: 5e-3, t_total: 10e-3 };
    let rates_slow: Vec<f64> =
        deltas.iter().map(|&d| rate_for(d, slow, 1, &[61, 62, 63, 64])).collect();
    let last_decade_slow = loglog_slope(&deltas[2..], &rates_slow[2..]);
    println!(
        "criterion 5b: r_c vs delta at dt = 1 us = {:?}, last-decade slope {last_decade_slow:.2} (< 0.3) -> {}",
        rates_slow.iter().map(|r| *r as i64).collect::<Vec<_>>(),
        verdict(last_decade_slow < 0.3)
    );

    // (c) the same range at dt = 10 ns (M = 20 at the fine emulation step).
    let fast = LoopTiming { dt_e: 0.5e-9, m: 20, n: 5, t_prep: 5e-3, t_total: 5.6e-3 };
    let rates_fast: Vec<f64> =
        deltas.iter().map(|&d| rate_for(d, fast, 2, &[71, 72, 73])).collect();
    let last_decade_fast = loglog_slope(&deltas[2..], &rates_fast[2..]);
    println!(
        "criterion 5c: r_c vs delta at dt = 10 ns = {:?}, last-decade slope {last_decade_fast:.2} (> 0.7) -> {}",
        rates_fast.iter().map(|r| *r as i64).collect::<Vec<_>>(),
        verdict(last_decade_fast > 0.7)
    );
    assert!(last_decade_slow < 0.3, "dt = 1 us slope {last_decade_slow} not saturated");
    assert!(last_decade_fast > 0.7, "dt = 10 ns slope {last_decade_fast} not near-linear");
}

/// Criterion 6: steady-state phonon number vs pressure at beta = 0.01:
/// monotone decreasing (within error bars) from 1e-2 down through 1e-6
/// mbar, and the two lowest points sit on the photon-recoil plateau
/// (difference < 20%).
#[test]
fn criterion_6_pressure_behavior() {
    let mut base = reference_config(1e-2);
    base.params.beta = 0.01;
    base.timing.t_total = 40e-3;
    base.seed = 6000;
    let spec = SweepSpec {
        axis: SweepAxis::Pressure,
        values: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10],
        repeats: 6,
        base,
    };
    let result = sweep(&spec).unwrap();
    let pts: Vec<(f64, f64)> = result
        .points
        .iter()
        .map(|p| (p.phonon_mean.unwrap(), p.phonon_se.unwrap()))
        .collect();
    let mut monotone = true;
    for w in pts.windows(2) {
        if w[1].0 > w[0].0 + 2.0 * (w[0].1 + w[1].1) {
            monotone = false;
        }
    }
    let (n_a, _) = pts[pts.len() - 2];
    let (n_b, _) = pts[pts.len() - 1];
    let plateau = (n_b - n_a).abs() / n_a < 0.20;
    println!(
        "criterion 6: n vs pressure = [{}], monotone -> {}, plateau diff {:.1}% (< 20%) -> {}",
        pts.iter().map(|p| format!("{:.3e}", p.0)).collect::<Vec<_>>().join(", "),
        verdict(monotone),
        100.0 * (n_b - n_a).abs() / n_a,
        verdict(plateau)
    );
    assert!(monotone, "phonon number not monotone in pressure");
    assert!(plateau, "no photon-recoil plateau at the lowest pressures");
}

/// Criterion 7: the always-runnable property suite.
#[test]
fn criterion_7_property_suite() {
    let p = PhysicalParams::silica_70khz();

    // |double_phase| <= 1 for 1e6 random states (exact AM-GM bound).
    let mut s = 0x7_0001u64;
    let mut uniform = move || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64
    };
    let (v3, v4, v5) = steady_state_variances(&p, 0.0).unwrap();
    let floor = control::default_energy_floor(p.omega);
    for _ in 0..1_000_000 {
        let scale = 10f64.powf(uniform() * 12.0 - 6.0);
        let z = (uniform() - 0.5) * 2e-7 * scale;
        let pm = (uniform() - 0.5) * 1.2e-19 * scale;
        let x = TrackerState::new(GaussianMoments::new(z, pm, v3, v4, v5), TrackingMode::Modulated);
        let u = double_phase(&x, p.mass, p.omega, floor);
        assert!(u.abs() <= 1.0, "|u| > 1 at z = {z:e}, p = {pm:e}");
    }
    println!("criterion 7.1: |double_phase| <= 1 over 1e6 random states -> PASS");

    // Tracker fixed-point uncertainty product over 100 random parameter
    // draws; exact purity at eta = 1 with no gas.
    let mut draws = 0;
    while draws < 100 {
        let params = PhysicalParams {
            mass: 10f64.powf(uniform() * 3.0 - 20.0),
            omega: 2.0 * std::f64::consts::PI * 10f64.powf(uniform() * 2.0 + 4.0),
            temperature: 10f64.powf(uniform() * 3.0),
            eta: 0.01 + 0.99 * uniform(),
            alpha: 10f64.powf(uniform() * 5.0 + 22.0),
            gamma_c: 10f64.powf(uniform() * 8.0 - 3.0),
            beta: 0.5 * uniform(),
            delta: 0.0,
        };
        let u = 2.0 * uniform() - 1.0;
        let Ok((x3, x4, x5)) = steady_state_variances(&params, u) else {
            continue;
        };
        draws += 1;
        let product = x3 * x4 - x5 * x5;
        assert!(
            product >= HBAR * HBAR / 4.0 * (1.0 - 1e-6),
            "uncertainty product violated: {:e} at {params:?}",
            product / (HBAR * HBAR / 4.0)
        );
    }
    let mut pure = p;
    pure.eta = 1.0;
    let (x3, x4, x5) = steady_state_variances(&pure, 0.0).unwrap();
    let purity = (x3 * x4 - x5 * x5) / (HBAR * HBAR / 4.0);
    assert!((purity - 1.0).abs() < 1e-9, "purity {purity}");
    println!("criterion 7.2: tracker uncertainty product over 100 draws, purity at eta = 1 -> PASS");

    // Riccati consistency: propagated tracker variances vs the algebraic
    // root to 1e-6 relative.
    let mut gas = p;
    gas.gamma_c = 60.456;
    let (r3, r4, r5) = steady_state_variances(&gas, 0.0).unwrap();
    let g = 8.0 * gas.eta * gas.alpha;
    let mut x = TrackerState::new(thermal_state(&gas), TrackingMode::Modulated);
    let steps = (25.0 / (g * r3) / 2e-7).ceil() as usize;
    for _ in 0..steps {
        x = step_tracking(&x, x.moments.mean_z, ControlInput::OFF, &gas, 2e-7).unwrap();
    }
    let worst = [
        (x.moments.var_z / r3 - 1.0).abs(),
        (x.moments.var_p / r4 - 1.0).abs(),
        (x.moments.cov / r5 - 1.0).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    assert!(worst < 1e-6, "Riccati consistency off by {worst:e}");
    println!("criterion 7.3: Riccati propagation vs algebraic root, worst {worst:.1e} -> PASS");

    // Energy conservation of the decoupled oscillator over 100 periods.
    let mut iso = p;
    iso.alpha = 0.0;
    let mut state = EmulationState::new(GaussianMoments::new(1.5e-7, 0.0, 1e-22, 1e-47, 0.0));
    let e0 = mean_energy(&state.moments, iso.mass, iso.omega);
    let period = 2.0 * std::f64::consts::PI / iso.omega;
    for _ in 0..((100.0 * period / 0.5e-9).round() as usize) {
        state = step_srk4(
            &state,
            ControlInput::OFF,
            &NoiseIncrements::ZERO,
            0.5e-9,
            &iso,
            &EmulateOpts::default(),
        )
        .unwrap();
    }
    let drift_rel = (mean_energy(&state.moments, iso.mass, iso.omega) / e0 - 1.0).abs();
    assert!(drift_rel < 1e-6, "energy drift {drift_rel:e}");
    println!("criterion 7.4: decoupled-oscillator energy drift {drift_rel:.1e} over 100 periods -> PASS");

    // Determinism: identical seed, byte-identical trace CSV.
    let mut cfg = reference_config(1e-2);
    cfg.timing.t_total = 7e-3;
    cfg.params.beta = 0.01;
    let (a, b) = rayon::join(|| run(&cfg).unwrap(), || run(&cfg).unwrap());
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    write_trace_csv(&mut csv_a, &a.records).unwrap();
    write_trace_csv(&mut csv_b, &b.records).unwrap();
    assert_eq!(csv_a, csv_b, "trace CSV not byte-identical");
    println!("criterion 7.5: identical seed gives byte-identical trace CSV -> PASS");

    // Homodyne statistics: J variance with y1 = 0 matches 1/(8 eta k dt)
    // within 5% over 1e4 windows.
    let eta = p.eta;
    let k = p.alpha;
    let dt_e = 5e-9;
    let m_sub = 200;
    let dt = m_sub as f64 * dt_e;
    let mut streams = RngStreams::new(777);
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for _ in 0..10_000 {
        let mut acc = HomodyneAccumulator::new();
        for _ in 0..m_sub {
            let noise = streams.draw(dt_e);
            acc.add(HomodyneSample { y1: 0.0, dw: noise.dw, k, dt: dt_e }, eta).unwrap();
        }
        let j = acc.finish(dt);
        sum += j;
        sum2 += j * j;
    }
    let var = sum2 / 1e4 - (sum / 1e4) * (sum / 1e4);
    let expect = 1.0 / (8.0 * eta * k * dt);
    let err = (var / expect - 1.0).abs();
    assert!(err < 0.05, "homodyne variance off by {err:.3}");
    println!("criterion 7.6: homodyne variance {var:.3e} vs {expect:.3e} ({err:.1%}) -> PASS");

    // enumerate_optimal N = 1 equals the lower-cost branch on 1e4 states.
    let mut quad = gas;
    quad.beta = 0.01;
    let dt_c = 2e-7;
    let (q3, q4, q5) = steady_state_variances(&quad, 0.0).unwrap();
    let mut agree_sign = 0usize;
    for _ in 0..10_000 {
        let scale = 10f64.powf(uniform() * 4.0 - 2.0);
        let z = (uniform() - 0.5) * 2e-8 * scale;
        let pm = (uniform() - 0.5) * 1.2e-20 * scale;
        let x = TrackerState::new(GaussianMoments::new(z, pm, q3, q4, q5), TrackingMode::Modulated);
        let plan =
            enumerate_optimal(&x, &quad, dt_c, 1, ControllerKind::OptimalQuadratic, None).unwrap();
        let mut up = ControlPlan::zeros(1);
        up.u_seq[0] = 1.0;
        let mut down = ControlPlan::zeros(1);
        down.u_seq[0] = -1.0;
        let cost_up = lookahead_propagate(&x, &up, &quad, dt_c);
        let cost_down = lookahead_propagate(&x, &down, &quad, dt_c);
        let brute = if cost_up <= cost_down { 1.0 } else { -1.0 };
        assert_eq!(plan.u_seq[0], brute, "selection mismatch at z = {z:e}, p = {pm:e}");
        if plan.u_seq[0] == (z * pm).signum() {
            agree_sign += 1;
        }
    }
    assert!(
        agree_sign >= 9_000,
        "bang-bang sign agrees with sign(x1 x2) in only {agree_sign}/10000 states"
    );
    println!(
        "criterion 7.7: N = 1 enumeration equals brute force on 1e4 states (sign agreement {:.1}%) -> PASS",
        agree_sign as f64 / 100.0
    );

    // keep the deterministic variance driver honest as well
    let mut det = EmulationState::new(thermal_state(&gas));
    advance_deterministic(&mut det, ControlInput::OFF, &gas, &EmulateOpts::default(), 1e-3)
        .unwrap();
    assert!(det.moments.is_physical());
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
