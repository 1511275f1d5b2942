// Scratch exploration harness (not part of the deliverable).
use std::time::Instant;

use levcool_core::*;
use levcool_core::emulate::advance_deterministic;

fn base(pressure_mbar: f64) -> RunConfig {
    RunConfig {
        params: PhysicalParams::silica_70khz(),
        pressure: Some(PressureSpec {
            mbar: pressure_mbar,
            particle_radius: 50e-9,
            gas_molar_mass: params::AIR_MOLAR_MASS,
            c_drag: params::EPSTEIN_SPECULAR,
        }),
        timing: LoopTiming { dt_e: 5e-9, m: 200, n: 5, t_prep: 5e-3, t_total: 30e-3 },
        controller: ControllerKind::DoublePhase,
        tracking: TrackingMode::Modulated,
        emulate: EmulateOpts::default(),
        seed: 1,
        record_stride: 1,
        v_scale: None,
    }
}

fn summarize(label: &str, cfg: &RunConfig) {
    let t0 = Instant::now();
    let out = run(cfg).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    let onset = cfg.timing.t_prep;
    let fit = fit_cooling_rate(&out.records, &FitOptions { onset: Some(onset), ..Default::default() });
    let ss = steady_state_phonon(&out.records, &SteadyStateOptions { onset, ..Default::default() });
    let free: Vec<f64> = out
        .records
        .iter()
        .filter(|r| r.t < onset)
        .map(|r| r.phonons_true)
        .collect();
    let free_mean = free.iter().sum::<f64>() / free.len().max(1) as f64;
    println!(
        "{label}: {:?} | free n = {:.3e} | r_c = {:?} | ss = {:.4e} (se {:.2e}, conv {}, t_conv {:?}) | {elapsed:.2}s",
        out.termination,
        free_mean,
        fit.as_ref().map(|f| f.rate).ok(),
        ss.mean,
        ss.std_error,
        ss.converged,
        ss.t_converged,
    );
    // window means for detector calibration
    let mut windows = vec![];
    let mut t0w = onset;
    loop {
        let w: Vec<f64> = out
            .records
            .iter()
            .filter(|r| r.t > t0w && r.t <= t0w + 1e-3)
            .map(|r| r.phonons_true)
            .collect();
        if w.is_empty() {
            break;
        }
        windows.push(w.iter().sum::<f64>() / w.len() as f64);
        t0w += 1e-3;
    }
    let wstr: Vec<String> = windows.iter().map(|w| format!("{w:.2e}")).collect();
    println!("  1ms window means: {}", wstr.join(" "));
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let which = args.get(1).map(|s| s.as_str()).unwrap_or("fig1");
    match which {
        "fig1" => {
            // coarse Fig-1 protocol
            let cfg = base(1e-2);
            summarize("coarse beta=0.01 dp", &{
                let mut c = cfg.clone();
                c.params.beta = 0.01;
                c
            });
        }
        "fine" => {
            let mut c = base(1e-2);
            c.params.beta = 0.01;
            c.timing = LoopTiming { dt_e: 0.5e-9, m: 2000, n: 5, t_prep: 5e-3, t_total: 30e-3 };
            summarize("fine beta=0.01 dp", &c);
        }
        "optq" => {
            let mut c = base(1e-2);
            c.params.beta = 0.01;
            c.controller = ControllerKind::OptimalQuadratic;
            summarize("coarse beta=0.01 optQ", &c);
        }
        "mod" => {
            for beta in [0.01, 0.05, 0.1] {
                let mut c = base(1e-2);
                c.params.beta = beta;
                summarize(&format!("modulated beta={beta}"), &c);
            }
            for beta in [0.01, 0.05] {
                let mut c = base(1e-2);
                c.params.beta = beta;
                c.tracking = TrackingMode::Unmodulated;
                summarize(&format!("unmodulated beta={beta}"), &c);
            }
        }
        "lin" => {
            for delta in [1e-18, 1e-17, 1e-16, 1e-15, 1e-14, 1e-13] {
                let mut c = base(1e-2);
                c.controller = ControllerKind::OptimalLinear;
                c.params.delta = delta;
                summarize(&format!("optL delta={delta:.0e}"), &c);
            }
        }
        "cold" => {
            for delta in [1e-16, 1e-15, 1e-14, 3e-14, 1e-13] {
                let mut c = base(1e-2);
                c.controller = ControllerKind::ColdDamping;
                c.params.delta = delta;
                summarize(&format!("cold delta={delta:.0e}"), &c);
            }
        }
        "press" => {
            for mbar in [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10] {
                let mut c = base(mbar);
                c.params.beta = 0.01;
                summarize(&format!("press {mbar:.0e}"), &c);
            }
        }
        "dump" => {
            let mut c = base(1e-2);
            c.params.beta = 0.01;
            let out = run(&c).unwrap();
            for r in &out.records {
                if (r.t > 4.8e-3 && r.t < 7.0e-3) || (r.t > 4.99e-3 && r.t < 5.3e-3) {
                    println!(
                        "t={:.5e} n={:.4e} u={:+.3} y1={:+.3e} x1={:+.3e} Etrue={:.3e} Eest={:.3e}",
                        r.t, r.phonons_true, r.u, r.y.mean_z, r.x.mean_z, r.energy_true, r.energy_est
                    );
                }
            }
        }
        "dump2" => {
            // finer dump right at onset
            let mut c = base(1e-2);
            c.params.beta = 0.01;
            c.timing.t_total = 6e-3;
            let out = run(&c).unwrap();
            for r in out.records.iter().filter(|r| r.t > 4.95e-3 && r.t < 5.6e-3) {
                println!(
                    "t={:.6e} n={:.4e} u={:+.4} y1={:+.4e} y2={:+.4e} x1={:+.4e} x2={:+.4e}",
                    r.t, r.phonons_true, r.u, r.y.mean_z, r.y.mean_p, r.x.mean_z, r.x.mean_p
                );
            }
        }
        "unmod_low" => {
            for mbar in [1e-5, 1e-6] {
                for beta in [0.01, 0.05] {
                    for mode in [TrackingMode::Modulated, TrackingMode::Unmodulated] {
                        let mut c = base(mbar);
                        c.params.beta = beta;
                        c.tracking = mode;
                        summarize(&format!("p={mbar:.0e} beta={beta} {mode:?}"), &c);
                    }
                }
            }
        }
        "unmod8" => {
            for mbar in [1e-7, 1e-8] {
                for beta in [0.01, 0.05] {
                    for mode in [TrackingMode::Modulated, TrackingMode::Unmodulated] {
                        let mut c = base(mbar);
                        c.params.beta = beta;
                        c.tracking = mode;
                        summarize(&format!("p={mbar:.0e} beta={beta} {mode:?}"), &c);
                    }
                }
            }
        }
        "coldhi" => {
            for delta in [3e-13, 1e-12, 1e-11] {
                let mut c = base(1e-2);
                c.controller = ControllerKind::ColdDamping;
                c.params.delta = delta;
                summarize(&format!("cold delta={delta:.0e}"), &c);
            }
        }
        "freeloop" => {
            let mut c = base(1e-2);
            c.controller = ControllerKind::Off;
            c.timing.t_prep = 29e-3;
            summarize("free loop 30ms", &c);
            let mut w = vec![];
            let out = run(&c).unwrap();
            let mut t0w = 0.0;
            while t0w < 29e-3 {
                let vals: Vec<f64> = out
                    .records
                    .iter()
                    .filter(|r| r.t > t0w && r.t <= t0w + 1e-3)
                    .map(|r| r.phonons_true)
                    .collect();
                if vals.is_empty() {
                    break;
                }
                w.push(vals.iter().sum::<f64>() / vals.len() as f64);
                t0w += 1e-3;
            }
            println!("free-loop window means: {}", w.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" "));
        }
        "iso" => {
            // Isolate the spurious damping: free evolution, no loop.
            let cfg = base(1e-2);
            let p = cfg.resolved_params().unwrap();
            let opts = EmulateOpts::default();
            // settle variances deterministically
            let mut s = EmulationState::new(thermal_state(&p));
            advance_deterministic(&mut s, ControlInput::OFF, &p, &opts, 1e-3).unwrap();
            let (v3, v4, v5) = (s.moments.var_z, s.moments.var_p, s.moments.cov);
            println!("settled variances: {v3:e} {v4:e} {v5:e}");

            // 1) deterministic decay from displaced mean: expect rate 2 gamma_c = 121/s
            let z0 = 1.5e-7;
            let mut d = EmulationState::new(GaussianMoments::new(z0, 0.0, v3, v4, v5));
            let e0 = mean_energy(&d.moments, p.mass, p.omega);
            for _ in 0..200_000 {
                advance_deterministic(&mut d, ControlInput::OFF, &p, &opts, 5e-9).unwrap();
            }
            let e1 = mean_energy(&d.moments, p.mass, p.omega);
            println!(
                "deterministic 1ms: E {e0:.4e} -> {e1:.4e}, rate = {:.1}/s (expect {:.1})",
                -(e1 / e0).ln() / 1e-3,
                2.0 * p.gamma_c
            );

            // 2) with noise, ensemble mean energy over 1 ms
            let mut acc0 = 0.0;
            let mut acc1 = 0.0;
            let paths = 64;
            for seed in 0..paths {
                let mut st = RngStreams::new(9000 + seed);
                let mut e = EmulationState::new(GaussianMoments::new(z0, 0.0, v3, v4, v5));
                acc0 += mean_energy(&e.moments, p.mass, p.omega);
                for _ in 0..200_000 {
                    advance(&mut e, ControlInput::OFF, &p, &opts, 5e-9, &mut st, None).unwrap();
                }
                acc1 += mean_energy(&e.moments, p.mass, p.omega);
            }
            println!(
                "noisy ensemble 1ms: E {:.4e} -> {:.4e} (expected decay only to {:.4e})",
                acc0 / paths as f64,
                acc1 / paths as f64,
                acc0 / paths as f64 * (-2.0 * p.gamma_c * 1e-3).exp()
            );
        }
        other => eprintln!("unknown mode {other}"),
    }
}
