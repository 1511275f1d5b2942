//! Trace analysis: exponential cooling-rate fits and steady-state
//! phonon-number estimation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::TraceRecord;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("no decay window: {0}")]
    NoDecayWindow(&'static str),
}

/// Exponential fit n(t) = A exp(-r_c t) of the initial phonon decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub amplitude: f64,
    pub rate: f64,
    pub fit_window: (f64, f64),
    /// RMS residual of the straight-line fit in log space.
    pub rms_residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Start of the fit window; typically the feedback onset t_prep. When
    /// absent the window starts at the trace's phonon maximum.
    pub onset: Option<f64>,
    /// The window ends where n first falls below max(n) times this fraction.
    pub decay_fraction: f64,
    pub min_samples: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { onset: None, decay_fraction: (-3.0f64).exp(), min_samples: 10 }
    }
}

/// Least-squares line fit of log n(t) from the feedback onset until n first
/// falls below max(n) times the decay fraction; A = exp(intercept),
/// r_c = -slope.
pub fn fit_cooling_rate(records: &[TraceRecord], opts: &FitOptions) -> Result<FitResult, FitError> {
    let onset = match opts.onset {
        Some(t) => t,
        None => {
            records
                .iter()
                .max_by(|a, b| a.phonons_true.total_cmp(&b.phonons_true))
                .ok_or(FitError::NoDecayWindow("empty trace"))?
                .t
        }
    };
    let phase: Vec<&TraceRecord> = records.iter().filter(|r| r.t >= onset).collect();
    if phase.is_empty() {
        return Err(FitError::NoDecayWindow("no samples at or after the onset"));
    }
    let n_max = phase.iter().map(|r| r.phonons_true).fold(f64::NEG_INFINITY, f64::max);
    if !(n_max > 0.0) {
        return Err(FitError::NoDecayWindow("phonon number non-positive throughout"));
    }
    let threshold = n_max * opts.decay_fraction;
    let end = phase.iter().position(|r| r.phonons_true < threshold);

    let window: Vec<&&TraceRecord> = match end {
        Some(idx) => phase[..=idx].iter().collect(),
        None => phase.iter().collect(),
    };
    // Fit log n over the positive samples of the window.
    let pts: Vec<(f64, f64)> = window
        .iter()
        .filter(|r| r.phonons_true > 0.0)
        .map(|r| (r.t, r.phonons_true.ln()))
        .collect();
    if pts.len() < opts.min_samples {
        return Err(FitError::NoDecayWindow("fewer samples than min_samples"));
    }
    if end.is_none() {
        return Err(FitError::NoDecayWindow("phonon number never crosses the decay threshold"));
    }

    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom == 0.0 {
        return Err(FitError::NoDecayWindow("degenerate time axis"));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let rms = (pts.iter().map(|p| (p.1 - (intercept + slope * p.0)).powi(2)).sum::<f64>() / n)
        .sqrt();
    Ok(FitResult {
        amplitude: intercept.exp(),
        rate: -slope,
        fit_window: (pts[0].0, pts.last().unwrap().0),
        rms_residual: rms,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SteadyStateOptions {
    /// Start of the feedback phase; windows are laid out from here.
    pub onset: f64,
    /// Window length for block means.
    pub window: f64,
    /// Fewest trailing windows a converged region may span.
    pub min_windows: usize,
    /// Trend-significance threshold (t-statistic of the regression slope of
    /// the trailing window means).
    pub t_crit: f64,
    /// A trend only counts when its projected change across the trailing
    /// windows exceeds this fraction of the level; below it the residue of a
    /// settled transient is immaterial regardless of significance.
    pub rel_floor: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self { onset: 0.0, window: 1e-3, min_windows: 4, t_crit: 2.0, rel_floor: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub mean: f64,
    pub std_error: f64,
    pub converged: bool,
    /// Start time of the first window of the converged region.
    pub t_converged: Option<f64>,
}

/// Convergence detector and post-convergence average of the phonon number.
///
/// The trace is cut into consecutive block-mean windows and scanned for the
/// earliest window from which the remaining means carry no statistically
/// significant trend (regression-slope t-statistic below `t_crit`, assessed
/// against the windows' own scatter). A deterministic drift has zero
/// scatter and therefore an unbounded t-statistic, so it never converges; a
/// noisy but stationary cooled trace converges as soon as the decay has
/// left the trailing set. The mean and standard error are taken over the
/// converged region; never-converging traces report statistics over the
/// trailing half instead.
///
/// (A fixed relative tolerance on adjacent window means cannot work here:
/// the closed-loop energy decorrelates at the cooling rate, ~0.5 ms, so
/// 1 ms window means of a correctly simulated steady state scatter by order
/// 100%, and any tolerance tight enough to reject a slow drift would also
/// reject every genuine steady state.)
pub fn steady_state_phonon(records: &[TraceRecord], opts: &SteadyStateOptions) -> SteadyState {
    let phase: Vec<&TraceRecord> = records.iter().filter(|r| r.t >= opts.onset).collect();
    let means = window_means(&phase, opts.onset, opts.window);

    let mut converged_at = None;
    for start in 0..means.len() {
        let tail = &means[start..];
        if tail.len() < opts.min_windows.max(3) {
            break;
        }
        if !has_significant_trend(tail, opts.t_crit, opts.rel_floor)
            && !leading_window_is_outlier(tail, opts.t_crit, opts.rel_floor)
        {
            converged_at = Some(start);
            break;
        }
    }

    match converged_at {
        Some(start) => {
            let tail: Vec<f64> = means[start..].iter().map(|m| m.1).collect();
            let (mean, se) = mean_and_se(&tail);
            SteadyState { mean, std_error: se, converged: true, t_converged: Some(means[start].0) }
        }
        None => {
            let half = means.len() / 2;
            let tail: Vec<f64> = means[half..].iter().map(|m| m.1).collect();
            let (mean, se) = mean_and_se(&tail);
            SteadyState { mean, std_error: se, converged: false, t_converged: None }
        }
    }
}

/// Regression-slope significance of the window means against their index.
/// A trend must be both statistically significant and material (projected
/// change across the set above `rel_floor` of the level) to count.
fn has_significant_trend(windows: &[(f64, f64)], t_crit: f64, rel_floor: f64) -> bool {
    let n = windows.len() as f64;
    let mean_k = (n - 1.0) / 2.0;
    let mean_w = windows.iter().map(|w| w.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (k, w) in windows.iter().enumerate() {
        let dk = k as f64 - mean_k;
        sxx += dk * dk;
        sxy += dk * (w.1 - mean_w);
    }
    let slope = sxy / sxx;
    let level = mean_w.abs().max(f64::MIN_POSITIVE);
    if (slope * n).abs() <= rel_floor * level {
        return false;
    }
    let ss_resid: f64 = windows
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let fitted = mean_w + slope * (k as f64 - mean_k);
            (w.1 - fitted).powi(2)
        })
        .sum();
    let var_resid = ss_resid / (n - 2.0);
    if var_resid <= (1e-12 * mean_w).powi(2) {
        // Noise-free windows: a material non-zero slope is a drift.
        return true;
    }
    let se_slope = (var_resid / sxx).sqrt();
    (slope / se_slope).abs() > t_crit
}

/// The residue of a decay shows up as a leading window sitting above the
/// scatter of the rest; a linear trend test alone cannot see that shape.
fn leading_window_is_outlier(windows: &[(f64, f64)], t_crit: f64, rel_floor: f64) -> bool {
    let rest: Vec<f64> = windows[1..].iter().map(|w| w.1).collect();
    let n = rest.len() as f64;
    let mean = rest.iter().sum::<f64>() / n;
    let sd = (rest.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let gap = (windows[0].1 - mean).abs();
    gap > (t_crit * sd).max(rel_floor * mean.abs().max(f64::MIN_POSITIVE))
}

/// (window start time, mean phonon number) for consecutive full windows.
fn window_means(phase: &[&TraceRecord], onset: f64, window: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut idx = 0;
    let mut w = 0usize;
    loop {
        let lo = onset + w as f64 * window;
        let hi = lo + window;
        let mut sum = 0.0;
        let mut count = 0usize;
        while idx < phase.len() && phase[idx].t <= hi {
            if phase[idx].t > lo {
                sum += phase[idx].phonons_true;
                count += 1;
            }
            idx += 1;
        }
        if count == 0 {
            break;
        }
        out.push((lo, sum / count as f64));
        if idx >= phase.len() {
            break;
        }
        w += 1;
    }
    out
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::GaussianMoments;

    fn synthetic(mut n_of_t: impl FnMut(f64) -> f64, dt: f64, steps: usize) -> Vec<TraceRecord> {
        let blank = GaussianMoments::new(0.0, 0.0, 1.0, 1.0, 0.0);
        (1..=steps)
            .map(|i| {
                let t = i as f64 * dt;
                TraceRecord {
                    t,
                    y: blank,
                    x: blank,
                    u: 0.0,
                    v: 0.0,
                    j: 0.0,
                    energy_true: 0.0,
                    energy_est: 0.0,
                    phonons_true: n_of_t(t),
                }
            })
            .collect()
    }

    #[test]
    fn fit_recovers_exact_exponential() {
        let records = synthetic(|t| 100.0 * (-2000.0 * t).exp(), 1e-5, 400);
        let fit = fit_cooling_rate(
            &records,
            &FitOptions { onset: Some(0.0), ..FitOptions::default() },
        )
        .unwrap();
        assert!((fit.rate / 2000.0 - 1.0).abs() < 1e-9, "rate = {}", fit.rate);
        assert!((fit.amplitude / 100.0 - 1.0).abs() < 1e-9, "A = {}", fit.amplitude);
        assert!(fit.rms_residual < 1e-9);
        // Window ends at the first crossing of 100/e^3.
        assert!(fit.fit_window.1 >= 1.5e-3 && fit.fit_window.1 < 1.6e-3);
    }

    #[test]
    fn fit_tolerates_multiplicative_noise() {
        // 10% multiplicative noise: the rate comes back within 5%.
        let mut s = 12345u64;
        let mut noise = move || {
            // sum of six uniforms, normalized: a rough standard gaussian
            let mut acc = 0.0;
            for _ in 0..6 {
                acc += crate::emulate::splitmix64(&mut s) as f64 / u64::MAX as f64;
            }
            (acc - 3.0) / 0.5f64.sqrt()
        };
        let records = synthetic(
            move |t| 100.0 * (-2000.0 * t).exp() * (1.0 + 0.1 * noise()),
            1e-5,
            400,
        );
        let fit = fit_cooling_rate(
            &records,
            &FitOptions { onset: Some(0.0), ..FitOptions::default() },
        )
        .unwrap();
        assert!((fit.rate / 2000.0 - 1.0).abs() < 0.05, "rate = {}", fit.rate);
    }

    #[test]
    fn fit_rejects_flat_and_short_traces() {
        let flat = synthetic(|_| 50.0, 1e-5, 400);
        assert!(matches!(
            fit_cooling_rate(&flat, &FitOptions::default()),
            Err(FitError::NoDecayWindow(_))
        ));
        let short = synthetic(|t| 100.0 * (-2000.0 * t).exp(), 1e-3, 5);
        assert!(matches!(
            fit_cooling_rate(&short, &FitOptions { onset: Some(0.0), ..FitOptions::default() }),
            Err(FitError::NoDecayWindow(_))
        ));
        let dead = synthetic(|_| 0.0, 1e-5, 100);
        assert!(matches!(
            fit_cooling_rate(&dead, &FitOptions { onset: Some(0.0), ..FitOptions::default() }),
            Err(FitError::NoDecayWindow(_))
        ));
    }

    #[test]
    fn steady_state_constant_trace_converges_immediately() {
        let records = synthetic(|_| 42.0, 1e-5, 1000); // 10 ms
        let ss = steady_state_phonon(&records, &SteadyStateOptions::default());
        assert!(ss.converged);
        assert_eq!(ss.t_converged, Some(0.0));
        assert!((ss.mean - 42.0).abs() < 1e-12);
        assert!(ss.std_error < 1e-12);
    }

    #[test]
    fn steady_state_drifting_trace_never_converges() {
        // 10% growth per 1 ms window, linear in time.
        let records = synthetic(|t| 100.0 * (1.0 + 0.1 * (t / 1e-3)), 1e-5, 1000);
        let ss = steady_state_phonon(&records, &SteadyStateOptions::default());
        assert!(!ss.converged);
    }

    #[test]
    fn steady_state_detects_settling() {
        // Exponential decay onto a plateau.
        let records = synthetic(|t| 1000.0 * (-3000.0 * t).exp() + 50.0, 1e-5, 2000);
        let ss = steady_state_phonon(&records, &SteadyStateOptions::default());
        assert!(ss.converged);
        assert!((ss.mean / 50.0 - 1.0).abs() < 0.05, "mean = {}", ss.mean);
    }
}
