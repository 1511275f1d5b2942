//! `levcool` command line: closed-loop cooling runs, parameter sweeps and
//! cooling-rate fits, with CSV/JSON outputs and static SVG summary charts.

mod config;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use config::ConfigFile;
use levcool_core::{
    fit_cooling_rate, phonon_number, read_trace_csv, run, steady_state_phonon, sweep_point,
    write_trace_csv, FitOptions, FitResult, RunConfig, RunOutput, SteadyState, SteadyStateOptions,
    SweepPoint, SweepSpec, Termination,
};
use svg::{Chart, Series};

#[derive(Parser)]
#[command(name = "levcool", version, about = "Feedback-cooling laboratory for a levitated nanoparticle")]
struct Cli {
    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute one closed-loop run and write trace CSV, summary JSON and a
    /// phonon-number chart.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Execute a parameter sweep; per-point JSON is flushed as points
    /// complete, then summary charts are written.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        parallelism: Option<usize>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the initial cooling rate of a trace CSV and print the result as
    /// JSON on stdout.
    Fit {
        trace: PathBuf,
        /// Fit-window start (feedback onset), seconds. Defaults to the
        /// phonon maximum of the trace.
        #[arg(long)]
        onset: Option<f64>,
        /// Window ends where n falls below max(n) times this fraction.
        #[arg(long, default_value_t = (-3.0f64).exp())]
        fraction: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log_level).init();
    if let Err(e) = dispatch(cli) {
        // machine-readable failure report
        eprintln!("{}", serde_json::json!({ "error": format!("{e:#}") }));
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run { config, out, seed } => cmd_run(&config, &out, seed),
        Cmd::Sweep { config, out, parallelism, seed } => {
            if let Some(n) = parallelism {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .context("worker pool setup failed")?;
            }
            cmd_sweep(&config, &out, seed)
        }
        Cmd::Fit { trace, onset, fraction } => cmd_fit(&trace, onset, fraction),
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    config: &'a ConfigFile,
    resolved_params: levcool_core::PhysicalParams,
    seed: u64,
    termination: Termination,
    records: usize,
    cooling_rate: Option<FitResult>,
    steady_state: SteadyState,
    free_phase_mean_phonons: Option<f64>,
}

fn cmd_run(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut file = ConfigFile::load(config_path)?;
    if let Some(s) = seed {
        file = file.with_seed(s);
    }
    let cfg = file.to_run_config()?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;

    log::info!("running {} for {:.3e} s", config_path.display(), cfg.timing.t_total);
    let output = run(&cfg)?;
    write_run_outputs(&file, &cfg, &output, out_dir)?;
    if output.termination.is_lost() {
        log::warn!("run ended early: {:?}", output.termination);
    }
    Ok(())
}

fn write_run_outputs(
    file: &ConfigFile,
    cfg: &RunConfig,
    output: &RunOutput,
    out_dir: &Path,
) -> Result<()> {
    let trace_path = out_dir.join("trace.csv");
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &output.records)?;
    fs::write(&trace_path, &buf)?;

    let onset = cfg.timing.t_prep;
    let fit = fit_cooling_rate(
        &output.records,
        &FitOptions { onset: Some(onset), ..FitOptions::default() },
    )
    .ok();
    let steady =
        steady_state_phonon(&output.records, &SteadyStateOptions { onset, ..Default::default() });
    let free: Vec<f64> = output
        .records
        .iter()
        .filter(|r| r.t < onset)
        .map(|r| r.phonons_true)
        .collect();
    let free_mean = if free.is_empty() {
        None
    } else {
        Some(free.iter().sum::<f64>() / free.len() as f64)
    };

    let summary = RunSummary {
        config: file,
        resolved_params: output.resolved_params,
        seed: cfg.seed,
        termination: output.termination,
        records: output.records.len(),
        cooling_rate: fit,
        steady_state: steady,
        free_phase_mean_phonons: free_mean,
    };
    fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    // the embedded config re-runs to a byte-identical trace
    fs::write(out_dir.join("resolved_config.toml"), toml::to_string_pretty(file)?)?;

    let p = output.resolved_params;
    let chart = Chart {
        title: "phonon number vs time".into(),
        x_label: "t (s)".into(),
        y_label: "n".into(),
        log_x: false,
        log_y: true,
        series: vec![
            Series {
                label: "emulated".into(),
                points: output.records.iter().map(|r| (r.t, r.phonons_true)).collect(),
                errors: None,
            },
            Series {
                label: "tracked".into(),
                points: output
                    .records
                    .iter()
                    .map(|r| (r.t, phonon_number(r.energy_est, p.omega)))
                    .collect(),
                errors: None,
            },
        ],
    };
    fs::write(out_dir.join("phonons.svg"), chart.render())?;
    Ok(())
}

#[derive(Serialize)]
struct SweepDocument<'a> {
    config: &'a ConfigFile,
    spec: &'a SweepSpec,
    complete: bool,
    points: &'a [SweepPoint],
}

fn cmd_sweep(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut file = ConfigFile::load(config_path)?;
    if let Some(s) = seed {
        file = file.with_seed(s);
    }
    let spec = file.to_sweep_spec()?;
    fs::create_dir_all(out_dir)?;

    // Points are flushed to disk as they finish so an interrupted sweep
    // leaves its completed points behind.
    let mut points: Vec<SweepPoint> = Vec::new();
    for i in 0..spec.values.len() {
        log::info!("sweep point {} / {}: {:e}", i + 1, spec.values.len(), spec.values[i]);
        points.push(sweep_point(&spec, i)?);
        let doc = SweepDocument {
            config: &file,
            spec: &spec,
            complete: points.len() == spec.values.len(),
            points: &points,
        };
        fs::write(out_dir.join("sweep.json"), serde_json::to_string_pretty(&doc)?)?;
    }

    let axis_name = format!("{:?}", spec.axis).to_lowercase();
    let phonon_series = Series {
        label: "steady-state n".into(),
        points: points
            .iter()
            .filter_map(|p| p.phonon_mean.map(|m| (p.value, m)))
            .collect(),
        errors: Some(points.iter().filter_map(|p| p.phonon_se).collect()),
    };
    fs::write(
        out_dir.join("phonons_vs_axis.svg"),
        Chart {
            title: format!("steady-state phonon number vs {axis_name}"),
            x_label: axis_name.clone(),
            y_label: "n".into(),
            log_x: true,
            log_y: true,
            series: vec![phonon_series],
        }
        .render(),
    )?;
    let rate_series = Series {
        label: "initial cooling rate".into(),
        points: points
            .iter()
            .filter_map(|p| p.rate_mean.map(|m| (p.value, m)))
            .collect(),
        errors: Some(points.iter().filter_map(|p| p.rate_se).collect()),
    };
    fs::write(
        out_dir.join("rate_vs_axis.svg"),
        Chart {
            title: format!("initial cooling rate vs {axis_name}"),
            x_label: axis_name,
            y_label: "r_c (1/s)".into(),
            log_x: true,
            log_y: true,
            series: vec![rate_series],
        }
        .render(),
    )?;
    Ok(())
}

fn cmd_fit(trace: &Path, onset: Option<f64>, fraction: f64) -> Result<()> {
    let text = fs::File::open(trace)
        .with_context(|| format!("cannot open trace {}", trace.display()))?;
    let records = read_trace_csv(std::io::BufReader::new(text))?;
    let fit = fit_cooling_rate(
        &records,
        &FitOptions { onset, decay_fraction: fraction, ..FitOptions::default() },
    )?;
    println!("{}", serde_json::to_string_pretty(&fit)?);
    Ok(())
}
