//! `ewars` — leak-area estimation from chamber pressure blowdown.
//!
//! Subcommands: `simulate` a calibrated test run, `estimate` live from a
//! file or stdin, `replay` a recorded file offline, `bench` EWARS against a
//! per-step brute-force search, and `repro` the canned study scenarios.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 I/O error.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;

use clap::{Parser, Subcommand, ValueEnum};

use ewars::chamber_sim::{scenario_constant, scenario_steps, simulate, LeakScenario};
use ewars::config::{load_config, RunConfig, MM2_TO_M2};
use ewars::estimator::{bench_compare, AnchorMode, EwarsRunner, MeasurementSample};
use ewars::io::{
    format_estimate_row, ingest_measurements, parse_measurement_line, pressure_mape_percent,
    summarize, write_measurements, ESTIMATE_HEADER,
};
use ewars::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ewars",
    version,
    about = "Leak-area estimation for sealed test chambers from pressure blowdown data"
)]
struct Cli {
    /// Configuration file (flat `key = value`); defaults apply when absent.
    #[arg(long, global = true, env = "EWARS_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the objective smoothing factor (0..=1).
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Override the base search-grid size.
    #[arg(long, global = true)]
    n_grid: Option<usize>,
    /// Override the refinement stopping resolution, mm².
    #[arg(long, global = true)]
    epsilon_mm2: Option<f64>,
    /// Override the model anchor mode.
    #[arg(long, global = true, value_enum)]
    anchor: Option<AnchorArg>,
    /// Override the simulator noise seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path; `-` or absent writes to stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnchorArg {
    /// Integrate each candidate from the previous measurement.
    Previous,
    /// Integrate each candidate from the initial chamber state.
    Initial,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    /// Constant leaks 0.16 / 0.22 / 0.28 mm² over 300 s.
    Fig5,
    /// Three-step increasing and decreasing leak schedules, 180 s per step.
    Fig6,
    /// Brute-force versus EWARS cost comparison on a 0.25 mm² leak.
    Fig7,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a noisy measurement CSV from a leak scenario.
    Simulate {
        /// Leak area(s) in mm²; several values form a step schedule.
        #[arg(long, value_delimiter = ',')]
        leak_mm2: Option<Vec<f64>>,
        /// Scenario duration in seconds (constant leaks).
        #[arg(long)]
        duration_s: Option<f64>,
        /// Sensor noise standard deviation, Pa.
        #[arg(long)]
        noise_sigma_pa: Option<f64>,
        /// Also write the noise-free truth trace here.
        #[arg(long, value_name = "PATH")]
        truth_out: Option<PathBuf>,
    },
    /// Run the estimator over a measurement file or a live stdin stream.
    Estimate {
        /// Measurement CSV; `-` reads a live stream from stdin.
        #[arg(long, default_value = "-", value_name = "PATH")]
        input: PathBuf,
        /// Abort on malformed or out-of-order rows instead of skipping them.
        #[arg(long)]
        strict: bool,
    },
    /// Re-run the estimator offline over a recorded measurement file.
    Replay {
        /// Measurement CSV to replay.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Abort on malformed or out-of-order rows instead of skipping them.
        #[arg(long)]
        strict: bool,
    },
    /// Compare per-update brute-force search against EWARS on one scenario.
    Bench {
        /// Constant leak area in mm².
        #[arg(long)]
        leak_mm2: Option<f64>,
        /// Scenario duration in seconds.
        #[arg(long)]
        duration_s: Option<f64>,
        /// Brute-force grid size; defaults to the epsilon-matched grid.
        #[arg(long)]
        n0: Option<usize>,
    },
    /// Regenerate the canned study scenarios into a directory of CSVs.
    Repro {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long, default_value = "repro_out", value_name = "DIR")]
        out_dir: PathBuf,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(i32::from(err.exit_code()));
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    apply_overrides(&mut cfg, &cli)?;
    let out = cli.out.clone().or_else(|| cfg.out.clone().map(PathBuf::from));

    match &cli.command {
        Command::Simulate { leak_mm2, duration_s, noise_sigma_pa, truth_out } => {
            if let Some(areas) = leak_mm2 {
                cfg.leak_areas = areas.iter().map(|a| a * MM2_TO_M2).collect();
            }
            if let Some(d) = duration_s {
                cfg.duration = *d;
            }
            if let Some(s) = noise_sigma_pa {
                cfg.noise_sigma = *s;
            }
            cmd_simulate(&cfg, out.as_deref(), truth_out.as_deref())
        }
        Command::Estimate { input, strict } => cmd_estimate(&cfg, input, *strict, out.as_deref()),
        Command::Replay { input, strict } => cmd_estimate(&cfg, input, *strict, out.as_deref()),
        Command::Bench { leak_mm2, duration_s, n0 } => {
            if let Some(a) = leak_mm2 {
                cfg.leak_areas = vec![a * MM2_TO_M2];
            }
            if let Some(d) = duration_s {
                cfg.duration = *d;
            }
            cmd_bench(&cfg, *n0, out.as_deref())
        }
        Command::Repro { figure, out_dir } => cmd_repro(&cfg, *figure, out_dir),
    }
}

fn apply_overrides(cfg: &mut RunConfig, cli: &Cli) -> Result<()> {
    if let Some(a) = cli.alpha {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Config { line: 0, message: format!("--alpha must be in [0, 1], got {a}") });
        }
        cfg.ewars.alpha = a;
    }
    if let Some(n) = cli.n_grid {
        cfg.ewars.n_grid = n;
    }
    if let Some(e) = cli.epsilon_mm2 {
        if !(e > 0.0) {
            return Err(Error::Config { line: 0, message: format!("--epsilon-mm2 must be > 0, got {e}") });
        }
        cfg.ewars.epsilon = e * MM2_TO_M2;
    }
    if let Some(anchor) = cli.anchor {
        cfg.ewars.anchor_mode = match anchor {
            AnchorArg::Previous => AnchorMode::PreviousMeasurement,
            AnchorArg::Initial => AnchorMode::InitialCondition,
        };
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate().map_err(|e| match e {
        err @ Error::Config { .. } => err,
        other => Error::Config { line: 0, message: other.to_string() },
    })
}

/// Opens the requested output, treating `None` and `-` as stdout.
fn writer_for(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) if p != Path::new("-") => Ok(Box::new(std::io::BufWriter::new(
            std::fs::File::create(p)?,
        ))),
        _ => Ok(Box::new(std::io::BufWriter::new(std::io::stdout()))),
    }
}

fn cmd_simulate(cfg: &RunConfig, out: Option<&Path>, truth_out: Option<&Path>) -> Result<()> {
    let ctx = cfg.context()?;
    let run = simulate(&cfg.scenario()?, &cfg.sensor()?, &ctx, cfg.sim_dt)?;
    let mut w = writer_for(out)?;
    write_measurements(&mut w, &run.noisy)?;
    w.flush()?;
    if let Some(path) = truth_out {
        let mut tw = writer_for(Some(path))?;
        write_measurements(&mut tw, &run.truth)?;
        tw.flush()?;
    }
    eprintln!(
        "simulated {} samples over {} s ({} scenario segment(s), sigma = {} Pa, seed = {})",
        run.noisy.len(),
        run.schedule.duration,
        run.schedule.segments.len(),
        cfg.noise_sigma,
        cfg.seed
    );
    Ok(())
}

/// Shared body of `estimate` and `replay`: stream samples through the
/// estimator and emit one CSV row per update as it is produced.
fn cmd_estimate(cfg: &RunConfig, input: &Path, strict: bool, out: Option<&Path>) -> Result<()> {
    let ctx = cfg.context()?;
    let mut runner = EwarsRunner::new(cfg.ewars, ctx)?;
    let mut w = writer_for(out)?;
    writeln!(w, "{ESTIMATE_HEADER}")?;

    let mut records = Vec::new();
    let mut samples = Vec::new();
    let mut consume = |s: MeasurementSample, w: &mut dyn Write| -> Result<()> {
        samples.push(s);
        for r in runner.push(s)? {
            writeln!(w, "{}", format_estimate_row(&r, None))?;
            records.push(r);
        }
        Ok(())
    };

    if input == Path::new("-") {
        // Live mode: a reader thread parses stdin into a bounded queue so
        // slow updates never block ingest of the kilohertz stream.
        let (tx, rx) = mpsc::sync_channel::<Result<MeasurementSample>>(1024);
        let reader = std::thread::spawn(move || {
            let stdin = std::io::stdin();
            for (idx, line) in stdin.lock().lines().enumerate() {
                let parsed = line
                    .map_err(Error::from)
                    .and_then(|l| parse_measurement_line(&l, idx + 1));
                let msg = match parsed {
                    Ok(None) => continue,
                    Ok(Some(s)) => Ok(s),
                    Err(e) => Err(e),
                };
                let stop = msg.is_err();
                if tx.send(msg).is_err() || stop {
                    break;
                }
            }
        });
        let mut last_time = f64::NEG_INFINITY;
        for msg in rx {
            match msg {
                Ok(s) if s.time <= last_time => {
                    let err = Error::OutOfOrderSample { time: s.time, last: last_time };
                    if strict {
                        return Err(err);
                    }
                    log::warn!("{err}; row skipped");
                }
                Ok(s) => {
                    last_time = s.time;
                    consume(s, &mut w)?;
                    w.flush()?;
                }
                Err(e) => {
                    if strict {
                        return Err(e);
                    }
                    log::warn!("{e}; row skipped");
                }
            }
        }
        let _ = reader.join();
    } else {
        for s in ingest_measurements(input, strict)? {
            consume(s, &mut w)?;
        }
    }
    w.flush()?;
    drop(consume);

    print_summary(&records, &samples, cfg)?;
    Ok(())
}

fn print_summary(records: &[ewars::estimator::EstimateRecord], samples: &[MeasurementSample], cfg: &RunConfig) -> Result<()> {
    match summarize(records) {
        Some(s) => {
            let mape = if samples.len() >= 2 {
                pressure_mape_percent(s.converged_estimate, samples, &cfg.context()?)?
            } else {
                f64::NAN
            };
            eprintln!("converged_estimate_mm2 = {:.5e}", s.converged_estimate / MM2_TO_M2);
            match s.convergence_time {
                Some(t) => eprintln!("convergence_time_s = {t}"),
                None => eprintln!("convergence_time_s = not reached"),
            }
            eprintln!("total_evaluations = {}", s.total_evaluations);
            eprintln!("pressure_mape_pct = {mape:.4}");
        }
        None => eprintln!("no estimates produced (stream shorter than one update interval?)"),
    }
    Ok(())
}

/// Epsilon-matched brute-force grid: the coarsest uniform grid whose spacing
/// does not exceed the EWARS stopping resolution.
fn matched_n0(cfg: &RunConfig) -> usize {
    (cfg.ewars.bounds.width() / cfg.ewars.epsilon).ceil() as usize
}

fn cmd_bench(cfg: &RunConfig, n0: Option<usize>, out: Option<&Path>) -> Result<()> {
    let ctx = cfg.context()?;
    let scenario = cfg.scenario()?;
    let run = simulate(&scenario, &cfg.sensor()?, &ctx, cfg.sim_dt)?;
    let n0 = n0.unwrap_or_else(|| matched_n0(cfg));
    let report = bench_compare(&run.noisy, &cfg.ewars, &ctx, n0)?;

    let mut w = writer_for(out)?;
    writeln!(w, "time_s,area_mm2_fbfs,area_mm2_ewars,area_mm2_true")?;
    for (f, e) in report.series_fbfs.iter().zip(&report.series_ewars) {
        writeln!(
            w,
            "{},{:.5e},{:.5e},{:.5e}",
            f.time,
            f.area_estimate / MM2_TO_M2,
            e.area_estimate / MM2_TO_M2,
            scenario.area_at(f.time) / MM2_TO_M2
        )?;
    }
    w.flush()?;

    let ratio_evals = report.evals_fbfs as f64 / report.evals_ewars.max(1) as f64;
    let ratio_wall = report.wall_fbfs.as_secs_f64() / report.wall_ewars.as_secs_f64().max(1e-12);
    eprintln!("updates = {}", report.series_ewars.len());
    eprintln!("fbfs_grid_points = {}", n0 + 1);
    eprintln!("evals_fbfs = {}", report.evals_fbfs);
    eprintln!("evals_ewars = {}", report.evals_ewars);
    eprintln!("eval_ratio = {ratio_evals:.1}");
    eprintln!("wall_fbfs_ms = {:.1}", report.wall_fbfs.as_secs_f64() * 1e3);
    eprintln!("wall_ewars_ms = {:.1}", report.wall_ewars.as_secs_f64() * 1e3);
    eprintln!("wall_ratio = {ratio_wall:.1}");
    Ok(())
}

/// Runs one simulated scenario through the estimator and writes a
/// truth-annotated estimate CSV.
fn repro_run(
    cfg: &RunConfig,
    scenario: &LeakScenario,
    seed: u64,
    path: &Path,
) -> Result<()> {
    let ctx = cfg.context()?;
    let sensor = ewars::chamber_sim::SensorModel::new(cfg.sample_rate, cfg.noise_sigma, seed)?;
    let run = simulate(scenario, &sensor, &ctx, cfg.sim_dt)?;
    let mut runner = EwarsRunner::new(cfg.ewars, ctx)?;
    let mut w = writer_for(Some(path))?;
    writeln!(w, "{ESTIMATE_HEADER}")?;
    let mut records = Vec::new();
    for s in &run.noisy {
        for r in runner.push(*s)? {
            writeln!(w, "{}", format_estimate_row(&r, Some(scenario)))?;
            records.push(r);
        }
    }
    w.flush()?;
    eprintln!("wrote {}", path.display());
    print_summary(&records, &run.noisy, cfg)?;
    Ok(())
}

fn cmd_repro(cfg: &RunConfig, figure: Figure, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    match figure {
        Figure::Fig5 => {
            let mut cfg = cfg.clone();
            cfg.ewars = ewars::estimator::EwarsConfig::constant_leak();
            for (i, &area_mm2) in [0.16, 0.22, 0.28].iter().enumerate() {
                let scenario = scenario_constant(area_mm2 * MM2_TO_M2, 300.0)?;
                let name = format!("fig5_constant_{:.2}mm2.csv", area_mm2);
                repro_run(&cfg, &scenario, cfg.seed + i as u64 + 1, &out_dir.join(name))?;
            }
        }
        Figure::Fig6 => {
            let mut cfg = cfg.clone();
            cfg.ewars = ewars::estimator::EwarsConfig::variable_leak();
            let inc: Vec<f64> = [0.08, 0.12, 0.16].iter().map(|a| a * MM2_TO_M2).collect();
            let dec: Vec<f64> = inc.iter().rev().copied().collect();
            repro_run(&cfg, &scenario_steps(&inc, 180.0)?, cfg.seed + 1, &out_dir.join("fig6_increasing.csv"))?;
            repro_run(&cfg, &scenario_steps(&dec, 180.0)?, cfg.seed + 2, &out_dir.join("fig6_decreasing.csv"))?;
        }
        Figure::Fig7 => {
            let mut cfg = cfg.clone();
            cfg.ewars = ewars::estimator::EwarsConfig::constant_leak();
            cfg.leak_areas = vec![0.25 * MM2_TO_M2];
            cfg.duration = 120.0;
            cmd_bench(&cfg, None, Some(&out_dir.join("fig7_bench.csv")))?;
        }
    }
    Ok(())
}
