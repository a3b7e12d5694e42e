// SPDX-License-Identifier: MIT OR Apache-2.0

//! `cpdetect`: change-point detection on CSV series, threshold calibration,
//! Monte-Carlo simulation, and benchmarking.
//!
//! Positions printed by every subcommand are 1-based and mark the first
//! index of the new segment. Exit codes: 0 success, 2 input/parse error,
//! 3 invalid tuning.

mod input;
mod report;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

use cpdetect_core::calibrate::{
    calibrate_q, calibrate_zeta, CalibKind, CalibrationCache, TriadMode,
};
use cpdetect_core::error::Error as CoreError;
use cpdetect_core::series::{ChangePointVector, PrefixSums, TimeSeries};
use cpdetect_core::sim::{estimate_sigma, run_scenario, ScenarioSpec};
use cpdetect_core::{postproc, single, solver};

use report::{CiReport, DetectionPoint, DetectionReport, TestReport, TuningEcho};

/// Errors carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable input, malformed numerics, bad scenario files.
    Parse(String),
    /// Tuning outside the documented domains.
    Tuning(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Tuning(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Parse(m) | CliError::Tuning(m) => m,
        }
    }
}

/// Library errors from tuning validation map to exit 3, the rest to 2.
fn from_core(err: CoreError) -> CliError {
    match err {
        CoreError::InvalidArgument(m) => CliError::Tuning(m),
        other => CliError::Parse(other.to_string()),
    }
}

#[derive(Parser)]
#[command(name = "cpdetect", version, about = "Offline change-point detection toolkit")]
struct Cli {
    /// Worker threads for calibration and simulation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Calibration cache file; CPDETECT_CACHE overrides the default path.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DetectProcedure {
    Adaptive,
    Dp,
    DpPruned,
    LpFull,
    LpDp,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CalibrateKind {
    Zeta,
    Q,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Auto,
    Full,
    DyadicGrid,
}

#[derive(Args)]
struct InputArgs {
    /// CSV input: one value per line, or a delimited file with --column.
    #[arg(long)]
    input: PathBuf,

    /// 1-based column of a comma-delimited file.
    #[arg(long)]
    column: Option<usize>,

    /// Skip the first line.
    #[arg(long)]
    header: bool,

    /// Noise scale: a number, or "auto" for the robust difference estimate.
    /// The series is divided by it before detection.
    #[arg(long, default_value = "1")]
    sigma: String,
}

#[derive(Args)]
struct CommonTuning {
    #[arg(long, default_value_t = 2.0)]
    l: f64,

    /// Per-change constant; calibrated at --alpha when omitted.
    #[arg(long)]
    q: Option<f64>,

    /// Additive threshold; calibrated at --alpha when omitted.
    #[arg(long)]
    zeta: Option<f64>,

    #[arg(long, default_value_t = 0.05)]
    alpha: f64,

    #[arg(long, default_value_t = 1.0)]
    kappa: f64,

    /// Dyadic radius grid for the post-processing pipeline.
    #[arg(long)]
    dyadic: bool,

    /// Replicates for on-demand calibration.
    #[arg(long, default_value_t = 500)]
    calibration_reps: usize,

    /// Seed for on-demand calibration.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Detect change-points in a series.
    Detect {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value_t = DetectProcedure::Adaptive)]
        procedure: DetectProcedure,
        #[command(flatten)]
        tuning: CommonTuning,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        output: OutputFormat,
    },
    /// Test for the existence of a single change-point.
    Test {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = 1.5)]
        l: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        output: OutputFormat,
    },
    /// Confidence interval for a single change-point position.
    Ci {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, default_value_t = single::DEFAULT_L)]
        l: f64,
        #[arg(long, default_value_t = single::DEFAULT_KAPPA)]
        kappa: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = single::DEFAULT_C_WIDTH)]
        c_width: f64,
        #[arg(long, default_value_t = single::DEFAULT_C_TEST)]
        c_test: f64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        output: OutputFormat,
    },
    /// Monte-Carlo calibration of zeta or q; updates the cache file.
    Calibrate {
        #[arg(long, value_enum)]
        kind: CalibrateKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
        mode: ModeArg,
    },
    /// Run a scenario file and print the experiment report.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
        output: OutputFormat,
    },
    /// Time dp, dp-pruned, and dyadic lp-full over a grid of series lengths.
    Bench {
        /// Comma-separated series lengths.
        #[arg(long, default_value = "1024,2048,4096")]
        n_grid: String,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 3.0)]
        zeta: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Ignore failure when a global pool already exists.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let cache_path = cli
        .cache
        .or_else(|| std::env::var_os("CPDETECT_CACHE").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("cpdetect_cache.json"));

    match run(cli.command, &cache_path) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command, cache_path: &PathBuf) -> Result<(), CliError> {
    match command {
        Command::Detect {
            input,
            procedure,
            tuning,
            output,
        } => cmd_detect(input, procedure, tuning, output, cache_path),
        Command::Test {
            input,
            l,
            alpha,
            output,
        } => cmd_test(input, l, alpha, output),
        Command::Ci {
            input,
            l,
            kappa,
            alpha,
            c_width,
            c_test,
            output,
        } => cmd_ci(input, l, kappa, alpha, c_width, c_test, output),
        Command::Calibrate {
            kind,
            n,
            alpha,
            reps,
            seed,
            mode,
        } => cmd_calibrate(kind, n, alpha, reps, seed, mode, cache_path),
        Command::Simulate { scenario, output } => cmd_simulate(&scenario, output, cache_path),
        Command::Bench { n_grid, seed, zeta } => cmd_bench(&n_grid, seed, zeta),
    }
}

struct LoadedSeries {
    prefix: PrefixSums,
    sigma: f64,
    sigma_estimated: bool,
}

fn load_series(args: &InputArgs) -> Result<LoadedSeries, CliError> {
    let values = input::read_series(&args.input, args.column, args.header)?;
    let series = TimeSeries::new(values).map_err(|e| CliError::Parse(e.to_string()))?;
    let (sigma, sigma_estimated) = match args.sigma.as_str() {
        "auto" => (
            estimate_sigma(&series).map_err(|e| CliError::Parse(e.to_string()))?,
            true,
        ),
        text => {
            let v: f64 = text
                .parse()
                .map_err(|_| CliError::Tuning(format!("--sigma must be a number or 'auto', got '{text}'")))?;
            if !(v > 0.0) {
                return Err(CliError::Tuning(format!("--sigma must be positive, got {v}")));
            }
            (v, false)
        }
    };
    let rescaled: Vec<f64> = series.values().iter().map(|v| v / sigma).collect();
    Ok(LoadedSeries {
        prefix: PrefixSums::from_values(&rescaled).map_err(from_core)?,
        sigma,
        sigma_estimated,
    })
}

fn resolve_threshold(
    kind: CalibKind,
    n: usize,
    tuning: &CommonTuning,
    cache_path: &PathBuf,
) -> Result<f64, CliError> {
    let given = match kind {
        CalibKind::Zeta => tuning.zeta,
        CalibKind::Q => tuning.q,
    };
    if let Some(v) = given {
        if !(v > 0.0) {
            return Err(CliError::Tuning(format!("threshold must be positive, got {v}")));
        }
        return Ok(v);
    }
    let mut cache = CalibrationCache::load(cache_path).map_err(from_core)?;
    let (value, fresh) = cache
        .resolve(
            kind,
            n,
            tuning.alpha,
            tuning.calibration_reps,
            tuning.seed,
            TriadMode::auto(n),
        )
        .map_err(from_core)?;
    if fresh {
        cache.save(cache_path).map_err(from_core)?;
    }
    let floor = if kind == CalibKind::Q { 1e-3 } else { 0.0 };
    Ok(value.max(floor))
}

fn cmd_detect(
    input: InputArgs,
    procedure: DetectProcedure,
    tuning: CommonTuning,
    output: OutputFormat,
    cache_path: &PathBuf,
) -> Result<(), CliError> {
    let loaded = load_series(&input)?;
    let p = &loaded.prefix;
    let n = p.n();

    let needs_zeta = matches!(
        procedure,
        DetectProcedure::Adaptive | DetectProcedure::LpFull | DetectProcedure::LpDp
    );
    let needs_q = matches!(
        procedure,
        DetectProcedure::Dp | DetectProcedure::DpPruned | DetectProcedure::LpDp
    );
    let zeta = if needs_zeta {
        Some(resolve_threshold(CalibKind::Zeta, n, &tuning, cache_path)?)
    } else {
        tuning.zeta
    };
    let q = if needs_q {
        Some(resolve_threshold(CalibKind::Q, n, &tuning, cache_path)?)
    } else {
        tuning.q
    };

    let solver_cfg = |q: f64| solver::SolverConfig::new(tuning.l, q).map_err(from_core);
    let (est, criterion): (ChangePointVector, Option<f64>) = match procedure {
        DetectProcedure::Adaptive => {
            if !(tuning.alpha > 0.0 && tuning.alpha < 1.0) {
                return Err(CliError::Tuning(format!(
                    "alpha must lie in (0, 1), got {}",
                    tuning.alpha
                )));
            }
            let est = cpdetect_core::sim::adaptive_estimate(
                p,
                zeta.expect("resolved"),
                tuning.dyadic,
                tuning.alpha,
            )
            .map_err(from_core)?;
            (est, None)
        }
        DetectProcedure::Dp => {
            let r = solver::solve_dp(p, &solver_cfg(q.expect("resolved"))?);
            (r.taus, Some(r.criterion))
        }
        DetectProcedure::DpPruned => {
            let r = solver::solve_dp_pruned(p, &solver_cfg(q.expect("resolved"))?);
            (r.taus, Some(r.criterion))
        }
        DetectProcedure::LpFull => {
            let report = postproc::detect_full(p, zeta.expect("resolved"), tuning.dyadic);
            (report.improved, None)
        }
        DetectProcedure::LpDp => {
            let r = solver::solve_dp(p, &solver_cfg(q.expect("resolved"))?);
            let report =
                postproc::postprocess(p, &r.taus, zeta.expect("resolved"), tuning.dyadic);
            (report.improved, Some(r.criterion))
        }
    };

    // Radii and local intervals for the reported points, when a threshold is
    // available to define them.
    let points: Vec<DetectionPoint> = match zeta {
        Some(z) => est
            .positions()
            .iter()
            .map(|&tau| {
                let r = postproc::radius(p, tau, z, tuning.dyadic);
                DetectionPoint {
                    tau,
                    radius: r.radius,
                    interval: r.interval,
                }
            })
            .collect(),
        None => est
            .positions()
            .iter()
            .map(|&tau| DetectionPoint {
                tau,
                radius: None,
                interval: None,
            })
            .collect(),
    };

    let report = DetectionReport {
        procedure: match procedure {
            DetectProcedure::Adaptive => "adaptive",
            DetectProcedure::Dp => "dp",
            DetectProcedure::DpPruned => "dp-pruned",
            DetectProcedure::LpFull => "lp-full",
            DetectProcedure::LpDp => "lp-dp",
        }
        .to_string(),
        n,
        sigma: loaded.sigma,
        sigma_estimated: loaded.sigma_estimated,
        changepoints: est.positions().to_vec(),
        points,
        criterion,
        tuning: TuningEcho {
            l: tuning.l,
            q,
            zeta,
            alpha: tuning.alpha,
            kappa: tuning.kappa,
            dyadic: tuning.dyadic,
        },
    };

    match output {
        OutputFormat::Json => println!("{}", report.to_json()),
        OutputFormat::Csv => print!("{}", report.to_csv()),
    }
    Ok(())
}

fn cmd_test(
    input: InputArgs,
    l: f64,
    alpha: f64,
    output: OutputFormat,
) -> Result<(), CliError> {
    let loaded = load_series(&input)?;
    let outcome = single::detect_single(&loaded.prefix, l, alpha).map_err(from_core)?;
    let report = TestReport {
        statistic: outcome.statistic,
        threshold: outcome.threshold,
        reject: outcome.reject,
        argmin_tau: outcome.argmin_tau,
        l,
        alpha,
        sigma: loaded.sigma,
    };
    match output {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&report).expect("serializable")),
        OutputFormat::Csv => print!("{}", report.to_csv()),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_ci(
    input: InputArgs,
    l: f64,
    kappa: f64,
    alpha: f64,
    c_width: f64,
    c_test: f64,
    output: OutputFormat,
) -> Result<(), CliError> {
    let loaded = load_series(&input)?;
    let ci = single::confidence_interval_single(&loaded.prefix, l, kappa, alpha, c_width, c_test)
        .map_err(from_core)?;
    let report = CiReport {
        interval: ci.interval,
        tau_hat: ci.tau_hat,
        delta_hat: ci.delta_hat,
        informative: ci.informative,
        l,
        kappa,
        alpha,
        sigma: loaded.sigma,
    };
    match output {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&report).expect("serializable")),
        OutputFormat::Csv => print!("{}", report.to_csv()),
    }
    Ok(())
}

fn cmd_calibrate(
    kind: CalibrateKind,
    n: usize,
    alpha: f64,
    reps: usize,
    seed: u64,
    mode: ModeArg,
    cache_path: &PathBuf,
) -> Result<(), CliError> {
    let mode = match mode {
        ModeArg::Auto => TriadMode::auto(n),
        ModeArg::Full => TriadMode::Full,
        ModeArg::DyadicGrid => TriadMode::DyadicGrid,
    };
    let (calib_kind, result) = match kind {
        CalibrateKind::Zeta => (
            CalibKind::Zeta,
            calibrate_zeta(n, alpha, reps, seed, mode).map_err(from_core)?,
        ),
        CalibrateKind::Q => (
            CalibKind::Q,
            calibrate_q(n, alpha, reps, seed, mode).map_err(from_core)?,
        ),
    };
    let mut cache = CalibrationCache::load(cache_path).map_err(from_core)?;
    cache.insert(calib_kind, n, alpha, reps, seed, mode, result.value);
    cache.save(cache_path).map_err(from_core)?;
    println!("{}", serde_json::to_string_pretty(&result).expect("serializable"));
    Ok(())
}

fn cmd_simulate(
    scenario: &PathBuf,
    output: OutputFormat,
    cache_path: &PathBuf,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(scenario)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", scenario.display())))?;
    let spec: ScenarioSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("bad scenario {}: {e}", scenario.display())))?;
    let mut cache = CalibrationCache::load(cache_path).map_err(from_core)?;
    let report = run_scenario(&spec, &mut cache).map_err(from_core)?;
    cache.save(cache_path).map_err(from_core)?;
    match output {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&report).expect("serializable")),
        OutputFormat::Csv => {
            println!("scenario,metric,value,se");
            for (metric, value, se) in report.csv_rows() {
                match se {
                    Some(se) => println!("{},{},{},{}", report.scenario, metric, value, se),
                    None => println!("{},{},{},", report.scenario, metric, value),
                }
            }
        }
    }
    Ok(())
}

fn cmd_bench(n_grid: &str, seed: u64, zeta: f64) -> Result<(), CliError> {
    use rand::Rng;
    use rand::SeedableRng;
    use std::time::Instant;

    let sizes: Result<Vec<usize>, _> = n_grid
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect();
    let sizes = sizes.map_err(|_| CliError::Tuning(format!("bad --n-grid '{n_grid}'")))?;
    if sizes.iter().any(|&n| n < 16) {
        return Err(CliError::Tuning("bench sizes must be >= 16".to_string()));
    }

    println!("n,procedure,seconds");
    for &n in &sizes {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for j in 1..=4usize {
            let at = j * n / 5;
            for v in y[at..].iter_mut() {
                *v += if j % 2 == 0 { -2.0 } else { 2.0 };
            }
        }
        let p = PrefixSums::from_values(&y).map_err(from_core)?;
        let cfg = solver::SolverConfig::new(2.0, 4.0).map_err(from_core)?;

        let t = Instant::now();
        let exact = solver::solve_dp(&p, &cfg);
        println!("{n},dp,{}", t.elapsed().as_secs_f64());

        let t = Instant::now();
        let pruned = solver::solve_dp_pruned(&p, &cfg);
        println!("{n},dp-pruned,{}", t.elapsed().as_secs_f64());
        assert_eq!(exact.taus, pruned.taus);

        let t = Instant::now();
        let _ = postproc::detect_full(&p, zeta, true);
        println!("{n},lp-full,{}", t.elapsed().as_secs_f64());
    }
    Ok(())
}
