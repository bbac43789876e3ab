//! Command-line front end for the `rfic` toolkit.
//!
//! Three subcommands cover the daily loop:
//!
//! * `solve`  — generate one seeded channel realization from a spec's
//!   base scenario and print the interference-cancellation outcome as
//!   `key=value` lines (scriptable, exact round-trip floats).
//! * `run`    — execute a full experiment spec and write `raw.csv` and
//!   `summary.csv` into an output directory.
//! * `check`  — run the built-in invariant self-checks.
//!
//! Exit codes: 0 success, 1 config/usage error, 2 numerical failure
//! (singular or rank-deficient instance, failed self-check). Every
//! failure prints a one-line diagnostic to stderr.

use std::fs::{self, File};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rfic::baselines::null_projector;
use rfic::channel::{generate_channel_set, ChannelSet, FadingModel, Geometry};
use rfic::harness::{
    load_spec, run_experiment, summarize, write_raw_csv, write_summary_csv, ExperimentSpec,
    Method, ResultRow, SweepParameter, SweepSpec,
};
use rfic::solver::{solve_interference, Regime};
use rfic::sysmodel::{
    assemble_ris_matrix, effective_channels, gradient_objective, objective, stacked_system,
    RisConfig, ScenarioConfig,
};
use rfic::Result;

#[derive(Parser)]
#[command(
    name = "rfic",
    version,
    about = "Reflective-surface interference cancellation: solves, sweeps, self-checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one seeded instance and print the outcome as key=value lines.
    Solve(SolveArgs),
    /// Run an experiment spec and write raw.csv + summary.csv.
    Run(RunArgs),
    /// Run the built-in invariant self-checks.
    Check,
}

#[derive(Args)]
struct SolveArgs {
    /// Experiment spec (JSON); only its base scenario, geometry, and
    /// fading model are used.
    #[arg(long)]
    config: PathBuf,
    /// Channel seed; defaults to the spec's base_seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment spec (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Directory for raw.csv and summary.csv (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Override the spec's base_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the method list (comma-separated).
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<Method>>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            // Bad flags or arguments are description problems, same
            // family as a malformed config file.
            eprint!("{e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            // --help / --version land here.
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve(args) => cmd_solve(args).map(|()| ExitCode::SUCCESS),
        Command::Run(args) => cmd_run(args).map(|()| ExitCode::SUCCESS),
        Command::Check => cmd_check(),
    }
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let spec = load_spec(&args.config)?;
    let seed = args.seed.unwrap_or(spec.base_seed);
    let cfg = &spec.base;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = generate_channel_set(cfg, &spec.geometry, &spec.fading, &mut rng)?;
    let out = solve_interference(cfg, &ch)?;

    // Reference interference powers with the surface off, in the same
    // units the outcome reports its residuals in (raw stacked-vector
    // power for the exact regimes, transmit-weighted watts for the
    // least-squares regime).
    let sys = stacked_system(&ch)?;
    let ul_off_raw = sys.r.rows(0, cfg.n_r).norm_squared();
    let dl_off_raw = sys.r.rows(cfg.n_r, cfg.m).norm_squared();
    let (ul_off, dl_off) = match out.regime {
        Regime::Overdetermined => (cfg.p_d() * ul_off_raw, cfg.p_u() * dl_off_raw),
        _ => (ul_off_raw, dl_off_raw),
    };

    println!("seed={seed}");
    println!("regime={}", out.regime.as_str());
    println!("objective_value={}", out.objective_value);
    println!("residual_ul={}", out.residual_ul);
    println!("residual_dl={}", out.residual_dl);
    println!("ul_cancellation_ratio={}", out.residual_ul / ul_off);
    println!("dl_cancellation_ratio={}", out.residual_dl / dl_off);
    println!("modulus_deviation={}", out.modulus_deviation);
    println!("qos_feasible={}", out.qos_feasible);
    match out.sweeps_used {
        Some(n) => println!("sweeps_used={n}"),
        None => println!("sweeps_used=-"),
    }
    let phases: Vec<String> = out.phases.iter().map(f64::to_string).collect();
    println!("phases={}", phases.join(","));
    Ok(())
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut spec = load_spec(&args.config)?;
    if let Some(seed) = args.seed {
        spec.base_seed = seed;
    }
    if let Some(trials) = args.trials {
        spec.trials = trials;
    }
    if let Some(methods) = args.method {
        spec.methods = methods;
    }
    // Overrides can invalidate a spec that loaded fine (e.g. --trials 0).
    spec.validate()?;

    let rows = run_experiment(&spec)?;
    let summary = summarize(&rows);

    fs::create_dir_all(&args.out)?;
    let raw_path = args.out.join("raw.csv");
    write_raw_csv(&rows, File::create(&raw_path)?)?;
    let summary_path = args.out.join("summary.csv");
    write_summary_csv(&summary, File::create(&summary_path)?)?;

    println!("wrote {} ({} rows)", raw_path.display(), rows.len());
    println!("wrote {} ({} rows)", summary_path.display(), summary.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

type Check<T = ()> = std::result::Result<T, String>;

fn cmd_check() -> Result<ExitCode> {
    let checks: &[(&str, fn() -> Check)] = &[
        ("determinism", check_determinism),
        ("cancellation", check_cancellation),
        ("projector", check_projector),
        ("gradient", check_gradient),
        ("unit-modulus", check_unit_modulus),
    ];
    let mut failed = 0usize;
    for (name, check) in checks {
        match check() {
            Ok(()) => println!("ok {name}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("error: {failed} self-check(s) failed");
        return Ok(ExitCode::from(2));
    }
    println!("all checks passed");
    Ok(ExitCode::SUCCESS)
}

/// The scenario the self-checks run on; small and determined unless a
/// check overrides a field.
fn check_scenario() -> ScenarioConfig {
    ScenarioConfig {
        n_t: 2,
        n_r: 2,
        n: 2,
        m: 2,
        k: 4,
        p_u_max: 1e-3,
        p_d_max: 1e-3,
        alpha: 0.95,
        n0: 3.981_071_705_534_956_5e-21,
        b: 20e6,
        mu: 1.0,
        t_thr_u: 0.0,
        t_thr_d: 0.0,
        gamma_thr_u: 0.0,
        gamma_thr_d: 0.0,
    }
}

fn check_channels(cfg: &ScenarioConfig, d_bs_ris: f64, seed: u64) -> Check<ChannelSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_channel_set(
        cfg,
        &Geometry::with_ris_at(d_bs_ris),
        &FadingModel::default(),
        &mut rng,
    )
    .map_err(|e| e.to_string())
}

/// Identical spec run twice must serialize to identical CSV bytes.
fn check_determinism() -> Check {
    let spec = ExperimentSpec {
        base: check_scenario(),
        geometry: Geometry::with_ris_at(60.0),
        fading: FadingModel::default(),
        sweep: SweepSpec {
            parameter: SweepParameter::PDMax,
            values: vec![1e-3, 5e-3],
        },
        methods: vec![Method::NoRis, Method::RficRelaxed],
        trials: 2,
        base_seed: 7,
        grid_size: 16,
        max_sweeps: 5,
        cd_tolerance: 1e-9,
    };
    let csv_bytes = |rows: &[ResultRow]| -> Check<Vec<u8>> {
        let mut buf = Vec::new();
        write_raw_csv(rows, &mut buf).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    let first = csv_bytes(&run_experiment(&spec).map_err(|e| e.to_string())?)?;
    let second = csv_bytes(&run_experiment(&spec).map_err(|e| e.to_string())?)?;
    if first != second {
        return Err("two runs of one spec produced different raw CSV bytes".into());
    }
    Ok(())
}

/// Determined-regime solve must cancel both interference directions to
/// the residual floor.
fn check_cancellation() -> Check {
    let cfg = check_scenario();
    let ch = check_channels(&cfg, 60.0, 42)?;
    let sys = stacked_system(&ch).map_err(|e| e.to_string())?;
    let out = solve_interference(&cfg, &ch).map_err(|e| e.to_string())?;
    let ul = out.residual_ul / sys.r.rows(0, cfg.n_r).norm_squared();
    let dl = out.residual_dl / sys.r.rows(cfg.n_r, cfg.m).norm_squared();
    if ul > 1e-18 || dl > 1e-18 {
        return Err(format!(
            "cancellation ratios UL {ul:.2e}, DL {dl:.2e} exceed 1e-18"
        ));
    }
    Ok(())
}

/// Null-steering projector must be an orthogonal projector that
/// annihilates the interference channel it was built from.
fn check_projector() -> Check {
    let mut cfg = check_scenario();
    cfg.n_t = 1;
    cfg.k = 8;
    let ch = check_channels(&cfg, 30.0, 43)?;
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let ris = RisConfig::random(cfg.alpha, cfg.k, &mut rng);
    let eff = effective_channels(&ch, &assemble_ris_matrix(&ris)).map_err(|e| e.to_string())?;
    let p = null_projector(&eff.ul_int);
    let max_abs = |m: &DMatrix<Complex64>| m.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    let idem = max_abs(&(&p * &p - &p));
    let herm = max_abs(&(&p - &p.adjoint()));
    let nulls = max_abs(&(&p * &eff.ul_int));
    if idem > 1e-12 || herm > 1e-12 || nulls > 1e-12 {
        return Err(format!(
            "projector defects: |P^2-P| {idem:.2e}, |P-P^H| {herm:.2e}, |P H| {nulls:.2e}"
        ));
    }
    Ok(())
}

/// Analytic objective gradient must match central finite differences.
fn check_gradient() -> Check {
    let cfg = check_scenario();
    let ch = check_channels(&cfg, 60.0, 45)?;
    // Fixed, incommensurate phase offsets — no RNG needed for one probe.
    let theta: Vec<f64> = (0..cfg.k).map(|j| 0.7 + 1.3 * j as f64).collect();
    let analytic = gradient_objective(&cfg, &ch, &theta).map_err(|e| e.to_string())?;
    let h = 1e-6;
    let mut fd = vec![0.0; cfg.k];
    for j in 0..cfg.k {
        let eval = |t: f64| -> Check<f64> {
            let mut th = theta.clone();
            th[j] = t;
            let p = DVector::from_iterator(
                cfg.k,
                th.iter().map(|&a| Complex64::from_polar(cfg.alpha, a)),
            );
            objective(&cfg, &ch, &p).map_err(|e| e.to_string())
        };
        fd[j] = (eval(theta[j] + h)? - eval(theta[j] - h)?) / (2.0 * h);
    }
    let diff: f64 = analytic
        .iter()
        .zip(&fd)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
    if diff > 1e-5 * scale {
        return Err(format!("gradient mismatch: {:.2e} relative", diff / scale));
    }
    Ok(())
}

/// Phase-only projection must put every element exactly on the
/// efficiency circle.
fn check_unit_modulus() -> Check {
    let cfg = check_scenario();
    let ch = check_channels(&cfg, 60.0, 47)?;
    let out = solve_interference(&cfg, &ch).map_err(|e| e.to_string())?;
    let unit = out.ris_unit_modulus();
    for (i, e) in unit.reflection.iter().enumerate() {
        if (e.norm() - cfg.alpha).abs() > 1e-12 {
            return Err(format!(
                "element {i} modulus {} is off the {} circle",
                e.norm(),
                cfg.alpha
            ));
        }
    }
    Ok(())
}
