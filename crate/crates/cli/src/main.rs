use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use mhdbl::config::{content_hash, parse_config, RunConfig};
use mhdbl::energy::{gronwall_check, GronwallFit, GronwallSample};
use mhdbl::experiments::{
    convergence_study, lifespan_sweep, verify_algebra_with, ConvergenceReport, MmsStudy, Sampler,
    SweepResult,
};
use mhdbl::model::Regime;
use mhdbl::output::{self, EnergyLog, Stamp, Stamped};
use mhdbl::solver::run_observed;
use mhdbl::transform::{roundtrip_study, ROUNDTRIP_DELTA};

/// Overrides the output directory unless `--out` is given.
const OUT_ENV: &str = "MHDBL_OUTPUT_DIR";

const SPACE_ORDER: f64 = 1.9;
const TIME_ORDER: f64 = 0.9;
const ROUNDTRIP_TOL: f64 = 1e-8;

#[derive(Parser)]
#[command(
    name = "mhdbl",
    version,
    about = "MHD boundary-layer numerical laboratory",
    arg_required_else_help = true
)]
struct Cli {
    /// Output directory (default: $MHDBL_OUTPUT_DIR, then the config, then ./mhdbl-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration; writes the energy log, snapshots and a summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Lifespan sweep over eps.
    Sweep {
        #[arg(long, required_unless_present = "baseline")]
        config: Option<PathBuf>,
        /// Use the built-in breach baseline.
        #[arg(long, conflicts_with = "config")]
        baseline: bool,
        /// Comma-separated eps values (override the config).
        #[arg(long, value_delimiter = ',')]
        eps: Vec<f64>,
    },
    /// Randomized check of the algebraic identities.
    VerifyAlgebra {
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = SamplerArg::Admissible)]
        sampler: SamplerArg,
    },
    /// Manufactured-solution convergence study.
    Convergence {
        #[arg(long, value_enum, default_value_t = RegimeArg::Both)]
        regime: RegimeArg,
        /// Small ladders for a smoke run.
        #[arg(long)]
        quick: bool,
    },
    /// Transform round trip on the smooth test profile.
    TransformRoundtrip {
        #[arg(long, value_delimiter = ',', default_values_t = [128usize, 256, 512, 1024])]
        ny: Vec<usize>,
        #[arg(long, default_value_t = 16)]
        nx: usize,
        #[arg(long, default_value_t = ROUNDTRIP_DELTA)]
        delta: f64,
    },
    /// Plot data from the outputs of earlier runs.
    EmitPlots {
        /// Directory with summary.json + energy.csv, sweep.json or convergence.json.
        #[arg(long)]
        from: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
enum SamplerArg {
    Admissible,
    PressureEdge,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Isentropic,
    NonIsentropic,
    Both,
}

/// Errors that map to exit status 2.
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

enum Outcome {
    Pass,
    Fail(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct Summary {
    epsilon: f64,
    termination: String,
    detail: Option<String>,
    steps: usize,
    t_final: f64,
    t_breach4: Option<f64>,
    t_breach8: Option<f64>,
    log_rows: usize,
    gronwall: Option<GronwallFit>,
}

fn out_dir(flag: &Option<PathBuf>, config: Option<&str>) -> PathBuf {
    flag.clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| config.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("mhdbl-out"))
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Usage(format!("cannot read config {}: {e}", path.display())))?;
    let parsed = parse_config(&text).map_err(|e| match e {
        mhdbl::Error::Config(v) => Usage(format!(
            "invalid config {}:\n  {}",
            path.display(),
            v.join("\n  ")
        )),
        e => Usage(format!("invalid config {}: {e}", path.display())),
    })?;
    for w in &parsed.warnings {
        log::warn!("{}: {w}", path.display());
    }
    Ok(parsed.config)
}

fn prepare(dir: &Path) -> Result<()> {
    output::ensure_dir(dir).with_context(|| format!("creating {}", dir.display()))
}

fn simulate(cli_out: &Option<PathBuf>, path: &Path) -> Result<Outcome> {
    let cfg = load_config(path)?;
    let dir = out_dir(cli_out, Some(&cfg.output.dir));
    prepare(&dir)?;
    let stamp = Stamp::new(cfg.hash());
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let problem = cfg.problem()?;
    let initial = cfg.initial_state(&problem)?;
    let mut log = EnergyLog::create(&dir.join("energy.csv"), &stamp)?;
    let mut io_err = None;
    let result = run_observed(&problem, initial, &cfg.run_spec(), &mut |r| {
        if io_err.is_none() {
            io_err = log.append(r).err();
        }
    });
    let traj = match (result, io_err) {
        (Ok(t), None) => t,
        (Ok(_), Some(e)) => {
            let _ = log.abort(&e.to_string());
            return Err(e).context("writing energy.csv");
        }
        (Err(e), _) => {
            let _ = log.abort(&e.to_string());
            return Err(e.into());
        }
    };
    let rows = log.rows();
    log.finish(traj.termination.label())?;
    for s in &traj.snapshots {
        output::write_snapshot(&dir, &stamp, cfg.regime, cfg.grid, s)?;
    }
    let samples: Vec<GronwallSample> = traj
        .rows
        .iter()
        .map(|r| GronwallSample {
            t: r.t,
            e: r.e,
            d: r.d,
            f: r.f,
        })
        .collect();
    let gronwall = gronwall_check(&samples, cfg.thresholds.c0_max)
        .ok()
        .and_then(|g| g.best_fit().cloned());
    let detail = match &traj.termination {
        mhdbl::solver::Termination::Admissibility(m)
        | mhdbl::solver::Termination::StepFailure(m) => Some(m.clone()),
        _ => None,
    };
    let summary = Summary {
        epsilon: cfg.epsilon,
        termination: traj.termination.label().into(),
        detail,
        steps: traj.steps,
        t_final: traj.final_state.t,
        t_breach4: traj.breach4.map(|c| c.t),
        t_breach8: traj.breach8.map(|c| c.t),
        log_rows: rows,
        gronwall,
    };
    output::write_json(
        &dir.join("summary.json"),
        &Stamped {
            stamp: stamp.clone(),
            report: &summary,
        },
    )?;
    output::plot_energy(&dir, &stamp, &traj.rows, cfg.epsilon)?;
    println!(
        "{}: {} after {} steps (t = {:.4}), breach4 {:?}; output in {}",
        path.display(),
        summary.termination,
        summary.steps,
        summary.t_final,
        summary.t_breach4,
        dir.display()
    );
    Ok(if traj.termination.is_numerical_failure() {
        Outcome::Fail(format!(
            "numerical failure: {}",
            summary.detail.unwrap_or_default()
        ))
    } else if let Some(t) = summary.t_breach4 {
        Outcome::Fail(format!("E exceeded 4 eps^2 at t = {t}"))
    } else {
        Outcome::Pass
    })
}

fn sweep(
    cli_out: &Option<PathBuf>,
    config: &Option<PathBuf>,
    baseline: bool,
    eps: &[f64],
) -> Result<Outcome> {
    let cfg = match (config, baseline) {
        (Some(p), _) => load_config(p)?,
        (None, _) => RunConfig::breach_baseline(0.08),
    };
    let eps: Vec<f64> = if eps.is_empty() {
        cfg.sweep
            .as_ref()
            .map(|s| s.epsilons.clone())
            .ok_or_else(|| {
                Usage("no eps values: pass --eps or add [sweep] epsilons to the config".into())
            })?
    } else {
        eps.to_vec()
    };
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0)) {
        return Err(Usage(format!("eps = {e} must be positive")).into());
    }
    let dir = out_dir(cli_out, Some(&cfg.output.dir));
    prepare(&dir)?;
    let mut stamped = cfg.clone();
    stamped.sweep = Some(mhdbl::config::SweepConfig {
        epsilons: eps.clone(),
    });
    let stamp = Stamp::new(stamped.hash());
    std::fs::write(dir.join("config.toml"), stamped.to_toml())?;
    let result = lifespan_sweep(&eps, &cfg.sweep_base())?;
    output::write_sweep(&dir, &stamp, &result)?;
    output::plot_lifespan(&dir, &stamp, &result)?;
    for e in &result.entries {
        println!(
            "eps {:<8} T_breach4 {:?} ({}, {} steps)",
            e.epsilon, e.t_breach4, e.termination, e.steps
        );
    }
    Ok(match &result.theorem {
        Some(t) if !t.holds => Outcome::Fail(format!(
            "T(eps) >= C_fit eps^(-4/3) violated: {:?}",
            t.ratios
        )),
        _ => Outcome::Pass,
    })
}

fn algebra(
    cli_out: &Option<PathBuf>,
    samples: usize,
    seed: u64,
    sampler: SamplerArg,
) -> Result<Outcome> {
    let dir = out_dir(cli_out, None);
    prepare(&dir)?;
    let s = match sampler {
        SamplerArg::Admissible => Sampler::Admissible,
        SamplerArg::PressureEdge => Sampler::PressureEdge,
    };
    let rep = verify_algebra_with(samples, seed, s);
    let stamp = Stamp::new(content_hash(&format!(
        "verify-algebra {samples} {seed} {s:?}"
    )));
    output::write_json(
        &dir.join("algebra.json"),
        &Stamped {
            stamp,
            report: &rep,
        },
    )?;
    for c in &rep.checks {
        println!(
            "{:<48} max error {:.3e} (tol {:.0e}) failures {}",
            c.name, c.max_error, c.tolerance, c.failures
        );
    }
    Ok(if rep.pass {
        Outcome::Pass
    } else {
        Outcome::Fail("algebraic identity violated".into())
    })
}

fn quick_study(regime: Regime) -> MmsStudy {
    MmsStudy {
        space_ladder: vec![32, 64, 128],
        nx_divisor: 2,
        space_t_end: 0.02,
        time_ny: 64,
        time_dts: vec![0.02, 0.01, 0.005],
        time_t_end: 0.1,
        ..MmsStudy::standard(regime)
    }
}

fn convergence(cli_out: &Option<PathBuf>, regime: RegimeArg, quick: bool) -> Result<Outcome> {
    let dir = out_dir(cli_out, None);
    prepare(&dir)?;
    let regimes = match regime {
        RegimeArg::Isentropic => vec![Regime::Isentropic],
        RegimeArg::NonIsentropic => vec![Regime::NonIsentropic],
        RegimeArg::Both => vec![Regime::Isentropic, Regime::NonIsentropic],
    };
    let studies: Vec<MmsStudy> = regimes
        .into_iter()
        .map(|r| {
            if quick {
                quick_study(r)
            } else {
                MmsStudy::standard(r)
            }
        })
        .collect();
    let stamp = Stamp::new(content_hash(&serde_json::to_string(&studies)?));
    let reports = studies
        .iter()
        .map(convergence_study)
        .collect::<mhdbl::Result<Vec<ConvergenceReport>>>()?;
    output::write_json(
        &dir.join("convergence.json"),
        &Stamped {
            stamp: stamp.clone(),
            report: &reports,
        },
    )?;
    output::plot_orders(&dir, &stamp, &reports)?;
    let mut fails = Vec::new();
    for r in &reports {
        let (s, t) = (r.space.min_order(), r.time.min_order());
        println!("{:?}: spatial order {s:?}, temporal order {t:?}", r.regime);
        if !s.is_some_and(|o| o >= SPACE_ORDER) {
            fails.push(format!(
                "{:?} spatial order {s:?} < {SPACE_ORDER}",
                r.regime
            ));
        }
        if !t.is_some_and(|o| o >= TIME_ORDER) {
            fails.push(format!(
                "{:?} temporal order {t:?} < {TIME_ORDER}",
                r.regime
            ));
        }
    }
    Ok(if fails.is_empty() {
        Outcome::Pass
    } else {
        Outcome::Fail(fails.join("; "))
    })
}

fn roundtrip(cli_out: &Option<PathBuf>, ny: &[usize], nx: usize, delta: f64) -> Result<Outcome> {
    if ny.len() < 2 {
        return Err(Usage("--ny needs at least two grids".into()).into());
    }
    let dir = out_dir(cli_out, None);
    prepare(&dir)?;
    let rep = roundtrip_study(ny, nx, 20.0, delta).map_err(|e| Usage(e.to_string()))?;
    let stamp = Stamp::new(content_hash(&format!(
        "transform-roundtrip {ny:?} {nx} {delta}"
    )));
    output::write_json(
        &dir.join("transform.json"),
        &Stamped {
            stamp,
            report: &rep,
        },
    )?;
    for (n, e) in &rep.rows {
        println!("Ny {n:<6} sup error {e:.3e}");
    }
    println!("orders {:?}", rep.orders);
    let (err, order) = (rep.finest_error(), rep.min_order());
    Ok(if err <= ROUNDTRIP_TOL && order >= SPACE_ORDER {
        Outcome::Pass
    } else {
        Outcome::Fail(format!(
            "finest error {err:e} (tol {ROUNDTRIP_TOL:e}), min order {order}"
        ))
    })
}

fn read_stamped<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Stamped<T>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit_plots(cli_out: &Option<PathBuf>, from: &Option<PathBuf>) -> Result<Outcome> {
    let dir = out_dir(cli_out, None);
    let src = from.clone().unwrap_or_else(|| dir.clone());
    prepare(&dir)?;
    let mut written = Vec::new();
    let (summary, energy) = (src.join("summary.json"), src.join("energy.csv"));
    if summary.exists() && energy.exists() {
        let s: Stamped<Summary> = read_stamped(&summary)?;
        let rows = output::read_energy_log(&energy)?;
        written.push(output::plot_energy(
            &dir,
            &s.stamp,
            &rows,
            s.report.epsilon,
        )?);
    }
    let sweep = src.join("sweep.json");
    if sweep.exists() {
        let s: Stamped<SweepResult> = read_stamped(&sweep)?;
        written.push(output::plot_lifespan(&dir, &s.stamp, &s.report)?);
    }
    let conv = src.join("convergence.json");
    if conv.exists() {
        let s: Stamped<Vec<ConvergenceReport>> = read_stamped(&conv)?;
        written.push(output::plot_orders(&dir, &s.stamp, &s.report)?);
    }
    if written.is_empty() {
        return Err(Usage(format!(
            "{} holds none of summary.json + energy.csv, sweep.json, convergence.json",
            src.display()
        ))
        .into());
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(Outcome::Pass)
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Simulate { config } => simulate(&cli.out, config),
        Command::Sweep {
            config,
            baseline,
            eps,
        } => sweep(&cli.out, config, *baseline, eps),
        Command::VerifyAlgebra {
            samples,
            seed,
            sampler,
        } => algebra(&cli.out, *samples, *seed, *sampler),
        Command::Convergence { regime, quick } => convergence(&cli.out, *regime, *quick),
        Command::TransformRoundtrip { ny, nx, delta } => roundtrip(&cli.out, ny, *nx, *delta),
        Command::EmitPlots { from } => emit_plots(&cli.out, from),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail(why)) => {
            eprintln!("failed: {why}");
            ExitCode::from(1)
        }
        Err(e) if e.is::<Usage>() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
