//! `qzak` command-line driver.
//!
//! Exit status: 0 success, 1 other failure (IO, malformed input),
//! 2 configuration error, 3 divergence, 4 verification failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qzak_core::diagnostics::verify_log;
use qzak_core::experiments::{absorbing_set_experiment, convergence_study, two_trajectory_experiment, AbsorbReport};
use qzak_core::io::{
    fmt17, read_trajectory_csv, run_dir, save_checkpoint, write_absorb_report, write_config_echo,
    write_contraction_report, write_convergence_report, write_summary, write_trajectory_csv, Checkpoint,
};
use qzak_core::{integrate, parse_config, Error, IntegrateOptions, RunConfig, State};

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "qzak", version, about = "Damped, forced quantum Zakharov system in a sine Galerkin basis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate one configuration; write the trajectory CSV and final checkpoint.
    Run(Common),
    /// Check balance relations, decay bound and mass identity on a run or a CSV.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Verify this trajectory CSV instead of running the configuration.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Self-convergence in N and dt.
    Converge(Common),
    /// Absorbing-ball probe at the configured parameter point.
    Absorb(Common),
    /// Two-trajectory contraction probe.
    Contract(Common),
    /// Absorbing-ball probe over the sweep_* parameter grid.
    Sweep(Common),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output root (default: config `out`, then $QZAK_OUT, then ./qzak-out);
    /// a subdirectory named by the config hash is created inside.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "N")]
    modes: Option<usize>,
    #[arg(long = "T")]
    t_end: Option<f64>,
}

enum Failure {
    Core(Error),
    Verify(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Common {
    fn load(&self) -> Result<RunConfig, Failure> {
        let text = fs::read_to_string(&self.config).map_err(|e| Error::Io {
            path: self.config.clone(),
            source: e,
        })?;
        let mut cfg = parse_config(&text)?;
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(n) = self.modes {
            cfg.modes = n;
        }
        if let Some(t) = self.t_end {
            cfg.t_end = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &RunConfig) -> PathBuf {
        let root = self
            .out
            .clone()
            .or_else(|| cfg.out.clone())
            .or_else(|| std::env::var_os("QZAK_OUT").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("qzak-out"));
        run_dir(&root, cfg)
    }
}

fn checkpoint(cfg: &RunConfig, state: State) -> Checkpoint {
    Checkpoint {
        length: cfg.length,
        h: cfg.h,
        alpha: cfg.alpha,
        gamma: cfg.gamma,
        state,
    }
}

fn options(cfg: &RunConfig) -> IntegrateOptions {
    IntegrateOptions {
        cadence: cfg.cadence,
        semi_strong: cfg.semi_strong,
        keep_states: true,
        ..Default::default()
    }
}

// runs the configuration; on divergence the last finite state is saved
fn run_config(cfg: &RunConfig, dir: &Path) -> Result<qzak_core::TrajectoryLog, Failure> {
    let basis = cfg.basis()?;
    let params = cfg.params()?;
    let initial = cfg.initial_state(&basis);
    match integrate(&initial, &params, &basis, cfg.dt, cfg.t_end, options(cfg)) {
        Ok(log) => Ok(log),
        Err(Error::Divergence { t, last_good }) => {
            if let Some(state) = *last_good.clone() {
                save_checkpoint(&checkpoint(cfg, state), &dir.join("checkpoint_last_good.txt"))?;
            }
            Err(Error::Divergence { t, last_good }.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_run(common: &Common) -> Result<(), Failure> {
    let cfg = common.load()?;
    let dir = common.out_dir(&cfg);
    write_config_echo(&dir, &cfg)?;
    let log = run_config(&cfg, &dir)?;
    write_trajectory_csv(&log, &dir.join("trajectory.csv"))?;
    let last = log.records.last().and_then(|r| r.state.clone()).expect("states are kept");
    save_checkpoint(&checkpoint(&cfg, last), &dir.join("checkpoint.txt"))?;
    let end = log.records.last().expect("integrate logs the initial state");
    write_summary(
        &dir.join("summary.txt"),
        &[
            ("records".into(), log.len().to_string()),
            ("t_end".into(), fmt17(end.t)),
            ("V".into(), fmt17(end.energies.v)),
            ("massE".into(), fmt17(end.energies.mass_e)),
        ],
    )?;
    println!("{}", dir.display());
    Ok(())
}

fn cmd_verify(common: &Common, csv: Option<&Path>) -> Result<(), Failure> {
    let cfg = common.load()?;
    let basis = cfg.basis()?;
    let params = cfg.params()?;
    let initial = cfg.initial_state(&basis);
    let log = match csv {
        Some(path) => read_trajectory_csv(path)?,
        None => {
            let dir = common.out_dir(&cfg);
            write_config_echo(&dir, &cfg)?;
            let log = run_config(&cfg, &dir)?;
            write_trajectory_csv(&log, &dir.join("trajectory.csv"))?;
            log
        }
    };
    let report = verify_log(&log, &params, &basis, Some(&initial))?;
    for c in &report.checks {
        println!(
            "{} {:<24} value = {:.3e}  tolerance = {:.3e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<_> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        Err(Failure::Verify(failed.join(", ")))
    }
}

fn print_absorb(report: &AbsorbReport) {
    for p in &report.points {
        let pt = p.point;
        println!(
            "h = {} alpha = {} gamma = {} load_scale = {}: ball = {:.4e}, spread = {:.3}, radius independent = {}",
            pt.h, pt.alpha, pt.gamma, pt.load_scale, p.ball_radius, p.spread, p.radius_independent
        );
        for r in &p.radii {
            println!(
                "  R = {}: entry = {}, final max = {:.4e}, final mean = {:.4e}, diverged members = {}",
                r.radius,
                r.entry_time.map(|t| format!("{t:.3}")).unwrap_or_else(|| "none".into()),
                r.final_max,
                r.final_mean,
                r.diverged.len()
            );
        }
    }
}

fn cmd_absorb(common: &Common, sweep: bool) -> Result<(), Failure> {
    let cfg = common.load()?;
    let spec = if sweep { cfg.sweep_spec()? } else { cfg.absorb_spec()? };
    let report = absorbing_set_experiment(&spec)?;
    let dir = common.out_dir(&cfg);
    write_config_echo(&dir, &cfg)?;
    write_absorb_report(&dir, &report)?;
    print_absorb(&report);
    println!("{}", dir.display());
    Ok(())
}

fn cmd_contract(common: &Common) -> Result<(), Failure> {
    let cfg = common.load()?;
    let report = two_trajectory_experiment(&cfg.contraction_spec()?)?;
    let dir = common.out_dir(&cfg);
    write_config_echo(&dir, &cfg)?;
    write_contraction_report(&dir, &report)?;
    match report.fit {
        Some(fit) => println!(
            "a = {:.4e}, kappa = {:.4e}, b = {:.4e}, envelope holds = {}, valid = {}",
            fit.a, fit.kappa, fit.b, fit.holds, report.valid
        ),
        None => println!("eps = 0: difference vanishes, fit skipped"),
    }
    println!("{}", dir.display());
    Ok(())
}

fn cmd_converge(common: &Common) -> Result<(), Failure> {
    let cfg = common.load()?;
    let report = convergence_study(&cfg.convergence_spec())?;
    let dir = common.out_dir(&cfg);
    write_config_echo(&dir, &cfg)?;
    write_convergence_report(&dir, &report)?;
    println!("reference: N = {}, dt = {:e}", report.n_ref, report.dt_ref);
    for (n, e) in &report.n_errors {
        println!("N = {n:<5} error = {e:.4e}");
    }
    for (dt, e) in &report.dt_errors {
        println!("dt = {dt:<8e} error = {e:.4e}");
    }
    println!("N ratios: {:?}", report.n_ratios);
    println!("dt orders: {:?}", report.dt_orders);
    println!("{}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Verify { common, csv } => cmd_verify(common, csv.as_deref()),
        Command::Converge(c) => cmd_converge(c),
        Command::Absorb(c) => cmd_absorb(c, false),
        Command::Contract(c) => cmd_contract(c),
        Command::Sweep(c) => cmd_absorb(c, true),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verify(names)) => {
            eprintln!("verification failed: {names}");
            ExitCode::from(EXIT_VERIFY)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config { .. } | Error::LengthMismatch { .. } => EXIT_CONFIG,
                Error::Divergence { .. } => EXIT_DIVERGENCE,
                _ => EXIT_OTHER,
            })
        }
    }
}
