//! Command-line front end: run a configured simulation, generate surfaces,
//! or run the element self-checks.
//!
//! Exit codes: 0 success, 1 self-check failure, 2 configuration error,
//! 3 solver failure, 4 I/O error.

use clap::{Parser, Subcommand};
use sealflow::config::{parse_config, RunConfig};
use sealflow::runner::{run_simulation, RunnerError};
use sealflow::solver::Simulation;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sealflow", about = "Thin fluid flow through contact interfaces", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the configured problem and run the load-stepping simulation.
    Run {
        /// TOML run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override the coupling mode (one_way, two_way_no_trap, two_way_full).
        #[arg(long)]
        mode: Option<String>,
        /// Override the number of load steps.
        #[arg(long)]
        steps: Option<u32>,
        /// Worker threads for the linear algebra backend (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Resume from a checkpoint written by a previous run of the same
        /// configuration.
        #[arg(long)]
        restart: Option<PathBuf>,
    },
    /// Generate the configured surface and write the plain-text height
    /// matrix (meters, row-major).
    GenSurface {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run randomized finite-difference checks of every element tangent.
    Selfcheck {
        /// Randomized states per element type.
        #[arg(long, default_value_t = 25)]
        trials: usize,
        /// Deliberately perturb the tangents; the run must then fail
        /// (verification hook for the harness itself).
        #[arg(long, hide = true)]
        perturb: bool,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, mode, steps, threads, out, restart } => {
            run(config, mode, steps, threads, out, restart)
        }
        Command::GenSurface { config, out } => gen_surface(config, out),
        Command::Selfcheck { trials, perturb } => selfcheck(trials, perturb),
    }
}

fn load_config(path: &PathBuf) -> Result<RunConfig, ExitCode> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return Err(ExitCode::from(4));
        }
    };
    match parse_config(&text) {
        Ok(cfg) => Ok(cfg),
        Err(errors) => {
            eprintln!("error: invalid configuration {}:", path.display());
            for e in &errors {
                eprintln!("  {e}");
            }
            Err(ExitCode::from(2))
        }
    }
}

fn run(
    config: PathBuf,
    mode: Option<String>,
    steps: Option<u32>,
    threads: Option<usize>,
    out: Option<PathBuf>,
    restart: Option<PathBuf>,
) -> ExitCode {
    if let Some(t) = threads {
        let par = if t <= 1 { faer::Par::Seq } else { faer::Par::rayon(t) };
        faer::set_global_parallelism(par);
    }
    let mut cfg = match load_config(&config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    // CLI overrides beat config values.
    if let Some(m) = mode {
        cfg.solver.mode = match m.as_str() {
            "one_way" => sealflow::CouplingMode::OneWay,
            "two_way_no_trap" => sealflow::CouplingMode::TwoWayNoTrap,
            "two_way_full" => sealflow::CouplingMode::TwoWayFull,
            other => {
                eprintln!("error: unknown mode '{other}'");
                return ExitCode::from(2);
            }
        };
    }
    if let Some(s) = steps {
        cfg.solver.load_steps = s;
    }
    if let Some(o) = out {
        cfg.output.directory = o.display().to_string();
    }
    let restart = restart.or_else(|| cfg.output.restart_from.clone().map(PathBuf::from));

    let problem = match cfg.build_problem() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot build problem: {e}");
            return ExitCode::from(2);
        }
    };
    let (mut sim, fresh) = match &restart {
        Some(ckpt) => match Simulation::restore(problem, cfg.solver.clone(), ckpt) {
            Ok(s) => {
                println!("resuming from step {} ({})", s.state.step, ckpt.display());
                (s, false)
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(4);
            }
        },
        None => (Simulation::new(problem, cfg.solver.clone()), true),
    };

    let result = run_simulation(&mut sim, &cfg.output, fresh, |report| {
        let s = &report.summary;
        println!(
            "step {:4}  iters {:2}  S {:4}  p_ext {:.6e}  K_eff {:.6e}  A/A0 {:.4}  n_tf {}{}",
            s.step,
            s.newton_iterations,
            s.final_status_changes,
            s.p_ext,
            s.k_eff,
            s.area_frac_refined,
            s.n_tf,
            if s.sealed { "  [sealed]" } else { "" }
        );
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    });
    match result {
        Ok(summary) => {
            println!(
                "STATUS: ok steps={} sealed_at={} k_eff={:.6e}",
                summary.steps_completed,
                summary.sealed_at.map_or_else(|| "none".into(), |s| s.to_string()),
                summary.final_k_eff
            );
            ExitCode::SUCCESS
        }
        Err(RunnerError::Solver(e)) => {
            eprintln!("error: {e}");
            println!("STATUS: solver_failure");
            ExitCode::from(3)
        }
        Err(RunnerError::Io { path, source }) => {
            eprintln!("error: i/o failure on {path}: {source}");
            println!("STATUS: io_failure");
            ExitCode::from(4)
        }
    }
}

fn gen_surface(config: PathBuf, out: PathBuf) -> ExitCode {
    let cfg = match load_config(&config) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let heights = match cfg.geometry.profile.heights() {
        Ok(h) => h,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut buf = Vec::new();
    if let Err(e) = heights.write_text(&mut buf).and_then(|()| std::fs::write(&out, &buf)) {
        eprintln!("error: cannot write {}: {e}", out.display());
        return ExitCode::from(4);
    }
    println!(
        "wrote {} ({} x {} points, rms {:.6e} m)",
        out.display(),
        heights.n,
        heights.n,
        heights.rms()
    );
    ExitCode::SUCCESS
}

fn selfcheck(trials: usize, perturb: bool) -> ExitCode {
    let results = sealflow::selfcheck::run_all(trials, 2024, perturb);
    println!("{:<10} {:>8} {:>14} {:>10}  result", "element", "trials", "max rel err", "tolerance");
    let mut ok = true;
    for r in &results {
        println!(
            "{:<10} {:>8} {:>14.3e} {:>10.1e}  {}",
            r.element,
            r.trials,
            r.max_rel_error,
            r.tolerance,
            if r.passed() { "pass" } else { "FAIL" }
        );
        ok &= r.passed();
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
