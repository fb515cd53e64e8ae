//! `sqglab`: drift-diffusion runs with fractional dissipation and the
//! regularity diagnostics suite around them.
//!
//! Exit codes: 0 all selected checks pass (or are inconclusive with a
//! recorded reason), 1 a check failed, 2 usage or input error, 3 runtime
//! blow-up.

mod commands;
mod config;
mod manifest;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sqglab", version, about = "Pseudo-spectral drift-diffusion lab")]
struct Cli {
    /// Worker threads for the data-parallel kernels.
    #[arg(long, global = true, env = "SQGLAB_THREADS")]
    threads: Option<usize>,

    /// Override every configured RNG seed.
    #[arg(long, global = true)]
    seed_override: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configured run and write snapshots plus diagnostics.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Verify the inequality suite on a stored trajectory.
    Diagnose {
        #[arg(long)]
        traj: PathBuf,
        /// "all" or a comma-separated subset of
        /// energy_law,level_set,uk,linf_decay,cordoba,local_energy,bmo,duhamel
        #[arg(long, default_value = "all")]
        checks: String,
        #[arg(long)]
        out: PathBuf,
        /// Optional config providing the [diagnostics] section.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Barrier functions, the constants ledger, and the isoperimetric
    /// measurement.
    Lemmas {
        /// "all" or one of b1,b2,constants,isoperimetric
        #[arg(long, default_value = "all")]
        check: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Sine-eigenbasis Galerkin run with its energy checks.
    Galerkin {
        #[arg(long)]
        kmax: usize,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// "zero", "rotational", or a path to an SQGF stream function on
        /// the quadrature grid.
        #[arg(long, default_value = "zero")]
        drift: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        /// Spatial dimension of the box (1 or 2).
        #[arg(long, default_value_t = 2)]
        ndim: usize,
        /// Seed for the random initial coefficient vector.
        #[arg(long, default_value_t = 1)]
        ic_seed: u64,
    },
    /// Fit local Hölder exponents on a stored trajectory.
    Holder {
        #[arg(long)]
        traj: PathBuf,
        /// "random:<count>:<seed>" or a path to a JSON list of
        /// {"t": .., "x": [..]} points.
        #[arg(long)]
        points: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Throughput table for the main kernels.
    Bench {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated grid sizes.
        #[arg(long, default_value = "32,64,128")]
        sizes: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: failed to build thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match cli.command {
        Command::Run { config, out } => commands::run::execute(&config, &out, cli.seed_override),
        Command::Diagnose { traj, checks, out, config } => {
            commands::diagnose::execute(&traj, &checks, &out, config.as_deref())
        }
        Command::Lemmas { check, out, config } => {
            commands::lemmas::execute(&check, &out, config.as_deref(), cli.seed_override)
        }
        Command::Galerkin { kmax, eps, drift, out, dt, t_end, ndim, ic_seed } => {
            commands::galerkin_cmd::execute(kmax, eps, &drift, &out, dt, t_end, ndim, ic_seed)
        }
        Command::Holder { traj, points, out, config } => {
            commands::holder_cmd::execute(&traj, &points, &out, config.as_deref())
        }
        Command::Bench { out, sizes } => commands::bench::execute(out.as_deref(), &sizes),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code_for(&e))
        }
    }
}
