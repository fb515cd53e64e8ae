//! `sqglab run`: integrate a configured run, write SQGF snapshots, the
//! diagnostics CSV, and a manifest sufficient to re-run the experiment.

use crate::config::ExperimentConfig;
use crate::manifest::{sha256_hex, Manifest};
use sqglab_core::error::{Error, Result};
use sqglab_core::io;
use sqglab_core::solver::Solver;
use std::path::Path;

pub fn execute(config_path: &Path, out: &Path, seed_override: Option<u64>) -> Result<u8> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", config_path.display())))?;
    let cfg = ExperimentConfig::from_str_checked(&text)?;
    let run = cfg.run_section()?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let solver_cfg = run.to_solver_config(base, seed_override)?;

    let solver = Solver::new(solver_cfg.clone())?;
    let traj = solver.run()?;

    std::fs::create_dir_all(out)?;
    io::save_trajectory(out, &traj)?;
    Manifest {
        tool: "sqglab".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command: "run".into(),
        config_sha256: sha256_hex(&text),
        beta: solver_cfg.beta,
        kappa: solver_cfg.kappa,
        drift: run.drift_name().into(),
        t_end: solver_cfg.t_end,
        grid: solver_cfg.grid.dims().to_vec(),
        domain_length: solver_cfg.grid.lens().to_vec(),
        snapshot_stride: solver_cfg.snapshot_stride,
        config_text: text,
    }
    .save(out)?;

    if let Some(reason) = &traj.aborted {
        eprintln!("run aborted: {reason}; partial trajectory written to {}", out.display());
        return Err(Error::BlowUp {
            time: traj.final_state().time_tag,
            step: *traj.snapshot_steps.last().unwrap(),
        });
    }
    println!(
        "run complete: {} snapshots, {} steps, final |θ|_∞ = {:.6e}",
        traj.snapshots.len(),
        traj.scalars.len() - 1,
        traj.final_state().linf_norm()
    );
    Ok(0)
}
