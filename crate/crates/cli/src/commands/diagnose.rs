//! `sqglab diagnose`: run the inequality suite against a stored trajectory
//! and emit a flat JSON report.

use crate::config::{DiagnosticsSection, ExperimentConfig};
use crate::manifest::Manifest;
use sqglab_core::degiorgi::{
    self, bmo_seminorm, cordoba_pointwise_check, level_set_energy_check, linf_decay_check,
    local_energy_check, uk_recursion_check, uk_sequence, ConvexScalar, LocalCutoff,
};
use sqglab_core::error::{Error, Result};
use sqglab_core::extension::ZLevels;
use sqglab_core::io;
use sqglab_core::report::{Check, CheckStatus, Report};
use sqglab_core::solver::{duhamel_residual, DriftMode, Trajectory};
use std::path::Path;

const ALL_CHECKS: &[&str] = &[
    "energy_law",
    "level_set",
    "uk",
    "linf_decay",
    "cordoba",
    "local_energy",
    "bmo",
    "duhamel",
];

pub fn execute(
    traj_dir: &Path,
    checks: &str,
    out: &Path,
    config: Option<&Path>,
) -> Result<u8> {
    let manifest = Manifest::load(traj_dir)?;
    let traj = io::load_trajectory(traj_dir, manifest.beta, manifest.kappa, &manifest.drift)?;
    let section = match config {
        Some(p) => ExperimentConfig::from_path(p)?.diagnostics.unwrap_or_default(),
        None => DiagnosticsSection::default(),
    };

    let selected: Vec<String> = if checks.trim() == "all" {
        ALL_CHECKS.iter().map(|s| s.to_string()).collect()
    } else {
        checks.split(',').map(|s| s.trim().to_string()).collect()
    };
    for name in &selected {
        if !ALL_CHECKS.contains(&name.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "unknown check {name:?}; available: {}",
                ALL_CHECKS.join(",")
            )));
        }
    }

    let mut report = Report::new();
    let provenance = format!(
        "traj {} (grid {:?}, beta {}, kappa {}, drift {})",
        traj_dir.display(),
        manifest.grid,
        manifest.beta,
        manifest.kappa,
        manifest.drift
    );
    for name in &selected {
        let mut section_report = match name.as_str() {
            "energy_law" => energy_law(&traj),
            "level_set" => level_set(&traj, &section),
            "uk" => uk_machinery(&traj, &section),
            "linf_decay" => linf_decay(&traj),
            "cordoba" => cordoba(&traj)?,
            "local_energy" => local_energy(&traj, &section)?,
            "bmo" => bmo(&traj)?,
            "duhamel" => duhamel(&traj)?,
            _ => unreachable!(),
        };
        for c in &mut section_report.checks {
            c.provenance = provenance.clone();
        }
        report.merge(section_report);
    }
    super::finish_report(&report, out)
}

fn energy_law(traj: &Trajectory) -> Report {
    let mut r = Report::new();
    let scale = traj.initial().l2_norm_sq();
    let residual = traj.energy_law_residual();
    if residual.is_nan() {
        r.push(Check::inconclusive(
            "energy_law",
            residual,
            "dissipation series unavailable for beta != 1",
        ));
    } else {
        r.push(Check::from_bound("energy_law", residual.abs(), 1e-6 * scale));
    }
    r.record("energy_law.l2_initial_sq", scale);
    r
}

fn level_set(traj: &Trajectory, section: &DiagnosticsSection) -> Report {
    let mut r = Report::new();
    let theta0 = traj.initial();
    let (lo, hi) = (theta0.min(), theta0.max());
    let t1 = theta0.time_tag;
    let t2 = traj.final_state().time_tag;
    let n = section.levels.max(2);
    let mut worst = f64::NEG_INFINITY;
    let mut any_inconclusive = false;
    for i in 0..n {
        let lam = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        match level_set_energy_check(traj, lam, t1, t2) {
            Ok(check) => {
                if check.status == CheckStatus::Inconclusive {
                    any_inconclusive = true;
                } else {
                    worst = worst.max(check.residual);
                }
                r.record(format!("level_set.residual_{i:02}"), check.residual);
            }
            Err(e) => {
                r.push(Check::inconclusive("level_set", f64::NAN, e.to_string()));
                return r;
            }
        }
    }
    let tolerance = degiorgi::LEVEL_SET_TOL_FACTOR * theta0.l2_norm_sq();
    if any_inconclusive {
        r.push(Check::inconclusive("level_set", worst, "too few snapshots in the window"));
    } else {
        r.push(Check::from_bound("level_set", worst, tolerance).with_note(format!(
            "{n} levels spanning [{lo:.3e}, {hi:.3e}] over [{t1}, {t2}]"
        )));
    }
    r
}

fn uk_machinery(traj: &Trajectory, section: &DiagnosticsSection) -> Report {
    let mut r = Report::new();
    let t_end = traj.final_state().time_tag;
    let t0 = section.t0_fraction * t_end;
    // Cap from the measured decay constant, as in the L²→L∞ argument.
    let decay = match linf_decay_check(traj, t0 / 2.0, t_end) {
        Ok(d) => d,
        Err(e) => {
            r.push(Check::inconclusive("uk", f64::NAN, e.to_string()));
            return r;
        }
    };
    let half_n = traj.grid.ndim() as f64 / 2.0;
    let m_cap = 2.0 * decay.constant * traj.initial().l2_norm() / t0.powf(half_n);
    match uk_sequence(traj, m_cap, t0, section.uk_levels) {
        Ok(ledger) => {
            for (k, &u) in ledger.energies.iter().enumerate() {
                r.record(format!("uk.u_{k}"), u);
                r.record(format!("uk.tail_bound_{k}"), ledger.tail_bounds[k]);
            }
            let u0_bound = traj.initial().l2_norm_sq() + 1e-8;
            r.push(Check::from_bound("uk.u0_bound", ledger.energies[0], u0_bound));
            match uk_recursion_check(&ledger, traj.grid.ndim()) {
                Ok(rec) => {
                    r.record("uk.fitted_constant", rec.fitted_constant);
                    r.record("uk.normalized_constant", rec.normalized_constant);
                    r.push(Check::new(
                        "uk.monotone",
                        if rec.monotone { 0.0 } else { 1.0 },
                        0.5,
                        rec.monotone,
                    ));
                    r.push(Check::new(
                        "uk.recursion",
                        rec.fitted_constant,
                        f64::INFINITY,
                        rec.status == CheckStatus::Pass,
                    ));
                    r.push(Check::new(
                        "uk.geometric_decay",
                        if rec.geometric_decay { 0.0 } else { 1.0 },
                        0.5,
                        rec.geometric_decay,
                    )
                    .with_note(format!("cap M = {m_cap:.6e}")));
                }
                Err(e) => r.push(Check::inconclusive("uk.recursion", f64::NAN, e.to_string())),
            }
        }
        Err(e) => r.push(Check::inconclusive("uk", f64::NAN, e.to_string())),
    }
    r
}

fn linf_decay(traj: &Trajectory) -> Report {
    let mut r = Report::new();
    let t_end = traj.final_state().time_tag;
    match linf_decay_check(traj, 0.1 * t_end, t_end) {
        Ok(d) => {
            r.record("linf_decay.constant", d.constant);
            r.push(Check::new("linf_decay", d.constant, f64::INFINITY, d.constant.is_finite()));
        }
        Err(e) => r.push(Check::inconclusive("linf_decay", f64::NAN, e.to_string())),
    }
    r
}

fn cordoba(traj: &Trajectory) -> Result<Report> {
    let mut r = Report::new();
    let picks = [0, traj.snapshots.len() / 2, traj.snapshots.len() - 1];
    let mut worst = f64::INFINITY;
    let mut tol = 0.0f64;
    for &i in &picks {
        let theta = &traj.snapshots[i];
        let scale = theta.linf_norm().max(1e-12);
        for phi in [
            ConvexScalar::square(),
            ConvexScalar::smoothed_positive_part(0.3 * scale, 0.25 * scale),
        ] {
            let c = cordoba_pointwise_check(theta, &phi)?;
            worst = worst.min(c.min_residual);
            tol = tol.max(c.tolerance);
        }
    }
    r.push(Check::new("cordoba", worst, tol, worst >= -tol)
        .with_note("phi in {s^2, smoothed (s-lambda)+} on first/middle/final snapshots"));
    Ok(r)
}

fn local_energy(traj: &Trajectory, section: &DiagnosticsSection) -> Result<Report> {
    let mut r = Report::new();
    // Subsample snapshots to keep the extension work bounded.
    let stride = section.local_energy_stride.max(1);
    let mut thinned = traj.clone();
    let keep: Vec<usize> = (0..traj.snapshots.len())
        .filter(|i| i % stride == 0 || *i == traj.snapshots.len() - 1)
        .collect();
    thinned.snapshots = keep.iter().map(|&i| traj.snapshots[i].clone()).collect();
    thinned.snapshot_steps = keep.iter().map(|&i| traj.snapshot_steps[i]).collect();
    if thinned.snapshots.len() < 3 {
        r.push(Check::inconclusive("local_energy", f64::NAN, "too few snapshots"));
        return Ok(r);
    }
    let z = ZLevels::geometric(1e-3, 4.0, 32)?;
    let lens = traj.grid.lens().to_vec();
    let center: Vec<f64> = lens.iter().map(|l| l / 2.0).collect();
    let r_in = lens.iter().fold(f64::INFINITY, |m, &l| m.min(l)) / 8.0;
    let cutoff = LocalCutoff::bump(&traj.grid, &z, &center, r_in, 2.0 * r_in, 1.0, 3.0)?;
    let t1 = thinned.snapshots[0].time_tag;
    let t2 = thinned.final_state().time_tag;
    let out = local_energy_check(&thinned, &cutoff, &z, t1, t2)?;
    r.record("local_energy.phi_hat", out.phi_hat);
    r.record("local_energy.velocity_bmo", out.velocity_bmo);
    r.record("local_energy.lhs_bulk", out.lhs_bulk);
    r.push(Check::new(
        "local_energy",
        out.phi_hat,
        f64::INFINITY,
        out.phi_hat.is_finite(),
    ));
    Ok(r)
}

fn bmo(traj: &Trajectory) -> Result<Report> {
    let mut r = Report::new();
    let last = traj.snapshots.len() - 1;
    let mut worst = 0.0f64;
    for comp in traj.velocity(last)? {
        let b = bmo_seminorm(&comp);
        worst = worst.max(b.seminorm);
    }
    r.record("bmo.velocity", worst);
    r.push(Check::new("bmo", worst, f64::INFINITY, worst.is_finite()));
    Ok(r)
}

fn duhamel(traj: &Trajectory) -> Result<Report> {
    let mut r = Report::new();
    if traj.beta != 1.0 {
        r.push(Check::inconclusive("duhamel", f64::NAN, "representation needs beta = 1"));
        return Ok(r);
    }
    let t = traj.final_state().time_tag;
    let residual = duhamel_residual(traj, t)?;
    r.record("duhamel.residual", residual);
    match traj.drift {
        DriftMode::Zero => r.push(Check::from_bound("duhamel", residual, 1e-10)),
        _ => r.push(Check::new("duhamel", residual, f64::INFINITY, residual.is_finite())),
    }
    Ok(r)
}
