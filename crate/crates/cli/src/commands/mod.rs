pub mod bench;
pub mod diagnose;
pub mod galerkin_cmd;
pub mod holder_cmd;
pub mod lemmas;
pub mod run;

use sqglab_core::error::Error;
use sqglab_core::report::Report;
use std::path::Path;

/// Exit-code contract: usage and input problems are 2, runtime blow-up is 3.
pub fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::BlowUp { .. } => 3,
        _ => 2,
    }
}

/// Write a report and map it onto the exit-code contract: 0 when nothing
/// failed (inconclusive results carry their reason), 1 otherwise.
pub fn finish_report(report: &Report, out: &Path) -> sqglab_core::error::Result<u8> {
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(out, report.to_flat_json())?;
    for c in &report.checks {
        println!("{}: {} (residual {:.3e}, tolerance {:.3e})", c.name, c.status, c.residual, c.tolerance);
    }
    if report.all_passed() {
        Ok(0)
    } else {
        for c in report.failures() {
            eprintln!("FAILED: {}", c.name);
        }
        Ok(1)
    }
}
