//! Snapshot and diagnostics files.
//!
//! Field snapshots (`.sqgf`): magic `SQGF`, `u32` version = 1, `u32` N,
//! N × `u64` dims, N × `f64` domain lengths, `f64` time tag, then row-major
//! `f64` values; everything little-endian. Extension snapshots (`.sqge`)
//! share the header with magic `SQGE`, followed by `u64` level count, the
//! `f64` z values, and the data ordered z-major. Scalar diagnostics are
//! plain CSV with the header `time,l2,linf,hhalf,umax,energy_residual`.

use crate::error::{Error, Result};
use crate::extension::{ExtensionField, ZLevels};
use crate::field::PhysicalField;
use crate::galerkin::GalerkinState;
use crate::grid::Grid;
use crate::solver::{DriftMode, StepScalars, Trajectory};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

const FIELD_MAGIC: &[u8; 4] = b"SQGF";
const EXTENSION_MAGIC: &[u8; 4] = b"SQGE";
const VERSION: u32 = 1;

struct Le<W: Write>(W);

impl<W: Write> Le<W> {
    fn u32(&mut self, v: u32) -> Result<()> {
        self.0.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        self.0.write_all(&v.to_le_bytes())?;
        Ok(())
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        self.0.write_all(&v.to_le_bytes())?;
        Ok(())
    }
}

struct LeReader<R: Read>(R);

impl<R: Read> LeReader<R> {
    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.0.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }
    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }
    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.0.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }
}

fn write_grid_header<W: Write>(w: &mut Le<W>, grid: &Grid, time_tag: f64) -> Result<()> {
    w.u32(VERSION)?;
    w.u32(grid.ndim() as u32)?;
    for &n in grid.dims() {
        w.u64(n as u64)?;
    }
    for &l in grid.lens() {
        w.f64(l)?;
    }
    w.f64(time_tag)
}

fn read_grid_header<R: Read>(r: &mut LeReader<R>) -> Result<(Grid, f64)> {
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let ndim = r.u32()? as usize;
    if ndim == 0 || ndim > crate::grid::MAX_DIM {
        return Err(Error::Format(format!("bad dimension count {ndim}")));
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(r.u64()? as usize);
    }
    let mut lens = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        lens.push(r.f64()?);
    }
    let time_tag = r.f64()?;
    Ok((Grid::new(&dims, &lens)?, time_tag))
}

pub fn write_field(path: &Path, field: &PhysicalField) -> Result<()> {
    let mut w = Le(BufWriter::new(File::create(path)?));
    w.0.write_all(FIELD_MAGIC)?;
    write_grid_header(&mut w, field.grid(), field.time_tag)?;
    for &v in field.values() {
        w.f64(v)?;
    }
    w.0.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<PhysicalField> {
    let mut r = LeReader(BufReader::new(File::open(path)?));
    let mut magic = [0u8; 4];
    r.0.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {:?}, expected SQGF",
            path.display(),
            magic
        )));
    }
    let (grid, time_tag) = read_grid_header(&mut r)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        values.push(r.f64()?);
    }
    Ok(PhysicalField::new(grid, values)?.with_time(time_tag))
}

pub fn write_extension(path: &Path, ext: &ExtensionField) -> Result<()> {
    let mut w = Le(BufWriter::new(File::create(path)?));
    w.0.write_all(EXTENSION_MAGIC)?;
    write_grid_header(&mut w, ext.grid(), ext.time_tag)?;
    w.u64(ext.z_levels().len() as u64)?;
    for &z in ext.z_levels().values() {
        w.f64(z)?;
    }
    for &v in ext.values() {
        w.f64(v)?;
    }
    w.0.flush()?;
    Ok(())
}

pub fn read_extension(path: &Path) -> Result<ExtensionField> {
    let mut r = LeReader(BufReader::new(File::open(path)?));
    let mut magic = [0u8; 4];
    r.0.read_exact(&mut magic)?;
    if &magic != EXTENSION_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {:?}, expected SQGE",
            path.display(),
            magic
        )));
    }
    let (grid, time_tag) = read_grid_header(&mut r)?;
    let nz = r.u64()? as usize;
    let mut z = Vec::with_capacity(nz);
    for _ in 0..nz {
        z.push(r.f64()?);
    }
    let mut values = Vec::with_capacity(grid.len() * nz);
    for _ in 0..grid.len() * nz {
        values.push(r.f64()?);
    }
    let mut ext = ExtensionField::new(grid, ZLevels::new(z)?, values)?;
    ext.time_tag = time_tag;
    Ok(ext)
}

/// CSV with the fixed header `time,l2,linf,hhalf,umax,energy_residual`,
/// one row per step, values printed with full round-trip precision.
pub fn write_scalars_csv(path: &Path, scalars: &[StepScalars]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "time,l2,linf,hhalf,umax,energy_residual")?;
    for s in scalars {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            s.time, s.l2, s.linf, s.hhalf, s.umax, s.energy_residual
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scalars_csv(path: &Path, beta: f64) -> Result<Vec<StepScalars>> {
    let mut content = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut content)?;
    let mut lines = content.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty CSV".into()))?;
    if header.trim() != "time,l2,linf,hhalf,umax,energy_residual" {
        return Err(Error::Format(format!("unexpected CSV header: {header}")));
    }
    let mut out = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", ln + 2)))?;
        if cols.len() != 6 {
            return Err(Error::Format(format!("line {}: expected 6 columns", ln + 2)));
        }
        out.push(StepScalars {
            time: cols[0],
            l2: cols[1],
            linf: cols[2],
            hhalf: cols[3],
            umax: cols[4],
            energy_residual: cols[5],
            // The CSV stores the H^{1/2} seminorm; it equals the energy-law
            // dissipation integrand exactly in the critical case.
            dissipation: if beta == 1.0 { cols[3] } else { f64::NAN },
        });
    }
    Ok(out)
}

/// Coefficient trajectories as CSV: `time,f_1,...,f_kmax`.
pub fn write_galerkin_csv(path: &Path, states: &[GalerkinState]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let k = states.first().map(|s| s.coeffs.len()).unwrap_or(0);
    let header: Vec<String> =
        std::iter::once("time".to_string()).chain((1..=k).map(|i| format!("f_{i}"))).collect();
    writeln!(w, "{}", header.join(","))?;
    for s in states {
        let mut row = format!("{:.17e}", s.time);
        for c in &s.coeffs {
            row.push_str(&format!(",{c:.17e}"));
        }
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

/// Write a trajectory as `theta_<step>.sqgf` snapshots plus
/// `diagnostics.csv` (and the prescribed drift components, when present).
pub fn save_trajectory(dir: &Path, traj: &Trajectory) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (snap, &step) in traj.snapshots.iter().zip(&traj.snapshot_steps) {
        write_field(&dir.join(format!("theta_{step:06}.sqgf")), snap)?;
    }
    write_scalars_csv(&dir.join("diagnostics.csv"), &traj.scalars)?;
    if let DriftMode::Prescribed(v) = &traj.drift {
        for (a, comp) in v.iter().enumerate() {
            write_field(&dir.join(format!("drift_{a}.sqgf")), comp)?;
        }
    }
    Ok(())
}

/// Load a trajectory saved by [`save_trajectory`]. The dynamical parameters
/// live in the run manifest, not the snapshots, so they are passed in.
pub fn load_trajectory(dir: &Path, beta: f64, kappa: f64, drift_name: &str) -> Result<Trajectory> {
    let mut snapshot_paths: Vec<(usize, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(stem) = name.strip_prefix("theta_").and_then(|s| s.strip_suffix(".sqgf")) {
            let step: usize = stem
                .parse()
                .map_err(|_| Error::Format(format!("bad snapshot name {name}")))?;
            snapshot_paths.push((step, path));
        }
    }
    if snapshot_paths.is_empty() {
        return Err(Error::Format(format!("{}: no theta_*.sqgf snapshots", dir.display())));
    }
    snapshot_paths.sort();
    let snapshots: Vec<PhysicalField> =
        snapshot_paths.iter().map(|(_, p)| read_field(p)).collect::<Result<_>>()?;
    let grid = snapshots[0].grid().clone();
    for s in &snapshots {
        if s.grid() != &grid {
            return Err(Error::Format("snapshots disagree on the grid".into()));
        }
    }
    let drift = match drift_name {
        "sqg" => DriftMode::Sqg,
        "zero" => DriftMode::Zero,
        "prescribed" => {
            let mut comps = Vec::new();
            for a in 0..grid.ndim() {
                comps.push(read_field(&dir.join(format!("drift_{a}.sqgf")))?);
            }
            DriftMode::Prescribed(comps)
        }
        other => return Err(Error::Format(format!("unknown drift mode {other}"))),
    };
    let scalars = read_scalars_csv(&dir.join("diagnostics.csv"), beta)?;
    Ok(Trajectory {
        grid,
        beta,
        kappa,
        drift,
        snapshot_steps: snapshot_paths.iter().map(|(s, _)| *s).collect(),
        snapshots,
        scalars,
        aborted: None,
    })
}
