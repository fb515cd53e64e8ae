//! Fourier-multiplier operators on spectral fields: fractional Laplacian,
//! Riesz transforms, derivatives, dealiasing, fractional seminorms, and
//! spectral grid refinement.
//!
//! Conventions: the fractional Laplacian `Λ^β` multiplies mode `k` by
//! `|k'|^β` with `k' = 2π k / L` and leaves `Λ^0 = Id`; Riesz transforms use
//! `i k_j' / |k'|` with the `k = 0` coefficient set to zero. Odd multipliers
//! (Riesz, derivatives) zero the unpaired Nyquist plane along their axis so
//! that conjugate symmetry — hence realness — is preserved exactly.

use crate::error::{Error, Result};
use crate::field::{PhysicalField, SpectralField};
use crate::fft;
use crate::grid::{Grid, MAX_DIM};
use crate::par;
use rustfft::num_complex::Complex64;

/// Per-axis physical wavenumber tables for a grid.
fn k_tables(grid: &Grid) -> Vec<Vec<f64>> {
    (0..grid.ndim()).map(|a| grid.wavenumbers_phys(a)).collect()
}

#[inline]
fn k_norm(tables: &[Vec<f64>], idx: &[usize; MAX_DIM], ndim: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..ndim {
        let k = tables[a][idx[a]];
        s += k * k;
    }
    s.sqrt()
}

/// `Λ^β`: multiply mode `k` by `|k'|^β`. The mean mode is zeroed for
/// `β > 0` and preserved for `β = 0`.
pub fn fractional_laplacian(f: &SpectralField, beta: f64) -> Result<SpectralField> {
    if !(0.0..=2.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("beta must lie in [0, 2], got {beta}")));
    }
    if beta == 0.0 {
        return Ok(f.clone());
    }
    let grid = f.grid().clone();
    let tables = k_tables(&grid);
    let ndim = grid.ndim();
    let mut out = f.clone();
    par::for_each_indexed_mut(out.coeffs_mut(), |i, c| {
        let idx = grid.decompose(i);
        let kn = k_norm(&tables, &idx, ndim);
        *c *= if kn == 0.0 { 0.0 } else { kn.powf(beta) };
    });
    Ok(out)
}

/// Riesz transform along `axis`: multiplier `i k_j' / |k'|`, zero at `k = 0`
/// and on the Nyquist plane of `axis`.
pub fn riesz_transform(f: &SpectralField, axis: usize) -> Result<SpectralField> {
    let grid = f.grid().clone();
    if axis >= grid.ndim() {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} out of range for {}-dimensional grid",
            grid.ndim()
        )));
    }
    let tables = k_tables(&grid);
    let ndim = grid.ndim();
    let nyquist = grid.dims()[axis] / 2;
    let mut out = f.clone();
    par::for_each_indexed_mut(out.coeffs_mut(), |i, c| {
        let idx = grid.decompose(i);
        let kn = k_norm(&tables, &idx, ndim);
        if kn == 0.0 || idx[axis] == nyquist {
            *c = Complex64::new(0.0, 0.0);
        } else {
            let m = tables[axis][idx[axis]] / kn;
            *c = Complex64::new(-c.im * m, c.re * m);
        }
    });
    Ok(out)
}

/// Spectral derivative along `axis`: multiplier `i k_j'`, Nyquist zeroed.
pub fn derivative(f: &SpectralField, axis: usize) -> Result<SpectralField> {
    let grid = f.grid().clone();
    if axis >= grid.ndim() {
        return Err(Error::InvalidArgument(format!(
            "axis {axis} out of range for {}-dimensional grid",
            grid.ndim()
        )));
    }
    let table = grid.wavenumbers_phys(axis);
    let nyquist = grid.dims()[axis] / 2;
    let mut out = f.clone();
    par::for_each_indexed_mut(out.coeffs_mut(), |i, c| {
        let idx = grid.decompose(i);
        if idx[axis] == nyquist {
            *c = Complex64::new(0.0, 0.0);
        } else {
            let k = table[idx[axis]];
            *c = Complex64::new(-c.im * k, c.re * k);
        }
    });
    Ok(out)
}

/// Gradient of a physical field, one component per axis.
pub fn gradient(f: &PhysicalField) -> Result<Vec<PhysicalField>> {
    let s = fft::forward(f)?;
    (0..f.grid().ndim()).map(|a| fft::inverse(&derivative(&s, a)?)).collect()
}

/// Divergence of a physical vector field.
pub fn divergence(v: &[PhysicalField]) -> Result<PhysicalField> {
    let grid = v
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty vector field".into()))?
        .grid()
        .clone();
    if v.len() != grid.ndim() {
        return Err(Error::InvalidArgument(format!(
            "{} components for a {}-dimensional grid",
            v.len(),
            grid.ndim()
        )));
    }
    let mut acc = SpectralField::zeros(grid);
    for (a, comp) in v.iter().enumerate() {
        let d = derivative(&fft::forward(comp)?, a)?;
        acc = acc.add(&d)?;
    }
    fft::inverse(&acc)
}

/// Divergence from spectral components, avoiding the forward transforms.
pub fn divergence_spectral(v: &[SpectralField]) -> Result<SpectralField> {
    let grid = v
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty vector field".into()))?
        .grid()
        .clone();
    let mut acc = SpectralField::zeros(grid);
    for (a, comp) in v.iter().enumerate() {
        acc = acc.add(&derivative(comp, a)?)?;
    }
    Ok(acc)
}

/// Whether integer mode `k` survives the 2/3-rule cutoff `|k_j| <= n_j/3`.
#[inline]
pub fn mode_kept(grid: &Grid, idx: &[usize; MAX_DIM]) -> bool {
    for a in 0..grid.ndim() {
        let k = grid.wavenumber(a, idx[a]).unsigned_abs() as usize;
        if 3 * k > grid.dims()[a] {
            return false;
        }
    }
    true
}

/// 2/3-rule dealiasing: zero every mode with any `|k_j| > n_j / 3`.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let grid = f.grid().clone();
    let mut out = f.clone();
    par::for_each_indexed_mut(out.coeffs_mut(), |i, c| {
        if !mode_kept(&grid, &grid.decompose(i)) {
            *c = Complex64::new(0.0, 0.0);
        }
    });
    out
}

/// `Σ_k |k'|^{2s} |c_k|² · volume`, i.e. `‖Λ^s f‖²_{L²}`.
pub fn fractional_seminorm_sq(f: &SpectralField, s: f64) -> f64 {
    let grid = f.grid();
    let tables = k_tables(grid);
    let ndim = grid.ndim();
    let mut sum = 0.0;
    for (i, c) in f.coeffs().iter().enumerate() {
        let idx = grid.decompose(i);
        let kn = k_norm(&tables, &idx, ndim);
        if kn > 0.0 {
            sum += kn.powf(2.0 * s) * c.norm_sqr();
        }
    }
    sum * grid.volume()
}

/// The `H^{1/2}` seminorm squared, `‖Λ^{1/2} f‖²_{L²}`.
pub fn h_half_seminorm(f: &SpectralField) -> f64 {
    fractional_seminorm_sq(f, 0.5)
}

/// Subtract the mean mode.
pub fn project_mean_zero(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    out.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
    out
}

/// Embed onto a grid refined by `factor`, exactly interpolating the
/// trigonometric polynomial. Coarse Nyquist coefficients are split evenly
/// between `±n/2` so realness is preserved for arbitrary input.
pub fn refine(f: &SpectralField, factor: usize) -> Result<SpectralField> {
    if factor == 0 {
        return Err(Error::InvalidArgument("refinement factor must be positive".into()));
    }
    let coarse = f.grid().clone();
    let fine = coarse.refined(factor)?;
    let mut out = SpectralField::zeros(fine.clone()).with_time(f.time_tag);
    let ndim = coarse.ndim();
    for (i, &c) in f.coeffs().iter().enumerate() {
        if c.norm_sqr() == 0.0 {
            continue;
        }
        let idx = coarse.decompose(i);
        // Each axis either maps to one fine index or splits across ±Nyquist.
        let mut targets: Vec<([usize; MAX_DIM], f64)> = vec![([0; MAX_DIM], 1.0)];
        for a in 0..ndim {
            let n = coarse.dims()[a];
            let nf = fine.dims()[a];
            let k = coarse.wavenumber(a, idx[a]);
            let mut next = Vec::with_capacity(targets.len() * 2);
            for (base, w) in &targets {
                if k == -(n as i64) / 2 && factor > 1 {
                    for signed in [-(n as i64) / 2, n as i64 / 2] {
                        let mut t = *base;
                        t[a] = signed.rem_euclid(nf as i64) as usize;
                        next.push((t, w * 0.5));
                    }
                } else {
                    let mut t = *base;
                    t[a] = k.rem_euclid(nf as i64) as usize;
                    next.push((t, *w));
                }
            }
            targets = next;
        }
        for (t, w) in targets {
            let j = fine.flatten(&t[..ndim]);
            out.coeffs_mut()[j] += c * w;
        }
    }
    Ok(out)
}

/// Resample a physical field onto a grid refined by `factor` via spectral
/// interpolation.
pub fn upsample(f: &PhysicalField, factor: usize) -> Result<PhysicalField> {
    fft::inverse(&refine(&fft::forward(f)?, factor)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial;

    fn band_field(n: usize, seed: u64) -> PhysicalField {
        let grid = Grid::square(n, 2).unwrap();
        initial::random_band(&grid, 1, n / 4, 1.0, seed).unwrap()
    }

    #[test]
    fn lambda_on_eigenfunctions() {
        let g = Grid::square(32, 2).unwrap();
        let f = PhysicalField::from_fn(g.clone(), |x| x[0].sin()).unwrap();
        let out = fft::inverse(&fractional_laplacian(&fft::forward(&f).unwrap(), 1.0).unwrap())
            .unwrap();
        let err = out.sub(&f).unwrap().linf_norm();
        assert!(err < 1e-12, "Λ sin(x1) != sin(x1): {err}");

        let f2 = PhysicalField::from_fn(g, |x| (2.0 * x[0]).sin()).unwrap();
        let out2 = fft::inverse(&fractional_laplacian(&fft::forward(&f2).unwrap(), 2.0).unwrap())
            .unwrap();
        let err2 = out2.sub(&f2.scaled(4.0)).unwrap().linf_norm();
        assert!(err2 < 1e-12, "Λ² sin(2x1) != 4 sin(2x1): {err2}");
    }

    #[test]
    fn lambda_semigroup() {
        let f = fft::forward(&band_field(32, 7)).unwrap();
        let twice = fractional_laplacian(&fractional_laplacian(&f, 1.0).unwrap(), 1.0).unwrap();
        let once = fractional_laplacian(&f, 2.0).unwrap();
        let diff = twice.sub(&once).unwrap();
        let rel = diff.l2_norm_sq().sqrt() / once.l2_norm_sq().sqrt();
        assert!(rel < 1e-12, "semigroup defect {rel}");
    }

    #[test]
    fn lambda_rejects_beta_out_of_range() {
        let f = fft::forward(&band_field(16, 1)).unwrap();
        assert!(fractional_laplacian(&f, -0.1).is_err());
        assert!(fractional_laplacian(&f, 2.1).is_err());
    }

    #[test]
    fn riesz_single_mode() {
        let g = Grid::square(32, 2).unwrap();
        let sin = PhysicalField::from_fn(g.clone(), |x| x[0].sin()).unwrap();
        let cos = PhysicalField::from_fn(g, |x| x[0].cos()).unwrap();
        let s = fft::forward(&sin).unwrap();
        let r1 = fft::inverse(&riesz_transform(&s, 0).unwrap()).unwrap();
        assert!(r1.sub(&cos).unwrap().linf_norm() < 1e-12);
        let r2 = fft::inverse(&riesz_transform(&s, 1).unwrap()).unwrap();
        assert!(r2.linf_norm() < 1e-13, "R2 sin(x1) should vanish");
    }

    #[test]
    fn riesz_squares_sum_to_minus_identity() {
        for seed in 0..5 {
            let f = band_field(32, 100 + seed);
            let s = fft::forward(&f).unwrap();
            let mut acc = SpectralField::zeros(s.grid().clone());
            for a in 0..2 {
                let r = riesz_transform(&s, a).unwrap();
                acc = acc.add(&riesz_transform(&r, a).unwrap()).unwrap();
            }
            let sum = fft::inverse(&acc).unwrap();
            let minus_meanfree = f.map(|v| -v); // band field is already mean-zero
            let err = sum.sub(&minus_meanfree).unwrap().linf_norm();
            assert!(err < 1e-12, "Σ R_j² defect {err}");
        }
    }

    #[test]
    fn riesz_rejects_bad_axis() {
        let f = fft::forward(&band_field(16, 2)).unwrap();
        assert!(riesz_transform(&f, 2).is_err());
    }

    #[test]
    fn gradient_and_divergence() {
        let g = Grid::square(32, 2).unwrap();
        let c = PhysicalField::constant(g.clone(), 4.0).unwrap();
        let grad = gradient(&c).unwrap();
        assert!(grad.iter().all(|d| d.linf_norm() < 1e-13));

        let sin = PhysicalField::from_fn(g.clone(), |x| x[0].sin()).unwrap();
        let grad = gradient(&sin).unwrap();
        let cos = PhysicalField::from_fn(g, |x| x[0].cos()).unwrap();
        assert!(grad[0].sub(&cos).unwrap().linf_norm() < 1e-12);
        assert!(grad[1].linf_norm() < 1e-13);

        // Divergence of the curl form of a random stream function.
        let psi = fft::forward(&band_field(32, 11)).unwrap();
        let vx = fft::inverse(&derivative(&psi, 1).unwrap()).unwrap().scaled(-1.0);
        let vy = fft::inverse(&derivative(&psi, 0).unwrap()).unwrap();
        let div = divergence(&[vx, vy]).unwrap();
        assert!(div.linf_norm() < 1e-12, "div curl = {}", div.linf_norm());
    }

    #[test]
    fn dealias_band_and_nyquist() {
        let g = Grid::square(32, 2).unwrap();
        let low = fft::forward(&band_field(32, 3)).unwrap(); // modes ≤ 8 ≤ 32/3
        let kept = dealias(&low);
        let diff = kept.sub(&low).unwrap().l2_norm_sq();
        assert!(diff < 1e-26, "band-limited field must pass through");

        let mut high = SpectralField::zeros(g.clone());
        let i = g.flatten(&[16, 0]); // Nyquist along axis 0
        high.coeffs_mut()[i] = Complex64::new(1.0, 0.0);
        assert!(dealias(&high).l2_norm_sq() == 0.0);
    }

    #[test]
    fn h_half_two_routes() {
        let g = Grid::square(32, 2).unwrap();
        assert_eq!(h_half_seminorm(&fft::forward(&PhysicalField::constant(g.clone(), 2.0).unwrap()).unwrap()), 0.0);

        let sin = PhysicalField::from_fn(g, |x| x[0].sin()).unwrap();
        let s = fft::forward(&sin).unwrap();
        assert!((h_half_seminorm(&s) - sin.l2_norm_sq()).abs() < 1e-12 * sin.l2_norm_sq());

        let f = fft::forward(&band_field(32, 17)).unwrap();
        let via_lambda = fractional_laplacian(&f, 0.5).unwrap().l2_norm_sq();
        let direct = h_half_seminorm(&f);
        assert!((via_lambda - direct).abs() < 1e-12 * direct.max(1e-300));
    }

    #[test]
    fn multipliers_commute_and_preserve_symmetry() {
        let f = fft::forward(&band_field(32, 23)).unwrap();
        let ops: Vec<Box<dyn Fn(&SpectralField) -> SpectralField>> = vec![
            Box::new(|s| fractional_laplacian(s, 0.7).unwrap()),
            Box::new(|s| riesz_transform(s, 0).unwrap()),
            Box::new(|s| riesz_transform(s, 1).unwrap()),
            Box::new(|s| derivative(s, 0).unwrap()),
            Box::new(|s| dealias(s)),
        ];
        for (i, a) in ops.iter().enumerate() {
            for b in &ops[i + 1..] {
                let ab = a(&b(&f));
                let ba = b(&a(&f));
                let scale = ab.l2_norm_sq().sqrt().max(1e-300);
                let diff = ab.sub(&ba).unwrap().l2_norm_sq().sqrt();
                assert!(diff / scale < 1e-12, "operators do not commute: {diff}");
                assert!(ab.conjugate_symmetry_defect() < 1e-12);
            }
        }
    }

    #[test]
    fn refine_interpolates_exactly() {
        let f = band_field(16, 5);
        let fine = upsample(&f, 2).unwrap();
        // Fine grid contains the coarse points at even indices.
        let g = f.grid().clone();
        let gf = fine.grid().clone();
        for i in 0..g.len() {
            let idx = g.decompose(i);
            let j = gf.flatten(&[2 * idx[0], 2 * idx[1]]);
            assert!((f.values()[i] - fine.values()[j]).abs() < 1e-12);
        }
        // Parseval mass is unchanged.
        let a = fft::forward(&f).unwrap().l2_norm_sq();
        let b = fft::forward(&fine).unwrap().l2_norm_sq();
        assert!((a - b).abs() < 1e-12 * a);
    }
}
