//! N-dimensional FFT on row-major buffers, built from 1D rustfft passes.
//!
//! Normalization convention (asserted by the Parseval tests): the forward
//! transform divides by the number of grid points, the inverse carries no
//! factor. Plans are cached globally; lines along each axis are transformed
//! in parallel.

use crate::error::{Error, Result};
use crate::field::{PhysicalField, SpectralField};
use crate::grid::Grid;
use crate::par;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

fn plan(n: usize, dir: FftDirection) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())));
    let mut guard = cache.lock().unwrap();
    let key = (n, matches!(dir, FftDirection::Forward));
    if let Some(p) = guard.1.get(&key) {
        return Arc::clone(p);
    }
    let p = match dir {
        FftDirection::Forward => guard.0.plan_fft_forward(n),
        FftDirection::Inverse => guard.0.plan_fft_inverse(n),
    };
    guard.1.insert(key, Arc::clone(&p));
    p
}

/// In-place FFT along one axis of a row-major buffer.
fn transform_axis(grid: &Grid, data: &mut [Complex64], axis: usize, dir: FftDirection) {
    let n = grid.dims()[axis];
    let fft = plan(n, dir);
    let post: usize = grid.dims()[axis + 1..].iter().product();
    let pre: usize = grid.dims()[..axis].iter().product();

    if post == 1 {
        // Contiguous lines.
        par::for_each_chunk_mut(data, n, |_, line| {
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(line, &mut scratch);
        });
        return;
    }

    // Strided lines: gather, transform, scatter. One line per (p, q) pair.
    let lines: Vec<Vec<Complex64>> = par::map_collect(pre * post, |line_id| {
        let (p, q) = (line_id / post, line_id % post);
        let mut buf: Vec<Complex64> = (0..n).map(|t| data[(p * n + t) * post + q]).collect();
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(&mut buf, &mut scratch);
        buf
    });
    for (line_id, buf) in lines.iter().enumerate() {
        let (p, q) = (line_id / post, line_id % post);
        for (t, v) in buf.iter().enumerate() {
            data[(p * n + t) * post + q] = *v;
        }
    }
}

fn transform_all(grid: &Grid, data: &mut [Complex64], dir: FftDirection) {
    for axis in 0..grid.ndim() {
        transform_axis(grid, data, axis, dir);
    }
}

/// Forward transform of a real field; rejects non-finite input.
pub fn forward(field: &PhysicalField) -> Result<SpectralField> {
    if !field.is_finite() {
        return Err(Error::NonFinite("transform input"));
    }
    let grid = field.grid().clone();
    let mut data: Vec<Complex64> =
        field.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_all(&grid, &mut data, FftDirection::Forward);
    let scale = 1.0 / grid.len() as f64;
    par::for_each_mut(&mut data, |c| *c *= scale);
    Ok(SpectralField::new(grid, data)?.with_time(field.time_tag))
}

/// Inverse transform back to a real field, discarding the O(roundoff)
/// imaginary residue of a conjugate-symmetric input.
pub fn inverse(field: &SpectralField) -> Result<PhysicalField> {
    if !field.is_finite() {
        return Err(Error::NonFinite("transform input"));
    }
    let grid = field.grid().clone();
    let mut data = field.coeffs().to_vec();
    transform_all(&grid, &mut data, FftDirection::Inverse);
    let values: Vec<f64> = data.iter().map(|c| c.re).collect();
    Ok(PhysicalField::new(grid, values)?.with_time(field.time_tag))
}

/// Inverse transform keeping the complex values; used by operators whose
/// intermediate fields are not conjugate-symmetric.
pub fn inverse_complex(field: &SpectralField) -> Result<Vec<Complex64>> {
    if !field.is_finite() {
        return Err(Error::NonFinite("transform input"));
    }
    let mut data = field.coeffs().to_vec();
    transform_all(field.grid(), &mut data, FftDirection::Inverse);
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn constant_field_has_single_mode() {
        let g = Grid::square(16, 2).unwrap();
        let f = PhysicalField::constant(g, 3.25).unwrap();
        let s = forward(&f).unwrap();
        assert!((s.coeffs()[0].re - 3.25).abs() < 1e-13);
        assert!(s.coeffs()[1..].iter().all(|c| c.norm() < 1e-13));
    }

    #[test]
    fn sine_has_two_modes() {
        let g = Grid::square(16, 2).unwrap();
        let f = PhysicalField::from_fn(g.clone(), |x| x[0].sin()).unwrap();
        let s = forward(&f).unwrap();
        // sin(x1) = (e^{ix1} - e^{-ix1}) / 2i: modes k = (±1, 0).
        let plus = g.flatten(&[1, 0]);
        let minus = g.flatten(&[15, 0]);
        assert!((s.coeffs()[plus] - Complex64::new(0.0, -0.5)).norm() < 1e-13);
        assert!((s.coeffs()[minus] - Complex64::new(0.0, 0.5)).norm() < 1e-13);
        let rest: f64 = (0..g.len())
            .filter(|&i| i != plus && i != minus)
            .map(|i| s.coeffs()[i].norm())
            .sum();
        assert!(rest < 1e-12);
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = Grid::new(&[16, 8, 12], &[TAU, 3.0, 1.5]).unwrap();
        let f = PhysicalField::from_fn(g.clone(), |x| {
            (x[0].sin() + (2.0 * TAU * x[1] / 3.0).cos()) * (1.3 + (TAU * x[2] / 1.5).sin())
        })
        .unwrap();
        let s = forward(&f).unwrap();
        let back = inverse(&s).unwrap();
        let worst = f
            .values()
            .iter()
            .zip(back.values())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(worst < 1e-12 * f.linf_norm().max(1.0), "round trip defect {worst}");

        let phys = f.l2_norm_sq();
        let spec = s.l2_norm_sq();
        assert!((phys - spec).abs() < 1e-12 * phys, "parseval {phys} vs {spec}");
        assert!(s.conjugate_symmetry_defect() < 1e-13);
    }

    #[test]
    fn rejects_non_finite() {
        let g = Grid::square(8, 1).unwrap();
        let mut f = PhysicalField::zeros(g);
        f.values_mut()[3] = f64::NAN;
        assert!(forward(&f).is_err());
    }
}
