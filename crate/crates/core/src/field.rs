//! Physical and spectral fields on a periodic grid.

use crate::error::{Error, Result};
use crate::grid::Grid;
use rustfft::num_complex::Complex64;

/// Real-valued samples on a periodic grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    grid: Grid,
    values: Vec<f64>,
    /// Simulation time of this snapshot, seconds.
    pub time_tag: f64,
}

impl PhysicalField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "value count {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("physical field values"));
        }
        Ok(PhysicalField { grid, values, time_tag: 0.0 })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        PhysicalField { grid, values: vec![0.0; n], time_tag: 0.0 }
    }

    pub fn constant(grid: Grid, c: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![c; n])
    }

    /// Sample a function of the physical coordinates onto the grid.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Grid, f: F) -> Result<Self> {
        let values: Vec<f64> = (0..grid.len())
            .map(|i| {
                let x = grid.coords(i);
                f(&x[..grid.ndim()])
            })
            .collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time_tag = t;
        self
    }

    /// Mean over the torus.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// `∫ f² dx` by the (spectrally exact) grid quadrature.
    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    /// `∫ f g dx` by grid quadrature.
    pub fn inner(&self, other: &PhysicalField) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Pointwise map, keeping grid and time tag.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> PhysicalField {
        PhysicalField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            time_tag: self.time_tag,
        }
    }

    pub fn scaled(&self, s: f64) -> PhysicalField {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &PhysicalField) -> Result<PhysicalField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &PhysicalField) -> Result<PhysicalField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &PhysicalField) -> Result<PhysicalField> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn zip_with<F: Fn(f64, f64) -> f64>(
        &self,
        other: &PhysicalField,
        f: F,
    ) -> Result<PhysicalField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(PhysicalField {
            grid: self.grid.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
            time_tag: self.time_tag,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Complex Fourier coefficients of a field, indexed by integer wavevector
/// in FFT order (see [`Grid::wavenumber`]).
///
/// The forward transform carries the `1/len` normalization, so a constant
/// field `c` has `coeffs[0] = c` and Parseval reads
/// `Σ |values|² · cellvol = volume · Σ |coeffs|²`.
#[derive(Debug, Clone)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
    pub time_tag: f64,
}

impl SpectralField {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "coefficient count {} does not match grid size {}",
                coeffs.len(),
                grid.len()
            )));
        }
        if !coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::NonFinite("spectral coefficients"));
        }
        Ok(SpectralField { grid, coeffs, time_tag: 0.0 })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        SpectralField { grid, coeffs: vec![Complex64::new(0.0, 0.0); n], time_tag: 0.0 }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.time_tag = t;
        self
    }

    /// `∫ |f|² dx` via Parseval.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.volume()
    }

    /// Worst deviation from conjugate symmetry `c(-k) = conj(c(k))`,
    /// zero (to roundoff) exactly when the field represents a real function.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.coeffs.len() {
            let j = self.grid.conjugate_index(i);
            let d = (self.coeffs[i] - self.coeffs[j].conj()).norm();
            worst = worst.max(d);
        }
        worst
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(SpectralField { grid: self.grid.clone(), coeffs, time_tag: self.time_tag })
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(SpectralField { grid: self.grid.clone(), coeffs, time_tag: self.time_tag })
    }

    pub fn scaled(&self, s: f64) -> SpectralField {
        SpectralField {
            grid: self.grid.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            time_tag: self.time_tag,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}
