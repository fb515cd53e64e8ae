//! Uniform periodic grids on the torus `[0, L_1) × … × [0, L_N)`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

pub const MAX_DIM: usize = 3;

/// A uniform grid on the N-dimensional periodic torus, N ∈ {1, 2, 3}.
///
/// Values on the grid are stored row-major: the last axis is contiguous.
/// Integer wavenumbers per axis run over `-n/2 .. n/2 - 1` with the usual
/// FFT index order (index `i` maps to `i` for `i < n/2` and `i - n` above).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    ndim: usize,
    dims: [usize; MAX_DIM],
    lens: [f64; MAX_DIM],
}

impl Grid {
    /// Grid with the given points and domain lengths per axis.
    ///
    /// Every axis needs at least 8 points and an even count so that the
    /// wavenumber range is symmetric.
    pub fn new(dims: &[usize], lens: &[f64]) -> Result<Self> {
        if dims.is_empty() || dims.len() > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "spatial dimension must be 1..={MAX_DIM}, got {}",
                dims.len()
            )));
        }
        if dims.len() != lens.len() {
            return Err(Error::InvalidGrid("dims/lens length mismatch".into()));
        }
        for (&n, &l) in dims.iter().zip(lens) {
            if n < 8 || n % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis size must be even and >= 8, got {n}"
                )));
            }
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("domain length must be positive, got {l}")));
            }
        }
        let mut d = [1usize; MAX_DIM];
        let mut l = [1.0f64; MAX_DIM];
        d[..dims.len()].copy_from_slice(dims);
        l[..dims.len()].copy_from_slice(lens);
        Ok(Grid { ndim: dims.len(), dims: d, lens: l })
    }

    /// Cubic grid with `n` points per axis on `[0, 2π)^ndim`.
    pub fn square(n: usize, ndim: usize) -> Result<Self> {
        Self::new(&vec![n; ndim], &vec![TAU; ndim])
    }

    pub fn ndim(&self) -> usize {
        self.ndim
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims[..self.ndim]
    }

    pub fn lens(&self) -> &[f64] {
        &self.lens[..self.ndim]
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lens[axis] / self.dims[axis] as f64
    }

    /// Smallest spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.ndim).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.ndim).map(|a| self.spacing(a)).product()
    }

    /// Volume of the whole torus.
    pub fn volume(&self) -> f64 {
        self.lens().iter().product()
    }

    /// Integer wavenumber for FFT index `i` along `axis`.
    #[inline]
    pub fn wavenumber(&self, axis: usize, i: usize) -> i64 {
        let n = self.dims[axis];
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    /// Physical wavenumber `2π k / L` for FFT index `i` along `axis`.
    #[inline]
    pub fn wavenumber_phys(&self, axis: usize, i: usize) -> f64 {
        TAU * self.wavenumber(axis, i) as f64 / self.lens[axis]
    }

    /// Per-axis table of physical wavenumbers.
    pub fn wavenumbers_phys(&self, axis: usize) -> Vec<f64> {
        (0..self.dims[axis]).map(|i| self.wavenumber_phys(axis, i)).collect()
    }

    /// Decompose a flat row-major index into per-axis indices.
    #[inline]
    pub fn decompose(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        let mut rem = flat;
        for a in (0..self.ndim).rev() {
            idx[a] = rem % self.dims[a];
            rem /= self.dims[a];
        }
        idx
    }

    /// Flat row-major index of per-axis indices.
    #[inline]
    pub fn flatten(&self, idx: &[usize]) -> usize {
        let mut flat = 0;
        for a in 0..self.ndim {
            flat = flat * self.dims[a] + idx[a];
        }
        flat
    }

    /// Physical coordinates of the grid point with the given flat index.
    pub fn coords(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.decompose(flat);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.ndim {
            x[a] = idx[a] as f64 * self.spacing(a);
        }
        x
    }

    /// Flat index of the mirrored point `-k mod n` in wavenumber space.
    pub fn conjugate_index(&self, flat: usize) -> usize {
        let idx = self.decompose(flat);
        let mut mirrored = [0usize; MAX_DIM];
        for a in 0..self.ndim {
            mirrored[a] = (self.dims[a] - idx[a]) % self.dims[a];
        }
        self.flatten(&mirrored[..self.ndim])
    }

    /// Grid with every axis refined by `factor` (same domain lengths).
    pub fn refined(&self, factor: usize) -> Result<Grid> {
        let dims: Vec<usize> = self.dims().iter().map(|&n| n * factor).collect();
        Grid::new(&dims, self.lens())
    }
}
