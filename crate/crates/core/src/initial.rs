//! Named, seeded initial-condition generators. All outputs are mean-zero.
//!
//! `random_band` draws one complex Gaussian per integer mode in the band and
//! normalizes the L² norm to `amplitude`. Coefficients are drawn per mode in
//! a fixed order, so the same seed produces the same continuum field on any
//! grid that resolves the band.

use crate::error::{Error, Result};
use crate::field::{PhysicalField, SpectralField};
use crate::fft;
use crate::grid::Grid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Initial condition selector, as it appears in solver configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    RandomBand { k_min: usize, k_max: usize, amplitude: f64, seed: u64 },
    TwoVortex { amplitude: f64 },
    SingleMode { k: Vec<i64>, amplitude: f64 },
}

impl InitialCondition {
    pub fn generate(&self, grid: &Grid) -> Result<PhysicalField> {
        match self {
            InitialCondition::RandomBand { k_min, k_max, amplitude, seed } => {
                random_band(grid, *k_min, *k_max, *amplitude, *seed)
            }
            InitialCondition::TwoVortex { amplitude } => two_vortex(grid, *amplitude),
            InitialCondition::SingleMode { k, amplitude } => single_mode(grid, k, *amplitude),
        }
    }
}

/// First non-zero component positive: selects one mode per conjugate pair.
fn lex_positive(k: &[i64]) -> bool {
    for &c in k {
        if c > 0 {
            return true;
        }
        if c < 0 {
            return false;
        }
    }
    false
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream layout simple.
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen::<f64>();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

/// Mean-zero field with random complex Gaussian coefficients on the modes
/// `k_min <= |k| <= k_max`, scaled so `‖θ‖_{L²} = amplitude`.
pub fn random_band(
    grid: &Grid,
    k_min: usize,
    k_max: usize,
    amplitude: f64,
    seed: u64,
) -> Result<PhysicalField> {
    if k_min == 0 || k_min > k_max {
        return Err(Error::InvalidArgument(format!(
            "band must satisfy 1 <= k_min <= k_max, got [{k_min}, {k_max}]"
        )));
    }
    let max_resolved = grid.dims().iter().map(|&n| n / 3).min().unwrap();
    if k_max > max_resolved {
        return Err(Error::InvalidArgument(format!(
            "band top {k_max} exceeds the dealiased range {max_resolved} of the grid"
        )));
    }
    let ndim = grid.ndim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = SpectralField::zeros(grid.clone());
    let r = k_max as i64;

    // Fixed lexicographic walk over the integer box, independent of dims.
    let mut k = vec![-r; ndim];
    loop {
        let norm2: i64 = k.iter().map(|&c| c * c).sum();
        let lo = (k_min * k_min) as i64;
        let hi = (k_max * k_max) as i64;
        if norm2 >= lo && norm2 <= hi && lex_positive(&k) {
            let re = standard_normal(&mut rng);
            let im = standard_normal(&mut rng);
            let c = Complex64::new(re, im);
            let idx: Vec<usize> =
                (0..ndim).map(|a| k[a].rem_euclid(grid.dims()[a] as i64) as usize).collect();
            let cidx: Vec<usize> =
                (0..ndim).map(|a| (-k[a]).rem_euclid(grid.dims()[a] as i64) as usize).collect();
            spec.coeffs_mut()[grid.flatten(&idx)] = c;
            spec.coeffs_mut()[grid.flatten(&cidx)] = c.conj();
        }
        // advance odometer
        let mut a = ndim;
        loop {
            if a == 0 {
                break;
            }
            a -= 1;
            k[a] += 1;
            if k[a] <= r {
                break;
            }
            k[a] = -r;
            if a == 0 {
                return finish(spec, amplitude);
            }
        }
        if k.iter().all(|&c| c == -r) {
            break;
        }
    }
    finish(spec, amplitude)
}

fn finish(spec: SpectralField, amplitude: f64) -> Result<PhysicalField> {
    let norm = spec.l2_norm_sq().sqrt();
    let scaled = if norm > 0.0 { spec.scaled(amplitude / norm) } else { spec };
    fft::inverse(&scaled)
}

/// `amplitude · (sin x₁ sin x₂ + cos x₂)`: a pair of counter-rotating
/// vortices riding a shear, the classic rough 2D test state.
pub fn two_vortex(grid: &Grid, amplitude: f64) -> Result<PhysicalField> {
    if grid.ndim() != 2 {
        return Err(Error::InvalidArgument("two_vortex needs a 2D grid".into()));
    }
    PhysicalField::from_fn(grid.clone(), |x| amplitude * (x[0].sin() * x[1].sin() + x[1].cos()))
}

/// `amplitude · sin(k·x)` for an integer wavevector `k != 0`.
pub fn single_mode(grid: &Grid, k: &[i64], amplitude: f64) -> Result<PhysicalField> {
    if k.len() != grid.ndim() || k.iter().all(|&c| c == 0) {
        return Err(Error::InvalidArgument("single_mode needs a nonzero wavevector".into()));
    }
    let k = k.to_vec();
    let lens: Vec<f64> = grid.lens().to_vec();
    PhysicalField::from_fn(grid.clone(), move |x| {
        let phase: f64 = x
            .iter()
            .zip(&k)
            .zip(&lens)
            .map(|((&xi, &ki), &li)| std::f64::consts::TAU * ki as f64 * xi / li)
            .sum();
        amplitude * phase.sin()
    })
}
