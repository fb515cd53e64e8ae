//! Harmonic extension of periodic boundary data to the upper half space,
//! the normal-derivative realization of the half Laplacian, the Poisson
//! kernel, and extension-based Dirichlet energies.
//!
//! On the torus the extension is exact per Fourier mode: level `z` carries
//! `θ̂(k) e^{-|k'| z}`. z-derivatives use second-order finite differences on
//! the (possibly non-uniform) level ladder; x-derivatives stay spectral.

use crate::error::{Error, Result};
use crate::field::{PhysicalField, SpectralField};
use crate::fft;
use crate::grid::Grid;
use crate::par;
use crate::spectral;

/// Strictly increasing ladder of extension heights, starting at `z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZLevels(Vec<f64>);

impl ZLevels {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 || levels[0] != 0.0 {
            return Err(Error::InvalidArgument(
                "z levels must start at 0 and contain at least two entries".into(),
            ));
        }
        for w in levels.windows(2) {
            if !(w[1].is_finite() && w[1] > w[0]) {
                return Err(Error::InvalidArgument(
                    "z levels must be finite and strictly increasing".into(),
                ));
            }
        }
        Ok(ZLevels(levels))
    }

    /// `0, dz, 2 dz, …` with `count` positive levels.
    pub fn uniform(dz: f64, count: usize) -> Result<Self> {
        Self::new((0..=count).map(|i| i as f64 * dz).collect())
    }

    /// Geometric ladder from `dz_min` to `z_max` (plus `z = 0`): resolves the
    /// boundary layer for the normal derivative while still covering O(1)
    /// heights.
    pub fn geometric(dz_min: f64, z_max: f64, count: usize) -> Result<Self> {
        if count < 2 || !(dz_min > 0.0 && z_max > dz_min) {
            return Err(Error::InvalidArgument("bad geometric ladder parameters".into()));
        }
        let ratio = (z_max / dz_min).powf(1.0 / (count - 1) as f64);
        let mut levels = Vec::with_capacity(count + 1);
        levels.push(0.0);
        for i in 0..count {
            levels.push(dz_min * ratio.powi(i as i32));
        }
        Self::new(levels)
    }

    /// The default ladder: 64 geometric levels from 1e-3 up to 8.
    pub fn default_geometric() -> Self {
        Self::geometric(1e-3, 8.0, 64).expect("default ladder is valid")
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn z_max(&self) -> f64 {
        *self.0.last().unwrap()
    }
}

/// Samples of an extension `w(x, z)` on grid × z-levels, stored z-major.
#[derive(Debug, Clone)]
pub struct ExtensionField {
    grid: Grid,
    z: ZLevels,
    values: Vec<f64>,
    pub time_tag: f64,
}

impl ExtensionField {
    pub fn new(grid: Grid, z: ZLevels, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * z.len() {
            return Err(Error::InvalidArgument("extension value count mismatch".into()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("extension values"));
        }
        Ok(ExtensionField { grid, z, values, time_tag: 0.0 })
    }

    /// Sample a closure `f(x, z)` on grid × levels.
    pub fn from_fn<F: Fn(&[f64], f64) -> f64>(grid: Grid, z: ZLevels, f: F) -> Result<Self> {
        let npts = grid.len();
        let mut values = Vec::with_capacity(npts * z.len());
        for &zv in z.values() {
            for i in 0..npts {
                let x = grid.coords(i);
                values.push(f(&x[..grid.ndim()], zv));
            }
        }
        Self::new(grid, z, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn z_levels(&self) -> &ZLevels {
        &self.z
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn level(&self, zi: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[zi * n..(zi + 1) * n]
    }

    /// The `z = 0` slice as a physical field.
    pub fn boundary(&self) -> PhysicalField {
        PhysicalField::new(self.grid.clone(), self.level(0).to_vec())
            .expect("boundary slice is finite")
            .with_time(self.time_tag)
    }

    /// `∫ w² dx` per level.
    pub fn l2_profile(&self) -> Vec<f64> {
        let cv = self.grid.cell_volume();
        (0..self.z.len())
            .map(|zi| self.level(zi).iter().map(|v| v * v).sum::<f64>() * cv)
            .collect()
    }

    /// Pointwise map, keeping the geometry.
    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> ExtensionField {
        ExtensionField {
            grid: self.grid.clone(),
            z: self.z.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            time_tag: self.time_tag,
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }
}

/// Harmonic extension of `θ` to the given heights: mode `k` at level `z`
/// carries `θ̂(k) e^{-|k'| z}`. The `z = 0` slice is the input itself.
pub fn harmonic_extension(theta: &PhysicalField, z: &ZLevels) -> Result<ExtensionField> {
    let spec = fft::forward(theta)?;
    harmonic_extension_spectral(&spec, z, Some(theta))
}

fn wavevector_norms(grid: &Grid) -> Vec<f64> {
    let tables: Vec<Vec<f64>> = (0..grid.ndim()).map(|a| grid.wavenumbers_phys(a)).collect();
    (0..grid.len())
        .map(|i| {
            let idx = grid.decompose(i);
            let mut s = 0.0;
            for a in 0..grid.ndim() {
                let k = tables[a][idx[a]];
                s += k * k;
            }
            s.sqrt()
        })
        .collect()
}

fn harmonic_extension_spectral(
    spec: &SpectralField,
    z: &ZLevels,
    boundary: Option<&PhysicalField>,
) -> Result<ExtensionField> {
    let grid = spec.grid().clone();
    let npts = grid.len();
    let knorm = wavevector_norms(&grid);
    let levels: Vec<Result<Vec<f64>>> = par::map_collect(z.len(), |zi| {
        let zv = z.values()[zi];
        if zi == 0 {
            if let Some(b) = boundary {
                return Ok(b.values().to_vec());
            }
        }
        let mut damped = spec.clone();
        for (c, &kn) in damped.coeffs_mut().iter_mut().zip(&knorm) {
            *c *= (-kn * zv).exp();
        }
        Ok(fft::inverse(&damped)?.into_values())
    });
    let mut values = Vec::with_capacity(npts * z.len());
    for lv in levels {
        values.extend(lv?);
    }
    Ok(ExtensionField { grid, z: z.clone(), values, time_tag: spec.time_tag })
}

/// Second-order one-sided derivative weights at the first of three nodes
/// spaced `h1` and `h2`.
fn one_sided_weights(h1: f64, h2: f64) -> [f64; 3] {
    [
        -(2.0 * h1 + h2) / (h1 * (h1 + h2)),
        (h1 + h2) / (h1 * h2),
        -h1 / (h2 * (h1 + h2)),
    ]
}

/// Second-order central derivative weights at the middle node, gaps `hm`
/// below and `hp` above.
fn central_weights(hm: f64, hp: f64) -> [f64; 3] {
    [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))]
}

/// `Λθ` realized as `-∂_z` of the extension at the boundary, second-order
/// one-sided stencil on the first three levels.
pub fn normal_derivative_at_boundary(ext: &ExtensionField) -> Result<PhysicalField> {
    if ext.z.len() < 3 {
        return Err(Error::InvalidArgument("normal derivative needs at least 3 z levels".into()));
    }
    let z = ext.z.values();
    let w = one_sided_weights(z[1] - z[0], z[2] - z[1]);
    let (l0, l1, l2) = (ext.level(0), ext.level(1), ext.level(2));
    let values: Vec<f64> = (0..ext.grid.len())
        .map(|i| -(w[0] * l0[i] + w[1] * l1[i] + w[2] * l2[i]))
        .collect();
    Ok(PhysicalField::new(ext.grid.clone(), values)?.with_time(ext.time_tag))
}

/// Half-space Poisson kernel `P(t, x) = C t / (|x|² + t²)^{(N+1)/2}`,
/// normalized to unit mass: `C = Γ((N+1)/2) / π^{(N+1)/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonKernelSpec {
    pub ndim: usize,
    pub constant: f64,
}

impl PoissonKernelSpec {
    pub fn unit_mass(ndim: usize) -> Result<Self> {
        let constant = match ndim {
            1 => 1.0 / std::f64::consts::PI,
            2 => 0.5 / std::f64::consts::PI,
            3 => 1.0 / (std::f64::consts::PI * std::f64::consts::PI),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "Poisson kernel implemented for N = 1..3, got {ndim}"
                )))
            }
        };
        Ok(PoissonKernelSpec { ndim, constant })
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("Poisson kernel needs t > 0, got {t}")));
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        Ok(self.constant * t / (r2 + t * t).powf((self.ndim as f64 + 1.0) / 2.0))
    }

    fn sphere_area(&self) -> f64 {
        match self.ndim {
            1 => 2.0,
            2 => std::f64::consts::TAU,
            _ => 2.0 * std::f64::consts::TAU,
        }
    }

    /// `∫_{|x| <= r_max} P(t, x) dx` by radial Simpson quadrature — the
    /// independent check that pins the normalization constant.
    pub fn mass_by_quadrature(&self, t: f64, r_max: f64, points: usize) -> Result<f64> {
        self.radial_quadrature(t, r_max, points, |r| {
            self.constant * t / (r * r + t * t).powf((self.ndim as f64 + 1.0) / 2.0)
        })
    }

    /// `(∫_{|x| <= r_max} P(t, x)² dx)^{1/2}` by the same quadrature.
    pub fn l2_norm_by_quadrature(&self, t: f64, r_max: f64, points: usize) -> Result<f64> {
        let sq = self.radial_quadrature(t, r_max, points, |r| {
            let p = self.constant * t / (r * r + t * t).powf((self.ndim as f64 + 1.0) / 2.0);
            p * p
        })?;
        Ok(sq.sqrt())
    }

    fn radial_quadrature<F: Fn(f64) -> f64>(
        &self,
        t: f64,
        r_max: f64,
        points: usize,
        f: F,
    ) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("Poisson kernel needs t > 0, got {t}")));
        }
        // Substitute r = t tan(φ); the integrand becomes bounded and smooth.
        let phi_max = (r_max / t).atan();
        let n = points.max(65) | 1; // odd node count for Simpson
        let h = phi_max / (n - 1) as f64;
        let integrand = |phi: f64| {
            let r = t * phi.tan();
            let dr = t / (phi.cos() * phi.cos());
            r.powi(self.ndim as i32 - 1) * f(r) * dr
        };
        let mut sum = integrand(0.0) + integrand(phi_max);
        for i in 1..n - 1 {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * integrand(i as f64 * h);
        }
        Ok(self.sphere_area() * sum * h / 3.0)
    }
}

/// Convolution with `P(t, ·)`: the multiplier `e^{-|k'| t}` on the torus,
/// identical to evaluating the harmonic extension at height `t`.
pub fn poisson_convolve(theta: &PhysicalField, t: f64) -> Result<PhysicalField> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("poisson_convolve needs t > 0, got {t}")));
    }
    let mut spec = fft::forward(theta)?;
    let knorm = wavevector_norms(spec.grid());
    for (c, &kn) in spec.coeffs_mut().iter_mut().zip(&knorm) {
        *c *= (-kn * t).exp();
    }
    fft::inverse(&spec)
}

/// `∫∫ |∇(η [w]₊)|² dx dz`: spectral x-derivatives, finite-difference
/// z-derivatives, trapezoid weights in z. The cutoff must vanish on the top
/// level (compact support in the resolved range).
pub fn extension_dirichlet_energy(ext: &ExtensionField, cutoff: &ExtensionField) -> Result<f64> {
    if ext.grid != *cutoff.grid() || ext.z != cutoff.z {
        return Err(Error::GridMismatch);
    }
    if cutoff.level(cutoff.z.len() - 1).iter().any(|&v| v != 0.0) {
        return Err(Error::InvalidArgument(
            "cutoff must be compactly supported: top z level is not zero".into(),
        ));
    }
    let n = ext.grid.len();
    let nz = ext.z.len();
    let mut g = Vec::with_capacity(n * nz);
    for zi in 0..nz {
        let (w, eta) = (ext.level(zi), cutoff.level(zi));
        g.extend((0..n).map(|i| eta[i] * w[i].max(0.0)));
    }
    let gext = ExtensionField::new(ext.grid.clone(), ext.z.clone(), g)?;
    Ok(dirichlet_energy_raw(&gext))
}

/// `∫∫ |∇w|² dx dz` of an extension sample, no cutoff, no positive part.
/// For the harmonic extension of `θ` with enough height this approaches
/// `‖Λ^{1/2} θ‖²_{L²}` (the trace energy identity).
pub fn dirichlet_energy_raw(ext: &ExtensionField) -> f64 {
    let grid = &ext.grid;
    let n = grid.len();
    let nz = ext.z.len();
    let z = ext.z.values();
    let cv = grid.cell_volume();

    // |∇_x w|² per level, spectral.
    let xgrad_sq: Vec<Vec<f64>> = par::map_collect(nz, |zi| {
        let level =
            PhysicalField::new(grid.clone(), ext.level(zi).to_vec()).expect("finite level");
        let spec = fft::forward(&level).expect("finite level");
        let mut acc = vec![0.0f64; n];
        for a in 0..grid.ndim() {
            let d = fft::inverse(&spectral::derivative(&spec, a).expect("valid axis"))
                .expect("finite");
            for (s, v) in acc.iter_mut().zip(d.values()) {
                *s += v * v;
            }
        }
        acc
    });

    let mut total = 0.0;
    for zi in 0..nz {
        // z-derivative stencil for this level.
        let (ia, ib, ic, w) = if zi == 0 {
            (0, 1, 2, one_sided_weights(z[1] - z[0], z[2] - z[1]))
        } else if zi == nz - 1 {
            let ws = one_sided_weights(z[nz - 1] - z[nz - 2], z[nz - 2] - z[nz - 3]);
            (nz - 1, nz - 2, nz - 3, [-ws[0], -ws[1], -ws[2]])
        } else {
            (zi - 1, zi, zi + 1, central_weights(z[zi] - z[zi - 1], z[zi + 1] - z[zi]))
        };
        let (la, lb, lc) = (ext.level(ia), ext.level(ib), ext.level(ic));
        let mut slice = 0.0;
        let xg = &xgrad_sq[zi];
        for i in 0..n {
            let dzv = w[0] * la[i] + w[1] * lb[i] + w[2] * lc[i];
            slice += xg[i] + dzv * dzv;
        }
        let wz = if zi == 0 {
            (z[1] - z[0]) / 2.0
        } else if zi == nz - 1 {
            (z[nz - 1] - z[nz - 2]) / 2.0
        } else {
            (z[zi + 1] - z[zi - 1]) / 2.0
        };
        total += wz * slice * cv;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial;
    use crate::spectral::h_half_seminorm;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn single_mode_decay() {
        let g = Grid::square(32, 2).unwrap();
        let theta = PhysicalField::from_fn(g.clone(), |x| x[0].sin()).unwrap();
        let z = ZLevels::uniform(0.25, 8).unwrap();
        let ext = harmonic_extension(&theta, &z).unwrap();
        for (zi, &zv) in z.values().iter().enumerate() {
            let expect = theta.scaled((-zv).exp());
            let got = PhysicalField::new(g.clone(), ext.level(zi).to_vec()).unwrap();
            assert!(got.sub(&expect).unwrap().linf_norm() < 1e-12, "level {zi}");
        }
    }

    #[test]
    fn constant_extends_to_itself() {
        let g = Grid::square(16, 2).unwrap();
        let theta = PhysicalField::constant(g, -2.5).unwrap();
        let ext = harmonic_extension(&theta, &ZLevels::default_geometric()).unwrap();
        assert!((ext.min() + 2.5).abs() < 1e-12 && (ext.max() + 2.5).abs() < 1e-12);
    }

    #[test]
    fn interior_harmonicity_refines_at_second_order() {
        // FD second derivative in z must cancel the spectral -Δ_x at O(dz²).
        let g = Grid::square(32, 2).unwrap();
        let theta = initial::random_band(&g, 1, 6, 1.0, 3).unwrap();
        let mut defects = Vec::new();
        for &dz in &[0.02, 0.01] {
            let z = ZLevels::uniform(dz, 40).unwrap();
            let ext = harmonic_extension(&theta, &z).unwrap();
            let mut worst = 0.0f64;
            for zi in 1..z.len() - 1 {
                let level = PhysicalField::new(g.clone(), ext.level(zi).to_vec()).unwrap();
                let lap_x = fft::inverse(
                    &spectral::fractional_laplacian(&fft::forward(&level).unwrap(), 2.0).unwrap(),
                )
                .unwrap();
                let (lm, l0, lp) = (ext.level(zi - 1), ext.level(zi), ext.level(zi + 1));
                for i in 0..g.len() {
                    let d2z = (lm[i] - 2.0 * l0[i] + lp[i]) / (dz * dz);
                    worst = worst.max((d2z - lap_x.values()[i]).abs());
                }
            }
            defects.push(worst);
        }
        let order = (defects[0] / defects[1]).log2();
        assert!(order > 1.8, "harmonicity defect refines at order {order}, {defects:?}");
    }

    #[test]
    fn normal_derivative_two_route_refinement() {
        let g = Grid::square(32, 2).unwrap();
        let theta = initial::random_band(&g, 1, 6, 1.0, 11).unwrap();
        let spectral_route = fft::inverse(
            &spectral::fractional_laplacian(&fft::forward(&theta).unwrap(), 1.0).unwrap(),
        )
        .unwrap();
        let mut errs = Vec::new();
        for &dz in &[0.02, 0.01, 0.005] {
            let ext = harmonic_extension(&theta, &ZLevels::uniform(dz, 4).unwrap()).unwrap();
            let fd = normal_derivative_at_boundary(&ext).unwrap();
            errs.push(fd.sub(&spectral_route).unwrap().linf_norm());
        }
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        assert!(o1 > 1.8 && o2 > 1.8, "orders {o1:.2} {o2:.2}, errors {errs:?}");
    }

    #[test]
    fn normal_derivative_trivial_cases() {
        let g = Grid::square(32, 2).unwrap();
        let z = ZLevels::uniform(1e-3, 3).unwrap();
        let sin = PhysicalField::from_fn(g.clone(), |x| x[0].sin()).unwrap();
        let nd = normal_derivative_at_boundary(&harmonic_extension(&sin, &z).unwrap()).unwrap();
        assert!(nd.sub(&sin).unwrap().linf_norm() < 1e-5);

        // Constant data: stencil weights are O(1/dz), so compare against the
        // cancellation roundoff at this spacing.
        let c = PhysicalField::constant(g, 7.0).unwrap();
        let coarse = ZLevels::uniform(0.25, 3).unwrap();
        let nd = normal_derivative_at_boundary(&harmonic_extension(&c, &coarse).unwrap()).unwrap();
        assert!(nd.linf_norm() < 1e-12);

        let two = ZLevels::uniform(1e-3, 1).unwrap();
        assert!(normal_derivative_at_boundary(&harmonic_extension(&sin, &two).unwrap()).is_err());
    }

    #[test]
    fn maximum_principle_and_monotone_l2() {
        let g = Grid::square(32, 2).unwrap();
        let theta = initial::random_band(&g, 2, 8, 1.0, 5).unwrap();
        let ext = harmonic_extension(&theta, &ZLevels::default_geometric()).unwrap();
        assert!(ext.min() >= theta.min() - 1e-10);
        assert!(ext.max() <= theta.max() + 1e-10);
        let profile = ext.l2_profile();
        for w in profile.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "L² profile must not grow in z");
        }
    }

    #[test]
    fn poisson_kernel_mass_and_homogeneity() {
        for ndim in 1..=3 {
            let spec = PoissonKernelSpec::unit_mass(ndim).unwrap();
            let mass = spec.mass_by_quadrature(1.0, 1e7, 20_001).unwrap();
            assert!((mass - 1.0).abs() < 1e-6, "N={ndim}: mass {mass}");
        }
        let spec = PoissonKernelSpec::unit_mass(2).unwrap();
        for &(t, x, y, lam) in &[(0.5, 0.3, -0.8, 2.0), (1.5, 0.0, 2.0, 0.25)] {
            let lhs = spec.eval(lam * t, &[lam * x, lam * y]).unwrap();
            let rhs = spec.eval(t, &[x, y]).unwrap() * lam.powi(-2);
            assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs());
        }
        assert!(spec.eval(0.0, &[0.0, 0.0]).is_err());
        assert!(PoissonKernelSpec::unit_mass(4).is_err());
    }

    #[test]
    fn poisson_l2_norm_matches_closed_form() {
        // N=2 closed form: ‖P(1)‖_{L²} = (8π)^{-1/2}.
        let spec = PoissonKernelSpec::unit_mass(2).unwrap();
        let got = spec.l2_norm_by_quadrature(1.0, 1e6, 20_001).unwrap();
        let expect = 1.0 / (8.0 * PI).sqrt();
        assert!((got - expect).abs() < 1e-8, "{got} vs {expect}");
    }

    #[test]
    fn poisson_convolve_semigroup_and_constants() {
        let g = Grid::square(32, 2).unwrap();
        let c = PhysicalField::constant(g.clone(), 4.2).unwrap();
        let conv = poisson_convolve(&c, 0.7).unwrap();
        assert!(conv.sub(&c).unwrap().linf_norm() < 1e-12);

        let theta = initial::random_band(&g, 1, 8, 1.0, 2).unwrap();
        let both = poisson_convolve(&poisson_convolve(&theta, 0.3).unwrap(), 0.5).unwrap();
        let once = poisson_convolve(&theta, 0.8).unwrap();
        assert!(both.sub(&once).unwrap().linf_norm() < 1e-12);
        assert!(poisson_convolve(&theta, -1.0).is_err());
    }

    /// z-only cosine ramp: 1 below `z_a`, 0 above `z_b`.
    fn ramp_cutoff(grid: &Grid, z: &ZLevels, z_a: f64, z_b: f64) -> ExtensionField {
        ExtensionField::from_fn(grid.clone(), z.clone(), |_, zv| ramp(zv, z_a, z_b)).unwrap()
    }

    fn ramp(zv: f64, z_a: f64, z_b: f64) -> f64 {
        if zv <= z_a {
            1.0
        } else if zv >= z_b {
            0.0
        } else {
            0.5 * (1.0 + (PI * (zv - z_a) / (z_b - z_a)).cos())
        }
    }

    fn ramp_deriv(zv: f64, z_a: f64, z_b: f64) -> f64 {
        if zv <= z_a || zv >= z_b {
            0.0
        } else {
            -0.5 * PI / (z_b - z_a) * (PI * (zv - z_a) / (z_b - z_a)).sin()
        }
    }

    #[test]
    fn dirichlet_energy_vanishes_on_negative_data() {
        let g = Grid::square(16, 2).unwrap();
        let theta = PhysicalField::constant(g.clone(), -1.0).unwrap();
        let z = ZLevels::uniform(0.05, 40).unwrap();
        let ext = harmonic_extension(&theta, &z).unwrap();
        let eta = ramp_cutoff(&g, &z, 1.0, 1.9);
        assert_eq!(extension_dirichlet_energy(&ext, &eta).unwrap(), 0.0);
    }

    #[test]
    fn dirichlet_energy_matches_quadrature_oracle() {
        // θ = sin(x₁): the positive part factorizes, giving the closed form
        // 2π (π/2) ∫ [η² + (η' − η)²] e^{-2z} dz, evaluated by fine Simpson.
        // The integrand has a kink in x, so the spectral route converges at
        // O(1/n): check agreement at n = 64 and that it tightens at n = 128.
        let (z_a, z_b) = (2.0, 5.0);
        let m = 200_001;
        let h = 6.0 / (m - 1) as f64;
        let mut quad = 0.0;
        for i in 0..m {
            let zv = i as f64 * h;
            let w = if i == 0 || i == m - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let e = (-zv).exp();
            let a = ramp(zv, z_a, z_b) * e;
            let b = (ramp_deriv(zv, z_a, z_b) - ramp(zv, z_a, z_b)) * e;
            quad += w * (a * a + b * b);
        }
        quad *= h / 3.0;
        let oracle = TAU * (PI / 2.0) * quad;

        let mut rels = Vec::new();
        for n in [64usize, 128] {
            let g = Grid::square(n, 2).unwrap();
            let theta = PhysicalField::from_fn(g.clone(), |x| x[0].sin()).unwrap();
            let z = ZLevels::uniform(0.02, 300).unwrap();
            let ext = harmonic_extension(&theta, &z).unwrap();
            let eta = ramp_cutoff(&g, &z, z_a, z_b);
            let got = extension_dirichlet_energy(&ext, &eta).unwrap();
            rels.push((got - oracle).abs() / oracle);
        }
        assert!(rels[0] < 0.02, "energy oracle defect {:.2e}", rels[0]);
        assert!(rels[1] < 0.7 * rels[0], "no convergence under x refinement: {rels:?}");
    }

    #[test]
    fn dirichlet_energy_algebraic_decomposition() {
        // For strictly positive data and a z-only cutoff, the square expands:
        // E = ∫η²|∇w|² + 2∫η η' w ∂_z w + ∫η'² w², up to the FD error of the
        // product rule in z.
        let g = Grid::square(32, 2).unwrap();
        let theta = PhysicalField::from_fn(g.clone(), |x| 1.5 + x[0].sin()).unwrap();
        let (z_a, z_b) = (1.0, 3.5);
        let z = ZLevels::uniform(0.02, 200).unwrap();
        let ext = harmonic_extension(&theta, &z).unwrap();
        let eta = ramp_cutoff(&g, &z, z_a, z_b);
        let lhs = extension_dirichlet_energy(&ext, &eta).unwrap();

        let n = g.len();
        let nz = z.len();
        let zv = z.values();
        let cv = g.cell_volume();
        let mut rhs = 0.0;
        // Same stencils and trapezoid weights as the implementation; the top
        // level drops out because η vanishes there.
        for zi in 0..nz - 1 {
            let wz = if zi == 0 { (zv[1] - zv[0]) / 2.0 } else { (zv[zi + 1] - zv[zi - 1]) / 2.0 };
            let e = ramp(zv[zi], z_a, z_b);
            let de = ramp_deriv(zv[zi], z_a, z_b);
            let level = PhysicalField::new(g.clone(), ext.level(zi).to_vec()).unwrap();
            let spec = fft::forward(&level).unwrap();
            let mut xgrad = 0.0;
            for a in 0..2 {
                let d = fft::inverse(&spectral::derivative(&spec, a).unwrap()).unwrap();
                xgrad += d.values().iter().map(|v| v * v).sum::<f64>();
            }
            let (ia, ib, ic, wts) = if zi == 0 {
                (0, 1, 2, one_sided_weights(zv[1] - zv[0], zv[2] - zv[1]))
            } else {
                (zi - 1, zi, zi + 1, central_weights(zv[zi] - zv[zi - 1], zv[zi + 1] - zv[zi]))
            };
            let (la, lb, lc) = (ext.level(ia), ext.level(ib), ext.level(ic));
            let mid = ext.level(zi);
            let mut zgrad = 0.0;
            let mut cross = 0.0;
            let mut mass = 0.0;
            for i in 0..n {
                let dz = wts[0] * la[i] + wts[1] * lb[i] + wts[2] * lc[i];
                zgrad += dz * dz;
                cross += mid[i] * dz;
                mass += mid[i] * mid[i];
            }
            rhs += wz * cv * (e * e * (xgrad + zgrad) + 2.0 * e * de * cross + de * de * mass);
        }
        let rel = (lhs - rhs).abs() / lhs;
        assert!(rel < 2e-3, "decomposition defect {rel:.2e}: {lhs} vs {rhs}");
    }

    #[test]
    fn trace_energy_identity() {
        // ∫ |∇θ*|² over the half space equals ‖Λ^{1/2}θ‖²; with the positive
        // part it dominates ‖Λ^{1/2}·‖ of the trace θ₊ (harmonic extension
        // minimizes Dirichlet energy for a given trace).
        let g = Grid::square(32, 2).unwrap();
        let theta = initial::random_band(&g, 1, 5, 1.0, 17).unwrap();
        let z = ZLevels::geometric(5e-4, 10.0, 160).unwrap();
        let ext = harmonic_extension(&theta, &z).unwrap();
        let raw = dirichlet_energy_raw(&ext);
        let seminorm = h_half_seminorm(&fft::forward(&theta).unwrap());
        let rel = (raw - seminorm).abs() / seminorm;
        assert!(rel < 0.02, "trace identity defect {rel:.3e}");

        let plus = theta.map(|v| v.max(0.0));
        let seminorm_plus = h_half_seminorm(&fft::forward(&plus).unwrap());
        let raw_plus = dirichlet_energy_raw(&ext.map(|v| v.max(0.0)));
        assert!(
            raw_plus >= seminorm_plus * (1.0 - 0.02),
            "trace inequality: {raw_plus} < {seminorm_plus}"
        );
    }

    #[test]
    fn cutoff_support_is_enforced() {
        let g = Grid::square(16, 2).unwrap();
        let z = ZLevels::uniform(0.1, 10).unwrap();
        let ext = harmonic_extension(&PhysicalField::zeros(g.clone()), &z).unwrap();
        let bad = ExtensionField::from_fn(g, z, |_, _| 1.0).unwrap();
        assert!(extension_dirichlet_energy(&ext, &bad).is_err());
    }
}
