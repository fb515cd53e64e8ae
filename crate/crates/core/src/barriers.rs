//! Barrier functions and measured constants: the separated-variables strip
//! barrier `b₂` with its exponential decay constant, the finite-difference
//! cube barrier `b₁` that fixes the oscillation gain `λ`, the constants
//! ledger `(λ, δ, M)` with its three inequality families, and the
//! isoperimetric measurement `|A||B| <= Ĉ ‖∇ω‖_{L²} |C|^{1/2}`.

use crate::error::{Error, Result};
use crate::extension::PoissonKernelSpec;
use crate::par;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Strip barrier on `[0, ∞) × [0, 1]`: harmonic, vanishing on `z = 0` and
/// `z = 1`, with the separated-variables series
/// `b₂(x, z) = Σ_p 4/(π(2p+1)) e^{-(2p+1)πx} sin((2p+1)πz)`.
///
/// The series' own boundary trace at `x = 0` is the constant 1 (its sine
/// coefficients are those of 1, not of the nominal side value 2); all decay
/// constants below are measured for the series as written.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierB2 {
    pub p_max: usize,
}

impl BarrierB2 {
    pub fn new(p_max: usize) -> Result<Self> {
        if p_max == 0 {
            return Err(Error::InvalidArgument("p_max must be >= 1".into()));
        }
        Ok(BarrierB2 { p_max })
    }

    /// Partial sum and a tail upper bound
    /// `4/(π(2p_max+1)) · e^{-(2p_max+1)πx} / (1 − e^{-2πx})` (infinite at
    /// `x = 0`).
    pub fn eval(&self, x: f64, z: f64) -> Result<(f64, f64)> {
        if !(x >= 0.0) {
            return Err(Error::InvalidArgument(format!("b2 needs x >= 0, got {x}")));
        }
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::InvalidArgument(format!("b2 needs z in [0, 1], got {z}")));
        }
        let mut sum = 0.0;
        for p in 0..=self.p_max {
            let m = (2 * p + 1) as f64;
            sum += 4.0 / (PI * m) * (-m * PI * x).exp() * (m * PI * z).sin();
        }
        let tail = if x > 0.0 {
            let m = (2 * self.p_max + 1) as f64;
            4.0 / (PI * m) * (-m * PI * x).exp() / (1.0 - (-2.0 * PI * x).exp())
        } else {
            f64::INFINITY
        };
        Ok((sum, tail))
    }

    /// `max |b₂(x, z)| e^{πx}` over the given x-grid (z scanned densely):
    /// the measured decay constant `C̄` of `|b₂| <= C̄ e^{-πx}`.
    pub fn decay_check(&self, x_grid: &[f64]) -> Result<f64> {
        let mut c_bar = 0.0f64;
        for &x in x_grid {
            if !(x > 0.0) {
                return Err(Error::InvalidArgument("decay grid must be positive".into()));
            }
            for zi in 0..=64 {
                let z = zi as f64 / 64.0;
                let (v, _) = self.eval(x, z)?;
                c_bar = c_bar.max(v.abs() * (PI * x).exp());
            }
        }
        Ok(c_bar)
    }
}

/// Finite-difference solution of the Laplace equation on an axis-aligned
/// rectangle with Dirichlet data, on a uniform square mesh. Nodes are
/// `(x0 + i h, z0 + j h)`, stored row-major in j.
#[derive(Debug, Clone)]
pub struct RectLaplaceSolution {
    pub nx: usize,
    pub nz: usize,
    pub h: f64,
    pub x0: f64,
    pub z0: f64,
    values: Vec<f64>,
    pub sweeps: usize,
}

impl RectLaplaceSolution {
    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.nx + 1) + i]
    }

    pub fn coords(&self, i: usize, j: usize) -> (f64, f64) {
        (self.x0 + i as f64 * self.h, self.z0 + j as f64 * self.h)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
    }

    /// Largest 5-point Laplacian residual over interior nodes.
    pub fn interior_residual_max(&self) -> f64 {
        let w = self.nx + 1;
        let mut worst = 0.0f64;
        for j in 1..self.nz {
            for i in 1..self.nx {
                let c = self.values[j * w + i];
                let r = self.values[j * w + i - 1]
                    + self.values[j * w + i + 1]
                    + self.values[(j - 1) * w + i]
                    + self.values[(j + 1) * w + i]
                    - 4.0 * c;
                worst = worst.max(r.abs());
            }
        }
        worst / (self.h * self.h)
    }
}

/// SOR solve of `Δu = 0` with Dirichlet data `g(x, z)` on the rectangle
/// `[x0, x1] × [z0, z1]`, square cells of side `h`.
pub fn solve_laplace_rectangle<G: Fn(f64, f64) -> f64>(
    x_range: (f64, f64),
    z_range: (f64, f64),
    h: f64,
    boundary: G,
    tol: f64,
    max_sweeps: usize,
) -> Result<RectLaplaceSolution> {
    let nx = ((x_range.1 - x_range.0) / h).round() as usize;
    let nz = ((z_range.1 - z_range.0) / h).round() as usize;
    if nx < 2 || nz < 2 {
        return Err(Error::InvalidArgument("mesh too coarse".into()));
    }
    let w = nx + 1;
    let mut u = vec![0.0f64; w * (nz + 1)];
    let coords = |i: usize, j: usize| (x_range.0 + i as f64 * h, z_range.0 + j as f64 * h);
    for j in 0..=nz {
        for i in 0..=nx {
            if i == 0 || i == nx || j == 0 || j == nz {
                let (x, z) = coords(i, j);
                u[j * w + i] = boundary(x, z);
            }
        }
    }
    // Optimal SOR factor for the 5-point Laplacian on this mesh.
    let rho = 0.5
        * ((PI / nx as f64).cos() + (PI / nz as f64).cos());
    let omega = 2.0 / (1.0 + (1.0 - rho * rho).sqrt());
    let scale = u.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);

    let mut sweeps = 0;
    loop {
        // red-black ordering, two half sweeps
        for color in 0..2 {
            for j in 1..nz {
                let start = 1 + (j + color) % 2;
                let mut i = start;
                while i < nx {
                    let idx = j * w + i;
                    let nb = u[idx - 1] + u[idx + 1] + u[idx - w] + u[idx + w];
                    u[idx] += omega * (nb / 4.0 - u[idx]);
                    i += 2;
                }
            }
        }
        sweeps += 1;
        if sweeps % 16 == 0 || sweeps >= max_sweeps {
            let mut worst = 0.0f64;
            for j in 1..nz {
                for i in 1..nx {
                    let idx = j * w + i;
                    let r = u[idx - 1] + u[idx + 1] + u[idx - w] + u[idx + w] - 4.0 * u[idx];
                    worst = worst.max(r.abs());
                }
            }
            if worst < tol * scale {
                break;
            }
            if sweeps >= max_sweeps {
                return Err(Error::SolverDiverged { residual: worst, iterations: sweeps });
            }
        }
    }
    Ok(RectLaplaceSolution {
        nx,
        nz,
        h,
        x0: x_range.0,
        z0: z_range.0,
        values: u,
        sweeps,
    })
}

/// Cube barrier: harmonic in `(-4,4) × (0,4)`, equal to 2 on the sides and
/// the top, 0 on `z = 0`, with the measured oscillation gain
/// `λ = (2 − max_{B₂*} b₁) / 4`.
#[derive(Debug, Clone)]
pub struct BarrierB1 {
    pub solution: RectLaplaceSolution,
    pub lambda: f64,
}

/// Solve the `b₁` problem on the 1D cross-section (`N = 1`) with
/// `resolution` intervals per unit-4 side; `resolution >= 32` required.
pub fn solve_barrier_b1(resolution: usize) -> Result<BarrierB1> {
    if resolution < 32 {
        return Err(Error::InvalidArgument("b1 needs resolution >= 32 per axis".into()));
    }
    let h = 4.0 / resolution as f64;
    let solution = solve_laplace_rectangle(
        (-4.0, 4.0),
        (0.0, 4.0),
        h,
        |_, z| if z == 0.0 { 0.0 } else { 2.0 },
        1e-10,
        200_000,
    )?;
    // max over B₂* = [-2, 2] × (0, 2]
    let mut worst = f64::NEG_INFINITY;
    for j in 1..=solution.nz {
        for i in 0..=solution.nx {
            let (x, z) = solution.coords(i, j);
            if x.abs() <= 2.0 + 1e-12 && z <= 2.0 + 1e-12 {
                worst = worst.max(solution.value(i, j));
            }
        }
    }
    let lambda = (2.0 - worst) / 4.0;
    Ok(BarrierB1 { solution, lambda })
}

/// The measured constants of the barrier argument and the parameters
/// `(δ, M)` they produce.
#[derive(Debug, Clone)]
pub struct ConstantsLedger {
    pub ndim: usize,
    pub lambda: f64,
    pub delta: f64,
    pub m: f64,
    pub c_bar: f64,
    pub c0: f64,
    pub p1_l2: f64,
    pub energy_c: f64,
}

/// The three inequality families of the constants lemma, evaluated in log
/// space:
///   1. `N C̄ e^{-π 2^{-k}/δ^k} <= λ 2^{-k-2}`            for k = 1..64
///   2. `M^{-k} δ^{-(k+1)} ‖P(1)‖_{L²} <= λ 2^{-k-2}`      for k = 1..64
///   3. `M^{-k} >= C₀^k M^{-(1+1/N)(k-3)}`                 for k = 12N..24N
pub fn verify_ledger(ledger: &ConstantsLedger) -> [bool; 3] {
    let n = ledger.ndim as f64;
    let ln2 = 2f64.ln();
    let slack = 1e-9;

    let ineq1 = (1..=64u32).all(|k| {
        let lhs = (n * ledger.c_bar).ln() - PI * (0.5 / ledger.delta).powi(k as i32);
        let rhs = ledger.lambda.ln() - (k as f64 + 2.0) * ln2;
        lhs <= rhs + slack
    });
    let ineq2 = (1..=64u32).all(|k| {
        let lhs = -(k as f64) * ledger.m.ln() - (k as f64 + 1.0) * ledger.delta.ln()
            + ledger.p1_l2.ln();
        let rhs = ledger.lambda.ln() - (k as f64 + 2.0) * ln2;
        lhs <= rhs + slack
    });
    let k_lo = 12 * ledger.ndim as u32;
    let k_hi = 24 * ledger.ndim as u32;
    let ineq3 = (k_lo..=k_hi).all(|k| {
        let lhs = -(k as f64) * ledger.m.ln();
        let rhs = k as f64 * ledger.c0.ln() - (1.0 + 1.0 / n) * (k as f64 - 3.0) * ledger.m.ln();
        lhs >= rhs - slack
    });
    [ineq1, ineq2, ineq3]
}

/// Resolution of the δ scan over `(0, 1/4]`.
pub const DELTA_SCAN_STEP: f64 = 1e-3;

/// Build the ledger for a measured `λ`, dimension `N`, and generic energy
/// constant `C`: find the largest admissible `δ <= 1/4` by scan, set
/// `M = sup(1, C₀^{2N}, 2/δ, 8‖P(1)‖_{L²}/(λδ²))`, and re-verify all three
/// inequality families.
pub fn constants_ledger_build(lambda: f64, ndim: usize, energy_c: f64) -> Result<ConstantsLedger> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    if !(energy_c > 0.0) {
        return Err(Error::InvalidArgument("energy constant must be positive".into()));
    }
    if ndim < 1 || ndim > 3 {
        return Err(Error::InvalidArgument("ndim must be 1..=3".into()));
    }
    let n = ndim as f64;
    let b2 = BarrierB2::new(64)?;
    let x_grid: Vec<f64> = (1..=50).map(|i| 0.1 * i as f64).collect();
    let c_bar = b2.decay_check(&x_grid)?;
    let p1_l2 = PoissonKernelSpec::unit_mass(ndim)?.l2_norm_by_quadrature(1.0, 1e6, 20_001)?;
    let c0 = energy_c * 2f64.powf(1.0 + 2.0 / n) / lambda.powf(2.0 / n);

    // Largest δ <= 1/4 satisfying inequality 1 for k = 1..64.
    let ln2 = 2f64.ln();
    let admissible = |delta: f64| {
        (1..=64u32).all(|k| {
            let lhs = (n * c_bar).ln() - PI * (0.5 / delta).powi(k as i32);
            let rhs = lambda.ln() - (k as f64 + 2.0) * ln2;
            lhs <= rhs
        })
    };
    let mut delta = None;
    let steps = (0.25 / DELTA_SCAN_STEP).round() as usize;
    for s in (1..=steps).rev() {
        let d = s as f64 * DELTA_SCAN_STEP;
        if admissible(d) {
            delta = Some(d);
            break;
        }
    }
    let delta = delta.ok_or_else(|| {
        Error::InvalidArgument(format!(
            "no admissible delta in (0, 1/4] for lambda = {lambda:.3e}: lambda too small for the tested k range"
        ))
    })?;

    let m = 1f64
        .max(c0.powf(2.0 * n))
        .max(2.0 / delta)
        .max(8.0 * p1_l2 / (lambda * delta * delta));
    let ledger = ConstantsLedger { ndim, lambda, delta, m, c_bar, c0, p1_l2, energy_c };
    let ok = verify_ledger(&ledger);
    if ok != [true; 3] {
        return Err(Error::InvalidArgument(format!(
            "constructed ledger fails re-verification: {ok:?} (lambda = {lambda}, delta = {delta}, M = {m})"
        )));
    }
    Ok(ledger)
}

/// Scalar samples on the cell centers of a uniform grid over `[-1, 1]^d`
/// (not periodic; the isoperimetric measurement differentiates one-sidedly).
#[derive(Debug, Clone)]
pub struct CubeField {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl CubeField {
    pub fn from_fn<F: Fn(&[f64]) -> f64>(dims: &[usize], f: F) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 || dims.iter().any(|&n| n < 4) {
            return Err(Error::InvalidArgument("cube grid needs 1..=3 axes of >= 4 cells".into()));
        }
        let total: usize = dims.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; dims.len()];
        for _ in 0..total {
            let x: Vec<f64> = idx
                .iter()
                .zip(dims)
                .map(|(&i, &n)| -1.0 + (i as f64 + 0.5) * 2.0 / n as f64)
                .collect();
            values.push(f(&x));
            for a in (0..dims.len()).rev() {
                idx[a] += 1;
                if idx[a] < dims[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(CubeField { dims: dims.to_vec(), values })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    fn cell_volume(&self) -> f64 {
        self.dims.iter().map(|&n| 2.0 / n as f64).product()
    }

    fn spacing(&self, axis: usize) -> f64 {
        2.0 / self.dims[axis] as f64
    }

    fn strides(&self) -> Vec<usize> {
        let d = self.dims.len();
        let mut s = vec![1usize; d];
        for a in (0..d.saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.dims[a + 1];
        }
        s
    }
}

/// The two sides of the isoperimetric inequality for one field.
#[derive(Debug, Clone, Copy)]
pub struct IsoperimetricMeasurement {
    /// `|A| = |{ω <= 0}|`
    pub measure_low: f64,
    /// `|B| = |{ω >= 1}|`
    pub measure_high: f64,
    /// `|C| = |{0 < ω < 1}|`
    pub measure_mid: f64,
    pub grad_l2: f64,
    /// `|A||B|`
    pub lhs: f64,
    /// `‖∇ω‖_{L²} |C|^{1/2}`
    pub rhs: f64,
    pub ratio: f64,
}

/// Measure `|A||B|` against `‖∇ω‖_{L²} |C|^{1/2}` by cell counting and
/// forward differences.
pub fn isoperimetric_check(omega: &CubeField) -> IsoperimetricMeasurement {
    let cv = omega.cell_volume();
    let mut low = 0usize;
    let mut high = 0usize;
    for &v in &omega.values {
        if v <= 0.0 {
            low += 1;
        } else if v >= 1.0 {
            high += 1;
        }
    }
    let total = omega.values.len();
    let measure_low = low as f64 * cv;
    let measure_high = high as f64 * cv;
    let measure_mid = (total - low - high) as f64 * cv;

    let strides = omega.strides();
    let mut grad_sq = 0.0;
    for (a, &stride) in strides.iter().enumerate() {
        let h = omega.spacing(a);
        let na = omega.dims[a];
        for (i, &v) in omega.values.iter().enumerate() {
            let ia = (i / stride) % na;
            if ia + 1 < na {
                let d = (omega.values[i + stride] - v) / h;
                grad_sq += d * d;
            }
        }
    }
    let grad_l2 = (grad_sq * cv).sqrt();
    let lhs = measure_low * measure_high;
    let rhs = grad_l2 * measure_mid.sqrt();
    let ratio = if lhs == 0.0 {
        0.0
    } else if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    };
    IsoperimetricMeasurement {
        measure_low,
        measure_high,
        measure_mid,
        grad_l2,
        lhs,
        rhs,
        ratio,
    }
}

/// Deterministic corpus of continuum test profiles (smooth trigonometric
/// fields, ramps, radial bumps), resolution-independent by construction.
pub fn corpus_profile(ndim: usize, sample: usize, seed: u64) -> impl Fn(&[f64]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (sample as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    match sample % 3 {
        0 => {
            // random low-order trigonometric polynomial, renormalized to
            // span roughly [-0.6, 1.6]
            let mut coeffs = Vec::new();
            for _ in 0..6 {
                let amp: f64 = rng.gen_range(-1.0..1.0);
                let freq: Vec<f64> =
                    (0..ndim).map(|_| rng.gen_range(0.5..2.5) * PI / 2.0).collect();
                let phase: f64 = rng.gen_range(0.0..PI * 2.0);
                coeffs.push((amp, freq, phase));
            }
            let offset: f64 = rng.gen_range(0.3..0.7);
            Box::new(move |x: &[f64]| {
                let mut v = 0.0;
                for (amp, freq, phase) in &coeffs {
                    let arg: f64 =
                        x.iter().zip(freq).map(|(xi, fi)| xi * fi).sum::<f64>() + phase;
                    v += amp * arg.cos();
                }
                v * 0.45 + offset
            }) as Box<dyn Fn(&[f64]) -> f64>
        }
        1 => {
            // axis-aligned ramp with random axis, offset and width
            let axis = rng.gen_range(0..ndim);
            let offset: f64 = rng.gen_range(-0.5..0.3);
            let width: f64 = rng.gen_range(0.25..0.9);
            Box::new(move |x: &[f64]| ((x[axis] - offset) / width).clamp(0.0, 1.0))
        }
        _ => {
            // radial bump above a negative floor
            let center: Vec<f64> = (0..ndim).map(|_| rng.gen_range(-0.4..0.4)).collect();
            let radius: f64 = rng.gen_range(0.35..0.7);
            let height: f64 = rng.gen_range(1.1..1.6);
            Box::new(move |x: &[f64]| {
                let r2: f64 =
                    x.iter().zip(&center).map(|(xi, ci)| (xi - ci) * (xi - ci)).sum();
                let s = (r2 / (radius * radius)).min(4.0);
                height * (-s).exp() - 0.1
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusReport {
    pub max_ratio: f64,
    pub samples: usize,
    pub ratios: Vec<f64>,
}

/// Maximum isoperimetric ratio over a seeded corpus.
pub fn isoperimetric_corpus(
    ndim: usize,
    resolution: usize,
    samples: usize,
    seed: u64,
) -> Result<CorpusReport> {
    let dims = vec![resolution; ndim];
    let ratios: Vec<f64> = par::map_collect(samples, |s| {
        let profile = corpus_profile(ndim, s, seed);
        let field = CubeField::from_fn(&dims, profile).expect("valid dims");
        isoperimetric_check(&field).ratio
    });
    let max_ratio = ratios.iter().fold(0.0f64, |m, &r| m.max(r));
    Ok(CorpusReport { max_ratio, samples, ratios })
}
