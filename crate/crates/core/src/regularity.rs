//! Oscillation over (frame-shifted) parabolic cylinders, the drift-corrected
//! moving frame, the dyadic renormalization sequence, and Hölder-exponent
//! estimation from the log-log decay of oscillations.

use crate::error::{Error, Result};
use crate::field::PhysicalField;
use crate::solver::Trajectory;

/// Space-time box `[t − depth, t] × Π [x_i − r, x_i + r]`.
#[derive(Debug, Clone)]
pub struct ParabolicCylinder {
    pub time: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    pub depth: f64,
}

impl ParabolicCylinder {
    /// Standard cylinder with temporal depth equal to the radius.
    pub fn new(time: f64, center: &[f64], radius: f64) -> Self {
        ParabolicCylinder { time, center: center.to_vec(), radius, depth: radius }
    }

    pub fn with_depth(mut self, depth: f64) -> Self {
        self.depth = depth;
        self
    }
}

/// Piecewise-linear drift-corrected frame `x₀(s)`, starting at the origin
/// offset at the first sampled time.
#[derive(Debug, Clone)]
pub struct FramePath {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
}

impl FramePath {
    /// The identity frame on the given sample times.
    pub fn still(times: Vec<f64>, ndim: usize) -> Self {
        let positions = vec![vec![0.0; ndim]; times.len()];
        FramePath { times, positions }
    }

    /// Position by linear interpolation, clamped to the sampled range.
    pub fn position_at(&self, t: f64) -> Vec<f64> {
        if t <= self.times[0] {
            return self.positions[0].clone();
        }
        if t >= *self.times.last().unwrap() {
            return self.positions.last().unwrap().clone();
        }
        let i = self.times.partition_point(|&ti| ti <= t).min(self.times.len() - 1);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        self.positions[i - 1]
            .iter()
            .zip(&self.positions[i])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    /// Largest per-axis displacement relative to the anchor time.
    pub fn max_shift(&self, anchor: f64, t_from: f64, t_to: f64) -> f64 {
        let base = self.position_at(anchor);
        let mut worst = 0.0f64;
        for (i, &t) in self.times.iter().enumerate() {
            if t < t_from - 1e-12 || t > t_to + 1e-12 {
                continue;
            }
            for (p, b) in self.positions[i].iter().zip(&base) {
                worst = worst.max((p - b).abs());
            }
        }
        worst
    }
}

/// `sup − inf` of θ over the grid points and snapshot times inside the
/// cylinder, optionally shifted along a frame path. The grid must resolve
/// the radius by at least 4 cells, and the time window must intersect the
/// stored snapshots.
pub fn oscillation(
    traj: &Trajectory,
    cyl: &ParabolicCylinder,
    frame: Option<&FramePath>,
) -> Result<f64> {
    let grid = &traj.grid;
    let ndim = grid.ndim();
    if cyl.center.len() != ndim {
        return Err(Error::InvalidArgument("cylinder center dimension mismatch".into()));
    }
    let max_dx = (0..ndim).map(|a| grid.spacing(a)).fold(0.0f64, f64::max);
    if cyl.radius < 4.0 * max_dx {
        return Err(Error::InvalidArgument(format!(
            "radius {} under-resolved: need >= 4 cells ({})",
            cyl.radius,
            4.0 * max_dx
        )));
    }
    let t_from = cyl.time - cyl.depth;
    let times = traj.times();
    if cyl.time < times[0] - 1e-12 || t_from > *times.last().unwrap() + 1e-12 {
        return Err(Error::InvalidArgument("cylinder time window outside the trajectory".into()));
    }
    let anchor_shift: Vec<f64> = match frame {
        Some(f) => f.position_at(cyl.time),
        None => vec![0.0; ndim],
    };

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut seen = false;
    for (si, s) in traj.snapshots.iter().enumerate() {
        let t = times[si];
        if t < t_from - 1e-12 || t > cyl.time + 1e-12 {
            continue;
        }
        seen = true;
        let center: Vec<f64> = match frame {
            Some(f) => {
                let p = f.position_at(t);
                cyl.center
                    .iter()
                    .zip(p.iter().zip(&anchor_shift))
                    .map(|(c, (pt, a))| c + (pt - a))
                    .collect()
            }
            None => cyl.center.clone(),
        };
        for i in 0..grid.len() {
            let x = grid.coords(i);
            let mut inside = true;
            for a in 0..ndim {
                let l = grid.lens()[a];
                let mut d = (x[a] - center[a]).rem_euclid(l);
                if d > l / 2.0 {
                    d = l - d;
                }
                if d > cyl.radius + 1e-12 {
                    inside = false;
                    break;
                }
            }
            if inside {
                let v = s.values()[i];
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if !seen {
        return Err(Error::InvalidArgument("no snapshots inside the cylinder window".into()));
    }
    Ok(hi - lo)
}

/// Mean of a velocity field over the periodic ball `|y − c| <= ρ`.
fn ball_average(v: &[PhysicalField], center: &[f64], rho: f64) -> Vec<f64> {
    let grid = v[0].grid();
    let ndim = grid.ndim();
    let mut sums = vec![0.0f64; ndim];
    let mut count = 0usize;
    for i in 0..grid.len() {
        let x = grid.coords(i);
        let mut dist2 = 0.0;
        for a in 0..ndim {
            let l = grid.lens()[a];
            let mut d = (x[a] - center[a]).rem_euclid(l);
            if d > l / 2.0 {
                d = l - d;
            }
            dist2 += d * d;
        }
        if dist2 <= rho * rho {
            for a in 0..ndim {
                sums[a] += v[a].values()[i];
            }
            count += 1;
        }
    }
    if count == 0 {
        return vec![0.0; ndim];
    }
    sums.iter().map(|s| s / count as f64).collect()
}

/// Integrate `ẋ₀(s) = ball-average of v around x₀(s)` over the snapshot
/// times with midpoint RK2, starting from the zero offset. The default ball
/// radius is a quarter of the smallest domain extent.
pub fn moving_frame(traj: &Trajectory, ball_radius: Option<f64>) -> Result<FramePath> {
    let grid = &traj.grid;
    let ndim = grid.ndim();
    let rho = ball_radius
        .unwrap_or_else(|| grid.lens().iter().fold(f64::INFINITY, |m, &l| m.min(l)) / 4.0);
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument("ball radius must be positive".into()));
    }
    let times = traj.times();
    let velocities: Vec<Vec<PhysicalField>> =
        (0..traj.snapshots.len()).map(|i| traj.velocity(i)).collect::<Result<_>>()?;

    let mut positions = vec![vec![0.0f64; ndim]];
    for i in 0..times.len() - 1 {
        let h = times[i + 1] - times[i];
        let x = positions[i].clone();
        let k1 = ball_average(&velocities[i], &x, rho);
        let x_mid: Vec<f64> = x.iter().zip(&k1).map(|(xi, k)| xi + 0.5 * h * k).collect();
        // velocity at the midpoint time by linear interpolation of fields
        let v_mid: Vec<PhysicalField> = (0..ndim)
            .map(|a| velocities[i][a].zip_with(&velocities[i + 1][a], |u0, u1| 0.5 * (u0 + u1)))
            .collect::<Result<_>>()?;
        let k2 = ball_average(&v_mid, &x_mid, rho);
        positions.push(x.iter().zip(&k2).map(|(xi, k)| xi + h * k).collect());
    }
    Ok(FramePath { times, positions })
}

/// Renormalized fields `θ̄_k = 2(θ̄_{k-1} − 1)`, `θ̄₀ = θ`, for k = 1..K.
/// Requires `θ <= 2`; matches the closed form `θ̄_k = 2^k(θ − 2) + 2`.
pub fn renormalization_sequence(theta: &PhysicalField, k_max: usize) -> Result<Vec<PhysicalField>> {
    if theta.max() > 2.0 {
        return Err(Error::InvalidArgument(format!(
            "renormalization needs θ <= 2, max = {}",
            theta.max()
        )));
    }
    let mut out = Vec::with_capacity(k_max);
    let mut current = theta.clone();
    for _ in 0..k_max {
        current = current.map(|v| 2.0 * (v - 1.0));
        out.push(current.clone());
    }
    Ok(out)
}

/// Closed form `θ̄_k = 2^k (θ − 2) + 2` of the renormalization sequence.
pub fn renormalization_closed_form(theta: &PhysicalField, k: u32) -> PhysicalField {
    let scale = 2f64.powi(k as i32);
    theta.map(|v| scale * (v - 2.0) + 2.0)
}

/// Result of a Hölder-exponent fit.
#[derive(Debug, Clone, Copy)]
pub struct HolderFit {
    /// Least-squares slope of `log osc` against `log r`, clipped to
    /// `[0, 1.5]`; `+∞` when some oscillation vanished (flat field,
    /// smoother than the tested scales).
    pub alpha: f64,
    pub r_squared: f64,
    /// Set when the raw slope fell outside `[0, 1.5]`.
    pub clipped: bool,
}

/// Fit the local Hölder exponent at `(t, x)` from oscillations over a
/// ladder of cylinder radii (at least 5, spanning at least a decade),
/// optionally in a moving frame.
pub fn holder_exponent_fit(
    traj: &Trajectory,
    time: f64,
    center: &[f64],
    radii: &[f64],
    frame: Option<&FramePath>,
) -> Result<HolderFit> {
    if radii.len() < 5 {
        return Err(Error::InvalidArgument("need at least 5 radii".into()));
    }
    let (lo, hi) = radii.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &r| (l.min(r), h.max(r)));
    if hi / lo < 10.0 {
        return Err(Error::InvalidArgument("radii must span at least a decade".into()));
    }
    let mut pts = Vec::with_capacity(radii.len());
    for &r in radii {
        let osc = oscillation(traj, &ParabolicCylinder::new(time, center, r), frame)?;
        if osc <= 0.0 {
            return Ok(HolderFit { alpha: f64::INFINITY, r_squared: 1.0, clipped: false });
        }
        pts.push((r.ln(), osc.ln()));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let mean_y = sy / n;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let clipped = !(0.0..=1.5).contains(&slope);
    Ok(HolderFit { alpha: slope.clamp(0.0, 1.5), r_squared, clipped })
}

/// A single-snapshot trajectory around a static profile, for fits on
/// synthetic fields.
pub fn static_trajectory(theta: PhysicalField) -> Trajectory {
    let grid = theta.grid().clone();
    Trajectory {
        grid,
        beta: 1.0,
        kappa: 0.0,
        drift: crate::solver::DriftMode::Zero,
        snapshot_steps: vec![0],
        scalars: Vec::new(),
        snapshots: vec![theta],
        aborted: None,
    }
}

/// Periodic distance from `x` to `c` on the torus.
pub fn torus_distance(grid: &crate::grid::Grid, x: &[f64], c: &[f64]) -> f64 {
    let mut d2 = 0.0;
    for a in 0..grid.ndim() {
        let l = grid.lens()[a];
        let mut d = (x[a] - c[a]).rem_euclid(l);
        if d > l / 2.0 {
            d = l - d;
        }
        d2 += d * d;
    }
    d2.sqrt()
}

/// Radius ladder `4 dx · 2^i` in exact grid multiples, largest first
/// removed if it exceeds a quarter of the domain.
pub fn dyadic_radius_ladder(grid: &crate::grid::Grid, count: usize) -> Vec<f64> {
    let dx = grid.spacing(0);
    let cap = grid.lens().iter().fold(f64::INFINITY, |m, &l| m.min(l)) / 4.0;
    (0..count)
        .map(|i| 4.0 * dx * 2f64.powi(i as i32))
        .filter(|&r| r <= cap)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::initial;
    use crate::solver::{DriftMode, Solver, SolverConfig, TimeStep};
    use std::f64::consts::PI;

    fn sqg_run(n: usize, t_end: f64, steps: usize) -> Trajectory {
        let cfg = SolverConfig {
            grid: Grid::square(n, 2).unwrap(),
            beta: 1.0,
            kappa: 1.0,
            dt: TimeStep::Fixed(t_end / steps as f64),
            t_end,
            initial: initial::InitialCondition::RandomBand {
                k_min: 1,
                k_max: 4,
                amplitude: 1.0,
                seed: 13,
            },
            drift: DriftMode::Sqg,
            dealias: true,
            snapshot_stride: 1,
        };
        Solver::new(cfg).unwrap().run().unwrap()
    }

    #[test]
    fn oscillation_basics() {
        let g = Grid::square(64, 2).unwrap();
        let c = PhysicalField::constant(g.clone(), 3.0).unwrap();
        let traj = static_trajectory(c);
        let cyl = ParabolicCylinder::new(0.0, &[PI, PI], 0.5);
        assert_eq!(oscillation(&traj, &cyl, None).unwrap(), 0.0);

        // linear patch: osc over radius r equals 2r up to grid resolution
        let lin = PhysicalField::from_fn(g.clone(), |x| x[0] - PI).unwrap();
        let traj = static_trajectory(lin);
        let r = 16.0 * g.spacing(0);
        let osc = oscillation(&traj, &ParabolicCylinder::new(0.0, &[PI, PI], r), None).unwrap();
        assert!((osc - 2.0 * r).abs() <= 2.0 * g.spacing(0) + 1e-12, "osc {osc} vs {}", 2.0 * r);

        // monotone in radius by set inclusion
        let band = initial::random_band(&g, 1, 8, 1.0, 2).unwrap();
        let traj = static_trajectory(band);
        let small =
            oscillation(&traj, &ParabolicCylinder::new(0.0, &[PI, PI], r / 2.0), None).unwrap();
        let large = oscillation(&traj, &ParabolicCylinder::new(0.0, &[PI, PI], r), None).unwrap();
        assert!(small <= large);

        // under-resolved radius and empty window are rejected
        assert!(oscillation(&traj, &ParabolicCylinder::new(0.0, &[PI, PI], g.spacing(0)), None)
            .is_err());
        assert!(oscillation(&traj, &ParabolicCylinder::new(5.0, &[PI, PI], r), None).is_err());
    }

    #[test]
    fn moving_frame_zero_and_constant_drift() {
        let mut traj = sqg_run(32, 0.2, 16);
        traj.drift = DriftMode::Zero;
        let frame = moving_frame(&traj, None).unwrap();
        for p in &frame.positions {
            assert!(p.iter().all(|&c| c == 0.0));
        }

        let g = traj.grid.clone();
        let cdrift = vec![
            PhysicalField::constant(g.clone(), 0.7).unwrap(),
            PhysicalField::constant(g.clone(), -0.3).unwrap(),
        ];
        traj.drift = DriftMode::Prescribed(cdrift);
        let frame = moving_frame(&traj, None).unwrap();
        let last = frame.positions.last().unwrap();
        assert!((last[0] - 0.7 * 0.2).abs() < 1e-12);
        assert!((last[1] + 0.3 * 0.2).abs() < 1e-12);
    }

    #[test]
    fn moving_frame_defining_property() {
        let traj = sqg_run(32, 0.2, 16);
        let rho = traj.grid.lens()[0] / 4.0;
        let frame = moving_frame(&traj, Some(rho)).unwrap();
        // (x₀(t_{i+1}) − x₀(t_i)) / h matches the ball average of v at the
        // step midpoint to integrator order.
        let mut worst = 0.0f64;
        for i in 0..frame.times.len() - 1 {
            let h = frame.times[i + 1] - frame.times[i];
            let vel: Vec<PhysicalField> = (0..2)
                .map(|a| {
                    traj.velocity(i).unwrap()[a]
                        .zip_with(&traj.velocity(i + 1).unwrap()[a], |u0, u1| 0.5 * (u0 + u1))
                        .unwrap()
                })
                .collect();
            let xm: Vec<f64> = frame.positions[i]
                .iter()
                .zip(&frame.positions[i + 1])
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            let vbar = ball_average(&vel, &xm, rho);
            for a in 0..2 {
                let rate = (frame.positions[i + 1][a] - frame.positions[i][a]) / h;
                worst = worst.max((rate - vbar[a]).abs());
            }
        }
        assert!(worst < 5e-3, "frame defining-property residual {worst:.3e}");
    }

    #[test]
    fn frame_shifted_oscillation_is_dominated() {
        let traj = sqg_run(32, 0.2, 16);
        let frame = moving_frame(&traj, None).unwrap();
        let r = 8.0 * traj.grid.spacing(0);
        let t = 0.2;
        let center = [PI, PI];
        let shifted =
            oscillation(&traj, &ParabolicCylinder::new(t, &center, r), Some(&frame)).unwrap();
        let shift = frame.max_shift(t, t - r, t);
        let enlarged =
            oscillation(&traj, &ParabolicCylinder::new(t, &center, r + shift), None).unwrap();
        assert!(shifted <= enlarged + 1e-14, "{shifted} > {enlarged}");
    }

    #[test]
    fn renormalization_routes_agree() {
        let g = Grid::square(32, 2).unwrap();
        let theta = initial::random_band(&g, 1, 6, 0.8, 4).unwrap();
        assert!(theta.max() <= 2.0);
        let seq = renormalization_sequence(&theta, 6).unwrap();
        for (k, field) in seq.iter().enumerate() {
            let closed = renormalization_closed_form(&theta, k as u32 + 1);
            assert!(
                field.sub(&closed).unwrap().linf_norm() <= 1e-12 * 2f64.powi(k as i32 + 1),
                "k = {}",
                k + 1
            );
        }
        // fixed point θ ≡ 2 and the explicit θ ≡ 0 image
        let two = PhysicalField::constant(g.clone(), 2.0).unwrap();
        for f in renormalization_sequence(&two, 4).unwrap() {
            assert!(f.sub(&two).unwrap().linf_norm() == 0.0);
        }
        let zero = PhysicalField::zeros(g.clone());
        let seq = renormalization_sequence(&zero, 3).unwrap();
        for (k, f) in seq.iter().enumerate() {
            let expect = 2.0 - 2f64.powi(k as i32 + 2);
            assert!((f.values()[0] - expect).abs() < 1e-12);
        }
        // hypothesis violated
        let big = PhysicalField::constant(g, 2.5).unwrap();
        assert!(renormalization_sequence(&big, 2).is_err());
    }

    #[test]
    fn holder_fit_calibration_profiles() {
        let g = Grid::square(256, 2).unwrap();
        let center = [PI, PI];
        let radii = dyadic_radius_ladder(&g, 5);
        assert!(radii.len() >= 5);

        let sqrt_profile = PhysicalField::from_fn(g.clone(), |x| {
            torus_distance(&Grid::square(256, 2).unwrap(), x, &[PI, PI]).sqrt()
        })
        .unwrap();
        let fit =
            holder_exponent_fit(&static_trajectory(sqrt_profile), 0.0, &center, &radii, None)
                .unwrap();
        assert!((fit.alpha - 0.5).abs() <= 0.05, "sqrt profile alpha {}", fit.alpha);
        assert!(fit.r_squared > 0.99);

        let linear = PhysicalField::from_fn(g.clone(), |x| x[0] - PI).unwrap();
        let fit = holder_exponent_fit(&static_trajectory(linear), 0.0, &center, &radii, None)
            .unwrap();
        assert!((fit.alpha - 1.0).abs() <= 0.05, "linear profile alpha {}", fit.alpha);

        // flat field: smoother than tested
        let flat = PhysicalField::constant(g.clone(), 1.0).unwrap();
        let fit =
            holder_exponent_fit(&static_trajectory(flat), 0.0, &center, &radii, None).unwrap();
        assert!(fit.alpha.is_infinite());

        // smooth band-limited field: locally Lipschitz or better
        let smooth = initial::random_band(&g, 1, 3, 1.0, 8).unwrap();
        let fit =
            holder_exponent_fit(&static_trajectory(smooth), 0.0, &center, &radii, None).unwrap();
        assert!(fit.alpha >= 0.9 || fit.alpha.is_infinite(), "smooth alpha {}", fit.alpha);
    }

    #[test]
    fn holder_fit_input_validation() {
        let g = Grid::square(64, 2).unwrap();
        let traj = static_trajectory(initial::random_band(&g, 1, 4, 1.0, 1).unwrap());
        let dx = g.spacing(0);
        assert!(holder_exponent_fit(&traj, 0.0, &[PI, PI], &[4.0 * dx; 4], None).is_err());
        let narrow = [4.0 * dx, 5.0 * dx, 6.0 * dx, 7.0 * dx, 8.0 * dx];
        assert!(holder_exponent_fit(&traj, 0.0, &[PI, PI], &narrow, None).is_err());
    }
}
