//! Time integration of `∂_t θ + v·∇θ = −κ Λ^β θ` on the periodic torus.
//!
//! The drift is either the SQG closure `u = (−R₂θ, R₁θ)`, a prescribed
//! static divergence-free field, or zero. The stepper is an
//! integrating-factor RK4: the dissipative factor `e^{−κ|k'|^β dt}` is
//! applied exactly per mode, RK4 handles the transport term, and the
//! quadratic term is formed in physical space under the 2/3 dealiasing rule
//! so transport is skew-symmetric to roundoff.

use crate::error::{Error, Result};
use crate::field::{PhysicalField, SpectralField};
use crate::fft;
use crate::grid::Grid;
use crate::initial::InitialCondition;
use crate::quad;
use crate::spectral;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Divergence tolerance accepted for a prescribed drift.
pub const DIV_TOL: f64 = 1e-10;
/// CFL safety factor for automatic step selection.
pub const C_CFL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeStep {
    Fixed(f64),
    Auto,
}

/// How the advecting velocity is obtained.
#[derive(Debug, Clone)]
pub enum DriftMode {
    /// 2D SQG closure `u = (−R₂θ, R₁θ)`.
    Sqg,
    /// No advection: pure fractional diffusion.
    Zero,
    /// Static prescribed divergence-free velocity.
    Prescribed(Vec<PhysicalField>),
}

impl DriftMode {
    pub fn name(&self) -> &'static str {
        match self {
            DriftMode::Sqg => "sqg",
            DriftMode::Zero => "zero",
            DriftMode::Prescribed(_) => "prescribed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub grid: Grid,
    /// Dissipation exponent, in (0, 2].
    pub beta: f64,
    /// Dissipation strength, >= 0.
    pub kappa: f64,
    pub dt: TimeStep,
    pub t_end: f64,
    pub initial: InitialCondition,
    pub drift: DriftMode,
    /// Apply the 2/3 rule to the quadratic term (default true).
    pub dealias: bool,
    /// Store every `snapshot_stride`-th step (plus first and last).
    pub snapshot_stride: usize,
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 2.0) {
            return Err(Error::InvalidArgument(format!(
                "beta must lie in (0, 2], got {}",
                self.beta
            )));
        }
        if !(self.kappa >= 0.0) {
            return Err(Error::InvalidArgument("kappa must be >= 0".into()));
        }
        if let TimeStep::Fixed(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::InvalidArgument("dt must be positive".into()));
            }
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidArgument("t_end must be >= 0".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidArgument("snapshot_stride must be >= 1".into()));
        }
        if matches!(self.drift, DriftMode::Sqg) && self.grid.ndim() != 2 {
            return Err(Error::InvalidArgument("SQG drift needs a 2D grid".into()));
        }
        Ok(())
    }
}

/// Per-step scalar diagnostics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StepScalars {
    pub time: f64,
    pub l2: f64,
    pub linf: f64,
    pub hhalf: f64,
    pub umax: f64,
    /// Trapezoid residual of the energy law across the step ending here.
    pub energy_residual: f64,
    /// `‖Λ^{β/2} θ‖²`, the dissipation integrand of the energy law.
    pub dissipation: f64,
}

/// Time-ordered snapshots plus per-step scalars of one run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    pub beta: f64,
    pub kappa: f64,
    pub drift: DriftMode,
    pub snapshots: Vec<PhysicalField>,
    pub snapshot_steps: Vec<usize>,
    pub scalars: Vec<StepScalars>,
    /// Set when the run hit non-finite values; snapshots end at the last
    /// finite state.
    pub aborted: Option<String>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time_tag).collect()
    }

    pub fn initial(&self) -> &PhysicalField {
        &self.snapshots[0]
    }

    pub fn final_state(&self) -> &PhysicalField {
        self.snapshots.last().unwrap()
    }

    /// Index of the snapshot at time `t`, if stored.
    pub fn snapshot_at(&self, t: f64) -> Option<usize> {
        self.snapshots
            .iter()
            .position(|s| (s.time_tag - t).abs() <= 1e-10 * t.abs().max(1.0))
    }

    /// Velocity for snapshot `i`, recomputed for the SQG closure.
    pub fn velocity(&self, i: usize) -> Result<Vec<PhysicalField>> {
        match &self.drift {
            DriftMode::Zero => {
                Ok(vec![PhysicalField::zeros(self.grid.clone()); self.grid.ndim()])
            }
            DriftMode::Prescribed(v) => Ok(v.clone()),
            DriftMode::Sqg => velocity_from_theta(&self.snapshots[i]),
        }
    }

    /// Residual of `‖θ(t_end)‖² − ‖θ(0)‖² + 2κ ∫ ‖Λ^{β/2}θ‖² dt` over the
    /// whole run, with fourth-order time quadrature on uniform steps.
    pub fn energy_law_residual(&self) -> f64 {
        let times: Vec<f64> = self.scalars.iter().map(|s| s.time).collect();
        let diss: Vec<f64> = self.scalars.iter().map(|s| s.dissipation).collect();
        let e0 = self.scalars.first().map(|s| s.l2 * s.l2).unwrap_or(0.0);
        let e1 = self.scalars.last().map(|s| s.l2 * s.l2).unwrap_or(0.0);
        e1 - e0 + 2.0 * self.kappa * quad::integrate_series(&times, &diss)
    }
}

/// The SQG closure `u = (−R₂θ, R₁θ)` in spectral space.
pub fn sqg_velocity_spectral(theta_hat: &SpectralField) -> Result<Vec<SpectralField>> {
    if theta_hat.grid().ndim() != 2 {
        return Err(Error::InvalidArgument("SQG closure needs a 2D grid".into()));
    }
    let u1 = spectral::riesz_transform(theta_hat, 1)?.scaled(-1.0);
    let u2 = spectral::riesz_transform(theta_hat, 0)?;
    Ok(vec![u1, u2])
}

/// The SQG closure applied to a mean-zero physical field.
pub fn velocity_from_theta(theta: &PhysicalField) -> Result<Vec<PhysicalField>> {
    let scale = theta.linf_norm().max(1.0);
    if theta.mean().abs() > 1e-10 * scale {
        return Err(Error::InvalidArgument(format!(
            "SQG drift needs mean-zero data, mean = {:.3e}",
            theta.mean()
        )));
    }
    let hat = fft::forward(theta)?;
    sqg_velocity_spectral(&hat)?.iter().map(fft::inverse).collect()
}

/// Velocity from Riesz-type multipliers `û_j = i p_j(k') / |k'| θ̂` with
/// user-supplied odd symbols `p_j`; the SQG closure is `p = (−k₂, k₁)`.
/// Oddness and the divergence-free condition `Σ_j k_j p_j(k) = 0` are
/// checked on every resolved wavevector.
pub fn velocity_from_riesz_multipliers<F>(
    theta_hat: &SpectralField,
    symbols: &[F],
) -> Result<Vec<SpectralField>>
where
    F: Fn(&[f64]) -> f64,
{
    let grid = theta_hat.grid().clone();
    let ndim = grid.ndim();
    if symbols.len() != ndim {
        return Err(Error::InvalidArgument("one symbol per axis required".into()));
    }
    let tables: Vec<Vec<f64>> = (0..ndim).map(|a| grid.wavenumbers_phys(a)).collect();
    let mut out = vec![SpectralField::zeros(grid.clone()); ndim];
    for i in 0..grid.len() {
        let idx = grid.decompose(i);
        if (0..ndim).any(|a| idx[a] == grid.dims()[a] / 2) {
            continue; // unpaired Nyquist modes stay zero under odd symbols
        }
        let k: Vec<f64> = (0..ndim).map(|a| tables[a][idx[a]]).collect();
        let kn = k.iter().map(|v| v * v).sum::<f64>().sqrt();
        if kn == 0.0 {
            continue;
        }
        let neg: Vec<f64> = k.iter().map(|v| -v).collect();
        let mut div = 0.0;
        for (j, p) in symbols.iter().enumerate() {
            let pj = p(&k);
            if (p(&neg) + pj).abs() > 1e-12 * (1.0 + pj.abs()) {
                return Err(Error::InvalidArgument(format!(
                    "symbol {j} is not odd at k = {k:?}"
                )));
            }
            div += k[j] * pj;
            let m = pj / kn;
            let c = theta_hat.coeffs()[i];
            out[j].coeffs_mut()[i] = Complex64::new(-c.im * m, c.re * m);
        }
        if div.abs() > 1e-10 * (1.0 + kn * kn) {
            return Err(Error::NotDivergenceFree { residual: div.abs() });
        }
    }
    Ok(out)
}

/// `−v·∇θ − κ Λ^β θ` with the product dealiased; rejects drifts whose
/// divergence exceeds [`DIV_TOL`] (scaled by `max |v|`).
pub fn rhs(
    theta: &PhysicalField,
    v: &[PhysicalField],
    beta: f64,
    kappa: f64,
) -> Result<PhysicalField> {
    let grid = theta.grid().clone();
    let vmax = v.iter().map(|c| c.linf_norm()).fold(0.0f64, f64::max);
    let v_hat: Vec<SpectralField> = v.iter().map(fft::forward).collect::<Result<_>>()?;
    let div = fft::inverse(&spectral::divergence_spectral(&v_hat)?)?;
    let residual = div.linf_norm();
    if residual > DIV_TOL * (1.0 + vmax) {
        return Err(Error::NotDivergenceFree { residual });
    }
    let theta_hat = fft::forward(theta)?;
    let transport = transport_term(&theta_hat, &v_hat, true)?;
    let linear = if kappa > 0.0 {
        spectral::fractional_laplacian(&theta_hat, beta)?.scaled(-kappa)
    } else {
        SpectralField::zeros(grid)
    };
    fft::inverse(&transport.add(&linear)?)
}

/// `−dealias(v·∇θ)` in spectral space.
fn transport_term(
    theta_hat: &SpectralField,
    v_hat: &[SpectralField],
    dealias: bool,
) -> Result<SpectralField> {
    let grid = theta_hat.grid().clone();
    let n = grid.len();
    let mut prod = vec![0.0f64; n];
    for (a, vh) in v_hat.iter().enumerate() {
        let va = fft::inverse(vh)?;
        let da = fft::inverse(&spectral::derivative(theta_hat, a)?)?;
        for i in 0..n {
            prod[i] += va.values()[i] * da.values()[i];
        }
    }
    let w = fft::forward(&PhysicalField::new(grid, prod)?)?;
    let w = if dealias { spectral::dealias(&w) } else { w };
    Ok(w.scaled(-1.0))
}

/// Mutable integration state: spectral density and current time.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub theta_hat: SpectralField,
    pub time: f64,
    pub step: usize,
}

/// Owns the per-run operator tables; `step` is the only mutator.
pub struct Solver {
    config: SolverConfig,
    /// `κ |k'|^β` per mode.
    damping: Vec<f64>,
    drift_hat: Option<Vec<SpectralField>>,
    /// Cached integrating factors for the last dt.
    factors: std::cell::RefCell<Option<(f64, Vec<f64>, Vec<f64>)>>,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let grid = config.grid.clone();
        let tables: Vec<Vec<f64>> = (0..grid.ndim()).map(|a| grid.wavenumbers_phys(a)).collect();
        let damping: Vec<f64> = (0..grid.len())
            .map(|i| {
                let idx = grid.decompose(i);
                let kn = (0..grid.ndim())
                    .map(|a| tables[a][idx[a]] * tables[a][idx[a]])
                    .sum::<f64>()
                    .sqrt();
                if kn == 0.0 {
                    0.0
                } else {
                    config.kappa * kn.powf(config.beta)
                }
            })
            .collect();
        let drift_hat = match &config.drift {
            DriftMode::Prescribed(v) => {
                if v.len() != grid.ndim() {
                    return Err(Error::InvalidArgument(
                        "prescribed drift needs one component per axis".into(),
                    ));
                }
                let hats: Vec<SpectralField> = v
                    .iter()
                    .map(|c| Ok(spectral::dealias(&fft::forward(c)?)))
                    .collect::<Result<_>>()?;
                let div = fft::inverse(&spectral::divergence_spectral(&hats)?)?;
                let vmax = v.iter().map(|c| c.linf_norm()).fold(0.0f64, f64::max);
                if div.linf_norm() > DIV_TOL * (1.0 + vmax) {
                    return Err(Error::NotDivergenceFree { residual: div.linf_norm() });
                }
                Some(hats)
            }
            _ => None,
        };
        Ok(Solver { config, damping, drift_hat, factors: std::cell::RefCell::new(None) })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// Initial state: generated data, projected to mean zero, dealiased.
    pub fn initial_state(&self) -> Result<SolverState> {
        let theta0 = self.config.initial.generate(&self.config.grid)?;
        let mut hat = fft::forward(&theta0)?;
        hat.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
        let hat = if self.config.dealias { spectral::dealias(&hat) } else { hat };
        Ok(SolverState { theta_hat: hat.with_time(0.0), time: 0.0, step: 0 })
    }

    fn velocity_hat(&self, theta_hat: &SpectralField) -> Result<Option<Vec<SpectralField>>> {
        match &self.config.drift {
            DriftMode::Zero => Ok(None),
            DriftMode::Prescribed(_) => Ok(self.drift_hat.clone()),
            DriftMode::Sqg => Ok(Some(sqg_velocity_spectral(theta_hat)?)),
        }
    }

    /// `max |u|` for the current state.
    pub fn umax(&self, theta_hat: &SpectralField) -> Result<f64> {
        match self.velocity_hat(theta_hat)? {
            None => Ok(0.0),
            Some(hats) => {
                let mut m: f64 = 0.0;
                for h in &hats {
                    m = m.max(fft::inverse(h)?.linf_norm());
                }
                Ok(m)
            }
        }
    }

    /// Largest stable step at the current state: `C_CFL · dx / max|u|`,
    /// additionally capped by `dx^β / κ` when transport is active. With zero
    /// drift the integrating factor is exact per mode, so no cap applies.
    pub fn dt_limit(&self, umax: f64) -> f64 {
        if matches!(self.config.drift, DriftMode::Zero) {
            return f64::INFINITY;
        }
        let dx = self.config.grid.min_spacing();
        let advective = if umax > 0.0 { C_CFL * dx / umax } else { f64::INFINITY };
        let stiff = if self.config.kappa > 0.0 {
            dx.powf(self.config.beta) / self.config.kappa
        } else {
            f64::INFINITY
        };
        advective.min(stiff)
    }

    fn factors(&self, dt: f64) -> (Vec<f64>, Vec<f64>) {
        let mut cache = self.factors.borrow_mut();
        if let Some((cached_dt, half, full)) = cache.as_ref() {
            if *cached_dt == dt {
                return (half.clone(), full.clone());
            }
        }
        let half: Vec<f64> = self.damping.iter().map(|&d| (-d * dt / 2.0).exp()).collect();
        let full: Vec<f64> = self.damping.iter().map(|&d| (-d * dt).exp()).collect();
        *cache = Some((dt, half.clone(), full.clone()));
        (half, full)
    }

    fn nonlinear(&self, theta_hat: &SpectralField) -> Result<Option<SpectralField>> {
        match self.velocity_hat(theta_hat)? {
            None => Ok(None),
            Some(v_hat) => Ok(Some(transport_term(theta_hat, &v_hat, self.config.dealias)?)),
        }
    }

    /// One integrating-factor RK4 step. Checks the CFL bound first and
    /// names `max |u|` and `dt` on violation.
    pub fn step(&self, state: &SolverState, dt: f64) -> Result<SolverState> {
        let umax = self.umax(&state.theta_hat)?;
        let dt_max = self.dt_limit(umax);
        if dt > dt_max * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, dt_max, umax });
        }
        let (half, full) = self.factors(dt);
        let apply = |f: &SpectralField, fac: &[f64]| -> SpectralField {
            let mut out = f.clone();
            for (c, &m) in out.coeffs_mut().iter_mut().zip(fac) {
                *c *= m;
            }
            out
        };
        let theta = &state.theta_hat;

        let next = match self.nonlinear(theta)? {
            None => apply(theta, &full),
            Some(k1) => {
                let stage2 = apply(&theta.add(&k1.scaled(dt / 2.0))?, &half);
                let k2 = self.nonlinear(&stage2)?.expect("drift active");
                let stage3 = apply(theta, &half).add(&k2.scaled(dt / 2.0))?;
                let k3 = self.nonlinear(&stage3)?.expect("drift active");
                let stage4 = apply(theta, &full).add(&apply(&k3, &half).scaled(dt))?;
                let k4 = self.nonlinear(&stage4)?.expect("drift active");

                let mut acc = apply(theta, &full);
                let t1 = apply(&k1, &full);
                let t23 = apply(&k2.add(&k3)?, &half);
                acc = acc.add(&t1.scaled(dt / 6.0))?;
                acc = acc.add(&t23.scaled(dt / 3.0))?;
                acc.add(&k4.scaled(dt / 6.0))?
            }
        };
        Ok(SolverState {
            theta_hat: next.with_time(state.time + dt),
            time: state.time + dt,
            step: state.step + 1,
        })
    }

    fn scalars(&self, state: &SolverState, prev: Option<&StepScalars>) -> Result<StepScalars> {
        let theta = fft::inverse(&state.theta_hat)?;
        let l2sq = state.theta_hat.l2_norm_sq();
        let dissipation = spectral::fractional_seminorm_sq(&state.theta_hat, self.config.beta / 2.0);
        let umax = self.umax(&state.theta_hat)?;
        let energy_residual = match prev {
            None => 0.0,
            Some(p) => {
                let dt = state.time - p.time;
                l2sq - p.l2 * p.l2
                    + 2.0 * self.config.kappa * dt * (dissipation + p.dissipation) / 2.0
            }
        };
        Ok(StepScalars {
            time: state.time,
            l2: l2sq.sqrt(),
            linf: theta.linf_norm(),
            hhalf: spectral::h_half_seminorm(&state.theta_hat),
            umax,
            energy_residual,
            dissipation,
        })
    }

    /// Integrate from the initial condition to `t_end`, recording snapshots
    /// and per-step scalars. Blow-up aborts the run and flags the partial
    /// trajectory instead of erroring.
    pub fn run(&self) -> Result<Trajectory> {
        let mut state = self.initial_state()?;
        let mut traj = Trajectory {
            grid: self.config.grid.clone(),
            beta: self.config.beta,
            kappa: self.config.kappa,
            drift: self.config.drift.clone(),
            snapshots: vec![fft::inverse(&state.theta_hat)?],
            snapshot_steps: vec![0],
            scalars: vec![self.scalars(&state, None)?],
            aborted: None,
        };
        let t_end = self.config.t_end;
        while state.time < t_end - 1e-13 * t_end.max(1.0) {
            let dt = match self.config.dt {
                TimeStep::Fixed(dt) => dt.min(t_end - state.time),
                TimeStep::Auto => {
                    let umax = self.umax(&state.theta_hat)?;
                    let cap = self.dt_limit(umax);
                    if cap.is_finite() {
                        cap.min(t_end - state.time)
                    } else {
                        t_end - state.time
                    }
                }
            };
            let next = self.step(&state, dt)?;
            if !next.theta_hat.is_finite() {
                traj.aborted = Some(format!("non-finite state at t = {:.6}", next.time));
                break;
            }
            state = next;
            let prev = *traj.scalars.last().unwrap();
            traj.scalars.push(self.scalars(&state, Some(&prev))?);
            let done = state.time >= t_end - 1e-13 * t_end.max(1.0);
            if state.step % self.config.snapshot_stride == 0 || done {
                traj.snapshots.push(fft::inverse(&state.theta_hat)?);
                traj.snapshot_steps.push(state.step);
            }
        }
        Ok(traj)
    }
}

/// `‖θ(t) − [P(t)∗θ₀ − ∫₀ᵗ ∇P(t−s)·(uθ)(s) ds]‖_∞`: the defect of the
/// Duhamel representation at a stored snapshot time, with trapezoid
/// quadrature over the stored snapshots. Only meaningful for `β = 1`.
pub fn duhamel_residual(traj: &Trajectory, t: f64) -> Result<f64> {
    if traj.beta != 1.0 {
        return Err(Error::InvalidArgument(
            "the Duhamel representation uses the Poisson kernel, so beta must be 1".into(),
        ));
    }
    let Some(target) = traj.snapshot_at(t) else {
        return Err(Error::InvalidArgument(format!(
            "t = {t} is not a stored snapshot time (end = {})",
            traj.final_state().time_tag
        )));
    };
    if target == 0 {
        return Ok(0.0);
    }
    let grid = traj.grid.clone();
    let kappa = traj.kappa;
    let tables: Vec<Vec<f64>> = (0..grid.ndim()).map(|a| grid.wavenumbers_phys(a)).collect();
    let knorm: Vec<f64> = (0..grid.len())
        .map(|i| {
            let idx = grid.decompose(i);
            (0..grid.ndim()).map(|a| tables[a][idx[a]] * tables[a][idx[a]]).sum::<f64>().sqrt()
        })
        .collect();

    // P(t) ∗ θ₀ per mode, with the run's kappa in the exponent.
    let theta0_hat = fft::forward(traj.initial())?;
    let mut repr = theta0_hat.clone();
    for (c, &kn) in repr.coeffs_mut().iter_mut().zip(&knorm) {
        *c *= (-kappa * kn * t).exp();
    }

    // Accumulate the forcing term with trapezoid weights in s.
    let times = traj.times();
    for i in 0..=target {
        let s = times[i];
        let w = if i == 0 || i == target {
            0.5 * if i == 0 { times[1] - times[0] } else { times[target] - times[target - 1] }
        } else {
            0.5 * (times[i + 1] - times[i - 1])
        };
        let u = traj.velocity(i)?;
        let theta_s = &traj.snapshots[i];
        let mut div_flux = SpectralField::zeros(grid.clone());
        for (a, ua) in u.iter().enumerate() {
            let flux = spectral::dealias(&fft::forward(&ua.mul(theta_s)?)?);
            div_flux = div_flux.add(&spectral::derivative(&flux, a)?)?;
        }
        for ((c, &kn), acc) in
            div_flux.coeffs().iter().zip(&knorm).zip(repr.coeffs_mut())
        {
            *acc -= w * c * (-kappa * kn * (t - s)).exp();
        }
    }
    let reconstructed = fft::inverse(&repr)?;
    Ok(traj.snapshots[target].sub(&reconstructed)?.linf_norm())
}

/// Convenience: build a solver and run it.
pub fn run(config: SolverConfig) -> Result<Trajectory> {
    Solver::new(config)?.run()
}
