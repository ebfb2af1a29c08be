//! Semiclassical system for `(α, v)` after the rescaling `t = b s`, `h = 1/b`.
//!
//! With `u(s) = α(bs) e^{ibφ(bs)}` and `v = ∇φ + A(ht)` the rescaled equation
//! `ih ∂_t w = (ih∇ - A(ht))² w + g(|w|²) w` is solved exactly by
//!
//! ```text
//! ∂_t α   = -2 (v·∇) α - α div v + i h Δα
//! ∂_t v_k = -2 (v·∇) v_k - 2 g'(|α|²) Re(ᾱ ∂_k α) - 2 (v × B)_k + h ∂_t A_k(ht)
//! ∂_t φ   = -|v|² - g(|α|²)
//! ```
//!
//! where `(v × B) = (v_y B, -v_x B)` in 2D and vanishes in 1D. Spatial
//! derivatives are spectral, so `v` must be periodic: potentials with a
//! uniform field component are rejected by [`wkb_solve`].

mod compare;
mod instability;
mod reconstruct;
mod symmetrizer;

pub(crate) use compare::log_slope;
pub use compare::{b_trend, compare_to_direct, CompareConfig, CompareRow, COMPARE_COLUMNS};
pub use instability::{instability_experiment, DeltaRule, InstabilityConfig, InstabilityRow, INSTABILITY_COLUMNS};
pub use reconstruct::{reconstruct, ReconstructedFrame, Reconstruction, DEFECT_WARNING};
pub use symmetrizer::{flux_matrix, random_symmetrizer_check, symmetrizer, symmetrizer_check, SymmetrizerReport};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{boundary_leakage, ComplexField, Grid, RealField, RealVectorField, Spectral};
use crate::initial::PhaseProfile;
use crate::nonlinearity::NonlinearitySpec;
use crate::potential::{Gauge, Modulation, PotentialKind, PotentialSpec};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Largest `|λ dt|` on the imaginary axis inside the RK4 stability region.
const RK4_IMAGINARY_LIMIT: f64 = 2.83;

#[derive(Debug, Clone, PartialEq)]
pub struct WkbState {
    pub grid: Grid,
    pub alpha1: RealField,
    pub alpha2: RealField,
    /// `v = ∇φ + A(ht)`.
    pub v: RealVectorField,
    pub h: f64,
    /// Rescaled time.
    pub t: f64,
}

impl WkbState {
    pub fn alpha(&self) -> ComplexField {
        let values =
            self.alpha1.values().iter().zip(self.alpha2.values()).map(|(&a, &b)| Complex64::new(a, b)).collect();
        ComplexField::new(self.grid, values).expect("components share the grid")
    }

    pub fn density(&self) -> Vec<f64> {
        self.alpha1.values().iter().zip(self.alpha2.values()).map(|(a, b)| a * a + b * b).collect()
    }

    /// `∫ |α|²`.
    pub fn mass(&self) -> f64 {
        self.density().iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn is_finite(&self) -> bool {
        self.to_vec().iter().all(|x| x.is_finite())
    }

    /// Flat layout `[α₁ | α₂ | v₁ | … | v_n]`.
    fn to_vec(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity((2 + self.grid.dim()) * self.grid.len());
        y.extend_from_slice(self.alpha1.values());
        y.extend_from_slice(self.alpha2.values());
        for c in self.v.components() {
            y.extend_from_slice(c);
        }
        y
    }

    fn from_vec(grid: Grid, h: f64, t: f64, y: &[f64]) -> Result<Self> {
        let n = grid.len();
        Ok(WkbState {
            grid,
            alpha1: RealField::new(grid, y[..n].to_vec())?,
            alpha2: RealField::new(grid, y[n..2 * n].to_vec())?,
            v: RealVectorField::new(grid, (0..grid.dim()).map(|a| y[(2 + a) * n..(3 + a) * n].to_vec()).collect())?,
            h,
            t,
        })
    }
}

/// Initial state: `α = a₀`, `v = ∇S + A(0)`. Fails if `a₀` leaks to the boundary.
pub fn wkb_init(a0: &ComplexField, phase: &PhaseProfile, potential: &PotentialSpec, b: f64) -> Result<WkbState> {
    if !(b > 0.0) {
        return Err(Error::invalid(format!("b must be positive, got {b}")));
    }
    let grid = *a0.grid();
    let fraction = boundary_leakage(a0);
    if fraction > 1e-10 {
        return Err(Error::InitialLeakage { fraction, limit: 1e-10 });
    }
    let grad_s = phase.gradient(&grid)?;
    let a = potential.eval_a(0.0, &grid)?;
    let v = grad_s
        .into_iter()
        .zip(a.components())
        .map(|(gs, ak)| gs.iter().zip(ak).map(|(s, a)| s + a).collect())
        .collect();
    Ok(WkbState {
        grid,
        alpha1: RealField::new(grid, a0.values().iter().map(|z| z.re).collect())?,
        alpha2: RealField::new(grid, a0.values().iter().map(|z| z.im).collect())?,
        v: RealVectorField::new(grid, v)?,
        h: 1.0 / b,
        t: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TimeStep {
    /// `dt = safety · limit`, re-evaluated every step.
    Cfl { safety: f64 },
    /// Fails with [`Error::CflViolation`] if `dt` exceeds the stability limit.
    Fixed { dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Dealias {
    TwoThirds,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WkbConfig {
    /// Field strength; `h = 1/b`, and `b = ∞` gives the dispersionless limit.
    pub b: f64,
    /// Rescaled end time `T`.
    pub t_end: f64,
    pub time_step: TimeStep,
    pub dealias: Dealias,
    /// Abort once `max |∂_j v_k|` exceeds this.
    pub shock_ceiling: f64,
    /// Keep every `frame_stride`-th step (0: only the first and last).
    pub frame_stride: usize,
    pub a0: ComplexField,
    pub phase: PhaseProfile,
}

impl WkbConfig {
    pub fn new(b: f64, t_end: f64, a0: ComplexField, phase: PhaseProfile) -> Self {
        WkbConfig {
            b,
            t_end,
            time_step: TimeStep::Cfl { safety: 0.5 },
            dealias: Dealias::TwoThirds,
            shock_ceiling: 1e3,
            frame_stride: 0,
            a0,
            phase,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0) {
            return Err(Error::invalid(format!("b must be positive, got {}", self.b)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid("rescaled t_end must be positive"));
        }
        match self.time_step {
            TimeStep::Cfl { safety } if !(safety > 0.0 && safety <= 1.0) => {
                Err(Error::invalid(format!("CFL safety must lie in (0, 1], got {safety}")))
            }
            TimeStep::Fixed { dt } if !(dt > 0.0 && dt.is_finite()) => Err(Error::invalid("fixed dt must be positive")),
            _ if !(self.shock_ceiling > 0.0) => Err(Error::invalid("shock_ceiling must be positive")),
            _ => Ok(()),
        }
    }
}

/// The non-gauge part of `v` must be periodic for spectral derivatives.
fn check_periodic(potential: &PotentialSpec, phase: &PhaseProfile) -> Result<()> {
    match potential.kind {
        PotentialKind::Zero | PotentialKind::Tabulated(_) => {}
        _ => {
            return Err(Error::invalid(
                "the WKB solver needs a periodic potential (zero or tabulated); uniform-field kinds are not periodic",
            ))
        }
    }
    let gauge = match potential.gauge {
        Gauge::Bilinear { coefficient } => coefficient,
        _ => 0.0,
    };
    let phase_bilinear = match phase {
        PhaseProfile::Analytic { bilinear, .. } => *bilinear,
        _ => 0.0,
    };
    if gauge + phase_bilinear != 0.0 {
        return Err(Error::invalid("bilinear terms of the phase and the gauge must cancel for a periodic v = ∇S + A"));
    }
    Ok(())
}

/// The nonlinearity must be absent or defocusing with `g' > 0`.
fn check_nonlinearity(nonlinearity: &NonlinearitySpec) -> Result<()> {
    nonlinearity.validate()?;
    if !nonlinearity.is_linear() && nonlinearity.sign < 0.0 {
        return Err(Error::invalid("the WKB system needs a defocusing nonlinearity (sign = +1)"));
    }
    Ok(())
}

/// Right-hand side evaluator with cached spectral plans and potential data.
struct System {
    grid: Grid,
    h: f64,
    spectral: Spectral,
    dealias: Dealias,
    nonlinearity: NonlinearitySpec,
    modulation: Modulation,
    /// Unmodulated `A` and its curl.
    a_base: RealVectorField,
    b_base: Vec<f64>,
}

impl System {
    fn new(
        grid: Grid,
        h: f64,
        potential: &PotentialSpec,
        nonlinearity: &NonlinearitySpec,
        dealias: Dealias,
    ) -> Result<Self> {
        check_nonlinearity(nonlinearity)?;
        let base = PotentialSpec { modulation: Modulation::None, gauge: Gauge::None, ..potential.clone() };
        Ok(System {
            grid,
            h,
            spectral: Spectral::new(grid),
            dealias,
            nonlinearity: nonlinearity.clone(),
            modulation: potential.modulation,
            a_base: base.eval_a(0.0, &grid)?,
            b_base: base.eval_b(0.0, &grid)?.values().to_vec(),
        })
    }

    fn filter(&self, values: &mut [Complex64]) {
        if self.dealias == Dealias::TwoThirds {
            self.spectral.dealias(values);
        }
    }

    fn filter_real(&self, values: &mut [f64]) {
        if self.dealias == Dealias::TwoThirds {
            self.spectral.dealias_real(values);
        }
    }

    /// Spectral derivatives `∂_j v_k`, indexed `[k][j]`.
    fn velocity_gradient(&self, v: &[&[f64]]) -> Vec<Vec<Vec<f64>>> {
        v.iter().map(|vk| self.spectral.gradient_real(vk)).collect()
    }

    fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let (n, dim) = (self.grid.len(), self.grid.dim());
        let alpha: Vec<Complex64> = (0..n).map(|i| Complex64::new(y[i], y[n + i])).collect();
        let v: Vec<&[f64]> = (0..dim).map(|a| &y[(2 + a) * n..(3 + a) * n]).collect();

        let spec = self.spectral.transform(&alpha);
        let dalpha: Vec<Vec<Complex64>> = (0..dim)
            .map(|axis| {
                let mut d = self.spectral.apply_derivative(&spec, axis);
                self.spectral.inverse(&mut d);
                d
            })
            .collect();
        let lap = if self.h != 0.0 { self.spectral.laplacian(&alpha) } else { vec![Complex64::new(0.0, 0.0); n] };
        let dv = self.velocity_gradient(&v);

        let linear = self.nonlinearity.is_linear();
        let mut ra = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut adv = Complex64::new(0.0, 0.0);
            let mut div = 0.0;
            for j in 0..dim {
                adv += v[j][i] * dalpha[j][i];
                div += dv[j][j][i];
            }
            ra[i] = -2.0 * adv - alpha[i] * div + I * self.h * lap[i];
        }
        self.filter(&mut ra);
        for i in 0..n {
            out[i] = ra[i].re;
            out[n + i] = ra[i].im;
        }

        let phys = self.h * t;
        let field = self.modulation.factor(phys);
        let rate = self.modulation.rate(phys);
        let mut slopes = Vec::with_capacity(if linear { 0 } else { n });
        if !linear {
            for a in &alpha {
                let rho = a.norm_sqr();
                let s = self.nonlinearity.g_prime(rho);
                if !(s > 0.0) {
                    return Err(Error::NotSymmetrizable { rho, slope: s });
                }
                slopes.push(s);
            }
        }
        for k in 0..dim {
            let mut rv: Vec<f64> = (0..n)
                .map(|i| {
                    let mut adv = 0.0;
                    for j in 0..dim {
                        adv += v[j][i] * dv[k][j][i];
                    }
                    let pressure = if linear { 0.0 } else { slopes[i] * (alpha[i].conj() * dalpha[k][i]).re };
                    let lorentz = match (dim, k) {
                        (2, 0) => v[1][i] * field * self.b_base[i],
                        (2, 1) => -v[0][i] * field * self.b_base[i],
                        _ => 0.0,
                    };
                    -2.0 * adv - 2.0 * pressure - 2.0 * lorentz
                })
                .collect();
            self.filter_real(&mut rv);
            let ab = self.a_base.component(k);
            for i in 0..n {
                out[(2 + k) * n + i] = rv[i] + self.h * rate * ab[i];
            }
        }
        Ok(())
    }

    /// `max |∂_j v_k|`.
    fn max_velocity_gradient(&self, y: &[f64]) -> f64 {
        let n = self.grid.len();
        let v: Vec<&[f64]> = (0..self.grid.dim()).map(|a| &y[(2 + a) * n..(3 + a) * n]).collect();
        self.velocity_gradient(&v).iter().flatten().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Stability limit of RK4 for the current state.
    fn dt_limit(&self, y: &[f64]) -> f64 {
        let n = self.grid.len();
        let mut vmax: f64 = 0.0;
        let mut rho_max: f64 = 0.0;
        let mut slope_max: f64 = 0.0;
        for i in 0..n {
            let v2: f64 = (0..self.grid.dim()).map(|a| y[(2 + a) * n + i].powi(2)).sum();
            vmax = vmax.max(v2.sqrt());
            let rho = y[i] * y[i] + y[n + i] * y[n + i];
            rho_max = rho_max.max(rho);
            slope_max = slope_max.max(self.nonlinearity.g_prime(rho));
        }
        let speed = 2.0 * vmax + (2.0 * slope_max * rho_max).sqrt();
        let advective = if speed > 0.0 { self.grid.spacing() / speed } else { f64::INFINITY };
        let dispersive = if self.h > 0.0 {
            RK4_IMAGINARY_LIMIT / (self.h * self.spectral.dealiased_k2_max())
        } else {
            f64::INFINITY
        };
        advective.min(dispersive)
    }
}

/// Density of the eikonal time derivative, `|v|² + g(|α|²)`.
fn phase_rate(y: &[f64], grid: &Grid, nonlinearity: &NonlinearitySpec) -> Vec<f64> {
    let n = grid.len();
    (0..n)
        .map(|i| {
            let v2: f64 = (0..grid.dim()).map(|a| y[(2 + a) * n + i].powi(2)).sum();
            v2 + nonlinearity.g(y[i] * y[i] + y[n + i] * y[n + i])
        })
        .collect()
}

/// Time derivative of `state`, returned in the same layout (the `t` field is unchanged).
pub fn wkb_rhs(state: &WkbState, potential: &PotentialSpec, nonlinearity: &NonlinearitySpec) -> Result<WkbState> {
    let sys = System::new(state.grid, state.h, potential, nonlinearity, Dealias::TwoThirds)?;
    let y = state.to_vec();
    let mut out = vec![0.0; y.len()];
    sys.rhs(state.t, &y, &mut out)?;
    WkbState::from_vec(state.grid, state.h, state.t, &out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WkbFrame {
    pub step: usize,
    pub state: WkbState,
    /// `Φ(t) = ∫₀ᵗ (|v|² + g(|α|²)) dτ`, so that `φ = S - Φ`.
    pub phase_integral: RealField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WkbRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub max_velocity_gradient: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum WkbStatus {
    Completed,
    /// Gradient of `v` exceeded the ceiling, a proxy for shock formation.
    ShockAborted {
        t: f64,
        max_gradient: f64,
        ceiling: f64,
    },
}

#[derive(Debug, Clone)]
pub struct WkbTrajectory {
    pub grid: Grid,
    pub h: f64,
    pub frames: Vec<WkbFrame>,
    pub records: Vec<WkbRecord>,
    pub status: WkbStatus,
}

impl WkbTrajectory {
    pub fn final_frame(&self) -> &WkbFrame {
        self.frames.last().expect("a trajectory has at least the initial frame")
    }

    pub fn completed(&self) -> bool {
        self.status == WkbStatus::Completed
    }

    /// `max_t |M(t) - M(0)| / M(0)` over all steps.
    pub fn relative_mass_drift(&self) -> f64 {
        let m0 = self.records.first().map_or(0.0, |r| r.mass);
        if m0 == 0.0 {
            return 0.0;
        }
        self.records.iter().map(|r| (r.mass - m0).abs() / m0).fold(0.0, f64::max)
    }

    pub fn max_dt(&self) -> f64 {
        self.records.iter().map(|r| r.dt).fold(0.0, f64::max)
    }
}

/// RK4 integration in rescaled time up to `cfg.t_end`.
///
/// A shock-proxy abort is not an error: the trajectory up to that time is
/// returned with [`WkbStatus::ShockAborted`].
pub fn wkb_solve(cfg: &WkbConfig, potential: &PotentialSpec, nonlinearity: &NonlinearitySpec) -> Result<WkbTrajectory> {
    cfg.validate()?;
    let grid = *cfg.a0.grid();
    potential.validate(&grid)?;
    check_periodic(potential, &cfg.phase)?;
    let state = wkb_init(&cfg.a0, &cfg.phase, potential, cfg.b)?;
    let h = state.h;
    if !nonlinearity.is_linear() {
        check_nonlinearity(nonlinearity)?;
        nonlinearity.check_symmetrizable(state.density())?;
    }
    let sys = System::new(grid, h, potential, nonlinearity, cfg.dealias)?;

    let n = grid.len();
    let mut y = state.to_vec();
    let mut phi = vec![0.0; n];
    let mut t = 0.0;
    let mut frames = vec![WkbFrame { step: 0, state, phase_integral: RealField::new(grid, phi.clone())? }];
    let mut records = vec![WkbRecord {
        step: 0,
        t,
        dt: 0.0,
        mass: frames[0].state.mass(),
        max_velocity_gradient: sys.max_velocity_gradient(&y),
    }];
    let mut status = WkbStatus::Completed;

    let len = y.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let mut tmp = vec![0.0; len];
    let mut step = 0;
    while t < cfg.t_end {
        let limit = sys.dt_limit(&y);
        let mut dt = match cfg.time_step {
            TimeStep::Cfl { safety } => safety * limit,
            TimeStep::Fixed { dt } => {
                if dt > limit {
                    return Err(Error::CflViolation { dt, limit });
                }
                dt
            }
        };
        if !(dt > 0.0 && dt.is_finite()) {
            // A state at rest with no dispersion: any step is stable.
            dt = cfg.t_end - t;
        }
        let last = t + dt >= cfg.t_end * (1.0 - 1e-12);
        if last {
            dt = cfg.t_end - t;
        }

        // Φ uses the same stages so it stays fourth order.
        let q1 = phase_rate(&y, &grid, nonlinearity);
        sys.rhs(t, &y, &mut k1)?;
        axpy(&mut tmp, &y, 0.5 * dt, &k1);
        let q2 = phase_rate(&tmp, &grid, nonlinearity);
        sys.rhs(t + 0.5 * dt, &tmp, &mut k2)?;
        axpy(&mut tmp, &y, 0.5 * dt, &k2);
        let q3 = phase_rate(&tmp, &grid, nonlinearity);
        sys.rhs(t + 0.5 * dt, &tmp, &mut k3)?;
        axpy(&mut tmp, &y, dt, &k3);
        let q4 = phase_rate(&tmp, &grid, nonlinearity);
        sys.rhs(t + dt, &tmp, &mut k4)?;
        for i in 0..len {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t = if last { cfg.t_end } else { t + dt };
        step += 1;

        for i in 0..n {
            phi[i] += dt / 6.0 * (q1[i] + 2.0 * q2[i] + 2.0 * q3[i] + q4[i]);
        }

        let grad = sys.max_velocity_gradient(&y);
        let finite = y.iter().all(|x| x.is_finite());
        let next = WkbState::from_vec(grid, h, t, &y)?;
        records.push(WkbRecord { step, t, dt, mass: next.mass(), max_velocity_gradient: grad });
        let shock = !finite || !(grad <= cfg.shock_ceiling);
        let keep = (cfg.frame_stride > 0 && step % cfg.frame_stride == 0) || last || shock;
        if keep {
            frames.push(WkbFrame { step, state: next, phase_integral: RealField::new(grid, phi.clone())? });
        }
        if shock {
            status = WkbStatus::ShockAborted { t, max_gradient: grad, ceiling: cfg.shock_ceiling };
            break;
        }
    }
    Ok(WkbTrajectory { grid, h, frames, records, status })
}

fn axpy(out: &mut [f64], y: &[f64], a: f64, k: &[f64]) {
    for ((o, yi), ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + a * ki;
    }
}
