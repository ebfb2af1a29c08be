//! Time integration of `i ∂_t u = H_{A(t)} u + sign b^γ f(u)`.
//!
//! One step is Strang splitting: half a nonlinear phase rotation, a
//! Crank–Nicolson step of the magnetic Laplacian with `A` frozen at the step
//! midpoint, and another half rotation. Two ladder modes replace `f` by `f_m`
//! or freeze `A` on `n` equal time windows.

mod crank_nicolson;

pub use crank_nicolson::{CrankNicolson, SolveInfo};

use std::sync::Arc;

use serde::Serialize;

use crate::diagnostics::{correction_integrand, DiagnosticsSeries, Measurement};
use crate::error::{AbortReason, Error, Result};
use crate::field::{
    boundary_leakage, kinetic_energy, kinetic_link_derivative, ComplexField, Grid, LinkField, Spectral,
};
use crate::nonlinearity::NonlinearitySpec;
use crate::potential::PotentialSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Ladder {
    None,
    /// Replace `f` by `f_m`.
    Truncated {
        m: f64,
    },
    /// Freeze `A` at the left end of each of `pieces` equal windows.
    PiecewiseA {
        pieces: usize,
    },
}

/// Boundary-mass limits; `None` disables a check (e.g. for periodic plane waves).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeakageLimits {
    pub initial: Option<f64>,
    pub run: Option<f64>,
}

impl Default for LeakageLimits {
    fn default() -> Self {
        LeakageLimits { initial: Some(1e-10), run: Some(1e-6) }
    }
}

impl LeakageLimits {
    pub fn disabled() -> Self {
        LeakageLimits { initial: None, run: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub b: f64,
    pub dt: f64,
    pub t_end: f64,
    pub cn_tolerance: f64,
    /// Budget of GMRES iterations per linear solve.
    pub cn_max_iterations: usize,
    pub gmres_restart: usize,
    pub ladder: Ladder,
    /// Keep every `snapshot_stride`-th state (0: only the first and last).
    pub snapshot_stride: usize,
    /// Emit a diagnostics row every `diagnostics_stride` steps (plus the last step).
    pub diagnostics_stride: usize,
    /// Abort once `h1mg_norm` exceeds this multiple of its initial value.
    pub blowup_factor: f64,
    pub leakage: LeakageLimits,
}

impl SolverConfig {
    pub fn new(b: f64, dt: f64, t_end: f64) -> Self {
        SolverConfig {
            b,
            dt,
            t_end,
            cn_tolerance: 1e-10,
            cn_max_iterations: 200,
            gmres_restart: 30,
            ladder: Ladder::None,
            snapshot_stride: 0,
            diagnostics_stride: 1,
            blowup_factor: 1e3,
            leakage: LeakageLimits::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !pos(self.b) {
            return Err(Error::invalid(format!("b must be positive, got {}", self.b)));
        }
        if !pos(self.dt) || !pos(self.t_end) {
            return Err(Error::invalid("dt and t_end must be positive"));
        }
        if self.dt >= self.t_end {
            return Err(Error::invalid(format!("dt = {} must be smaller than t_end = {}", self.dt, self.t_end)));
        }
        if !(self.cn_tolerance > 0.0 && self.cn_tolerance < 1e-6) {
            return Err(Error::invalid(format!("cn_tolerance must lie in (0, 1e-6), got {}", self.cn_tolerance)));
        }
        if self.cn_max_iterations == 0 || self.gmres_restart == 0 || self.diagnostics_stride == 0 {
            return Err(Error::invalid("iteration budgets and the diagnostics stride must be positive"));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::invalid("blowup_factor must exceed 1"));
        }
        for limit in [self.leakage.initial, self.leakage.run].into_iter().flatten() {
            if !(limit > 0.0 && limit < 1.0) {
                return Err(Error::invalid(format!("leakage limits must lie in (0, 1), got {limit}")));
            }
        }
        match self.ladder {
            Ladder::None => {}
            Ladder::Truncated { m } => {
                if !(m >= 1.0 && m.is_finite()) {
                    return Err(Error::invalid(format!("truncation level must be >= 1, got {m}")));
                }
            }
            Ladder::PiecewiseA { pieces } => {
                if pieces == 0 {
                    return Err(Error::invalid("piecewise ladder needs at least one window"));
                }
                let n = self.steps();
                if !self.uniform_steps() || !n.is_multiple_of(pieces) {
                    return Err(Error::invalid(format!(
                        "piecewise ladder needs t_end/dt to be an integer multiple of {pieces}, got {} steps",
                        self.t_end / self.dt
                    )));
                }
            }
        }
        Ok(())
    }

    fn uniform_steps(&self) -> bool {
        let r = self.t_end / self.dt;
        (r - r.round()).abs() <= 1e-9 * r
    }

    /// Number of steps; the last one is shortened if `t_end` is not a multiple of `dt`.
    pub fn steps(&self) -> usize {
        let r = self.t_end / self.dt;
        if self.uniform_steps() {
            r.round() as usize
        } else {
            r.ceil() as usize
        }
    }

    /// Time after `k` steps.
    pub fn time_at(&self, k: usize) -> f64 {
        if k >= self.steps() {
            self.t_end
        } else {
            k as f64 * self.dt
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub field: ComplexField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Aborted { reason: AbortReason },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SolverStats {
    pub linear_solves: usize,
    pub total_iterations: usize,
    pub max_iterations: usize,
    pub max_relative_residual: f64,
}

/// Bookkeeping of the window jumps in piecewise mode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct PiecewiseLedger {
    pub pieces: usize,
    /// `Σ c_k`, the first-order jump corrections added to the ledger.
    pub jump_corrections: f64,
    /// `Σ (ΔK_k + c_k)`, the second-order remainder of the jumps.
    pub jump_remainder: f64,
}

#[derive(Clone)]
pub struct Solution {
    pub grid: Grid,
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: DiagnosticsSeries,
    pub final_state: Snapshot,
    pub status: RunStatus,
    pub stats: SolverStats,
    pub steps_planned: usize,
    pub piecewise: Option<PiecewiseLedger>,
}

impl std::fmt::Debug for Solution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solution")
            .field("grid", &self.grid)
            .field("snapshots", &self.snapshots.len())
            .field("diagnostics_rows", &self.diagnostics.len())
            .field("final_step", &self.final_state.step)
            .field("final_time", &self.final_state.time)
            .field("status", &self.status)
            .field("stats", &self.stats)
            .finish_non_exhaustive()
    }
}

impl Solution {
    pub fn completed(&self) -> bool {
        self.status == RunStatus::Completed
    }

    /// Snapshot with the given step index, if stored.
    pub fn snapshot_at_step(&self, step: usize) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.step == step)
    }
}

/// Reusable Strang stepper. Caches the Crank–Nicolson operator while the
/// links and step length repeat, so stepping several states with the same
/// potential shares one operator.
pub struct Integrator<'a> {
    potential: &'a PotentialSpec,
    nonlinearity: &'a NonlinearitySpec,
    cfg: &'a SolverConfig,
    spectral: Arc<Spectral>,
    cached: Option<(u64, u64, CrankNicolson)>,
    stats: SolverStats,
}

impl<'a> Integrator<'a> {
    pub fn new(
        grid: Grid,
        potential: &'a PotentialSpec,
        nonlinearity: &'a NonlinearitySpec,
        cfg: &'a SolverConfig,
    ) -> Self {
        Integrator {
            potential,
            nonlinearity,
            cfg,
            spectral: Arc::new(Spectral::new(grid)),
            cached: None,
            stats: SolverStats::default(),
        }
    }

    fn linear(&mut self, u: &mut ComplexField, link_time: f64, dt: f64) -> Result<()> {
        let key_time = if self.potential.is_static() { 0 } else { link_time.to_bits() };
        let key_dt = dt.to_bits();
        let hit = matches!(&self.cached, Some((t, d, _)) if *t == key_time && *d == key_dt);
        if !hit {
            let links = self.potential.links(link_time, u.grid())?;
            let op = CrankNicolson::new(&links, self.cfg.b, dt, Arc::clone(&self.spectral));
            self.cached = Some((key_time, key_dt, op));
        }
        let (_, _, op) = self.cached.as_ref().expect("operator cached above");
        let info =
            op.step(u.values_mut(), self.cfg.cn_tolerance, self.cfg.cn_max_iterations, self.cfg.gmres_restart)?;
        let s = &mut self.stats;
        s.linear_solves += 1;
        s.total_iterations += info.iterations;
        s.max_iterations = s.max_iterations.max(info.iterations);
        s.max_relative_residual = s.max_relative_residual.max(info.relative_residual);
        Ok(())
    }

    fn nonlinear(&self, u: &mut ComplexField, dt: f64) {
        match self.cfg.ladder {
            Ladder::Truncated { m } => self.nonlinearity.nonlinear_step_truncated(u, dt, self.cfg.b, m),
            _ => self.nonlinearity.nonlinear_step(u, dt, self.cfg.b),
        }
    }

    fn strang(&mut self, u: &mut ComplexField, link_time: f64, dt: f64) -> Result<()> {
        self.nonlinear(u, 0.5 * dt);
        self.linear(u, link_time, dt)?;
        self.nonlinear(u, 0.5 * dt);
        Ok(())
    }

    /// Strang step of `u` from `t` to `t + dt` with `A` frozen at the midpoint.
    pub fn step(&mut self, u: &mut ComplexField, t: f64, dt: f64) -> Result<()> {
        self.strang(u, t + 0.5 * dt, dt)
    }

    pub fn stats(&self) -> SolverStats {
        self.stats
    }
}

/// One Crank–Nicolson step of `i ∂_t u = H_A u` with `A` frozen at `t + dt/2`.
pub fn linear_step(
    u: &ComplexField,
    potential: &PotentialSpec,
    t: f64,
    dt: f64,
    b: f64,
    cfg: &SolverConfig,
) -> Result<ComplexField> {
    potential.validate(u.grid())?;
    let links = potential.links(t + 0.5 * dt, u.grid())?;
    let op = CrankNicolson::new(&links, b, dt, Arc::new(Spectral::new(*u.grid())));
    let mut out = u.clone();
    op.step(out.values_mut(), cfg.cn_tolerance, cfg.cn_max_iterations, cfg.gmres_restart)?;
    Ok(out)
}

/// Exact nonlinear phase flow over `dt`.
pub fn nonlinear_step(u: &ComplexField, nonlinearity: &NonlinearitySpec, dt: f64, b: f64) -> ComplexField {
    let mut out = u.clone();
    nonlinearity.nonlinear_step(&mut out, dt, b);
    out
}

/// One Strang step from `t` to `t + dt` (`dt` may be negative). Honors a
/// truncation ladder in `cfg`; `cfg.b` is ignored in favour of `b`.
pub fn strang_step(
    u: &ComplexField,
    potential: &PotentialSpec,
    nonlinearity: &NonlinearitySpec,
    t: f64,
    dt: f64,
    b: f64,
    cfg: &SolverConfig,
) -> Result<ComplexField> {
    potential.validate(u.grid())?;
    let local = SolverConfig { b, ..cfg.clone() };
    let mut stepper = Integrator::new(*u.grid(), potential, nonlinearity, &local);
    let mut out = u.clone();
    stepper.strang(&mut out, t + 0.5 * dt, dt)?;
    Ok(out)
}

/// [`solve`] with the truncation ladder at level `m`.
pub fn solve_truncated(
    u0: &ComplexField,
    potential: &PotentialSpec,
    nonlinearity: &NonlinearitySpec,
    cfg: &SolverConfig,
    m: f64,
) -> Result<Solution> {
    solve(u0, potential, nonlinearity, &SolverConfig { ladder: Ladder::Truncated { m }, ..cfg.clone() })
}

/// [`solve`] with `A` frozen on `pieces` equal windows.
pub fn solve_piecewise_a(
    u0: &ComplexField,
    potential: &PotentialSpec,
    nonlinearity: &NonlinearitySpec,
    cfg: &SolverConfig,
    pieces: usize,
) -> Result<Solution> {
    solve(u0, potential, nonlinearity, &SolverConfig { ladder: Ladder::PiecewiseA { pieces }, ..cfg.clone() })
}

/// Integrates from `t = 0` to `cfg.t_end`.
///
/// Aborts with [`Error::Aborted`] (carrying the partial [`Solution`]) when the
/// magnetic `H¹` norm exceeds `blowup_factor` times its initial value or the
/// boundary mass exceeds the run leakage limit.
pub fn solve(
    u0: &ComplexField,
    potential: &PotentialSpec,
    nonlinearity: &NonlinearitySpec,
    cfg: &SolverConfig,
) -> Result<Solution> {
    cfg.validate()?;
    nonlinearity.validate()?;
    let grid = *u0.grid();
    potential.validate(&grid)?;
    if !u0.is_finite() {
        return Err(Error::invalid("initial data contains non-finite values"));
    }
    if let Some(limit) = cfg.leakage.initial {
        let fraction = boundary_leakage(u0);
        if fraction > limit {
            return Err(Error::InitialLeakage { fraction, limit });
        }
    }

    let b = cfg.b;
    let n = cfg.steps();
    let pieces = match cfg.ladder {
        Ladder::PiecewiseA { pieces } => Some(pieces),
        _ => None,
    };
    let per_window = pieces.map_or(n, |p| n / p);
    let window_time = |j: usize| j as f64 * cfg.t_end / pieces.unwrap_or(1) as f64;
    // Window of the state after `k` steps (left limit at the final time).
    let window_of = |k: usize| (k / per_window).min(pieces.unwrap_or(1) - 1);
    let links_at = |k: usize| -> Result<LinkField> {
        match pieces {
            Some(_) => potential.links(window_time(window_of(k)), &grid),
            None => potential.links(cfg.time_at(k), &grid),
        }
    };
    let measure = |u: &ComplexField, links: &LinkField| match cfg.ladder {
        Ladder::Truncated { m } => Measurement::of_truncated(u, links, nonlinearity, b, m),
        _ => Measurement::of(u, links, nonlinearity, b),
    };

    let mut stepper = Integrator::new(grid, potential, nonlinearity, cfg);
    let mut series = DiagnosticsSeries::new();
    let mut u = u0.clone();
    let m0 = measure(&u, &links_at(0)?)?;
    series.record(0, 0.0, &m0)?;
    let ceiling = cfg.blowup_factor * m0.h1mg_norm;
    let mut snapshots = vec![Snapshot { step: 0, time: 0.0, field: u.clone() }];
    let mut piecewise = pieces.map(|p| PiecewiseLedger { pieces: p, ..Default::default() });
    let track_integrand = pieces.is_none() && !potential.is_static();
    let mut integrand = if track_integrand { correction_integrand(&u, potential, 0.0, b)? } else { 0.0 };

    let mut status = RunStatus::Completed;
    let mut last_step = 0;
    for k in 0..n {
        let (t, t1) = (cfg.time_at(k), cfg.time_at(k + 1));
        let dt = t1 - t;
        let link_time = match pieces {
            Some(_) => {
                let j = window_of(k);
                if k > 0 && k % per_window == 0 && !potential.is_static() {
                    // Jump of the frozen potential at u fixed.
                    let old = potential.links(window_time(j - 1), &grid)?;
                    let new = potential.links(window_time(j), &grid)?;
                    let dtheta = new.difference(&old)?;
                    let c = -kinetic_link_derivative(&u, &old, &dtheta, b)?;
                    let jump = kinetic_energy(&u, &new, b)? - kinetic_energy(&u, &old, b)?;
                    series.add_correction(c);
                    let ledger = piecewise.as_mut().expect("piecewise mode");
                    ledger.jump_corrections += c;
                    ledger.jump_remainder += jump + c;
                }
                window_time(j)
            }
            None => t + 0.5 * dt,
        };
        stepper.strang(&mut u, link_time, dt)?;
        last_step = k + 1;
        if track_integrand {
            let next = correction_integrand(&u, potential, t1, b)?;
            series.advance_correction(t, integrand, t1, next);
            integrand = next;
        }

        let finite = u.is_finite();
        let m = if finite { Some(measure(&u, &links_at(k + 1)?)?) } else { None };
        let norm = m.as_ref().map_or(f64::INFINITY, |m| m.h1mg_norm);
        let abort = if !(norm <= ceiling) {
            Some(AbortReason::Blowup { time: t1, norm, ceiling })
        } else {
            let fraction = m.as_ref().map_or(0.0, |m| m.boundary_leakage);
            match cfg.leakage.run {
                Some(limit) if fraction > limit => Some(AbortReason::Leakage { time: t1, fraction, limit }),
                _ => None,
            }
        };
        let is_last = k + 1 == n || abort.is_some();
        if let Some(m) = &m {
            if (k + 1) % cfg.diagnostics_stride == 0 || is_last {
                series.record(k + 1, t1, m)?;
            }
        }
        let stride_hit = cfg.snapshot_stride > 0 && (k + 1) % cfg.snapshot_stride == 0;
        if stride_hit || is_last {
            snapshots.push(Snapshot { step: k + 1, time: t1, field: u.clone() });
        }
        if let Some(reason) = abort {
            status = RunStatus::Aborted { reason };
            break;
        }
    }

    let final_state = snapshots.last().cloned().unwrap_or(Snapshot { step: last_step, time: 0.0, field: u });
    let solution = Solution {
        grid,
        snapshots,
        diagnostics: series,
        final_state,
        status,
        stats: stepper.stats,
        steps_planned: n,
        piecewise,
    };
    match status {
        RunStatus::Completed => Ok(solution),
        RunStatus::Aborted { reason } => Err(Error::Aborted { reason, partial: Box::new(solution) }),
    }
}

#[cfg(test)]
mod tests;
