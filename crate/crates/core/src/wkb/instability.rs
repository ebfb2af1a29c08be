use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{l2_norm, max_abs, Grid};
use crate::initial::InitialData;
use crate::nonlinearity::NonlinearitySpec;
use crate::potential::PotentialSpec;
use crate::propagator::{Integrator, LeakageLimits, SolverConfig};

pub const INSTABILITY_COLUMNS: [&str; 6] = ["b", "delta", "init_gap", "t_sep", "t_sep_times_b", "max_separation"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DeltaRule {
    /// `δ = scale · b^exponent`.
    Power {
        scale: f64,
        exponent: f64,
    },
    Fixed {
        delta: f64,
    },
}

impl DeltaRule {
    pub fn delta(&self, b: f64) -> f64 {
        match *self {
            DeltaRule::Power { scale, exponent } => scale * b.powf(exponent),
            DeltaRule::Fixed { delta } => delta,
        }
    }
}

impl Default for DeltaRule {
    fn default() -> Self {
        DeltaRule::Power { scale: 1.0, exponent: -0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstabilityConfig {
    pub b_list: Vec<f64>,
    pub delta: DeltaRule,
    /// Separation in `L²` that counts as "separated".
    pub threshold: f64,
    /// Rescaled horizon `T`; each pair is followed up to `T / b`.
    pub t_end: f64,
    pub grid: Grid,
    pub initial: InitialData,
    /// `dt = rotation_fraction / (b^γ g(max |ã₀|²))`.
    pub rotation_fraction: f64,
    pub cn_tolerance: f64,
    pub leakage: LeakageLimits,
}

impl InstabilityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b_list.is_empty() || self.b_list.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(Error::invalid("b_list must hold positive finite values"));
        }
        if !(self.threshold > 0.0) || !(self.t_end > 0.0) || !(self.rotation_fraction > 0.0) {
            return Err(Error::invalid("threshold, t_end and rotation_fraction must be positive"));
        }
        self.initial.amplitude.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InstabilityRow {
    pub b: f64,
    pub delta: f64,
    /// `‖a₀ - ã₀‖_{L²}`.
    pub init_gap: f64,
    /// First time the separation reaches the threshold; NaN if it never does.
    pub t_sep: f64,
    pub t_sep_times_b: f64,
    pub max_separation: f64,
}

impl InstabilityRow {
    pub fn separated(&self) -> bool {
        self.t_sep.is_finite()
    }
}

fn run_pair(
    cfg: &InstabilityConfig,
    potential: &PotentialSpec,
    nonlinearity: &NonlinearitySpec,
    b: f64,
) -> Result<InstabilityRow> {
    let delta = cfg.delta.delta(b);
    let mut u = cfg.initial.field(&cfg.grid, b)?;
    let mut w = u.scale(Complex64::new(1.0 + delta, 0.0));
    let horizon = cfg.t_end / b;
    let rate = nonlinearity.coupling(b).abs() * nonlinearity.g(max_abs(&w).powi(2));
    let dt = if rate > 0.0 { (cfg.rotation_fraction / rate).min(0.1 * horizon) } else { 0.01 * horizon };
    let solver =
        SolverConfig { cn_tolerance: cfg.cn_tolerance, leakage: cfg.leakage, ..SolverConfig::new(b, dt, horizon) };
    solver.validate()?;

    let init_gap = l2_norm(&w.sub(&u)?);
    let mut max_separation = init_gap;
    let mut t_sep = if init_gap >= cfg.threshold { 0.0 } else { f64::NAN };
    let mut integrator = Integrator::new(cfg.grid, potential, nonlinearity, &solver);
    let steps = solver.steps();
    let mut k = 0;
    while t_sep.is_nan() && k < steps {
        let (t, t1) = (solver.time_at(k), solver.time_at(k + 1));
        integrator.step(&mut u, t, t1 - t)?;
        integrator.step(&mut w, t, t1 - t)?;
        if !u.is_finite() || !w.is_finite() {
            return Err(Error::invalid(format!("non-finite state at t = {t1} for b = {b}")));
        }
        let sep = l2_norm(&w.sub(&u)?);
        max_separation = max_separation.max(sep);
        if sep >= cfg.threshold {
            t_sep = t1;
        }
        k += 1;
    }
    Ok(InstabilityRow { b, delta, init_gap, t_sep, t_sep_times_b: t_sep * b, max_separation })
}

/// Follows `a₀` and `(1 + δ_b) a₀` with a shared integrator and records when
/// their `L²` distance first reaches the threshold.
pub fn instability_experiment(
    cfg: &InstabilityConfig,
    potential: &PotentialSpec,
    nonlinearity: &NonlinearitySpec,
) -> Result<Vec<InstabilityRow>> {
    cfg.validate()?;
    nonlinearity.validate()?;
    potential.validate(&cfg.grid)?;
    cfg.b_list.par_iter().map(|&b| run_pair(cfg, potential, nonlinearity, b)).collect()
}
