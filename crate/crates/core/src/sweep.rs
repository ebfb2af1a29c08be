//! Ladder and resolution sweeps against a reference solve.
//!
//! Every element is an independent [`solve`]; elements run concurrently and
//! each keeps its own diagnostics. Trajectory errors are taken over the
//! stored snapshots, which all runs of a sweep share.

use rayon::prelude::*;
use serde::Serialize;

use crate::diagnostics::DiagnosticsSeries;
use crate::error::{Error, Result};
use crate::field::{l2_norm, ComplexField};
use crate::nonlinearity::NonlinearitySpec;
use crate::potential::PotentialSpec;
use crate::propagator::{solve, Ladder, Snapshot, Solution, SolverConfig};
use crate::wkb::log_slope;

pub const TRUNCATION_COLUMNS: [&str; 6] =
    ["m", "sup_l2_error", "final_l2_error", "reference_max_abs", "cutoff_active", "status"];
pub const PIECEWISE_COLUMNS: [&str; 6] =
    ["pieces", "sup_l2_error", "final_l2_error", "max_ledger_residual", "jump_remainder", "status"];
pub const RESOLUTION_COLUMNS: [&str; 8] =
    ["dt", "steps", "difference_to_next", "ratio", "order", "max_ledger_residual", "mass_drift", "status"];

/// Upper bound on stored snapshots per run.
pub const MAX_SAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationRow {
    pub m: f64,
    pub sup_l2_error: f64,
    pub final_l2_error: f64,
    pub reference_max_abs: f64,
    /// `m` lies below the reference peak, so `f_m ≠ f` somewhere on the run.
    pub cutoff_active: bool,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseRow {
    pub pieces: usize,
    pub sup_l2_error: f64,
    pub final_l2_error: f64,
    pub max_ledger_residual: f64,
    pub jump_remainder: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionRow {
    pub dt: f64,
    pub steps: usize,
    /// `‖u_dt − u_{dt/2}‖_{L²}` at the end time; NaN on the finest level.
    pub difference_to_next: f64,
    /// Ratio of consecutive differences; NaN where undefined.
    pub ratio: f64,
    pub order: f64,
    pub max_ledger_residual: f64,
    pub mass_drift: f64,
    pub status: String,
}

/// One finished sweep element.
#[derive(Debug, Clone)]
pub struct Element<R> {
    pub row: R,
    pub diagnostics: DiagnosticsSeries,
    pub final_state: Snapshot,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub mode: &'static str,
    pub elements: usize,
    pub completed: usize,
    /// Least-squares order of the error in the sweep parameter.
    pub measured_order: Option<f64>,
    /// Truncation errors are non-increasing in `m`.
    pub monotone: Option<bool>,
}

fn sample_stride(cfg: &SolverConfig) -> usize {
    cfg.steps().div_ceil(MAX_SAMPLES).max(1)
}

fn status_of(r: &Result<Solution>) -> String {
    match r {
        Ok(_) => "completed".into(),
        Err(e) => e.to_string(),
    }
}

/// `(sup, final)` L² distance over the snapshot steps both runs stored.
fn trajectory_error(run: &Solution, reference: &Solution) -> Result<(f64, f64)> {
    let mut sup = 0.0f64;
    for s in &run.snapshots {
        if let Some(r) = reference.snapshot_at_step(s.step) {
            sup = sup.max(l2_norm(&s.field.sub(&r.field)?));
        }
    }
    let last = l2_norm(&run.final_state.field.sub(&reference.final_state.field)?);
    Ok((sup.max(last), last))
}

fn element<R>(row: R, sol: Solution) -> Element<R> {
    Element { row, diagnostics: sol.diagnostics, final_state: sol.final_state }
}

fn reference_run(
    u0: &ComplexField,
    potential: &PotentialSpec,
    nl: &NonlinearitySpec,
    cfg: &SolverConfig,
) -> Result<Solution> {
    let cfg = SolverConfig { ladder: Ladder::None, snapshot_stride: sample_stride(cfg), ..cfg.clone() };
    solve(u0, potential, nl, &cfg)
}

/// Truncation ladder over `m_list` against the untruncated solve.
pub fn truncation_sweep(
    u0: &ComplexField,
    potential: &PotentialSpec,
    nl: &NonlinearitySpec,
    cfg: &SolverConfig,
    m_list: &[f64],
) -> Result<Vec<Result<Element<TruncationRow>>>> {
    if m_list.iter().any(|m| !(*m >= 1.0)) {
        return Err(Error::invalid("truncation levels must be >= 1"));
    }
    let reference = reference_run(u0, potential, nl, cfg)?;
    let peak = reference.diagnostics.records().iter().map(|r| r.max_abs).fold(0.0, f64::max);
    Ok(m_list
        .par_iter()
        .map(|&m| {
            let run_cfg =
                SolverConfig { ladder: Ladder::Truncated { m }, snapshot_stride: sample_stride(cfg), ..cfg.clone() };
            let result = solve(u0, potential, nl, &run_cfg);
            let status = status_of(&result);
            let sol = result?;
            let (sup, last) = trajectory_error(&sol, &reference)?;
            let row = TruncationRow {
                m,
                sup_l2_error: sup,
                final_l2_error: last,
                reference_max_abs: peak,
                cutoff_active: m < peak,
                status,
            };
            Ok(element(row, sol))
        })
        .collect())
}

/// Piecewise-`A` ladder over `pieces_list` against the direct solve.
pub fn piecewise_sweep(
    u0: &ComplexField,
    potential: &PotentialSpec,
    nl: &NonlinearitySpec,
    cfg: &SolverConfig,
    pieces_list: &[usize],
) -> Result<Vec<Result<Element<PiecewiseRow>>>> {
    let steps = cfg.steps();
    if let Some(p) = pieces_list.iter().find(|p| **p == 0 || !steps.is_multiple_of(**p)) {
        return Err(Error::invalid(format!("{p} pieces do not divide {steps} steps")));
    }
    let reference = reference_run(u0, potential, nl, cfg)?;
    Ok(pieces_list
        .par_iter()
        .map(|&pieces| {
            let run_cfg = SolverConfig {
                ladder: Ladder::PiecewiseA { pieces },
                snapshot_stride: sample_stride(cfg),
                ..cfg.clone()
            };
            let result = solve(u0, potential, nl, &run_cfg);
            let status = status_of(&result);
            let sol = result?;
            let (sup, last) = trajectory_error(&sol, &reference)?;
            let row = PiecewiseRow {
                pieces,
                sup_l2_error: sup,
                final_l2_error: last,
                max_ledger_residual: sol.diagnostics.max_abs_residual(),
                jump_remainder: sol.piecewise.map_or(0.0, |p| p.jump_remainder),
                status,
            };
            Ok(element(row, sol))
        })
        .collect())
}

/// Runs `dt, dt/2, …, dt/2^refinements` and compares consecutive levels.
pub fn resolution_sweep(
    u0: &ComplexField,
    potential: &PotentialSpec,
    nl: &NonlinearitySpec,
    cfg: &SolverConfig,
    refinements: usize,
) -> Result<Vec<Result<Element<ResolutionRow>>>> {
    let levels: Vec<Result<Solution>> = (0..=refinements)
        .into_par_iter()
        .map(|k| {
            let dt = cfg.dt / 2f64.powi(k as i32);
            solve(u0, potential, nl, &SolverConfig { dt, snapshot_stride: 0, ..cfg.clone() })
        })
        .collect();
    let diffs: Vec<f64> = (0..=refinements)
        .map(|k| match (levels.get(k), levels.get(k + 1)) {
            (Some(Ok(a)), Some(Ok(b))) => {
                l2_norm(&a.final_state.field.sub(&b.final_state.field).unwrap_or_else(|_| a.final_state.field.clone()))
            }
            _ => f64::NAN,
        })
        .collect();
    Ok(levels
        .into_iter()
        .enumerate()
        .map(|(k, result)| {
            let status = status_of(&result);
            let sol = result?;
            let ratio = if k > 0 { diffs[k - 1] / diffs[k] } else { f64::NAN };
            let row = ResolutionRow {
                dt: cfg.dt / 2f64.powi(k as i32),
                steps: sol.steps_planned,
                difference_to_next: diffs[k],
                ratio,
                order: ratio.log2(),
                max_ledger_residual: sol.diagnostics.max_abs_residual(),
                mass_drift: sol.diagnostics.relative_mass_drift(),
                status,
            };
            Ok(element(row, sol))
        })
        .collect())
}

/// `true` when the sequence never increases by more than `slack`.
pub fn non_increasing(values: &[f64], slack: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + slack)
}

pub fn summarize_truncation(rows: &[TruncationRow], elements: usize, slack: f64) -> SweepSummary {
    let mut sorted: Vec<&TruncationRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.m.total_cmp(&b.m));
    let errors: Vec<f64> = sorted.iter().map(|r| r.sup_l2_error).collect();
    SweepSummary {
        mode: "truncation",
        elements,
        completed: rows.len(),
        measured_order: None,
        monotone: Some(non_increasing(&errors, slack)),
    }
}

/// Order `p` in `error ∝ n^{-p}` from a log-log fit.
pub fn piecewise_order(rows: &[PiecewiseRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| r.sup_l2_error > 0.0).map(|r| ((r.pieces as f64).ln(), r.sup_l2_error.ln())).collect();
    (pts.len() >= 2).then(|| -log_slope(&pts))
}

pub fn summarize_piecewise(rows: &[PiecewiseRow], elements: usize) -> SweepSummary {
    SweepSummary {
        mode: "piecewise",
        elements,
        completed: rows.len(),
        measured_order: piecewise_order(rows),
        monotone: None,
    }
}

pub fn summarize_resolution(rows: &[ResolutionRow], elements: usize) -> SweepSummary {
    let orders: Vec<f64> = rows.iter().map(|r| r.order).filter(|o| o.is_finite()).collect();
    let measured_order = (!orders.is_empty()).then(|| orders.iter().sum::<f64>() / orders.len() as f64);
    SweepSummary { mode: "resolution", elements, completed: rows.len(), measured_order, monotone: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::potential::Modulation;
    use crate::propagator::LeakageLimits;
    use num_complex::Complex64;

    fn setup() -> (ComplexField, SolverConfig) {
        let g = Grid::new(1, 64, 16.0).unwrap();
        let u0 = ComplexField::from_fn(g, |x| Complex64::new(1.5 * (-x[0] * x[0]).exp(), 0.0));
        let cfg = SolverConfig {
            leakage: LeakageLimits::disabled(),
            cn_tolerance: 1e-12,
            ..SolverConfig::new(1.0, 0.01, 0.32)
        };
        (u0, cfg)
    }

    #[test]
    fn truncation_rows_follow_m_list() {
        let (u0, cfg) = setup();
        let nl = NonlinearitySpec::cubic(1.0, 2.0);
        let out = truncation_sweep(&u0, &PotentialSpec::zero(), &nl, &cfg, &[1.0, 4.0]).unwrap();
        let rows: Vec<TruncationRow> = out.into_iter().map(|e| e.unwrap().row).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].cutoff_active && !rows[1].cutoff_active);
        assert!(rows[0].sup_l2_error > 1e-3);
        assert!(rows[1].sup_l2_error < 1e-10, "{rows:?}");
        assert_eq!(summarize_truncation(&rows, 2, 0.0).monotone, Some(true));
    }

    #[test]
    fn resolution_sweep_is_second_order() {
        let (u0, cfg) = setup();
        let nl = NonlinearitySpec::cubic(1.0, 2.0);
        let out = resolution_sweep(&u0, &PotentialSpec::zero(), &nl, &cfg, 3).unwrap();
        let rows: Vec<ResolutionRow> = out.into_iter().map(|e| e.unwrap().row).collect();
        assert_eq!(rows.len(), 4);
        assert!(rows[3].difference_to_next.is_nan());
        let order = summarize_resolution(&rows, 4).measured_order.unwrap();
        assert!((order - 2.0).abs() < 0.2, "{rows:?}");
    }

    #[test]
    fn piecewise_sweep_rejects_non_divisors() {
        let (u0, cfg) = setup();
        let pot = PotentialSpec::zero().with_modulation(Modulation::Sinusoidal { amplitude: 0.5, frequency: 1.0 });
        assert!(piecewise_sweep(&u0, &pot, &NonlinearitySpec::linear(), &cfg, &[3]).is_err());
    }
}
