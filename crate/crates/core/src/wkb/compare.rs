use rayon::prelude::*;
use serde::Serialize;

use super::{check_periodic, reconstruct, wkb_init, wkb_solve, TimeStep, WkbConfig, WkbStatus};
use crate::error::{Error, Result};
use crate::field::{l2_norm, Grid};
use crate::initial::InitialData;
use crate::nonlinearity::NonlinearitySpec;
use crate::potential::PotentialSpec;
use crate::propagator::{solve, SolverConfig};

pub const COMPARE_COLUMNS: [&str; 11] = [
    "b",
    "n",
    "dt_direct",
    "wkb_steps",
    "wkb_max_dt",
    "discrepancy",
    "max_defect",
    "coarse_n",
    "coarse_discrepancy",
    "refinement_ratio",
    "status",
];

/// Points per wavelength demanded of the oscillation `e^{ibS}`.
const POINTS_PER_WAVELENGTH: f64 = 10.0;

/// Resolution grows with `b` as `n = n_ref (b / b_ref)^n_exponent` and
/// `dt = dt_ref (b_ref / b)^dt_exponent` for the direct solver.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub b_list: Vec<f64>,
    /// Rescaled end time `T`; the direct solve runs to `T / b`.
    pub t_end: f64,
    pub dim: usize,
    pub length: f64,
    pub initial: InitialData,
    pub reference_b: f64,
    pub reference_n: usize,
    pub n_exponent: f64,
    pub reference_dt: f64,
    pub dt_exponent: f64,
    pub wkb_safety: f64,
    pub cn_tolerance: f64,
    /// Also run at half the points and twice the step.
    pub refinement_check: bool,
}

impl CompareConfig {
    /// Rounded up to a power of two.
    pub fn points_for(&self, b: f64) -> usize {
        let n = (self.reference_n as f64 * (b / self.reference_b).powf(self.n_exponent)).round() as usize;
        n.max(8).next_power_of_two()
    }

    pub fn dt_for(&self, b: f64) -> f64 {
        self.reference_dt * (self.reference_b / b).powf(self.dt_exponent)
    }

    pub fn validate(&self) -> Result<()> {
        if self.b_list.is_empty() || self.b_list.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(Error::invalid("b_list must hold positive finite values"));
        }
        if !(self.t_end > 0.0) || !(self.length > 0.0) || !(self.reference_b > 0.0) || !(self.reference_dt > 0.0) {
            return Err(Error::invalid("t_end, length, reference_b and reference_dt must be positive"));
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::invalid("dim must be 1 or 2"));
        }
        self.initial.amplitude.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub b: f64,
    pub n: usize,
    pub dt_direct: f64,
    pub wkb_steps: usize,
    pub wkb_max_dt: f64,
    /// `‖u_direct - u_wkb‖_{L²} / ‖u₀‖_{L²}` at `s = T / b`.
    pub discrepancy: f64,
    pub max_defect: f64,
    pub coarse_n: Option<usize>,
    pub coarse_discrepancy: Option<f64>,
    /// `coarse_discrepancy / discrepancy`.
    pub refinement_ratio: Option<f64>,
    pub status: String,
}

struct CaseResult {
    discrepancy: f64,
    max_defect: f64,
    wkb_steps: usize,
    wkb_max_dt: f64,
    status: String,
}

fn run_case(
    cfg: &CompareConfig,
    potential: &PotentialSpec,
    nonlinearity: &NonlinearitySpec,
    b: f64,
    n: usize,
    dt: f64,
) -> Result<CaseResult> {
    let grid = Grid::new(cfg.dim, n, cfg.length)?;
    let a0 = cfg.initial.amplitude.sample(&grid);
    let state = wkb_init(&a0, &cfg.initial.phase, potential, b)?;
    let required =
        (POINTS_PER_WAVELENGTH * cfg.length * b * state.v.max_norm() / (2.0 * std::f64::consts::PI)).ceil() as usize;
    if n < required {
        return Err(Error::ResolutionInsufficient { points: n, required });
    }

    let u0 = cfg.initial.field(&grid, b)?;
    let direct_cfg = SolverConfig { cn_tolerance: cfg.cn_tolerance, ..SolverConfig::new(b, dt, cfg.t_end / b) };
    let direct = solve(&u0, potential, nonlinearity, &direct_cfg)?;

    let wkb_cfg = WkbConfig {
        time_step: TimeStep::Cfl { safety: cfg.wkb_safety },
        ..WkbConfig::new(b, cfg.t_end, a0, cfg.initial.phase.clone())
    };
    let traj = wkb_solve(&wkb_cfg, potential, nonlinearity)?;
    let wkb_steps = traj.records.len() - 1;
    let wkb_max_dt = traj.max_dt();
    if let WkbStatus::ShockAborted { t, .. } = traj.status {
        return Ok(CaseResult {
            discrepancy: f64::NAN,
            max_defect: f64::NAN,
            wkb_steps,
            wkb_max_dt,
            status: format!("shock_aborted@{t:e}"),
        });
    }
    let rec = reconstruct(&traj, &cfg.initial.phase, potential, b)?;
    let diff = direct.final_state.field.sub(rec.final_field())?;
    Ok(CaseResult {
        discrepancy: l2_norm(&diff) / l2_norm(&u0),
        max_defect: rec.max_defect,
        wkb_steps,
        wkb_max_dt,
        status: if rec.warning.is_some() { "defect_warning".into() } else { "ok".into() },
    })
}

/// Runs the direct solver and WKB reconstruction for every `b` in the list.
///
/// Requires a defocusing nonlinearity with `γ = 2` (or none), so that the
/// rescaled equation is the one the WKB system solves.
pub fn compare_to_direct(
    cfg: &CompareConfig,
    potential: &PotentialSpec,
    nonlinearity: &NonlinearitySpec,
) -> Result<Vec<CompareRow>> {
    cfg.validate()?;
    check_periodic(potential, &cfg.initial.phase)?;
    if !nonlinearity.is_linear() && (nonlinearity.sign != 1.0 || nonlinearity.gamma != 2.0) {
        return Err(Error::invalid("compare needs sign = +1 and gamma = 2"));
    }
    cfg.b_list
        .par_iter()
        .map(|&b| {
            let (n, dt) = (cfg.points_for(b), cfg.dt_for(b));
            let fine = run_case(cfg, potential, nonlinearity, b, n, dt)?;
            let coarse = if cfg.refinement_check {
                Some((n / 2, run_case(cfg, potential, nonlinearity, b, n / 2, 2.0 * dt)?.discrepancy))
            } else {
                None
            };
            Ok(CompareRow {
                b,
                n,
                dt_direct: dt,
                wkb_steps: fine.wkb_steps,
                wkb_max_dt: fine.wkb_max_dt,
                discrepancy: fine.discrepancy,
                max_defect: fine.max_defect,
                coarse_n: coarse.map(|c| c.0),
                coarse_discrepancy: coarse.map(|c| c.1),
                refinement_ratio: coarse.map(|c| c.1 / fine.discrepancy),
                status: fine.status,
            })
        })
        .collect()
}

/// Least-squares slope of `log discrepancy` against `log b`.
pub fn b_trend(rows: &[CompareRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.b.ln(), r.discrepancy.ln())).collect();
    log_slope(&pts)
}

pub(crate) fn log_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}
