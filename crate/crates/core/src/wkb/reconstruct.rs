use serde::Serialize;

use super::WkbTrajectory;
use crate::error::{Error, Result};
use crate::field::{ComplexField, Spectral};
use crate::initial::PhaseProfile;
use crate::potential::PotentialSpec;

/// Defect level above which [`Reconstruction::warning`] is set.
pub const DEFECT_WARNING: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructedFrame {
    pub rescaled_time: f64,
    /// Physical time `s = t / b`.
    pub time: f64,
    pub field: ComplexField,
    /// `‖∇S - ∇Φ + A(ht) - v‖_{L²}`.
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionSummary {
    pub frames: usize,
    pub max_defect: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub frames: Vec<ReconstructedFrame>,
    pub max_defect: f64,
    pub warning: Option<String>,
}

impl Reconstruction {
    pub fn final_field(&self) -> &ComplexField {
        &self.frames.last().expect("at least one frame").field
    }

    pub fn summary(&self) -> ReconstructionSummary {
        ReconstructionSummary { frames: self.frames.len(), max_defect: self.max_defect, warning: self.warning.clone() }
    }
}

/// `u(t/b) = α(t) e^{ib(S - Φ(t))}` for every stored frame, with the
/// consistency defect of `v` against the reconstructed phase.
pub fn reconstruct(
    trajectory: &WkbTrajectory,
    phase: &PhaseProfile,
    potential: &PotentialSpec,
    b: f64,
) -> Result<Reconstruction> {
    if !(trajectory.h > 0.0) {
        return Err(Error::invalid("reconstruction needs h > 0"));
    }
    if ((b * trajectory.h) - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("b = {b} does not match the trajectory's h = {}", trajectory.h)));
    }
    let grid = trajectory.grid;
    let s = phase.values(&grid)?;
    let grad_s = phase.gradient(&grid)?;
    let spectral = Spectral::new(grid);
    let w = grid.cell_volume();

    let mut frames = Vec::with_capacity(trajectory.frames.len());
    let mut max_defect: f64 = 0.0;
    for frame in &trajectory.frames {
        let t = frame.state.t;
        let big_phi = frame.phase_integral.values();
        let theta: Vec<f64> = s.iter().zip(big_phi).map(|(s, p)| b * (s - p)).collect();
        let field = frame.state.alpha().with_phase(&theta)?;

        let grad_phi = spectral.gradient_real(big_phi);
        let a = potential.eval_a(trajectory.h * t, &grid)?;
        let mut sq = 0.0;
        for axis in 0..grid.dim() {
            let v = frame.state.v.component(axis);
            let ak = a.component(axis);
            for i in 0..grid.len() {
                let d = grad_s[axis][i] - grad_phi[axis][i] + ak[i] - v[i];
                sq += d * d;
            }
        }
        let defect = (sq * w).sqrt();
        max_defect = max_defect.max(defect);
        frames.push(ReconstructedFrame { rescaled_time: t, time: t / b, field, defect });
    }
    let warning = (max_defect > DEFECT_WARNING)
        .then(|| format!("reconstruction defect {max_defect:.3e} exceeds {DEFECT_WARNING:.0e}; refine dt or the grid"));
    Ok(Reconstruction { frames, max_defect, warning })
}
