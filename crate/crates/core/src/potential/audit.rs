//! Sampled check of the potential bounds on a finite window.
//!
//! Spatial derivatives are centred differences on interior nodes (the
//! periodic seam is skipped, since the linear gauges jump there); time
//! derivatives are closed form. Nothing here certifies a bound on the whole
//! space: the numbers are suprema over the samples only.

use serde::{Deserialize, Serialize};

use super::PotentialSpec;
use crate::error::{Error, Result};
use crate::field::Grid;

/// Budgets `C_α` the sampled suprema are compared against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditBounds {
    pub dta: f64,
    pub dxa: f64,
    pub weighted_dxb: f64,
}

impl Default for AuditBounds {
    fn default() -> Self {
        AuditBounds { dta: 1e3, dxa: 1e3, weighted_dxb: 1e3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialAudit {
    pub time_window: [f64; 2],
    pub time_samples: usize,
    pub order: usize,
    /// `m_A = sup |∂_t A|`.
    pub sup_dta: f64,
    /// `sup |∂_x^α ∂_t A|` for `|α| = 1, 2` (entries beyond `order` are zero).
    pub sup_dx_dta: [f64; 2],
    /// `sup |∂_x^α A|` for `|α| = 1, 2`.
    pub sup_dxa: [f64; 2],
    /// `sup ⟨x⟩^{1+ε} |∂_x^α B|` over `1 <= |α| <= order`.
    pub sup_weighted_dxb: f64,
    pub pass_dta: bool,
    pub pass_dxa: bool,
    pub pass_weighted_dxb: bool,
}

impl PotentialAudit {
    pub fn pass(&self) -> bool {
        self.pass_dta && self.pass_dxa && self.pass_weighted_dxb
    }
}

/// Largest magnitude of all centred partial derivatives of order `k`
/// of a nodal scalar, over nodes at least `k` away from the seam.
fn sup_derivatives(grid: &Grid, f: &[f64], k: usize, weight: &dyn Fn([f64; 2]) -> f64) -> f64 {
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let interior = |i: usize| i >= k && i + k < n;
    let at = |ix: [usize; 2]| f[grid.flatten(ix)];
    let mut sup = 0.0f64;
    for idx in 0..grid.len() {
        let [i, j] = grid.unflatten(idx);
        if !interior(i) || (grid.dim() == 2 && !interior(j)) {
            continue;
        }
        let mut vals = Vec::with_capacity(3);
        let step = |ix: [usize; 2], axis: usize, d: isize| {
            let mut o = ix;
            o[axis] = (o[axis] as isize + d) as usize;
            o
        };
        for axis in 0..grid.dim() {
            let p = step([i, j], axis, 1);
            let m = step([i, j], axis, -1);
            match k {
                1 => vals.push((at(p) - at(m)) / (2.0 * h)),
                2 => vals.push((at(p) - 2.0 * at([i, j]) + at(m)) / (h * h)),
                _ => unreachable!("audit order is 1 or 2"),
            }
        }
        if k == 2 && grid.dim() == 2 {
            let c = |dx: isize, dy: isize| at(step(step([i, j], 0, dx), 1, dy));
            vals.push((c(1, 1) - c(1, -1) - c(-1, 1) + c(-1, -1)) / (4.0 * h * h));
        }
        let w = weight(grid.coords(idx));
        for v in vals {
            sup = sup.max(w * v.abs());
        }
    }
    sup
}

/// Samples the bounds on `grid` at `time_samples` uniform times in `window`.
pub fn audit_potential_bounds(
    spec: &PotentialSpec,
    grid: &Grid,
    window: [f64; 2],
    time_samples: usize,
    order: usize,
    bounds: &AuditBounds,
) -> Result<PotentialAudit> {
    if !(1..=2).contains(&order) {
        return Err(Error::invalid(format!("audit order must be 1 or 2, got {order}")));
    }
    if time_samples == 0 || !(window[0] <= window[1]) {
        return Err(Error::invalid("audit needs a nonempty time window and at least one sample"));
    }
    spec.validate(grid)?;
    let unit = |_: [f64; 2]| 1.0;
    let eps = spec.epsilon_decay;
    let bracket = move |x: [f64; 2]| (1.0 + x[0] * x[0] + x[1] * x[1]).sqrt().powf(1.0 + eps);

    let mut out = PotentialAudit {
        time_window: window,
        time_samples,
        order,
        sup_dta: 0.0,
        sup_dx_dta: [0.0; 2],
        sup_dxa: [0.0; 2],
        sup_weighted_dxb: 0.0,
        pass_dta: true,
        pass_dxa: true,
        pass_weighted_dxb: true,
    };
    for s in 0..time_samples {
        let t = if time_samples == 1 {
            window[0]
        } else {
            window[0] + (window[1] - window[0]) * s as f64 / (time_samples - 1) as f64
        };
        let dta = spec.eval_dta(t, grid)?;
        out.sup_dta = out.sup_dta.max(dta.max_norm());
        let a = spec.eval_a(t, grid)?;
        for k in 1..=order {
            for c in 0..grid.dim() {
                out.sup_dx_dta[k - 1] = out.sup_dx_dta[k - 1].max(sup_derivatives(grid, dta.component(c), k, &unit));
                out.sup_dxa[k - 1] = out.sup_dxa[k - 1].max(sup_derivatives(grid, a.component(c), k, &unit));
            }
            if grid.dim() == 2 {
                let b = spec.eval_b(t, grid)?;
                out.sup_weighted_dxb = out.sup_weighted_dxb.max(sup_derivatives(grid, b.values(), k, &bracket));
            }
        }
    }
    out.pass_dta = out.sup_dta.max(out.sup_dx_dta[0]).max(out.sup_dx_dta[1]) <= bounds.dta;
    out.pass_dxa = out.sup_dxa[0].max(out.sup_dxa[1]) <= bounds.dxa;
    out.pass_weighted_dxb = out.sup_weighted_dxb <= bounds.weighted_dxb;
    Ok(out)
}
