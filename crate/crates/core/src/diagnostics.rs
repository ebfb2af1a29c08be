//! Per-step diagnostics, the energy-law ledger for time-dependent potentials,
//! mixed space-time norms and CSV output.
//!
//! With `K(t, u) = ½ ∫ |(i∇ - bA(t)) u|²`, the exact flow satisfies
//! `E(t) - E(0) = ∫ ∂_t K|_u ds`. The correction integral stored here is
//! `∫ b Re⟨∂_t A u, (i∇ - bA) u⟩ ds = -∫ ∂_t K|_u ds`, so the residual
//! `E(t) - E(0) + correction` vanishes for the exact solution.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{boundary_leakage, h1mg_norm, kinetic_energy, kinetic_link_derivative, l2_norm, lp_norm, max_abs};
use crate::field::{ComplexField, LinkField};
use crate::nonlinearity::NonlinearitySpec;
use crate::potential::PotentialSpec;
use crate::propagator::Snapshot;

pub const CSV_COLUMNS: [&str; 11] = [
    "step",
    "time",
    "mass",
    "kinetic",
    "nl_energy",
    "energy",
    "correction_integral",
    "energy_law_residual",
    "h1mg_norm",
    "max_abs",
    "boundary_leakage",
];

/// One diagnostics row. `mass` is the `L²` norm, `nl_energy` is the signed
/// term `sign b^γ G(u)` so that `energy = kinetic + nl_energy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    pub kinetic: f64,
    pub nl_energy: f64,
    pub energy: f64,
    pub correction_integral: f64,
    pub energy_law_residual: f64,
    pub h1mg_norm: f64,
    pub max_abs: f64,
    pub boundary_leakage: f64,
}

impl DiagnosticsRecord {
    fn fields(&self) -> [String; 11] {
        let f = |x: f64| format!("{x:e}");
        [
            self.step.to_string(),
            f(self.time),
            f(self.mass),
            f(self.kinetic),
            f(self.nl_energy),
            f(self.energy),
            f(self.correction_integral),
            f(self.energy_law_residual),
            f(self.h1mg_norm),
            f(self.max_abs),
            f(self.boundary_leakage),
        ]
    }
}

/// Energy pieces and norms of `u` for one link snapshot.
pub struct Measurement {
    pub mass: f64,
    pub kinetic: f64,
    pub nl_energy: f64,
    pub h1mg_norm: f64,
    pub max_abs: f64,
    pub boundary_leakage: f64,
}

impl Measurement {
    pub fn of(u: &ComplexField, links: &LinkField, nonlinearity: &NonlinearitySpec, b: f64) -> Result<Self> {
        Ok(Measurement {
            mass: l2_norm(u),
            kinetic: kinetic_energy(u, links, b)?,
            nl_energy: nonlinearity.coupling(b) * nonlinearity.eval_G(u),
            h1mg_norm: h1mg_norm(u, links, b)?,
            max_abs: max_abs(u),
            boundary_leakage: boundary_leakage(u),
        })
    }

    /// Same, with `G_m` in the nonlinear term.
    pub fn of_truncated(
        u: &ComplexField,
        links: &LinkField,
        nonlinearity: &NonlinearitySpec,
        b: f64,
        m: f64,
    ) -> Result<Self> {
        let mut out = Self::of(u, links, nonlinearity, b)?;
        out.nl_energy = nonlinearity.coupling(b) * nonlinearity.eval_Gm(u, m)?;
        Ok(out)
    }

    pub fn energy(&self) -> f64 {
        self.kinetic + self.nl_energy
    }
}

/// `b Re⟨∂_t A u, (i∇ - bA) u⟩` at time `t`, in link form; zero for static potentials.
pub fn correction_integrand(u: &ComplexField, potential: &PotentialSpec, t: f64, b: f64) -> Result<f64> {
    if potential.is_static() {
        return Ok(0.0);
    }
    let grid = u.grid();
    Ok(-kinetic_link_derivative(u, &potential.links(t, grid)?, &potential.links_dt(t, grid)?, b)?)
}

#[derive(Debug, Clone, Default)]
pub struct DiagnosticsSeries {
    records: Vec<DiagnosticsRecord>,
    initial_energy: Option<f64>,
    correction: f64,
    /// Integrand at the last ledger time, reused by the next trapezoid panel.
    last_integrand: Option<(f64, f64)>,
}

impl DiagnosticsSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[DiagnosticsRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&DiagnosticsRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn correction_integral(&self) -> f64 {
        self.correction
    }

    pub fn initial_energy(&self) -> Option<f64> {
        self.initial_energy
    }

    /// Appends a row built from `m` and the current ledger state.
    pub fn record(&mut self, step: usize, time: f64, m: &Measurement) -> Result<&DiagnosticsRecord> {
        if let Some(last) = self.records.last() {
            if !(time > last.time) {
                return Err(Error::invalid(format!("diagnostics times must increase: {time} after {}", last.time)));
            }
        }
        let energy = m.energy();
        let e0 = *self.initial_energy.get_or_insert(energy);
        self.records.push(DiagnosticsRecord {
            step,
            time,
            mass: m.mass,
            kinetic: m.kinetic,
            nl_energy: m.nl_energy,
            energy,
            correction_integral: self.correction,
            energy_law_residual: energy - e0 + self.correction,
            h1mg_norm: m.h1mg_norm,
            max_abs: m.max_abs,
            boundary_leakage: m.boundary_leakage,
        });
        Ok(self.records.last().expect("just pushed"))
    }

    /// Adds one trapezoid panel `[t0, t1]` to the correction integral.
    pub(crate) fn advance_correction(&mut self, t0: f64, integrand0: f64, t1: f64, integrand1: f64) {
        self.correction += 0.5 * (t1 - t0) * (integrand0 + integrand1);
        self.last_integrand = Some((t1, integrand1));
    }

    /// Adds a lump sum to the correction (window jumps of the piecewise ladder).
    pub(crate) fn add_correction(&mut self, c: f64) {
        self.correction += c;
    }

    pub(crate) fn cached_integrand(&self, t: f64) -> Option<f64> {
        match self.last_integrand {
            Some((s, v)) if s == t => Some(v),
            _ => None,
        }
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.records.iter().map(|r| r.energy_law_residual.abs()).fold(0.0, f64::max)
    }

    /// `max_t |mass(t) - mass(0)| / mass(0)`; zero for zero data.
    pub fn relative_mass_drift(&self) -> f64 {
        let Some(first) = self.records.first() else { return 0.0 };
        if first.mass == 0.0 {
            return 0.0;
        }
        self.records.iter().map(|r| (r.mass - first.mass).abs() / first.mass).fold(0.0, f64::max)
    }

    /// `max_t |E(t) - E(0)|`.
    pub fn max_energy_deviation(&self) -> f64 {
        let Some(first) = self.records.first() else { return 0.0 };
        self.records.iter().map(|r| (r.energy - first.energy).abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_COLUMNS)?;
        for r in &self.records {
            out.write_record(r.fields())?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Advances the ledger from `(t, u_prev)` to `(t + dt, u_next)` and records `u_next`.
///
/// The first call also records `u_prev` as step 0. The correction integrand is
/// evaluated at both endpoints (trapezoid rule), reusing the cached value at `t`.
#[allow(clippy::too_many_arguments)]
pub fn update_ledger(
    series: &mut DiagnosticsSeries,
    u_prev: &ComplexField,
    u_next: &ComplexField,
    potential: &PotentialSpec,
    nonlinearity: &NonlinearitySpec,
    t: f64,
    dt: f64,
    b: f64,
) -> Result<()> {
    let grid = *u_prev.grid();
    if series.is_empty() {
        let m = Measurement::of(u_prev, &potential.links(t, &grid)?, nonlinearity, b)?;
        series.record(0, t, &m)?;
    }
    let i0 = match series.cached_integrand(t) {
        Some(v) => v,
        None => correction_integrand(u_prev, potential, t, b)?,
    };
    let i1 = correction_integrand(u_next, potential, t + dt, b)?;
    series.advance_correction(t, i0, t + dt, i1);
    let step = series.last().map_or(0, |r| r.step) + 1;
    let m = Measurement::of(u_next, &potential.links(t + dt, &grid)?, nonlinearity, b)?;
    series.record(step, t + dt, &m)?;
    Ok(())
}

/// `‖u‖_{L^q(I, L^r)}` over the snapshot times, trapezoid rule in time.
pub fn mixed_norm(trajectory: &[Snapshot], q: f64, r: f64) -> Result<f64> {
    if trajectory.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if !(r >= 2.0) || q.is_nan() || q < 1.0 {
        return Err(Error::invalid(format!("mixed_norm needs q >= 1 and r >= 2, got q={q} r={r}")));
    }
    let spatial: Vec<f64> = trajectory.iter().map(|s| lp_norm(&s.field, r)).collect::<Result<_>>()?;
    if q.is_infinite() {
        return Ok(spatial.iter().copied().fold(0.0, f64::max));
    }
    let mut acc = 0.0;
    for k in 1..trajectory.len() {
        let dt = trajectory[k].time - trajectory[k - 1].time;
        if !(dt > 0.0) {
            return Err(Error::invalid("snapshot times must increase"));
        }
        acc += 0.5 * dt * (spatial[k - 1].powf(q) + spatial[k].powf(q));
    }
    Ok(acc.powf(1.0 / q))
}

/// Admissible Strichartz partner `q` of `r` in dimension `dim`: `2/q = dim (½ - 1/r)`.
pub fn admissible_q(dim: usize, r: f64) -> f64 {
    2.0 / (dim as f64 * (0.5 - 1.0 / r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;
    use crate::potential::Modulation;
    use num_complex::Complex64;

    fn snap(time: f64, field: ComplexField) -> Snapshot {
        Snapshot { step: 0, time, field }
    }

    #[test]
    fn static_potential_has_no_correction() {
        let g = Grid::new(2, 16, 8.0).unwrap();
        let p = PotentialSpec::constant_field(1.0);
        let u = ComplexField::from_fn(g, |x| Complex64::new((-(x[0] * x[0] + x[1] * x[1])).exp(), 0.0));
        let v = u.scale(Complex64::new(0.0, 1.0));
        let mut s = DiagnosticsSeries::new();
        let nl = NonlinearitySpec::cubic(1.0, 0.0);
        update_ledger(&mut s, &u, &v, &p, &nl, 0.0, 0.1, 2.0).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.records()[0].energy_law_residual, 0.0);
        assert_eq!(s.records()[1].correction_integral, 0.0);
        let r = s.records()[1];
        assert!((r.energy_law_residual - (r.energy - s.records()[0].energy)).abs() < 1e-15);
    }

    #[test]
    fn zero_field_gives_zero_rows() {
        let g = Grid::new(1, 16, 8.0).unwrap();
        let z = ComplexField::zeros(g);
        let p = PotentialSpec::zero().with_modulation(Modulation::Sinusoidal { amplitude: 1.0, frequency: 1.0 });
        let mut s = DiagnosticsSeries::new();
        update_ledger(&mut s, &z, &z, &p, &NonlinearitySpec::cubic(1.0, 0.0), 0.0, 0.5, 1.0).unwrap();
        for r in s.records() {
            let f = [
                r.mass,
                r.kinetic,
                r.nl_energy,
                r.energy,
                r.correction_integral,
                r.energy_law_residual,
                r.h1mg_norm,
                r.max_abs,
                r.boundary_leakage,
            ];
            assert!(f.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn csv_header_and_row_count() {
        let g = Grid::new(1, 16, 8.0).unwrap();
        let u = ComplexField::from_fn(g, |x| Complex64::new((-x[0] * x[0]).exp(), 0.0));
        let mut s = DiagnosticsSeries::new();
        update_ledger(&mut s, &u, &u, &PotentialSpec::zero(), &NonlinearitySpec::linear(), 0.0, 0.1, 1.0).unwrap();
        let mut out = Vec::new();
        s.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        assert_eq!(lines.count(), 2);
    }

    #[test]
    fn times_must_increase() {
        let g = Grid::new(1, 16, 8.0).unwrap();
        let m =
            Measurement::of(&ComplexField::zeros(g), &LinkField::zeros(g), &NonlinearitySpec::linear(), 1.0).unwrap();
        let mut s = DiagnosticsSeries::new();
        s.record(0, 1.0, &m).unwrap();
        assert!(s.record(1, 1.0, &m).is_err());
    }

    #[test]
    fn mixed_norm_of_constant_trajectory() {
        let g = Grid::new(1, 32, 4.0).unwrap();
        let u = ComplexField::from_fn(g, |x| Complex64::new((-x[0] * x[0]).exp(), 0.5));
        let traj: Vec<Snapshot> = (0..5).map(|k| snap(0.25 * k as f64, u.clone())).collect();
        let r = 4.0;
        let lr = lp_norm(&u, r).unwrap();
        for q in [2.0, 8.0] {
            let expected = 1.0f64.powf(1.0 / q) * lr;
            assert!((mixed_norm(&traj, q, r).unwrap() - expected).abs() < 1e-12);
        }
        assert_eq!(mixed_norm(&traj, f64::INFINITY, r).unwrap(), lr);
        assert!(matches!(mixed_norm(&[], 2.0, 2.0), Err(Error::EmptyTrajectory)));
    }

    #[test]
    fn admissible_pairs() {
        assert_eq!(admissible_q(1, f64::INFINITY), 4.0);
        assert!((admissible_q(2, 4.0) - 4.0).abs() < 1e-15);
    }
}
