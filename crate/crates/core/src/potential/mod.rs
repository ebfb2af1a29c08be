//! Analytic magnetic potentials `A(t, x) = m(t) A_base(x) + ∇χ(x)`.
//!
//! `m(t)` is the time modulation, `A_base` one of the supported shapes and
//! `χ` an optional static gauge function. Time derivatives, the field `B` and
//! the correction `W(t, t')` are all closed form.

mod audit;

pub use audit::{audit_potential_bounds, AuditBounds, PotentialAudit};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, LinkField, RealField, RealVectorField, Spectral};

/// Gaussian bump `amplitude · exp(-|x - center|² / width²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub width: f64,
    pub center: [f64; 2],
}

impl Bump {
    #[inline]
    pub fn value(&self, x: [f64; 2]) -> f64 {
        let r2 = (x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2);
        self.amplitude * (-r2 / (self.width * self.width)).exp()
    }

    #[inline]
    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let v = self.value(x);
        let w2 = self.width * self.width;
        [-2.0 * (x[0] - self.center[0]) / w2 * v, -2.0 * (x[1] - self.center[1]) / w2 * v]
    }

    fn validate(&self) -> Result<()> {
        if !(self.width > 0.0 && self.width.is_finite()) || !self.amplitude.is_finite() {
            return Err(Error::invalid("bump width must be positive and amplitude finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    Zero,
    /// Symmetric gauge `A = (-B₀ y/2, B₀ x/2)`.
    ConstantField {
        b0: f64,
    },
    /// Symmetric gauge plus a localized rotational bump `ψ(x)(-(y-c_y), x-c_x)/2`,
    /// whose curl is `ψ (1 - r²/w²)`.
    LinearPlusBump {
        b0: f64,
        bump: Bump,
    },
    /// Node samples of a periodic potential; links use the trapezoid rule.
    Tabulated(RealVectorField),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Modulation {
    None,
    /// `m(t) = 1 + amplitude · sin(frequency · t)`.
    Sinusoidal {
        amplitude: f64,
        frequency: f64,
    },
}

impl Modulation {
    #[inline]
    pub fn factor(&self, t: f64) -> f64 {
        match *self {
            Modulation::None => 1.0,
            Modulation::Sinusoidal { amplitude, frequency } => 1.0 + amplitude * (frequency * t).sin(),
        }
    }

    #[inline]
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            Modulation::None => 0.0,
            Modulation::Sinusoidal { amplitude, frequency } => amplitude * frequency * (frequency * t).cos(),
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, Modulation::None)
    }
}

/// Static gauge function `χ`; adds `∇χ` to `A` without changing `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gauge {
    None,
    Bump(Bump),
    /// `χ = coefficient · x y` (2D only).
    Bilinear {
        coefficient: f64,
    },
}

impl Gauge {
    #[inline]
    pub fn value(&self, x: [f64; 2]) -> f64 {
        match *self {
            Gauge::None => 0.0,
            Gauge::Bump(b) => b.value(x),
            Gauge::Bilinear { coefficient } => coefficient * x[0] * x[1],
        }
    }

    #[inline]
    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        match *self {
            Gauge::None => [0.0, 0.0],
            Gauge::Bump(b) => b.gradient(x),
            Gauge::Bilinear { coefficient } => [coefficient * x[1], coefficient * x[0]],
        }
    }

    /// Node samples of `χ`.
    pub fn sample(&self, grid: &Grid) -> RealField {
        RealField::from_fn(*grid, |x| self.value(x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub modulation: Modulation,
    pub gauge: Gauge,
    /// Decay exponent `ε` used by the weighted-`B` audit clause.
    pub epsilon_decay: f64,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec {
            kind: PotentialKind::Zero,
            modulation: Modulation::None,
            gauge: Gauge::None,
            epsilon_decay: 1.0,
        }
    }

    pub fn constant_field(b0: f64) -> Self {
        PotentialSpec { kind: PotentialKind::ConstantField { b0 }, ..Self::zero() }
    }

    pub fn with_modulation(mut self, modulation: Modulation) -> Self {
        self.modulation = modulation;
        self
    }

    pub fn with_gauge(mut self, gauge: Gauge) -> Self {
        self.gauge = gauge;
        self
    }

    pub fn is_static(&self) -> bool {
        self.modulation.is_static()
    }

    /// Checks the spec against a grid dimension.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.epsilon_decay > 0.0) {
            return Err(Error::invalid("epsilon_decay must be positive"));
        }
        match &self.kind {
            PotentialKind::Zero => {}
            PotentialKind::ConstantField { b0 } => {
                if grid.dim() != 2 {
                    return Err(Error::invalid("constant_field requires a 2D grid"));
                }
                if !b0.is_finite() {
                    return Err(Error::invalid("B0 must be finite"));
                }
            }
            PotentialKind::LinearPlusBump { b0, bump } => {
                if grid.dim() != 2 {
                    return Err(Error::invalid("linear_plus_bump requires a 2D grid"));
                }
                if !b0.is_finite() {
                    return Err(Error::invalid("B0 must be finite"));
                }
                bump.validate()?;
            }
            PotentialKind::Tabulated(a) => grid.check_same(a.grid())?,
        }
        match self.gauge {
            Gauge::Bilinear { .. } if grid.dim() != 2 => {
                return Err(Error::invalid("bilinear gauge requires a 2D grid"));
            }
            Gauge::Bump(b) => b.validate()?,
            _ => {}
        }
        if let Modulation::Sinusoidal { amplitude, frequency } = self.modulation {
            if !amplitude.is_finite() || !frequency.is_finite() {
                return Err(Error::invalid("modulation parameters must be finite"));
            }
        }
        Ok(())
    }

    /// `A_base` at a point, for the analytic kinds.
    #[inline]
    fn base_at(&self, x: [f64; 2]) -> [f64; 2] {
        match &self.kind {
            PotentialKind::Zero | PotentialKind::Tabulated(_) => [0.0, 0.0],
            PotentialKind::ConstantField { b0 } => [-0.5 * b0 * x[1], 0.5 * b0 * x[0]],
            PotentialKind::LinearPlusBump { b0, bump } => {
                let psi = bump.value(x);
                [
                    -0.5 * b0 * x[1] - 0.5 * psi * (x[1] - bump.center[1]),
                    0.5 * b0 * x[0] + 0.5 * psi * (x[0] - bump.center[0]),
                ]
            }
        }
    }

    fn base_curl_at(&self, x: [f64; 2]) -> f64 {
        match &self.kind {
            PotentialKind::Zero | PotentialKind::Tabulated(_) => 0.0,
            PotentialKind::ConstantField { b0 } => *b0,
            PotentialKind::LinearPlusBump { b0, bump } => {
                let r2 = (x[0] - bump.center[0]).powi(2) + (x[1] - bump.center[1]).powi(2);
                b0 + bump.value(x) * (1.0 - r2 / (bump.width * bump.width))
            }
        }
    }

    fn base_sampled(&self, grid: &Grid) -> Result<RealVectorField> {
        match &self.kind {
            PotentialKind::Tabulated(a) => {
                grid.check_same(a.grid())?;
                Ok(a.clone())
            }
            _ => Ok(RealVectorField::from_fn(*grid, |x| self.base_at(x))),
        }
    }

    /// `A(t, ·)` on the grid nodes.
    pub fn eval_a(&self, t: f64, grid: &Grid) -> Result<RealVectorField> {
        self.validate(grid)?;
        let m = self.modulation.factor(t);
        let base = self.base_sampled(grid)?;
        let comps = base
            .into_components()
            .into_iter()
            .enumerate()
            .map(|(axis, c)| {
                c.into_iter().enumerate().map(|(i, v)| m * v + self.gauge.gradient(grid.coords(i))[axis]).collect()
            })
            .collect();
        RealVectorField::new(*grid, comps)
    }

    /// `∂_t A(t, ·)`, closed form.
    pub fn eval_dta(&self, t: f64, grid: &Grid) -> Result<RealVectorField> {
        self.validate(grid)?;
        let rate = self.modulation.rate(t);
        let base = self.base_sampled(grid)?;
        RealVectorField::new(
            *grid,
            base.into_components().into_iter().map(|c| c.into_iter().map(|v| rate * v).collect()).collect(),
        )
    }

    /// `W(t, t2) = ∫_t^{t2} ∂_s A ds = (m(t2) - m(t)) A_base`.
    pub fn eval_w(&self, t: f64, t2: f64, grid: &Grid) -> Result<RealVectorField> {
        if t2 < t {
            return Err(Error::invalid(format!("eval_w requires t <= t2, got {t} > {t2}")));
        }
        self.validate(grid)?;
        let dm = if t == t2 { 0.0 } else { self.modulation.factor(t2) - self.modulation.factor(t) };
        let base = self.base_sampled(grid)?;
        RealVectorField::new(
            *grid,
            base.into_components().into_iter().map(|c| c.into_iter().map(|v| dm * v).collect()).collect(),
        )
    }

    /// `B_12 = ∂_x A_y - ∂_y A_x` at the nodes; identically zero in 1D.
    pub fn eval_b(&self, t: f64, grid: &Grid) -> Result<RealField> {
        self.validate(grid)?;
        if grid.dim() == 1 {
            return RealField::new(*grid, vec![0.0; grid.len()]);
        }
        let m = self.modulation.factor(t);
        match &self.kind {
            PotentialKind::Tabulated(a) => {
                let sp = Spectral::new(*grid);
                let dyx = sp.gradient_real(a.component(1));
                let dxy = sp.gradient_real(a.component(0));
                let vals = (0..grid.len()).map(|i| m * (dyx[0][i] - dxy[1][i])).collect();
                RealField::new(*grid, vals)
            }
            _ => Ok(RealField::from_fn(*grid, |x| m * self.base_curl_at(x))),
        }
    }

    /// Link integrals of `A(t)` on every forward edge.
    ///
    /// The modulated part uses the midpoint rule (exact for the linear
    /// shapes) or the trapezoid rule for tabulated data; the gauge part is the
    /// exact difference `χ(next) - χ(node)`.
    pub fn links(&self, t: f64, grid: &Grid) -> Result<LinkField> {
        self.validate(grid)?;
        self.link_angles(grid, self.modulation.factor(t), true)
    }

    /// Time derivative of [`links`](Self::links).
    pub fn links_dt(&self, t: f64, grid: &Grid) -> Result<LinkField> {
        self.validate(grid)?;
        self.link_angles(grid, self.modulation.rate(t), false)
    }

    fn link_angles(&self, grid: &Grid, factor: f64, with_gauge: bool) -> Result<LinkField> {
        let h = grid.spacing();
        let chi = match (with_gauge, self.gauge) {
            (true, g) if g != Gauge::None => Some(g.sample(grid)),
            _ => None,
        };
        let mut angles = Vec::with_capacity(grid.dim());
        for axis in 0..grid.dim() {
            let mut a = Vec::with_capacity(grid.len());
            for i in 0..grid.len() {
                let next = grid.neighbor(i, axis, true);
                let base = match &self.kind {
                    PotentialKind::Zero => 0.0,
                    PotentialKind::Tabulated(tab) => {
                        let c = tab.component(axis);
                        0.5 * h * (c[i] + c[next])
                    }
                    _ => {
                        // Unwrapped midpoint, also across the periodic seam.
                        let mut mid = grid.coords(i);
                        mid[axis] += 0.5 * h;
                        h * self.base_at(mid)[axis]
                    }
                };
                let gauge = chi.as_ref().map_or(0.0, |c| c.values()[next] - c.values()[i]);
                a.push(factor * base + gauge);
            }
            angles.push(a);
        }
        LinkField::new(*grid, angles)
    }

    /// Gauge-transformed copy: `A → A + ∇χ_extra`. Only valid if the spec has no gauge yet.
    pub fn shifted_by(&self, gauge: Gauge) -> Result<Self> {
        if self.gauge != Gauge::None {
            return Err(Error::invalid("spec already carries a gauge function"));
        }
        Ok(self.clone().with_gauge(gauge))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g2() -> Grid {
        Grid::new(2, 32, 8.0).unwrap()
    }

    fn node_near(grid: &Grid, x: [f64; 2]) -> usize {
        let i = ((x[0] + 0.5 * grid.length()) / grid.spacing()).round() as usize;
        let j = ((x[1] + 0.5 * grid.length()) / grid.spacing()).round() as usize;
        grid.flatten([i, j])
    }

    #[test]
    fn zero_spec_is_zero_everywhere() {
        let g = g2();
        let z = PotentialSpec::zero();
        for t in [0.0, 1.3] {
            assert!(z.eval_a(t, &g).unwrap().components().iter().flatten().all(|&v| v == 0.0));
            assert!(z.eval_b(t, &g).unwrap().values().iter().all(|&v| v == 0.0));
            assert!(z.eval_dta(t, &g).unwrap().components().iter().flatten().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn symmetric_gauge_value_at_one_one() {
        let g = g2();
        let a = PotentialSpec::constant_field(2.0).eval_a(0.0, &g).unwrap();
        let idx = node_near(&g, [1.0, 1.0]);
        assert_eq!(g.coords(idx), [1.0, 1.0]);
        assert_eq!([a.component(0)[idx], a.component(1)[idx]], [-1.0, 1.0]);
    }

    #[test]
    fn constant_field_has_constant_curl() {
        let g = g2();
        let b = PotentialSpec::constant_field(1.7).eval_b(0.3, &g).unwrap();
        assert!(b.values().iter().all(|&v| v == 1.7));
    }

    #[test]
    fn sinusoidal_modulation_factors() {
        let g = g2();
        let spec = PotentialSpec::constant_field(1.0)
            .with_modulation(Modulation::Sinusoidal { amplitude: 1.0, frequency: 1.0 });
        let a0 = spec.eval_a(0.0, &g).unwrap();
        let a1 = spec.eval_a(std::f64::consts::FRAC_PI_2, &g).unwrap();
        for (x, y) in a0.component(0).iter().zip(a1.component(0)) {
            assert!((y - 2.0 * x).abs() < 1e-12);
        }
        // ∂_t A(0) = ω cos(0) A_base = A_base.
        let d = spec.eval_dta(0.0, &g).unwrap();
        assert_eq!(d, PotentialSpec::constant_field(1.0).eval_a(0.0, &g).unwrap());
    }

    #[test]
    fn static_spec_has_no_time_derivative_or_w() {
        let g = g2();
        let spec = PotentialSpec::constant_field(3.0);
        assert!(spec.eval_dta(2.0, &g).unwrap().components().iter().flatten().all(|&v| v == 0.0));
        assert!(spec.eval_w(0.0, 5.0, &g).unwrap().components().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn w_closed_form_and_identities() {
        let g = g2();
        let (a, w) = (0.7, 2.3);
        let spec =
            PotentialSpec::constant_field(1.0).with_modulation(Modulation::Sinusoidal { amplitude: a, frequency: w });
        let base = PotentialSpec::constant_field(1.0).eval_a(0.0, &g).unwrap();
        let (t, t2, t3) = (0.2, 0.9, 1.7);
        let wv = spec.eval_w(t, t2, &g).unwrap();
        let expected = a * ((w * t2).sin() - (w * t).sin());
        for (x, y) in wv.component(1).iter().zip(base.component(1)) {
            assert!((x - expected * y).abs() < 1e-12);
        }
        assert!(spec.eval_w(t, t, &g).unwrap().components().iter().flatten().all(|&v| v == 0.0));
        let w13 = spec.eval_w(t, t3, &g).unwrap();
        let w23 = spec.eval_w(t2, t3, &g).unwrap();
        for axis in 0..2 {
            for i in 0..g.len() {
                let sum = wv.component(axis)[i] + w23.component(axis)[i];
                assert!((w13.component(axis)[i] - sum).abs() < 1e-12);
            }
        }
        assert!(spec.eval_w(t2, t, &g).is_err());
    }

    #[test]
    fn w_matches_trapezoid_quadrature_of_dta() {
        // Oracle: composite trapezoid on ∂_t A with Richardson refinement.
        let g = Grid::new(2, 8, 4.0).unwrap();
        let spec = PotentialSpec::constant_field(1.3)
            .with_modulation(Modulation::Sinusoidal { amplitude: 0.4, frequency: 3.0 });
        let (t0, t1) = (0.1, 1.4);
        let trap = |steps: usize| {
            let dt = (t1 - t0) / steps as f64;
            let mut acc = vec![0.0; g.len()];
            for k in 0..=steps {
                let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
                let d = spec.eval_dta(t0 + k as f64 * dt, &g).unwrap();
                for (a, v) in acc.iter_mut().zip(d.component(0)) {
                    *a += w * dt * v;
                }
            }
            acc
        };
        let (c, f) = (trap(2000), trap(4000));
        let w = spec.eval_w(t0, t1, &g).unwrap();
        for i in 0..g.len() {
            let richardson = (4.0 * f[i] - c[i]) / 3.0;
            assert!((richardson - w.component(0)[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn curl_is_antisymmetric_and_gauge_independent() {
        let g = g2();
        let bump = Bump { amplitude: 0.8, width: 1.1, center: [0.3, -0.2] };
        let spec = PotentialSpec {
            kind: PotentialKind::LinearPlusBump { b0: 0.5, bump },
            modulation: Modulation::None,
            gauge: Gauge::None,
            epsilon_decay: 1.0,
        };
        let shifted = spec.shifted_by(Gauge::Bump(Bump { amplitude: 2.0, width: 0.9, center: [0.0, 0.5] })).unwrap();
        let b1 = spec.eval_b(0.0, &g).unwrap();
        let b2 = shifted.eval_b(0.0, &g).unwrap();
        for (x, y) in b1.values().iter().zip(b2.values()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn bump_curl_matches_spectral_curl() {
        // Oracle: spectral curl of the sampled (periodic) bump part of A.
        let g = Grid::new(2, 64, 16.0).unwrap();
        let bump = Bump { amplitude: 0.6, width: 1.2, center: [0.5, -0.4] };
        let full = PotentialSpec { kind: PotentialKind::LinearPlusBump { b0: 1.5, bump }, ..PotentialSpec::zero() };
        let bump_only =
            PotentialSpec { kind: PotentialKind::LinearPlusBump { b0: 0.0, bump }, ..PotentialSpec::zero() };
        let a = bump_only.eval_a(0.0, &g).unwrap();
        let sp = Spectral::new(g);
        let day = sp.gradient_real(a.component(1));
        let dax = sp.gradient_real(a.component(0));
        let b = full.eval_b(0.0, &g).unwrap();
        for i in 0..g.len() {
            let spectral = day[0][i] - dax[1][i];
            assert!((b.values()[i] - 1.5 - spectral).abs() < 1e-8);
        }
    }

    #[test]
    fn tabulated_rejects_other_grid() {
        let g = Grid::new(1, 16, 4.0).unwrap();
        let other = Grid::new(1, 32, 4.0).unwrap();
        let spec = PotentialSpec { kind: PotentialKind::Tabulated(RealVectorField::zeros(g)), ..PotentialSpec::zero() };
        assert!(matches!(spec.eval_a(0.0, &other), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn one_dimensional_magnetic_kinds_are_rejected() {
        let g = Grid::new(1, 16, 4.0).unwrap();
        assert!(PotentialSpec::constant_field(1.0).eval_a(0.0, &g).is_err());
        assert!(PotentialSpec::zero().with_gauge(Gauge::Bilinear { coefficient: 1.0 }).eval_a(0.0, &g).is_err());
    }

    #[test]
    fn links_of_symmetric_gauge_are_exact_midpoints() {
        let g = g2();
        let links = PotentialSpec::constant_field(2.0).links(0.0, &g).unwrap();
        let h = g.spacing();
        for i in 0..g.len() {
            let [x, y] = g.coords(i);
            assert!((links.angles(0)[i] + h * y).abs() < 1e-14);
            assert!((links.angles(1)[i] - h * x).abs() < 1e-14);
        }
    }

    #[test]
    fn gauge_links_are_exact_differences() {
        let g = g2();
        let gauge = Gauge::Bump(Bump { amplitude: 1.5, width: 1.0, center: [0.2, 0.1] });
        let plain = PotentialSpec::constant_field(1.0).links(0.0, &g).unwrap();
        let shifted = PotentialSpec::constant_field(1.0).with_gauge(gauge).links(0.0, &g).unwrap();
        let chi = gauge.sample(&g);
        for axis in 0..2 {
            for i in 0..g.len() {
                let d = chi.values()[g.neighbor(i, axis, true)] - chi.values()[i];
                assert!((shifted.angles(axis)[i] - plain.angles(axis)[i] - d).abs() < 1e-14);
            }
        }
    }
}
