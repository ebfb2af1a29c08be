//! Initial data `u₀ = a₀ e^{ibS}` from an amplitude profile and a phase profile.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{ComplexField, Grid, RealField, Spectral};
use crate::potential::Bump;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Amplitude {
    Zero,
    /// `amplitude · exp(-|x - center|² / width²) · e^{i k·x}`.
    Gaussian {
        amplitude: f64,
        width: f64,
        center: [f64; 2],
        wavenumber: [f64; 2],
    },
    /// `amplitude · e^{i k·x}`; only periodic if `k` is a box mode.
    PlaneWave {
        amplitude: f64,
        wavenumber: [f64; 2],
    },
}

impl Amplitude {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Amplitude::Gaussian { amplitude, width, .. } if !(width > 0.0) || !amplitude.is_finite() => {
                Err(Error::invalid("gaussian amplitude needs a positive width"))
            }
            Amplitude::PlaneWave { amplitude, .. } if !amplitude.is_finite() => {
                Err(Error::invalid("plane-wave amplitude must be finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self, grid: &Grid) -> ComplexField {
        match *self {
            Amplitude::Zero => ComplexField::zeros(*grid),
            Amplitude::Gaussian { amplitude, width, center, wavenumber } => ComplexField::from_fn(*grid, |x| {
                let r2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                Complex64::from_polar(
                    amplitude * (-r2 / (width * width)).exp(),
                    wavenumber[0] * x[0] + wavenumber[1] * x[1],
                )
            }),
            Amplitude::PlaneWave { amplitude, wavenumber } => ComplexField::from_fn(*grid, |x| {
                Complex64::from_polar(amplitude, wavenumber[0] * x[0] + wavenumber[1] * x[1])
            }),
        }
    }
}

/// Phase `S` of the initial data. Analytic profiles have closed-form
/// gradients, so non-periodic phases such as `c x y` are allowed.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseProfile {
    Zero,
    /// `bump(x) + bilinear · x y`.
    Analytic {
        bump: Option<Bump>,
        bilinear: f64,
    },
    /// Node samples of a periodic phase; gradients are spectral.
    Sampled(RealField),
}

impl PhaseProfile {
    pub fn values(&self, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            PhaseProfile::Zero => Ok(vec![0.0; grid.len()]),
            PhaseProfile::Analytic { bump, bilinear } => Ok((0..grid.len())
                .map(|i| {
                    let x = grid.coords(i);
                    bump.map_or(0.0, |b| b.value(x)) + bilinear * x[0] * x[1]
                })
                .collect()),
            PhaseProfile::Sampled(s) => {
                grid.check_same(s.grid())?;
                Ok(s.values().to_vec())
            }
        }
    }

    pub fn gradient(&self, grid: &Grid) -> Result<Vec<Vec<f64>>> {
        match self {
            PhaseProfile::Zero => Ok(vec![vec![0.0; grid.len()]; grid.dim()]),
            PhaseProfile::Analytic { bump, bilinear } => {
                if *bilinear != 0.0 && grid.dim() != 2 {
                    return Err(Error::invalid("bilinear phase requires a 2D grid"));
                }
                let mut out = vec![Vec::with_capacity(grid.len()); grid.dim()];
                for i in 0..grid.len() {
                    let x = grid.coords(i);
                    let gb = bump.map_or([0.0, 0.0], |b| b.gradient(x));
                    let g = [gb[0] + bilinear * x[1], gb[1] + bilinear * x[0]];
                    for (axis, c) in out.iter_mut().enumerate() {
                        c.push(g[axis]);
                    }
                }
                Ok(out)
            }
            PhaseProfile::Sampled(s) => {
                grid.check_same(s.grid())?;
                Ok(Spectral::new(*grid).gradient_real(s.values()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub amplitude: Amplitude,
    pub phase: PhaseProfile,
}

impl InitialData {
    /// `a₀ e^{ibS}` on the grid.
    pub fn field(&self, grid: &Grid, b: f64) -> Result<ComplexField> {
        self.amplitude.validate()?;
        let a0 = self.amplitude.sample(grid);
        let s: Vec<f64> = self.phase.values(grid)?.into_iter().map(|v| b * v).collect();
        a0.with_phase(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_gradient_matches_spectral_for_periodic_bump() {
        let g = Grid::new(2, 64, 16.0).unwrap();
        let bump = Bump { amplitude: 0.4, width: 1.3, center: [0.2, -0.5] };
        let analytic = PhaseProfile::Analytic { bump: Some(bump), bilinear: 0.0 };
        let sampled = PhaseProfile::Sampled(RealField::new(g, analytic.values(&g).unwrap()).unwrap());
        let a = analytic.gradient(&g).unwrap();
        let s = sampled.gradient(&g).unwrap();
        for axis in 0..2 {
            for i in 0..g.len() {
                assert!((a[axis][i] - s[axis][i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn field_is_amplitude_times_phase() {
        let g = Grid::new(1, 32, 8.0).unwrap();
        let init = InitialData {
            amplitude: Amplitude::Gaussian { amplitude: 1.5, width: 1.0, center: [0.0, 0.0], wavenumber: [0.0, 0.0] },
            phase: PhaseProfile::Analytic {
                bump: Some(Bump { amplitude: 0.3, width: 1.0, center: [0.0, 0.0] }),
                bilinear: 0.0,
            },
        };
        let u = init.field(&g, 4.0).unwrap();
        for (i, z) in u.values().iter().enumerate() {
            let x = g.coords(i)[0];
            assert!((z.norm() - 1.5 * (-x * x).exp()).abs() < 1e-14);
            assert!((z.arg() - (4.0 * 0.3 * (-x * x).exp())).abs() < 1e-12);
        }
    }
}
