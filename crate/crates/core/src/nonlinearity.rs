//! Gauge-invariant nonlinearities `f(u) = u g(|u|²)`, their splitting and
//! truncations, and the energy functionals built from them.
//!
//! The equation is `i ∂_t u = H_A u + sign · b^γ · f(u)`, so
//! `E = ½ ∫ |(i∇ - bA) u|² + sign · b^γ · G(u)` is the conserved energy when
//! `A` is static. With `g ≥ 0`, `sign = +1` is defocusing and `sign = -1`
//! focusing.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{kinetic_energy, ComplexField};
use crate::potential::PotentialSpec;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied smooth profile with its derivative.
#[derive(Clone)]
pub struct CustomProfile {
    pub name: String,
    g: ScalarFn,
    dg: ScalarFn,
}

impl CustomProfile {
    /// Accepts the profile only if `g(0) = 0` and `g'` is positive on `samples`
    /// uniform points of `[0, s_max]`.
    pub fn new(
        name: &str,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dg: impl Fn(f64) -> f64 + Send + Sync + 'static,
        s_max: f64,
        samples: usize,
    ) -> Result<Self> {
        if g(0.0) != 0.0 {
            return Err(Error::invalid(format!("custom profile {name}: g(0) must vanish")));
        }
        for k in 0..=samples.max(1) {
            let s = s_max * k as f64 / samples.max(1) as f64;
            let slope = dg(s);
            if !(slope > 0.0) {
                return Err(Error::NotSymmetrizable { rho: s, slope });
            }
        }
        Ok(CustomProfile { name: name.to_owned(), g: Arc::new(g), dg: Arc::new(dg) })
    }
}

impl fmt::Debug for CustomProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomProfile").field("name", &self.name).finish()
    }
}

#[derive(Debug, Clone)]
pub enum Profile {
    /// `g(s) = s^σ`.
    Power {
        sigma: f64,
    },
    Custom(CustomProfile),
}

#[derive(Debug, Clone)]
pub struct NonlinearitySpec {
    pub profile: Profile,
    /// `±1`, the sign of the coupling in the equation.
    pub sign: f64,
    pub gamma: f64,
}

/// Serializable summary written to run metadata.
#[derive(Debug, Clone, Serialize)]
pub struct NonlinearitySummary {
    pub profile: String,
    pub sigma: Option<f64>,
    pub sign: f64,
    pub gamma: f64,
    pub growth_exponent: Option<f64>,
    pub equation: &'static str,
}

const GL_NODES: [f64; 5] =
    [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] =
    [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * w;
            GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, wt)| wt * f(mid + 0.5 * w * x)).sum::<f64>() * 0.5 * w
        })
        .sum()
}

#[allow(non_snake_case)]
impl NonlinearitySpec {
    pub fn power(sigma: f64, sign: f64, gamma: f64) -> Result<Self> {
        let spec = NonlinearitySpec { profile: Profile::Power { sigma }, sign, gamma };
        spec.validate()?;
        Ok(spec)
    }

    /// `g(s) = s`, the cubic case.
    pub fn cubic(sign: f64, gamma: f64) -> Self {
        NonlinearitySpec { profile: Profile::Power { sigma: 1.0 }, sign, gamma }
    }

    /// `g ≡ 0`.
    pub fn linear() -> Self {
        NonlinearitySpec { profile: Profile::Power { sigma: 0.0 }, sign: 0.0, gamma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sign != 1.0 && self.sign != -1.0 && !self.is_linear() {
            return Err(Error::invalid(format!("sign must be +1 or -1, got {}", self.sign)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be nonnegative, got {}", self.gamma)));
        }
        if let (false, Profile::Power { sigma }) = (self.is_linear(), &self.profile) {
            let sigma = *sigma;
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
            }
        }
        Ok(())
    }

    pub fn is_linear(&self) -> bool {
        self.sign == 0.0
    }

    /// `sign · b^γ`, the factor multiplying `f` in the equation.
    pub fn coupling(&self, b: f64) -> f64 {
        if self.is_linear() {
            0.0
        } else {
            self.sign * b.powf(self.gamma)
        }
    }

    /// Growth exponent `α` with `|f(z)| ≲ |z|^{α+1}`.
    pub fn growth_exponent(&self) -> Option<f64> {
        match self.profile {
            Profile::Power { sigma } => Some(2.0 * sigma),
            Profile::Custom(_) => None,
        }
    }

    pub fn summary(&self) -> NonlinearitySummary {
        let (profile, sigma) = match &self.profile {
            Profile::Power { sigma } if self.is_linear() => ("none".to_owned(), Some(*sigma)),
            Profile::Power { sigma } => ("power".to_owned(), Some(*sigma)),
            Profile::Custom(c) => (format!("custom:{}", c.name), None),
        };
        NonlinearitySummary {
            profile,
            sigma,
            sign: self.sign,
            gamma: self.gamma,
            growth_exponent: self.growth_exponent(),
            equation: "i du/dt = H_A u + sign * b^gamma * u g(|u|^2)",
        }
    }

    #[inline]
    pub fn g(&self, s: f64) -> f64 {
        if self.is_linear() {
            return 0.0;
        }
        match &self.profile {
            Profile::Power { sigma } => {
                if *sigma == 1.0 {
                    s
                } else {
                    s.powf(*sigma)
                }
            }
            Profile::Custom(c) => (c.g)(s),
        }
    }

    #[inline]
    pub fn g_prime(&self, s: f64) -> f64 {
        if self.is_linear() {
            return 0.0;
        }
        match &self.profile {
            Profile::Power { sigma } => {
                if *sigma == 1.0 {
                    1.0
                } else {
                    sigma * s.powf(sigma - 1.0)
                }
            }
            Profile::Custom(c) => (c.dg)(s),
        }
    }

    /// `∫_0^s g`, so that `F(z) = ½ Φ(|z|²)`.
    fn g_antiderivative(&self, s: f64) -> f64 {
        if self.is_linear() || s == 0.0 {
            return 0.0;
        }
        match &self.profile {
            Profile::Power { sigma } => s.powf(sigma + 1.0) / (sigma + 1.0),
            Profile::Custom(c) => gauss_legendre(&|x| (c.g)(x), 0.0, s, 32),
        }
    }

    /// Fails with [`Error::NotSymmetrizable`] unless `g'(ρ) > 0` at every sample.
    pub fn check_symmetrizable(&self, rho: impl IntoIterator<Item = f64>) -> Result<()> {
        for r in rho {
            let slope = self.g_prime(r);
            if !(slope > 0.0) {
                return Err(Error::NotSymmetrizable { rho: r, slope });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval_f(&self, z: Complex64) -> Complex64 {
        z * self.g(z.norm_sqr())
    }

    /// Part of `f` that is linear beyond `|z| = 1`.
    #[inline]
    pub fn split_f1(&self, z: Complex64) -> Complex64 {
        if z.norm() <= 1.0 {
            self.eval_f(z)
        } else {
            z * self.g(1.0)
        }
    }

    #[inline]
    pub fn split_f2(&self, z: Complex64) -> Complex64 {
        if z.norm() <= 1.0 {
            Complex64::new(0.0, 0.0)
        } else {
            z * (self.g(z.norm_sqr()) - self.g(1.0))
        }
    }

    /// `f̃₂` continued linearly beyond `|z| = m`.
    pub fn truncate_f2m(&self, z: Complex64, m: f64) -> Result<Complex64> {
        check_level(m)?;
        if z.norm() <= m {
            Ok(self.split_f2(z))
        } else {
            // f̃₂(m) z / m with f̃₂(m) = m (g(m²) - g(1)) for m >= 1.
            Ok(z * (self.g(m * m) - self.g(1.0)))
        }
    }

    /// `f_m = f̃₁ + f̃₂,ₘ = z g(min(|z|, m)²)`.
    #[inline]
    pub fn eval_fm(&self, z: Complex64, m: f64) -> Complex64 {
        z * self.g(z.norm_sqr().min(m * m))
    }

    /// `F(z) = ∫_0^{|z|} f(s) ds`.
    #[inline]
    pub fn eval_F(&self, z: Complex64) -> f64 {
        0.5 * self.g_antiderivative(z.norm_sqr())
    }

    /// `F_m(z) = ∫_0^{|z|} f_m(s) ds`.
    pub fn eval_Fm(&self, z: Complex64, m: f64) -> f64 {
        let r2 = z.norm_sqr();
        if r2 <= m * m {
            self.eval_F(z)
        } else {
            0.5 * self.g_antiderivative(m * m) + 0.5 * self.g(m * m) * (r2 - m * m)
        }
    }

    /// `G(u) = ∫ F(u)` by the grid rule.
    pub fn eval_G(&self, field: &ComplexField) -> f64 {
        field.values().iter().map(|&z| self.eval_F(z)).sum::<f64>() * field.grid().cell_volume()
    }

    pub fn eval_Gm(&self, field: &ComplexField, m: f64) -> Result<f64> {
        check_level(m)?;
        Ok(field.values().iter().map(|&z| self.eval_Fm(z, m)).sum::<f64>() * field.grid().cell_volume())
    }

    /// Exact flow of `i ∂_t u = sign b^γ f(u)` over `dt`; `|u|` is unchanged pointwise.
    pub fn nonlinear_step(&self, u: &mut ComplexField, dt: f64, b: f64) {
        self.phase_rotate(u, dt, b, None);
    }

    /// Exact flow of `i ∂_t u = sign b^γ f_m(u)`; `f_m` is still a pure phase rotation.
    pub fn nonlinear_step_truncated(&self, u: &mut ComplexField, dt: f64, b: f64, m: f64) {
        self.phase_rotate(u, dt, b, Some(m * m));
    }

    fn phase_rotate(&self, u: &mut ComplexField, dt: f64, b: f64, cap: Option<f64>) {
        let c = self.coupling(b);
        if c == 0.0 || dt == 0.0 {
            return;
        }
        for z in u.values_mut() {
            let mut s = z.norm_sqr();
            if let Some(cap) = cap {
                s = s.min(cap);
            }
            *z *= Complex64::from_polar(1.0, -c * self.g(s) * dt);
        }
    }
}

fn check_level(m: f64) -> Result<()> {
    if !(m >= 1.0) {
        return Err(Error::invalid(format!("truncation level must be >= 1, got {m}")));
    }
    Ok(())
}

/// Kinetic part `½ ∫ |(i∇ - bA(t)) u|²` in the Peierls-link form.
pub fn kinetic(field: &ComplexField, potential: &PotentialSpec, t: f64, b: f64) -> Result<f64> {
    kinetic_energy(field, &potential.links(t, field.grid())?, b)
}

/// `E(b, t, u) = ½ ∫ |(i∇ - bA(t)) u|² + sign b^γ G(u)`.
pub fn energy(spec: &NonlinearitySpec, b: f64, t: f64, field: &ComplexField, potential: &PotentialSpec) -> Result<f64> {
    Ok(kinetic(field, potential, t, b)? + spec.coupling(b) * spec.eval_G(field))
}

/// [`energy`] with `G_m` in place of `G` (same `b^γ` prefactor).
pub fn energy_m(
    spec: &NonlinearitySpec,
    b: f64,
    t: f64,
    field: &ComplexField,
    potential: &PotentialSpec,
    m: f64,
) -> Result<f64> {
    Ok(kinetic(field, potential, t, b)? + spec.coupling(b) * spec.eval_Gm(field, m)?)
}
