//! Crank–Nicolson step `(I + iτH) u⁺ = (I - iτH) u` solved by restarted GMRES
//! with the free-space operator `I + iτ(-Δ_h)` as a right preconditioner.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{LinkField, MagneticLaplacian, Spectral};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolveInfo {
    pub iterations: usize,
    pub relative_residual: f64,
}

pub struct CrankNicolson {
    lap: MagneticLaplacian,
    tau: f64,
    spectral: Arc<Spectral>,
    /// `1 / (1 + iτλ_k)` per spectral index.
    precond: Vec<Complex64>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

impl CrankNicolson {
    /// Operator for a step of length `dt` with the given link snapshot.
    pub fn new(links: &LinkField, b: f64, dt: f64, spectral: Arc<Spectral>) -> Self {
        let tau = 0.5 * dt;
        let precond =
            (0..links.grid().len()).map(|k| Complex64::new(1.0, tau * spectral.fd_laplacian_symbol(k)).inv()).collect();
        CrankNicolson { lap: MagneticLaplacian::new(links, b), tau, spectral, precond }
    }

    /// `out = (I + s iτH) x`.
    fn apply(&self, x: &[Complex64], out: &mut [Complex64], s: f64) {
        self.lap.apply_into(x, out);
        let c = I * (s * self.tau);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi + c * *o;
        }
    }

    fn precondition(&self, x: &mut [Complex64]) {
        self.spectral.forward(x);
        for (z, p) in x.iter_mut().zip(&self.precond) {
            *z *= p;
        }
        self.spectral.inverse(x);
    }

    /// Advances `u` in place; fails if the relative residual stays above `tol`
    /// after `max_iterations` inner iterations.
    pub fn step(&self, u: &mut [Complex64], tol: f64, max_iterations: usize, restart: usize) -> Result<SolveInfo> {
        let n = u.len();
        let mut rhs = vec![ZERO; n];
        self.apply(u, &mut rhs, -1.0);
        let rhs_norm = norm(&rhs);
        if rhs_norm == 0.0 {
            u.iter_mut().for_each(|z| *z = ZERO);
            return Ok(SolveInfo::default());
        }

        // Start from the better of the free CN step and the old state.
        let mut guess = rhs.clone();
        self.precondition(&mut guess);
        let mut work = vec![ZERO; n];
        let residual_of = |x: &[Complex64], work: &mut Vec<Complex64>| {
            self.apply(x, work, 1.0);
            work.iter_mut().zip(&rhs).for_each(|(w, r)| *w = r - *w);
            norm(work)
        };
        let r_guess = residual_of(&guess, &mut work);
        let r_old = residual_of(u, &mut work);
        let mut x = if r_guess <= r_old { guess } else { u.to_vec() };

        let target = tol * rhs_norm;
        let restart = restart.max(1);
        let mut iterations = 0;
        let mut r = vec![ZERO; n];
        let mut beta = residual_of(&x, &mut r);

        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(restart + 1);
        let mut hess = vec![vec![ZERO; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![ZERO; restart];
        let mut g = vec![ZERO; restart + 1];
        let mut z = vec![ZERO; n];
        let mut w = vec![ZERO; n];

        while beta > target && iterations < max_iterations {
            basis.clear();
            basis.push(r.iter().map(|v| v / beta).collect());
            g.iter_mut().for_each(|v| *v = ZERO);
            g[0] = Complex64::new(beta, 0.0);
            let mut cols = 0;
            for j in 0..restart {
                if iterations >= max_iterations {
                    break;
                }
                iterations += 1;
                z.copy_from_slice(&basis[j]);
                self.precondition(&mut z);
                self.apply(&z, &mut w, 1.0);
                for i in 0..=j {
                    let hij = dot(&basis[i], &w);
                    hess[i][j] = hij;
                    w.iter_mut().zip(&basis[i]).for_each(|(wk, vk)| *wk -= hij * vk);
                }
                let hn = norm(&w);
                hess[j + 1][j] = Complex64::new(hn, 0.0);
                for i in 0..j {
                    let (a, b) = (hess[i][j], hess[i + 1][j]);
                    hess[i][j] = cs[i] * a + sn[i] * b;
                    hess[i + 1][j] = -sn[i].conj() * a + cs[i] * b;
                }
                let (a, b) = (hess[j][j], hess[j + 1][j]);
                let rr = (a.norm_sqr() + b.norm_sqr()).sqrt();
                if a.norm() == 0.0 {
                    cs[j] = 0.0;
                    sn[j] = Complex64::new(1.0, 0.0);
                } else {
                    cs[j] = a.norm() / rr;
                    sn[j] = (a / a.norm()) * b.conj() / rr;
                }
                hess[j][j] = cs[j] * a + sn[j] * b;
                hess[j + 1][j] = ZERO;
                g[j + 1] = -sn[j].conj() * g[j];
                g[j] *= cs[j];
                cols = j + 1;
                if g[j + 1].norm() <= target || hn == 0.0 {
                    break;
                }
                basis.push(w.iter().map(|v| v / hn).collect());
            }
            if cols == 0 {
                break;
            }
            // Back substitution, then x += P⁻¹ V y.
            let mut y = vec![ZERO; cols];
            for i in (0..cols).rev() {
                let mut s = g[i];
                for k in i + 1..cols {
                    s -= hess[i][k] * y[k];
                }
                y[i] = s / hess[i][i];
            }
            z.iter_mut().for_each(|v| *v = ZERO);
            for (k, yk) in y.iter().enumerate() {
                z.iter_mut().zip(&basis[k]).for_each(|(zi, vi)| *zi += yk * vi);
            }
            self.precondition(&mut z);
            x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
            beta = residual_of(&x, &mut r);
        }

        let relative_residual = beta / rhs_norm;
        if !(beta <= target) {
            return Err(Error::SolverDivergence { residual: relative_residual, iterations });
        }
        u.copy_from_slice(&x);
        Ok(SolveInfo { iterations, relative_residual })
    }
}
