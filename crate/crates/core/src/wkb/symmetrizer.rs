use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::WkbState;
use crate::error::{Error, Result};
use crate::nonlinearity::NonlinearitySpec;

/// Flux matrix `A_j` of `∂_t w + Σ_j A_j(w) ∂_j w = …` for `w = (α₁, α₂, v)`
/// at one point, as a dense row-major `(2 + dim)²` matrix.
pub fn flux_matrix(alpha: [f64; 2], v: &[f64], slope: f64, direction: usize) -> Vec<Vec<f64>> {
    let dim = v.len();
    let m = 2 + dim;
    let mut a = vec![vec![0.0; m]; m];
    let vj = v[direction];
    a[0][0] = 2.0 * vj;
    a[1][1] = 2.0 * vj;
    a[0][2 + direction] = alpha[0];
    a[1][2 + direction] = alpha[1];
    for k in 0..dim {
        a[2 + k][2 + k] = 2.0 * vj;
    }
    a[2 + direction][0] = 2.0 * slope * alpha[0];
    a[2 + direction][1] = 2.0 * slope * alpha[1];
    a
}

/// Diagonal of `Σ = diag(1, 1, (2g')⁻¹ I_dim)`.
pub fn symmetrizer(slope: f64, dim: usize) -> Vec<f64> {
    let mut d = vec![1.0, 1.0];
    d.extend(std::iter::repeat_n(1.0 / (2.0 * slope), dim));
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetrizerReport {
    pub direction: usize,
    pub points: usize,
    /// `max ‖ΣA_j - (ΣA_j)ᵀ‖_F` over the points.
    pub max_asymmetry: f64,
    pub min_eigenvalue: f64,
    pub positive_definite: bool,
}

/// Checks `ΣA_j` for symmetry at every grid point of `state`.
pub fn symmetrizer_check(
    state: &WkbState,
    nonlinearity: &NonlinearitySpec,
    direction: usize,
) -> Result<SymmetrizerReport> {
    let dim = state.grid.dim();
    if direction >= dim {
        return Err(Error::invalid(format!("direction {direction} out of range for a {dim}D state")));
    }
    let (a1, a2) = (state.alpha1.values(), state.alpha2.values());
    let mut acc = Accumulator::new(direction);
    let mut v = vec![0.0; dim];
    for i in 0..state.grid.len() {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = state.v.component(k)[i];
        }
        acc.add([a1[i], a2[i]], &v, nonlinearity);
    }
    Ok(acc.report())
}

/// Per-point symmetry measurements folded into a report.
struct Accumulator {
    report: SymmetrizerReport,
}

impl Accumulator {
    fn new(direction: usize) -> Self {
        Accumulator {
            report: SymmetrizerReport {
                direction,
                points: 0,
                max_asymmetry: 0.0,
                min_eigenvalue: f64::INFINITY,
                positive_definite: true,
            },
        }
    }

    fn add(&mut self, alpha: [f64; 2], v: &[f64], nonlinearity: &NonlinearitySpec) {
        let r = &mut self.report;
        // Effective slope of `sign · g`; a focusing sign flips Σ indefinite.
        let slope = nonlinearity.sign * nonlinearity.g_prime(alpha[0] * alpha[0] + alpha[1] * alpha[1]);
        let sigma = symmetrizer(slope, v.len());
        r.points += 1;
        r.positive_definite &= sigma.iter().all(|s| *s > 0.0 && s.is_finite());
        r.min_eigenvalue = sigma.iter().copied().fold(r.min_eigenvalue, f64::min);
        let a = flux_matrix(alpha, v, slope, r.direction);
        let mut sq = 0.0;
        for row in 0..a.len() {
            for c in 0..row {
                let d = sigma[row] * a[row][c] - sigma[c] * a[c][row];
                sq += 2.0 * d * d;
            }
        }
        r.max_asymmetry = r.max_asymmetry.max(sq.sqrt());
    }

    fn report(self) -> SymmetrizerReport {
        self.report
    }
}

/// Checks `ΣA_j` on `samples` random points `α ∈ [-amplitude, amplitude]²`,
/// `v ∈ [-speed, speed]^dim`, one report per direction.
pub fn random_symmetrizer_check(
    nonlinearity: &NonlinearitySpec,
    dim: usize,
    samples: usize,
    amplitude: f64,
    speed: f64,
    seed: u64,
) -> Result<Vec<SymmetrizerReport>> {
    if dim != 1 && dim != 2 {
        return Err(Error::invalid(format!("dim must be 1 or 2, got {dim}")));
    }
    if samples == 0 || !(amplitude > 0.0) || !(speed >= 0.0) {
        return Err(Error::invalid("need samples > 0, amplitude > 0 and speed >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accs: Vec<Accumulator> = (0..dim).map(Accumulator::new).collect();
    let mut v = vec![0.0; dim];
    for _ in 0..samples {
        let alpha = [rng.gen_range(-amplitude..=amplitude), rng.gen_range(-amplitude..=amplitude)];
        for vk in v.iter_mut() {
            *vk = rng.gen_range(-speed..=speed);
        }
        for acc in accs.iter_mut() {
            acc.add(alpha, &v, nonlinearity);
        }
    }
    Ok(accs.into_iter().map(Accumulator::report).collect())
}
