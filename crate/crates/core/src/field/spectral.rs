use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::Grid;

/// FFT plans and wavenumbers for one grid.
///
/// Transforms act in place on row-major buffers. `inverse` is normalised so
/// that `inverse(forward(u)) == u`.
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    wavenumbers: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let n = grid.points_per_axis();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let dk = 2.0 * std::f64::consts::PI / grid.length();
        let wavenumbers = (0..n).map(|i| Self::mode_of(i, n) as f64 * dk).collect();
        Spectral { grid, forward, inverse, wavenumbers }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Signed mode number of FFT bin `i`; the Nyquist bin maps to `-n/2`.
    #[inline]
    fn mode_of(i: usize, n: usize) -> i64 {
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    #[inline]
    fn is_nyquist(&self, i: usize) -> bool {
        i == self.grid.points_per_axis() / 2
    }

    /// Wavenumber of bin `i` along any axis.
    pub fn wavenumber(&self, i: usize) -> f64 {
        self.wavenumbers[i]
    }

    fn along_axes(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.points_per_axis();
        debug_assert_eq!(data.len(), self.grid.len());
        plan.process(data);
        if self.grid.dim() == 2 {
            let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
            transpose(data, &mut t, n);
            plan.process(&mut t);
            transpose(&t, data, n);
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.along_axes(data, &self.forward);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.along_axes(data, &self.inverse);
        let scale = 1.0 / self.grid.len() as f64;
        data.iter_mut().for_each(|z| *z *= scale);
    }

    pub fn transform(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut data = values.to_vec();
        self.forward(&mut data);
        data
    }

    pub fn transform_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward(&mut data);
        data
    }

    /// Wavenumber vector of spectral index `idx`.
    #[inline]
    pub fn k_vector(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.grid.unflatten(idx);
        if self.grid.dim() == 1 {
            [self.wavenumbers[i], 0.0]
        } else {
            [self.wavenumbers[i], self.wavenumbers[j]]
        }
    }

    /// Multiplies a spectrum by `i k_axis`, zeroing the Nyquist bin of that axis.
    pub fn apply_derivative(&self, spectrum: &[Complex64], axis: usize) -> Vec<Complex64> {
        spectrum
            .iter()
            .enumerate()
            .map(|(idx, &z)| {
                let bin = self.grid.unflatten(idx)[axis];
                if self.is_nyquist(bin) {
                    Complex64::new(0.0, 0.0)
                } else {
                    z * Complex64::new(0.0, self.wavenumbers[bin])
                }
            })
            .collect()
    }

    /// First derivative along `axis` of a periodic field.
    pub fn derivative(&self, values: &[Complex64], axis: usize) -> Vec<Complex64> {
        let mut d = self.apply_derivative(&self.transform(values), axis);
        self.inverse(&mut d);
        d
    }

    /// Gradient of a real periodic field.
    pub fn gradient_real(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let spectrum = self.transform_real(values);
        (0..self.grid.dim())
            .map(|axis| {
                let mut d = self.apply_derivative(&spectrum, axis);
                self.inverse(&mut d);
                d.into_iter().map(|z| z.re).collect()
            })
            .collect()
    }

    /// Laplacian via the multiplier `-|k|^2` (even order, Nyquist kept).
    pub fn laplacian(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut data = self.transform(values);
        for (idx, z) in data.iter_mut().enumerate() {
            let k = self.k_vector(idx);
            *z *= -(k[0] * k[0] + k[1] * k[1]);
        }
        self.inverse(&mut data);
        data
    }

    /// Symbol of the second-order centred difference `-Δ_h`: `Σ (4/h²) sin²(k h / 2)`.
    #[inline]
    pub fn fd_laplacian_symbol(&self, idx: usize) -> f64 {
        let h = self.grid.spacing();
        let k = self.k_vector(idx);
        let s = |kj: f64| {
            let v = (0.5 * kj * h).sin();
            4.0 * v * v / (h * h)
        };
        if self.grid.dim() == 1 {
            s(k[0])
        } else {
            s(k[0]) + s(k[1])
        }
    }

    /// Zeroes every mode whose index exceeds a third of the bins along any axis.
    pub fn dealias_spectrum(&self, spectrum: &mut [Complex64]) {
        let n = self.grid.points_per_axis() as i64;
        let cutoff = n / 3;
        for (idx, z) in spectrum.iter_mut().enumerate() {
            let bins = self.grid.unflatten(idx);
            let keep = (0..self.grid.dim())
                .all(|a| Self::mode_of(bins[a], n as usize).abs() <= cutoff && !self.is_nyquist(bins[a]));
            if !keep {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// Largest retained `|k|^2` after two-thirds dealiasing.
    pub fn dealiased_k2_max(&self) -> f64 {
        let kmax = (self.grid.points_per_axis() / 3) as f64 * 2.0 * std::f64::consts::PI / self.grid.length();
        kmax * kmax * self.grid.dim() as f64
    }

    /// Largest retained `|k_j|` along one axis after dealiasing.
    pub fn dealiased_k_max(&self) -> f64 {
        (self.grid.points_per_axis() / 3) as f64 * 2.0 * std::f64::consts::PI / self.grid.length()
    }

    pub fn dealias(&self, values: &mut [Complex64]) {
        self.forward(values);
        self.dealias_spectrum(values);
        self.inverse(values);
    }

    pub fn dealias_real(&self, values: &mut [f64]) {
        let mut s = self.transform_real(values);
        self.dealias_spectrum(&mut s);
        self.inverse(&mut s);
        for (v, z) in values.iter_mut().zip(s) {
            *v = z.re;
        }
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in 0..n {
            dst[j * n + i] = src[i * n + j];
        }
    }
}
