use num_complex::Complex64;

use super::{ComplexField, Grid};
use crate::error::{Error, Result};

/// Discrete `L^p` norm `(Σ |u_k|^p h^dim)^{1/p}`; `p = f64::INFINITY` gives `max |u_k|`.
pub fn lp_norm(field: &ComplexField, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::invalid(format!("lp_norm requires p >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(max_abs(field));
    }
    let w = field.grid().cell_volume();
    if p == 2.0 {
        return Ok(l2_norm(field));
    }
    // Scale by the maximum to avoid overflow for large p.
    let m = max_abs(field);
    if m == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = field.values().iter().map(|z| (z.norm() / m).powf(p)).sum();
    Ok(m * (s * w).powf(1.0 / p))
}

pub fn l2_norm(field: &ComplexField) -> f64 {
    let s: f64 = field.values().iter().map(|z| z.norm_sqr()).sum();
    (s * field.grid().cell_volume()).sqrt()
}

pub fn max_abs(field: &ComplexField) -> f64 {
    field.values().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `∫ ū v dx` by the grid rule.
pub fn inner_product(u: &ComplexField, v: &ComplexField) -> Result<Complex64> {
    u.grid().check_same(v.grid())?;
    let s: Complex64 = u.values().iter().zip(v.values()).map(|(a, b)| a.conj() * b).sum();
    Ok(s * u.grid().cell_volume())
}

fn in_middle_half(grid: &Grid, idx: usize) -> bool {
    let q = 0.25 * grid.length();
    let x = grid.coords(idx);
    (0..grid.dim()).all(|a| x[a] >= -q && x[a] < q)
}

/// Fraction of the mass lying outside the middle half `[-L/4, L/4)^dim`.
pub fn boundary_leakage(field: &ComplexField) -> f64 {
    let grid = field.grid();
    let (mut outside, mut total) = (0.0, 0.0);
    for (idx, z) in field.values().iter().enumerate() {
        let m = z.norm_sqr();
        total += m;
        if !in_middle_half(grid, idx) {
            outside += m;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        outside / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaussian(n: usize, l: f64) -> ComplexField {
        let g = Grid::new(1, n, l).unwrap();
        ComplexField::from_fn(g, |x| Complex64::new((-x[0] * x[0]).exp(), 0.0))
    }

    #[test]
    fn constant_field_l2() {
        let g = Grid::new(1, 16, 2.0).unwrap();
        let u = ComplexField::from_fn(g, |_| Complex64::new(1.0, 0.0));
        assert!((lp_norm(&u, 2.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_field_any_p() {
        let g = Grid::new(2, 8, 2.0).unwrap();
        let u = ComplexField::zeros(g);
        for p in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert_eq!(lp_norm(&u, p).unwrap(), 0.0);
        }
    }

    #[test]
    fn gaussian_l2_matches_closed_form() {
        // ∫ e^{-2x²} dx = sqrt(π/2), so the norm is (π/2)^{1/4}.
        let u = gaussian(512, 32.0);
        let expected = (std::f64::consts::PI / 2.0).powf(0.25);
        assert!((lp_norm(&u, 2.0).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn gaussian_l4_matches_closed_form() {
        // ∫ e^{-4x²} dx = sqrt(π)/2.
        let u = gaussian(512, 32.0);
        let expected = (std::f64::consts::PI.sqrt() / 2.0).powf(0.25);
        assert!((lp_norm(&u, 4.0).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn p_below_one_is_rejected() {
        let u = gaussian(16, 4.0);
        assert!(matches!(lp_norm(&u, 0.5), Err(Error::InvalidParameter(_))));
        assert!(lp_norm(&u, f64::NAN).is_err());
    }

    #[test]
    fn leakage_of_centered_gaussian_is_tiny() {
        let u = gaussian(256, 16.0);
        assert!(boundary_leakage(&u) < 1e-10);
        let g = Grid::new(1, 64, 16.0).unwrap();
        let flat = ComplexField::from_fn(g, |_| Complex64::new(1.0, 0.0));
        assert!((boundary_leakage(&flat) - 0.5).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn lp_norm_is_absolutely_homogeneous(
            seed in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 64),
            cre in -5.0f64..5.0, cim in -5.0f64..5.0, p in 1.0f64..8.0,
        ) {
            let g = Grid::new(1, 64, 3.0).unwrap();
            let u = ComplexField::new(g, seed.iter().map(|&(a, b)| Complex64::new(a, b)).collect()).unwrap();
            let c = Complex64::new(cre, cim);
            for q in [p, 2.0, f64::INFINITY] {
                let lhs = lp_norm(&u.scale(c), q).unwrap();
                let rhs = c.norm() * lp_norm(&u, q).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
            }
        }
    }
}
