use num_complex::Complex64;

use super::*;
use crate::field::{l2_norm, max_abs};
use crate::potential::{Bump, Gauge, Modulation};

fn gaussian_2d(grid: Grid, amp: f64, x0: [f64; 2], k: [f64; 2]) -> ComplexField {
    ComplexField::from_fn(grid, |x| {
        let r2 = (x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2);
        Complex64::from_polar(amp * (-r2).exp(), k[0] * x[0] + k[1] * x[1])
    })
}

fn max_diff(a: &ComplexField, b: &ComplexField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

#[test]
fn crank_nicolson_on_plane_wave_is_the_cayley_factor() {
    let l = 2.0 * std::f64::consts::PI;
    let g = Grid::new(1, 64, l).unwrap();
    let k = 5.0;
    let u = ComplexField::from_fn(g, |x| Complex64::from_polar(1.0, k * x[0]));
    let (dt, cfg) = (0.01, SolverConfig { cn_tolerance: 1e-13, ..SolverConfig::new(1.0, 0.01, 1.0) });
    let out = linear_step(&u, &PotentialSpec::zero(), 0.0, dt, 1.0, &cfg).unwrap();
    let h = g.spacing();
    let theta = 0.5 * dt * 4.0 / (h * h) * (0.5 * k * h).sin().powi(2);
    let factor = Complex64::new(1.0, -theta) / Complex64::new(1.0, theta);
    assert!((factor.norm() - 1.0).abs() < 1e-15);
    for (a, b) in out.values().iter().zip(u.values()) {
        assert!((a - b * factor).norm() < 1e-12);
    }
}

#[test]
fn linear_flow_is_second_order_in_dt_with_modulated_field() {
    let g = Grid::new(2, 32, 8.0).unwrap();
    let spec =
        PotentialSpec::constant_field(1.0).with_modulation(Modulation::Sinusoidal { amplitude: 0.5, frequency: 3.0 });
    let u0 = gaussian_2d(g, 1.0, [0.3, 0.0], [1.0, 0.0]);
    let run = |dt: f64| {
        let cfg =
            SolverConfig { cn_tolerance: 1e-13, leakage: LeakageLimits::disabled(), ..SolverConfig::new(1.0, dt, 0.4) };
        solve(&u0, &spec, &NonlinearitySpec::linear(), &cfg).unwrap().final_state.field
    };
    let (a, b, c) = (run(0.02), run(0.01), run(0.005));
    let ratio = l2_norm(&a.sub(&b).unwrap()) / l2_norm(&b.sub(&c).unwrap());
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn strang_without_nonlinearity_is_the_linear_step() {
    let g = Grid::new(2, 16, 6.0).unwrap();
    let u = gaussian_2d(g, 1.0, [0.0, 0.0], [0.5, -0.2]);
    let p = PotentialSpec::constant_field(1.3);
    let cfg = SolverConfig::new(2.0, 0.01, 1.0);
    let a = strang_step(&u, &p, &NonlinearitySpec::linear(), 0.1, 0.01, 2.0, &cfg).unwrap();
    let b = linear_step(&u, &p, 0.1, 0.01, 2.0, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn nonlinear_step_preserves_mass() {
    let g = Grid::new(1, 64, 8.0).unwrap();
    let u = ComplexField::from_fn(g, |x| Complex64::new(2.0 * (-x[0] * x[0]).exp(), 0.3 * x[0].sin()));
    let v = nonlinear_step(&u, &NonlinearitySpec::cubic(-1.0, 1.0), 0.37, 3.0);
    assert!((l2_norm(&u) - l2_norm(&v)).abs() <= 1e-14 * l2_norm(&u));
    for (a, b) in u.values().iter().zip(v.values()) {
        assert!((a.norm() - b.norm()).abs() <= 1e-14 * (1.0 + a.norm()));
    }
}

#[test]
fn zero_data_gives_zero_trajectory() {
    let g = Grid::new(2, 16, 8.0).unwrap();
    let spec =
        PotentialSpec::constant_field(1.0).with_modulation(Modulation::Sinusoidal { amplitude: 0.3, frequency: 1.0 });
    let sol =
        solve(&ComplexField::zeros(g), &spec, &NonlinearitySpec::cubic(1.0, 2.0), &SolverConfig::new(2.0, 0.01, 0.1))
            .unwrap();
    assert_eq!(sol.diagnostics.len(), 11);
    for r in sol.diagnostics.records() {
        assert!([r.mass, r.energy, r.correction_integral, r.h1mg_norm, r.max_abs].iter().all(|&v| v == 0.0));
    }
    assert!(sol.final_state.field.values().iter().all(|z| z.norm() == 0.0));
}

#[test]
fn config_validation() {
    let mut cfg = SolverConfig::new(1.0, 0.1, 0.1);
    assert!(cfg.validate().is_err());
    cfg.t_end = 1.0;
    assert!(cfg.validate().is_ok());
    cfg.cn_tolerance = 1e-6;
    assert!(cfg.validate().is_err());
    cfg.cn_tolerance = 1e-10;
    cfg.ladder = Ladder::PiecewiseA { pieces: 3 };
    assert!(cfg.validate().is_err());
    cfg.ladder = Ladder::PiecewiseA { pieces: 5 };
    assert!(cfg.validate().is_ok());
    cfg.ladder = Ladder::Truncated { m: 0.5 };
    assert!(cfg.validate().is_err());
}

#[test]
fn row_count_follows_stride() {
    let g = Grid::new(1, 64, 16.0).unwrap();
    let u0 = ComplexField::from_fn(g, |x| Complex64::new((-x[0] * x[0]).exp(), 0.0));
    let cfg = SolverConfig {
        diagnostics_stride: 5,
        snapshot_stride: 10,
        leakage: LeakageLimits::disabled(),
        ..SolverConfig::new(1.0, 0.01, 0.4)
    };
    let sol = solve(&u0, &PotentialSpec::zero(), &NonlinearitySpec::cubic(1.0, 0.0), &cfg).unwrap();
    assert_eq!(sol.diagnostics.len(), 40 / 5 + 1);
    assert_eq!(sol.snapshots.iter().map(|s| s.step).collect::<Vec<_>>(), vec![0, 10, 20, 30, 40]);
    assert_eq!(sol.final_state.step, 40);
}

#[test]
fn uneven_end_time_shortens_last_step() {
    let cfg = SolverConfig::new(1.0, 0.3, 1.0);
    assert_eq!(cfg.steps(), 4);
    assert_eq!(cfg.time_at(3), 0.8999999999999999);
    assert_eq!(cfg.time_at(4), 1.0);
}

#[test]
fn piecewise_with_static_potential_matches_solve() {
    let g = Grid::new(2, 16, 8.0).unwrap();
    let u0 = gaussian_2d(g, 1.0, [0.0, 0.0], [0.0, 0.0]);
    let p = PotentialSpec::constant_field(1.0);
    let nl = NonlinearitySpec::cubic(1.0, 0.0);
    let cfg = SolverConfig { leakage: LeakageLimits::disabled(), ..SolverConfig::new(2.0, 0.01, 0.16) };
    let a = solve(&u0, &p, &nl, &cfg).unwrap();
    for n in [1, 2, 4, 8] {
        let b = solve_piecewise_a(&u0, &p, &nl, &cfg, n).unwrap();
        assert_eq!(a.final_state.field, b.final_state.field);
        assert_eq!(b.piecewise.unwrap().jump_corrections, 0.0);
    }
}

#[test]
fn truncation_above_the_amplitude_is_inactive() {
    let g = Grid::new(1, 128, 16.0).unwrap();
    let u0 = ComplexField::from_fn(g, |x| Complex64::new(1.5 * (-x[0] * x[0]).exp(), 0.0));
    let nl = NonlinearitySpec::cubic(1.0, 0.0);
    let cfg = SolverConfig { leakage: LeakageLimits::disabled(), ..SolverConfig::new(1.0, 0.01, 0.5) };
    let full = solve(&u0, &PotentialSpec::zero(), &nl, &cfg).unwrap();
    let peak = full.diagnostics.records().iter().map(|r| r.max_abs).fold(0.0, f64::max);
    let trunc = solve_truncated(&u0, &PotentialSpec::zero(), &nl, &cfg, 2.0 * peak).unwrap();
    assert!(max_diff(&full.final_state.field, &trunc.final_state.field) <= 5.0 * cfg.cn_tolerance);
    let low = solve_truncated(&u0, &PotentialSpec::zero(), &nl, &cfg, 1.0).unwrap();
    assert!(max_diff(&full.final_state.field, &low.final_state.field) > 1e-3);
}

#[test]
fn forward_then_backward_returns_to_start() {
    let g = Grid::new(2, 32, 8.0).unwrap();
    let u0 = gaussian_2d(g, 1.5, [0.2, -0.1], [0.5, 0.0]);
    let p =
        PotentialSpec::constant_field(1.0).with_modulation(Modulation::Sinusoidal { amplitude: 0.4, frequency: 2.0 });
    let nl = NonlinearitySpec::cubic(1.0, 1.0);
    let cfg = SolverConfig { cn_tolerance: 1e-12, ..SolverConfig::new(2.0, 0.01, 1.0) };
    for dt in [0.02, 0.01] {
        let fwd = strang_step(&u0, &p, &nl, 0.3, dt, 2.0, &cfg).unwrap();
        let back = strang_step(&fwd, &p, &nl, 0.3 + dt, -dt, 2.0, &cfg).unwrap();
        let err = l2_norm(&back.sub(&u0).unwrap());
        assert!(err <= 1e-3 * dt.powi(3), "dt={dt} err={err}");
    }
}

#[test]
fn focusing_growth_triggers_blowup_monitor() {
    let g = Grid::new(1, 256, 16.0).unwrap();
    let u0 = ComplexField::from_fn(g, |x| Complex64::new(4.0 * (-x[0] * x[0]).exp(), 0.0));
    let cfg = SolverConfig { blowup_factor: 2.0, ..SolverConfig::new(1.0, 1e-3, 1.0) };
    match solve(&u0, &PotentialSpec::zero(), &NonlinearitySpec::cubic(-1.0, 0.0), &cfg) {
        Err(Error::Aborted { reason: AbortReason::Blowup { time, norm, ceiling }, partial }) => {
            assert!(norm > ceiling && time > 0.0 && time < 1.0);
            assert_eq!(partial.diagnostics.last().unwrap().time, time);
            assert!(!partial.completed());
        }
        other => panic!("expected blowup abort, got {:?}", other.map(|s| s.status)),
    }
}

#[test]
fn moving_packet_triggers_leakage_monitor() {
    let g = Grid::new(1, 256, 16.0).unwrap();
    let u0 = ComplexField::from_fn(g, |x| Complex64::from_polar((-x[0] * x[0]).exp(), 10.0 * x[0]));
    let cfg = SolverConfig::new(1.0, 2e-3, 1.0);
    match solve(&u0, &PotentialSpec::zero(), &NonlinearitySpec::linear(), &cfg) {
        Err(err @ Error::Aborted { reason: AbortReason::Leakage { .. }, .. }) => assert_eq!(err.exit_code(), 5),
        other => panic!("expected leakage abort, got {:?}", other.map(|s| s.status)),
    }
}

#[test]
fn initial_leakage_is_refused() {
    let g = Grid::new(1, 64, 8.0).unwrap();
    let u0 = ComplexField::from_fn(g, |_| Complex64::new(1.0, 0.0));
    let err = solve(&u0, &PotentialSpec::zero(), &NonlinearitySpec::linear(), &SolverConfig::new(1.0, 0.01, 0.1))
        .unwrap_err();
    assert!(matches!(err, Error::InitialLeakage { .. }));
    let cfg = SolverConfig { leakage: LeakageLimits::disabled(), ..SolverConfig::new(1.0, 0.01, 0.1) };
    assert!(solve(&u0, &PotentialSpec::zero(), &NonlinearitySpec::linear(), &cfg).is_ok());
}

#[test]
fn gauge_transformed_run_matches_after_phase_map_small() {
    let g = Grid::new(2, 32, 10.0).unwrap();
    let b = 2.0;
    let chi = Gauge::Bump(Bump { amplitude: 0.7, width: 1.2, center: [0.3, 0.1] });
    let p = PotentialSpec::constant_field(1.0);
    let q = p.shifted_by(chi).unwrap();
    let u0 = gaussian_2d(g, 1.0, [0.0, 0.0], [0.0, 0.0]);
    let phase: Vec<f64> = chi.sample(&g).values().iter().map(|c| -b * c).collect();
    let v0 = u0.with_phase(&phase).unwrap();
    let nl = NonlinearitySpec::cubic(1.0, 1.0);
    let cfg =
        SolverConfig { cn_tolerance: 1e-12, leakage: LeakageLimits::disabled(), ..SolverConfig::new(b, 0.005, 0.1) };
    let u = solve(&u0, &p, &nl, &cfg).unwrap().final_state.field;
    let v = solve(&v0, &q, &nl, &cfg).unwrap().final_state.field;
    assert!(max_diff(&u.with_phase(&phase).unwrap(), &v) < 1e-9);
    assert!(max_abs(&u) > 0.1);
}
