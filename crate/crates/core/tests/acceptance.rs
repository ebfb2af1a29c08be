//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use magnls::field::{l2_norm, ComplexField, Grid};
use magnls::initial::{Amplitude, InitialData, PhaseProfile};
use magnls::nonlinearity::NonlinearitySpec;
use magnls::potential::{Bump, Gauge, Modulation, PotentialSpec};
use magnls::propagator::{solve, Integrator, LeakageLimits, SolverConfig};
use magnls::sweep::{self, PiecewiseRow, TruncationRow};
use magnls::wkb::{b_trend, compare_to_direct, instability_experiment, random_symmetrizer_check, CompareConfig};
use magnls::wkb::{DeltaRule, InstabilityConfig};
use num_complex::Complex64;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/mass_conservation.ini")
}

fn run_cli(out: &Path) -> Duration {
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_magnls"))
        .arg("--config")
        .arg(config_path())
        .arg("--output-dir")
        .arg(out)
        .arg("solve")
        .status()
        .expect("spawn magnls");
    assert!(status.success(), "magnls solve exited with {status}");
    start.elapsed()
}

/// Gaussian of amplitude 0.5 on the 2D box of the constant-field scenario.
fn packet_2d(g: Grid) -> ComplexField {
    ComplexField::from_fn(g, |x| Complex64::new(0.5 * (-((x[0] - 0.5).powi(2) + x[1] * x[1])).exp(), 0.0))
}

fn mass_conservation(dir: &Path) -> Check {
    let elapsed = run_cli(&dir.join("first"));
    let mut rd = csv::Reader::from_path(dir.join("first/diagnostics.csv")).map_err(|e| e.to_string())?;
    let col = rd.headers().map_err(|e| e.to_string())?.iter().position(|h| h == "mass").ok_or("no mass column")?;
    let mut masses = Vec::new();
    for rec in rd.records() {
        masses.push(rec.map_err(|e| e.to_string())?[col].parse::<f64>().map_err(|e| e.to_string())?);
    }
    let drift = masses.iter().map(|m| (m - masses[0]).abs() / masses[0]).fold(0.0, f64::max);
    let detail = format!("rows {} drift {drift:.2e} (<= 1e-8), {:.0}s (<= 180s)", masses.len(), elapsed.as_secs_f64());
    ensure(masses.len() == 2001 && drift <= 1e-8 && elapsed.as_secs() <= 180, detail)
}

fn determinism(dir: &Path) -> Check {
    run_cli(&dir.join("second"));
    let (a, b) = (dir.join("first"), dir.join("second"));
    let mut files = vec![PathBuf::from("diagnostics.csv")];
    for e in std::fs::read_dir(a.join("snapshots")).map_err(|e| e.to_string())? {
        files.push(Path::new("snapshots").join(e.map_err(|e| e.to_string())?.file_name()));
    }
    let mut differing = Vec::new();
    for f in &files {
        let (x, y) = (std::fs::read(a.join(f)), std::fs::read(b.join(f)));
        match (x, y) {
            (Ok(x), Ok(y)) if x == y => {}
            _ => differing.push(f.display().to_string()),
        }
    }
    ensure(differing.is_empty(), format!("{} files compared, differing: {differing:?}", files.len()))
}

fn gauge_invariance() -> Check {
    let g = Grid::new(2, 128, 16.0).unwrap();
    let b = 4.0;
    let chi = Gauge::Bump(Bump { amplitude: 0.7, width: 1.2, center: [0.3, 0.1] });
    let p = PotentialSpec::constant_field(1.0);
    let q = p.shifted_by(chi).unwrap();
    let u0 = packet_2d(g);
    let phase: Vec<f64> = chi.sample(&g).values().iter().map(|c| -b * c).collect();
    let v0 = u0.with_phase(&phase).unwrap();
    let nl = NonlinearitySpec::cubic(1.0, 2.0);
    let cfg = SolverConfig { cn_tolerance: 1e-12, ..SolverConfig::new(b, 5e-4, 0.1) };
    let u = solve(&u0, &p, &nl, &cfg).map_err(|e| e.to_string())?;
    let v = solve(&v0, &q, &nl, &cfg).map_err(|e| e.to_string())?;
    let mapped = u.final_state.field.with_phase(&phase).unwrap();
    let diff =
        mapped.values().iter().zip(v.final_state.field.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let gauge_effect = u0.values().iter().zip(v0.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    let detail = format!(
        "steps {} max pointwise {diff:.2e} (<= 1e-6), gauge changes data by {gauge_effect:.2}",
        u.steps_planned
    );
    ensure(u.steps_planned == 200 && diff <= 1e-6 && gauge_effect > 0.1, detail)
}

/// Frequency of `u(t, x₀) ∝ e^{-iωt}` from unwrapped per-step phase increments.
fn measured_frequency(sign: f64) -> (f64, f64) {
    let (n, l, mode, c) = (64, 16.0, 2.0, 1.0);
    let g = Grid::new(1, n, l).unwrap();
    let k = 2.0 * PI * mode / l;
    let u0 = ComplexField::from_fn(g, |x| Complex64::from_polar(c, k * x[0]));
    let nl = NonlinearitySpec::cubic(sign, 2.0);
    let cfg =
        SolverConfig { cn_tolerance: 1e-13, leakage: LeakageLimits::disabled(), ..SolverConfig::new(1.0, 0.01, 2.0) };
    let pot = PotentialSpec::zero();
    let mut stepper = Integrator::new(g, &pot, &nl, &cfg);
    let mut u = u0.clone();
    let mut angle = 0.0;
    for s in 0..cfg.steps() {
        let before = u.values()[0];
        stepper.step(&mut u, cfg.time_at(s), cfg.dt).unwrap();
        angle += (u.values()[0] / before).arg();
    }
    let measured = -angle / cfg.t_end;
    let h = g.spacing();
    let k_disc2 = (2.0 / h * (0.5 * k * h).sin()).powi(2);
    (measured, k_disc2 + sign * nl.g(c * c))
}

fn dispersion() -> Check {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for sign in [1.0, -1.0] {
        let (measured, oracle) = measured_frequency(sign);
        let rel = (measured - oracle).abs() / oracle.abs();
        worst = worst.max(rel);
        parts.push(format!("sign {sign:+}: {measured:.8} vs {oracle:.8}"));
    }
    ensure(worst <= 1e-4, format!("{}; worst relative {worst:.2e} (<= 1e-4)", parts.join(", ")))
}

fn energy_law() -> Check {
    let g = Grid::new(2, 128, 16.0).unwrap();
    let u0 = packet_2d(g);
    let nl = NonlinearitySpec::cubic(1.0, 2.0);
    let p = PotentialSpec::constant_field(1.0);
    let static_dev = |dt: f64| {
        let s = solve(&u0, &p, &nl, &SolverConfig { cn_tolerance: 1e-12, ..SolverConfig::new(4.0, dt, 0.1) }).unwrap();
        s.diagnostics.max_energy_deviation() / s.diagnostics.initial_energy().unwrap().abs()
    };
    let (d1, d2) = (static_dev(5e-4), static_dev(2.5e-4));
    let pm = p.with_modulation(Modulation::Sinusoidal { amplitude: 0.5, frequency: 2.0 });
    let residual = |dt: f64| {
        let s = solve(&u0, &pm, &nl, &SolverConfig { cn_tolerance: 1e-12, ..SolverConfig::new(4.0, dt, 0.4) }).unwrap();
        s.diagnostics.max_abs_residual()
    };
    let r: Vec<f64> = [2e-3, 1e-3, 5e-4].into_iter().map(residual).collect();
    let ratios = [r[0] / r[1], r[1] / r[2]];
    let detail = format!(
        "static rel dev {d1:.2e} (<= 1e-5), halving gain {:.2} (>= 3.5); modulated residual ratios {:.3}, {:.3} (in [3.5, 4.5])",
        d1 / d2,
        ratios[0],
        ratios[1]
    );
    ensure(d1 <= 1e-5 && d1 / d2 >= 3.5 && ratios.iter().all(|q| (3.5..=4.5).contains(q)), detail)
}

fn truncation_ladder() -> Check {
    let g = Grid::new(2, 64, 16.0).unwrap();
    let u0 = ComplexField::from_fn(g, |x| Complex64::new(3.0 * (-((x[0] - 0.5).powi(2) + x[1] * x[1])).exp(), 0.0));
    let nl = NonlinearitySpec::cubic(1.0, 1.0);
    let cfg =
        SolverConfig { cn_tolerance: 1e-12, leakage: LeakageLimits::disabled(), ..SolverConfig::new(2.0, 1e-3, 0.5) };
    let rows: Vec<TruncationRow> =
        sweep::truncation_sweep(&u0, &PotentialSpec::constant_field(1.0), &nl, &cfg, &[1.0, 2.0, 4.0, 8.0])
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|e| e.map(|e| e.row).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
    let errors: Vec<f64> = rows.iter().map(|r| r.sup_l2_error).collect();
    let peak = rows[0].reference_max_abs;
    let tol = 5.0 * cfg.cn_tolerance;
    let inactive_ok = rows.iter().filter(|r| r.m >= 2.0 * peak).all(|r| r.sup_l2_error <= tol);
    let some_inactive = rows.iter().any(|r| r.m >= 2.0 * peak);
    let detail = format!(
        "max|u| {peak:.3}, sup errors {}; non-increasing and <= {tol:.0e} for m >= {:.1}",
        sci(&errors),
        2.0 * peak
    );
    ensure(sweep::non_increasing(&errors, 0.0) && inactive_ok && some_inactive && errors[0] > 0.0, detail)
}

fn piecewise_ladder() -> Check {
    let g = Grid::new(2, 64, 16.0).unwrap();
    let u0 = packet_2d(g);
    let nl = NonlinearitySpec::cubic(1.0, 2.0);
    let pm =
        PotentialSpec::constant_field(1.0).with_modulation(Modulation::Sinusoidal { amplitude: 0.5, frequency: 2.0 });
    let cfg =
        SolverConfig { cn_tolerance: 1e-12, leakage: LeakageLimits::disabled(), ..SolverConfig::new(4.0, 1e-3, 0.8) };
    let rows: Vec<PiecewiseRow> = sweep::piecewise_sweep(&u0, &pm, &nl, &cfg, &[2, 4, 8, 16])
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|e| e.map(|e| e.row).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let order = sweep::piecewise_order(&rows).unwrap_or(f64::NAN);
    let scaled: Vec<f64> = rows.iter().map(|r| r.max_ledger_residual * r.pieces as f64).collect();
    let bound = 1.5 * scaled[0];
    let detail = format!("order {order:.3} (1 +/- 0.3); ledger residual * n {scaled:.3?} (<= {bound:.3})");
    ensure((0.7..=1.3).contains(&order) && scaled.iter().all(|s| *s <= bound), detail)
}

fn symmetrizer() -> Check {
    let mut worst: f64 = 0.0;
    let mut definite = true;
    let mut points = 0;
    for nl in [NonlinearitySpec::cubic(1.0, 2.0), NonlinearitySpec::power(1.5, 1.0, 2.0).unwrap()] {
        for dim in [1, 2] {
            for r in random_symmetrizer_check(&nl, dim, 1000, 2.0, 5.0, 2024).map_err(|e| e.to_string())? {
                worst = worst.max(r.max_asymmetry);
                definite &= r.positive_definite && r.min_eigenvalue > 0.0;
                points += r.points;
            }
        }
    }
    ensure(
        worst <= 1e-12 && definite,
        format!("{points} samples, max asymmetry {worst:.2e} (<= 1e-12), positive definite {definite}"),
    )
}

fn wkb_validity() -> Check {
    let initial = InitialData {
        amplitude: Amplitude::Gaussian { amplitude: 0.6, width: 1.0, center: [0.0, 0.0], wavenumber: [0.0, 0.0] },
        phase: PhaseProfile::Analytic {
            bump: Some(Bump { amplitude: 0.3, width: 1.0, center: [0.0, 0.0] }),
            bilinear: 0.0,
        },
    };
    let cfg = CompareConfig {
        b_list: vec![4.0, 8.0, 16.0],
        t_end: 0.5,
        dim: 1,
        length: 16.0,
        initial,
        reference_b: 4.0,
        reference_n: 256,
        n_exponent: 2.0,
        reference_dt: 0.01,
        dt_exponent: 3.0,
        wkb_safety: 0.5,
        cn_tolerance: 1e-12,
        refinement_check: true,
    };
    let rows = compare_to_direct(&cfg, &PotentialSpec::zero(), &NonlinearitySpec::cubic(1.0, 2.0))
        .map_err(|e| e.to_string())?;
    let disc: Vec<f64> = rows.iter().map(|r| r.discrepancy).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.refinement_ratio.unwrap_or(f64::NAN)).collect();
    let trend = b_trend(&rows);
    let detail = format!(
        "discrepancy {} (<= 5e-3), refinement ratios {ratios:.2?} (> 1), log-slope in b {trend:.2} (<= 0.25)",
        sci(&disc)
    );
    ensure(disc.iter().all(|d| *d <= 5e-3) && ratios.iter().all(|r| *r > 1.0) && trend <= 0.25, detail)
}

fn instability() -> Check {
    // ‖a₀‖ = 2 for a unit-width Gaussian.
    let amplitude = 2.0 / (PI / 2.0).powf(0.25);
    let cfg = InstabilityConfig {
        b_list: vec![16.0, 64.0, 256.0],
        delta: DeltaRule::Power { scale: 1.0, exponent: -0.5 },
        threshold: 1.0,
        t_end: 1.0,
        grid: Grid::new(1, 256, 16.0).unwrap(),
        initial: InitialData {
            amplitude: Amplitude::Gaussian { amplitude, width: 1.0, center: [0.0, 0.0], wavenumber: [0.0, 0.0] },
            phase: PhaseProfile::Zero,
        },
        rotation_fraction: 0.05,
        cn_tolerance: 1e-10,
        leakage: LeakageLimits::default(),
    };
    let norm = l2_norm(&cfg.initial.amplitude.sample(&cfg.grid));
    let rows = instability_experiment(&cfg, &PotentialSpec::zero(), &NonlinearitySpec::cubic(1.0, 2.0))
        .map_err(|e| e.to_string())?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.init_gap).collect();
    let products: Vec<f64> = rows.iter().map(|r| r.t_sep_times_b).collect();
    let bound = 1.5 * products[0];
    let detail =
        format!("|a0| {norm:.4}, init gaps {}, t_sep*b {} (<= {bound:.3e}), all separated", sci(&gaps), sci(&products));
    let ok = (norm - 2.0).abs() < 1e-3
        && gaps.windows(2).all(|w| w[1] < w[0])
        && rows.iter().all(|r| r.separated() && r.max_separation >= 1.0)
        && products.iter().all(|p| *p <= bound);
    ensure(ok, detail)
}

type Criterion = (&'static str, Box<dyn Fn() -> Check>);

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let tmp = dir.path().to_path_buf();
    let criteria: Vec<Criterion> = vec![
        (
            "mass conservation",
            Box::new({
                let t = tmp.clone();
                move || mass_conservation(&t)
            }),
        ),
        ("gauge invariance", Box::new(gauge_invariance)),
        ("dispersion oracle", Box::new(dispersion)),
        ("energy law", Box::new(energy_law)),
        ("truncation ladder", Box::new(truncation_ladder)),
        ("piecewise-A ladder", Box::new(piecewise_ladder)),
        ("symmetrizer", Box::new(symmetrizer)),
        ("WKB validity", Box::new(wkb_validity)),
        ("instability", Box::new(instability)),
        (
            "determinism",
            Box::new({
                let t = tmp.clone();
                move || determinism(&t)
            }),
        ),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("[{:>2}] PASS {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("[{:>2}] FAIL {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
