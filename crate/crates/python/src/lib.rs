//! Python bindings: grids, potentials, nonlinearities, the split-step solver,
//! the WKB system and the command-line driver.

use magnls::field::{boundary_leakage, l2_norm, ComplexField};
use magnls::initial::{Amplitude, PhaseProfile};
use magnls::potential::{Bump, Gauge, Modulation};
use magnls::propagator::{Ladder, LeakageLimits};
use magnls::wkb::{self, WkbConfig};
use magnls::Error;
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(magnls_py, SolverError, PyRuntimeError, "A run failed; `args[1]` is the CLI exit code.");

fn to_py(err: Error) -> PyErr {
    let code = err.exit_code();
    if code == 2 {
        PyValueError::new_err(err.to_string())
    } else {
        SolverError::new_err((err.to_string(), code))
    }
}

/// Serializes through JSON so nested enums arrive as plain dicts.
fn json<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(module = "magnls_py", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct Grid(magnls::Grid);

#[pymethods]
impl Grid {
    #[new]
    fn new(dim: usize, n: usize, length: f64) -> PyResult<Self> {
        magnls::Grid::new(dim, n, length).map(Grid).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.points_per_axis()
    }

    #[getter]
    fn length(&self) -> f64 {
        self.0.length()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Node coordinates in storage order (x fastest).
    fn coords(&self) -> Vec<(f64, f64)> {
        (0..self.0.len()).map(|i| self.0.coords(i)).map(|p| (p[0], p[1])).collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid(dim={}, n={}, length={})", self.0.dim(), self.0.points_per_axis(), self.0.length())
    }
}

#[pyclass(module = "magnls_py", frozen, from_py_object)]
#[derive(Clone)]
struct Potential(magnls::PotentialSpec);

#[pymethods]
impl Potential {
    #[staticmethod]
    fn zero() -> Self {
        Potential(magnls::PotentialSpec::zero())
    }

    #[staticmethod]
    fn constant_field(b0: f64) -> Self {
        Potential(magnls::PotentialSpec::constant_field(b0))
    }

    /// Multiplies `A` by `1 + amplitude · sin(frequency · t)`.
    fn modulated(&self, amplitude: f64, frequency: f64) -> Self {
        Potential(self.0.clone().with_modulation(Modulation::Sinusoidal { amplitude, frequency }))
    }

    /// Adds `∇χ` for a Gaussian bump `χ`.
    #[pyo3(signature = (amplitude, width, center=(0.0, 0.0)))]
    fn gauge_shifted(&self, amplitude: f64, width: f64, center: (f64, f64)) -> PyResult<Self> {
        let chi = Gauge::Bump(Bump { amplitude, width, center: [center.0, center.1] });
        self.0.shifted_by(chi).map(Potential).map_err(to_py)
    }

    fn vector_potential(&self, grid: &Grid, t: f64) -> PyResult<Vec<Vec<f64>>> {
        Ok(self.0.eval_a(t, &grid.0).map_err(to_py)?.into_components())
    }

    fn magnetic_field(&self, grid: &Grid, t: f64) -> PyResult<Vec<f64>> {
        Ok(self.0.eval_b(t, &grid.0).map_err(to_py)?.values().to_vec())
    }

    fn is_static(&self) -> bool {
        self.0.is_static()
    }
}

#[pyclass(module = "magnls_py", frozen, from_py_object)]
#[derive(Clone)]
struct Nonlinearity(magnls::NonlinearitySpec);

#[pymethods]
impl Nonlinearity {
    /// `sign · b^γ · u |u|^{2σ}`.
    #[new]
    #[pyo3(signature = (sigma=1.0, sign=1.0, gamma=0.0))]
    fn new(sigma: f64, sign: f64, gamma: f64) -> PyResult<Self> {
        magnls::NonlinearitySpec::power(sigma, sign, gamma).map(Nonlinearity).map_err(to_py)
    }

    #[staticmethod]
    fn linear() -> Self {
        Nonlinearity(magnls::NonlinearitySpec::linear())
    }

    fn coupling(&self, b: f64) -> f64 {
        self.0.coupling(b)
    }

    fn g(&self, s: f64) -> f64 {
        self.0.g(s)
    }

    #[getter]
    fn sign(&self) -> f64 {
        self.0.sign
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma
    }
}

fn field(grid: &Grid, values: Vec<Complex64>) -> PyResult<ComplexField> {
    ComplexField::new(grid.0, values).map_err(to_py)
}

/// `amplitude · exp(-|x - center|²/width²) · e^{i k·x}` sampled on `grid`.
#[pyfunction]
#[pyo3(signature = (grid, amplitude, width, center=(0.0, 0.0), k=(0.0, 0.0)))]
fn gaussian(grid: &Grid, amplitude: f64, width: f64, center: (f64, f64), k: (f64, f64)) -> PyResult<Vec<Complex64>> {
    let a = Amplitude::Gaussian { amplitude, width, center: [center.0, center.1], wavenumber: [k.0, k.1] };
    a.validate().map_err(to_py)?;
    Ok(a.sample(&grid.0).into_values())
}

#[pyfunction]
fn mass(grid: &Grid, values: Vec<Complex64>) -> PyResult<f64> {
    Ok(l2_norm(&field(grid, values)?).powi(2))
}

#[pyfunction]
fn leakage(grid: &Grid, values: Vec<Complex64>) -> PyResult<f64> {
    Ok(boundary_leakage(&field(grid, values)?))
}

#[pyclass(module = "magnls_py", frozen)]
struct Solution(magnls::Solution);

#[pymethods]
impl Solution {
    #[getter]
    fn completed(&self) -> bool {
        self.0.completed()
    }

    #[getter]
    fn status<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json(py, &self.0.status)
    }

    #[getter]
    fn final_time(&self) -> f64 {
        self.0.final_state.time
    }

    #[getter]
    fn final_state(&self) -> Vec<Complex64> {
        self.0.final_state.field.values().to_vec()
    }

    #[getter]
    fn relative_mass_drift(&self) -> f64 {
        self.0.diagnostics.relative_mass_drift()
    }

    #[getter]
    fn max_energy_law_residual(&self) -> f64 {
        self.0.diagnostics.max_abs_residual()
    }

    /// `(step, time, values)` for each stored snapshot.
    fn snapshots(&self) -> Vec<(usize, f64, Vec<Complex64>)> {
        self.0.snapshots.iter().map(|s| (s.step, s.time, s.field.values().to_vec())).collect()
    }

    /// One dict per diagnostics row.
    fn diagnostics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json(py, &self.0.diagnostics.records())
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

/// Runs the split-step solver. `truncation` and `pieces` select the
/// truncated-nonlinearity and piecewise-constant-potential ladders.
#[pyfunction]
#[pyo3(signature = (
    grid, u0, potential, nonlinearity, b, dt, t_end, *,
    cn_tolerance=1e-10, snapshot_stride=0, diagnostics_stride=1,
    check_leakage=true, truncation=None, pieces=None,
))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    grid: &Grid,
    u0: Vec<Complex64>,
    potential: &Potential,
    nonlinearity: &Nonlinearity,
    b: f64,
    dt: f64,
    t_end: f64,
    cn_tolerance: f64,
    snapshot_stride: usize,
    diagnostics_stride: usize,
    check_leakage: bool,
    truncation: Option<f64>,
    pieces: Option<usize>,
) -> PyResult<Solution> {
    let ladder = match (truncation, pieces) {
        (None, None) => Ladder::None,
        (Some(m), None) => Ladder::Truncated { m },
        (None, Some(pieces)) => Ladder::PiecewiseA { pieces },
        _ => return Err(PyValueError::new_err("truncation and pieces are mutually exclusive")),
    };
    let cfg = magnls::SolverConfig {
        cn_tolerance,
        snapshot_stride,
        diagnostics_stride,
        ladder,
        leakage: if check_leakage { LeakageLimits::default() } else { LeakageLimits::disabled() },
        ..magnls::SolverConfig::new(b, dt, t_end)
    };
    let u0 = field(grid, u0)?;
    let (p, nl) = (&potential.0, &nonlinearity.0);
    py.detach(|| magnls::solve(&u0, p, nl, &cfg)).map(Solution).map_err(to_py)
}

#[pyclass(module = "magnls_py", frozen)]
struct WkbTrajectory {
    inner: wkb::WkbTrajectory,
    phase: PhaseProfile,
    potential: magnls::PotentialSpec,
}

#[pymethods]
impl WkbTrajectory {
    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    #[getter]
    fn completed(&self) -> bool {
        self.inner.completed()
    }

    #[getter]
    fn status<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json(py, &self.inner.status)
    }

    #[getter]
    fn relative_mass_drift(&self) -> f64 {
        self.inner.relative_mass_drift()
    }

    /// Final rescaled time.
    #[getter]
    fn final_time(&self) -> f64 {
        self.inner.final_frame().state.t
    }

    #[getter]
    fn final_alpha(&self) -> Vec<Complex64> {
        self.inner.final_frame().state.alpha().into_values()
    }

    #[getter]
    fn final_velocity(&self) -> Vec<Vec<f64>> {
        self.inner.final_frame().state.v.components().to_vec()
    }

    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json(py, &self.inner.records)
    }

    /// Reconstructed `u = α e^{iφ/h}` at the final frame.
    fn reconstruct(&self) -> PyResult<Vec<Complex64>> {
        let r = wkb::reconstruct(&self.inner, &self.phase, &self.potential, 1.0 / self.inner.h).map_err(to_py)?;
        Ok(r.final_field().values().to_vec())
    }
}

/// Integrates the WKB system for `b` (so `h = 1/b`) up to rescaled time
/// `t_end`, starting from amplitude `a0` and phase `phase_bilinear · x y`.
#[pyfunction]
#[pyo3(signature = (grid, a0, potential, nonlinearity, b, t_end, *, phase_bilinear=0.0, cfl_safety=0.5, frame_stride=0))]
#[allow(clippy::too_many_arguments)]
fn wkb_solve(
    py: Python<'_>,
    grid: &Grid,
    a0: Vec<Complex64>,
    potential: &Potential,
    nonlinearity: &Nonlinearity,
    b: f64,
    t_end: f64,
    phase_bilinear: f64,
    cfl_safety: f64,
    frame_stride: usize,
) -> PyResult<WkbTrajectory> {
    let phase = if phase_bilinear == 0.0 {
        PhaseProfile::Zero
    } else {
        PhaseProfile::Analytic { bump: None, bilinear: phase_bilinear }
    };
    let cfg = WkbConfig {
        time_step: wkb::TimeStep::Cfl { safety: cfl_safety },
        frame_stride,
        ..WkbConfig::new(b, t_end, field(grid, a0)?, phase.clone())
    };
    let (p, nl) = (&potential.0, &nonlinearity.0);
    let inner = py.detach(|| wkb::wkb_solve(&cfg, p, nl)).map_err(to_py)?;
    Ok(WkbTrajectory { inner, phase, potential: potential.0.clone() })
}

/// Samples the symmetrizer of the WKB flux at random states; returns one
/// report per spatial direction.
#[pyfunction]
#[pyo3(signature = (nonlinearity, dim, samples=1000, amplitude=2.0, speed=2.0, seed=0))]
fn symmetrizer_check<'py>(
    py: Python<'py>,
    nonlinearity: &Nonlinearity,
    dim: usize,
    samples: usize,
    amplitude: f64,
    speed: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let reports =
        wkb::random_symmetrizer_check(&nonlinearity.0, dim, samples, amplitude, speed, seed).map_err(to_py)?;
    json(py, &reports)
}

/// Runs the `magnls` command line with `args` (without the program name)
/// and returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("magnls".to_string()).chain(args).collect();
    py.detach(|| magnls::app::main_with_args(argv))
}

#[pymodule]
fn magnls_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    m.add_class::<Grid>()?;
    m.add_class::<Potential>()?;
    m.add_class::<Nonlinearity>()?;
    m.add_class::<Solution>()?;
    m.add_class::<WkbTrajectory>()?;
    m.add_function(wrap_pyfunction!(gaussian, m)?)?;
    m.add_function(wrap_pyfunction!(mass, m)?)?;
    m.add_function(wrap_pyfunction!(leakage, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(wkb_solve, m)?)?;
    m.add_function(wrap_pyfunction!(symmetrizer_check, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
