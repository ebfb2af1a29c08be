//! INI run configuration.
//!
//! Every section and key is checked; unknown ones are errors that name the
//! offending section and key. All values are validated against the owning
//! module before any run starts.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ini::Ini;

use crate::error::{Error, Result};
use crate::field::Grid;
use crate::initial::{Amplitude, InitialData, PhaseProfile};
use crate::nonlinearity::NonlinearitySpec;
use crate::potential::{AuditBounds, Bump, Gauge, Modulation, PotentialKind, PotentialSpec};
use crate::propagator::{Ladder, LeakageLimits, SolverConfig};
use crate::wkb::{Dealias, DeltaRule, TimeStep};

#[derive(Debug, Clone, PartialEq)]
pub struct WkbSettings {
    /// Rescaled end time `T`.
    pub t_end: f64,
    pub time_step: TimeStep,
    pub dealias: Dealias,
    pub shock_ceiling: f64,
    pub frame_stride: usize,
    pub symmetrizer_samples: usize,
    pub b_list: Vec<f64>,
    pub reference_n: usize,
    pub n_exponent: f64,
    pub reference_dt: f64,
    pub dt_exponent: f64,
    pub refinement_check: bool,
    pub delta: DeltaRule,
    pub threshold: f64,
    pub rotation_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceMode {
    Truncation,
    Piecewise,
    Resolution,
}

impl std::str::FromStr for ConvergenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "truncation" => Ok(ConvergenceMode::Truncation),
            "piecewise" => Ok(ConvergenceMode::Piecewise),
            "resolution" => Ok(ConvergenceMode::Resolution),
            other => Err(Error::config("convergence", "mode", format!("unknown mode {other:?}"))),
        }
    }
}

impl ConvergenceMode {
    pub fn name(&self) -> &'static str {
        match self {
            ConvergenceMode::Truncation => "truncation",
            ConvergenceMode::Piecewise => "piecewise",
            ConvergenceMode::Resolution => "resolution",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSettings {
    pub mode: ConvergenceMode,
    pub m_list: Vec<f64>,
    pub pieces_list: Vec<usize>,
    /// Number of `dt` halvings in resolution mode.
    pub refinements: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditSettings {
    pub window: [f64; 2],
    pub time_samples: usize,
    pub order: usize,
    pub bounds: AuditBounds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSettings {
    pub write_snapshots: bool,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: Grid,
    pub potential: PotentialSpec,
    pub nonlinearity: NonlinearitySpec,
    pub initial: InitialData,
    pub solver: SolverConfig,
    pub wkb: WkbSettings,
    pub convergence: ConvergenceSettings,
    pub audit: AuditSettings,
    pub output: OutputSettings,
    /// Parsed `section -> key -> value` text, echoed into run metadata.
    pub echo: BTreeMap<String, BTreeMap<String, String>>,
}

const SECTIONS: [&str; 9] =
    ["grid", "potential", "nonlinearity", "initial", "solver", "wkb", "convergence", "audit", "output"];

/// Key reader for one section that remembers which keys were consumed.
struct Section<'a> {
    name: &'static str,
    values: BTreeMap<String, String>,
    used: BTreeSet<String>,
    _marker: std::marker::PhantomData<&'a ()>,
}

impl<'a> Section<'a> {
    fn new(name: &'static str, values: Option<&BTreeMap<String, String>>) -> Self {
        Section {
            name,
            values: values.cloned().unwrap_or_default(),
            used: BTreeSet::new(),
            _marker: Default::default(),
        }
    }

    fn err(&self, key: &str, msg: impl Into<String>) -> Error {
        Error::config(self.name, key, msg)
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.used.insert(key.to_owned());
        self.values.get(key).cloned()
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|_| self.err(key, format!("expected {what}, got {s:?}"))),
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.parse::<f64>(key, "a number")?.unwrap_or(default);
        if v.is_nan() {
            return Err(self.err(key, "NaN is not allowed"));
        }
        Ok(v)
    }

    fn f64_req(&mut self, key: &str) -> Result<f64> {
        let v = self.parse::<f64>(key, "a number")?.ok_or_else(|| self.err(key, "missing required key"))?;
        if !v.is_finite() {
            return Err(self.err(key, "must be finite"));
        }
        Ok(v)
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        Ok(self.parse::<usize>(key, "a nonnegative integer")?.unwrap_or(default))
    }

    fn usize_req(&mut self, key: &str) -> Result<usize> {
        self.parse::<usize>(key, "a nonnegative integer")?.ok_or_else(|| self.err(key, "missing required key"))
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        Ok(self.parse::<bool>(key, "true or false")?.unwrap_or(default))
    }

    fn str_or(&mut self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or_else(|| default.to_owned())
    }

    fn list_f64(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|p| p.trim().parse::<f64>().map_err(|_| self.err(key, format!("bad list entry {p:?}"))))
                .collect(),
        }
    }

    fn list_usize(&mut self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|p| p.trim().parse::<usize>().map_err(|_| self.err(key, format!("bad list entry {p:?}"))))
                .collect(),
        }
    }

    /// Positive number, or `off` for `None`.
    fn optional_limit(&mut self, key: &str, default: Option<f64>) -> Result<Option<f64>> {
        match self.raw(key).as_deref() {
            None => Ok(default),
            Some("off") | Some("none") => Ok(None),
            Some(s) => {
                s.parse::<f64>().map(Some).map_err(|_| self.err(key, format!("expected a number or off, got {s:?}")))
            }
        }
    }

    fn finish(self) -> Result<()> {
        match self.values.keys().find(|k| !self.used.contains(*k)) {
            Some(k) => Err(Error::config(self.name, k, "unknown key")),
            None => Ok(()),
        }
    }
}

/// Wraps a module validation error with the section it came from.
fn in_section<T>(section: &str, key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::config(section, key, other.to_string()),
    })
}

fn bump(s: &mut Section, prefix: &str, default_amp: f64) -> Result<Bump> {
    Ok(Bump {
        amplitude: s.f64_or(&format!("{prefix}amplitude"), default_amp)?,
        width: s.f64_or(&format!("{prefix}width"), 1.0)?,
        center: [s.f64_or(&format!("{prefix}center_x"), 0.0)?, s.f64_or(&format!("{prefix}center_y"), 0.0)?],
    })
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("file", &path.display().to_string(), format!("cannot read: {e}")))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::config("file", "syntax", e.to_string()))?;
        let mut echo: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        for (sec, props) in ini.iter() {
            let name = match sec {
                Some(name) => name,
                None if props.is_empty() => continue,
                None => {
                    let key = props.iter().next().map(|(k, _)| k).unwrap_or("");
                    return Err(Error::config("(none)", key, "keys must belong to a section"));
                }
            };
            if !SECTIONS.contains(&name) {
                return Err(Error::config(name, "*", "unknown section"));
            }
            let entry = echo.entry(name.to_owned()).or_default();
            for (k, v) in props.iter() {
                if entry.insert(k.to_owned(), v.trim().to_owned()).is_some() {
                    return Err(Error::config(name, k, "duplicate key"));
                }
            }
        }
        let sec = |name: &'static str| Section::new(name, echo.get(name));

        // [grid]
        let mut s = sec("grid");
        let dim = s.usize_req("dim")?;
        let n = s.usize_req("n")?;
        let length = s.f64_req("length")?;
        let grid = in_section("grid", "n", Grid::new(dim, n, length))?;
        s.finish()?;

        // [potential]
        let mut s = sec("potential");
        let kind = match s.str_or("kind", "zero").as_str() {
            "zero" => PotentialKind::Zero,
            "constant_field" => PotentialKind::ConstantField { b0: s.f64_or("b0", 1.0)? },
            "linear_plus_bump" => {
                PotentialKind::LinearPlusBump { b0: s.f64_or("b0", 1.0)?, bump: bump(&mut s, "bump_", 1.0)? }
            }
            other => return Err(Error::config("potential", "kind", format!("unknown kind {other:?}"))),
        };
        let modulation = match s.str_or("modulation", "none").as_str() {
            "none" => Modulation::None,
            "sinusoidal" => Modulation::Sinusoidal {
                amplitude: s.f64_or("modulation_amplitude", 0.5)?,
                frequency: s.f64_or("modulation_frequency", 1.0)?,
            },
            other => return Err(Error::config("potential", "modulation", format!("unknown modulation {other:?}"))),
        };
        let gauge = match s.str_or("gauge", "none").as_str() {
            "none" => Gauge::None,
            "bump" => Gauge::Bump(bump(&mut s, "gauge_", 1.0)?),
            "bilinear" => Gauge::Bilinear { coefficient: s.f64_or("gauge_coefficient", 1.0)? },
            other => return Err(Error::config("potential", "gauge", format!("unknown gauge {other:?}"))),
        };
        let epsilon_decay = s.f64_or("epsilon_decay", 1.0)?;
        let potential = PotentialSpec { kind, modulation, gauge, epsilon_decay };
        in_section("potential", "kind", potential.validate(&grid))?;
        s.finish()?;

        // [nonlinearity]
        let mut s = sec("nonlinearity");
        let nonlinearity = match s.str_or("profile", "power").as_str() {
            "none" => NonlinearitySpec::linear(),
            "power" => {
                let sigma = s.f64_or("sigma", 1.0)?;
                let sign = s.f64_or("sign", 1.0)?;
                let gamma = s.f64_or("gamma", 2.0)?;
                in_section("nonlinearity", "sigma", NonlinearitySpec::power(sigma, sign, gamma))?
            }
            other => return Err(Error::config("nonlinearity", "profile", format!("unknown profile {other:?}"))),
        };
        s.finish()?;

        // [initial]
        let mut s = sec("initial");
        let center = [s.f64_or("center_x", 0.0)?, s.f64_or("center_y", 0.0)?];
        let wavenumber = [s.f64_or("kx", 0.0)?, s.f64_or("ky", 0.0)?];
        let amplitude = match s.str_or("profile", "gaussian").as_str() {
            "zero" => Amplitude::Zero,
            "gaussian" => Amplitude::Gaussian {
                amplitude: s.f64_or("amplitude", 1.0)?,
                width: s.f64_or("width", 1.0)?,
                center,
                wavenumber,
            },
            "plane_wave" => Amplitude::PlaneWave { amplitude: s.f64_or("amplitude", 1.0)?, wavenumber },
            other => return Err(Error::config("initial", "profile", format!("unknown profile {other:?}"))),
        };
        in_section("initial", "profile", amplitude.validate())?;
        let phase = match s.str_or("phase", "zero").as_str() {
            "zero" => PhaseProfile::Zero,
            "analytic" => {
                let b = bump(&mut s, "phase_", 0.0)?;
                PhaseProfile::Analytic {
                    bump: if b.amplitude != 0.0 { Some(b) } else { None },
                    bilinear: s.f64_or("phase_bilinear", 0.0)?,
                }
            }
            other => return Err(Error::config("initial", "phase", format!("unknown phase {other:?}"))),
        };
        in_section("initial", "phase", phase.gradient(&grid).map(|_| ()))?;
        s.finish()?;
        let initial = InitialData { amplitude, phase };

        // [output] is read before [solver] for the diagnostics stride.
        let mut s = sec("output");
        let diagnostics_stride = s.usize_or("diagnostics_stride", 1)?;
        let output = OutputSettings { write_snapshots: s.bool_or("write_snapshots", true)? };
        s.finish()?;

        // [solver]
        let mut s = sec("solver");
        let mut solver = SolverConfig::new(s.f64_req("b")?, s.f64_req("dt")?, s.f64_req("t_end")?);
        solver.cn_tolerance = s.f64_or("cn_tolerance", solver.cn_tolerance)?;
        solver.cn_max_iterations = s.usize_or("cn_max_iterations", solver.cn_max_iterations)?;
        solver.gmres_restart = s.usize_or("gmres_restart", solver.gmres_restart)?;
        solver.snapshot_stride = s.usize_or("snapshot_stride", 0)?;
        solver.blowup_factor = s.f64_or("blowup_factor", solver.blowup_factor)?;
        solver.diagnostics_stride = diagnostics_stride;
        solver.leakage = LeakageLimits {
            initial: s.optional_limit("leakage_initial", LeakageLimits::default().initial)?,
            run: s.optional_limit("leakage_run", LeakageLimits::default().run)?,
        };
        solver.ladder = match s.str_or("ladder", "none").as_str() {
            "none" => Ladder::None,
            "truncated" => Ladder::Truncated { m: s.f64_or("truncation_m", 1.0)? },
            "piecewise" => Ladder::PiecewiseA { pieces: s.usize_or("pieces", 1)? },
            other => return Err(Error::config("solver", "ladder", format!("unknown ladder {other:?}"))),
        };
        in_section("solver", "dt", solver.validate())?;
        s.finish()?;

        // [wkb]
        let mut s = sec("wkb");
        let time_step = match s.parse::<f64>("dt", "a number")? {
            Some(dt) => TimeStep::Fixed { dt },
            None => TimeStep::Cfl { safety: s.f64_or("cfl_safety", 0.5)? },
        };
        let dealias = match s.str_or("dealias", "two_thirds").as_str() {
            "two_thirds" => Dealias::TwoThirds,
            "none" => Dealias::None,
            other => return Err(Error::config("wkb", "dealias", format!("unknown dealiasing {other:?}"))),
        };
        let delta = match s.parse::<f64>("delta", "a number")? {
            Some(delta) => DeltaRule::Fixed { delta },
            None => {
                DeltaRule::Power { scale: s.f64_or("delta_scale", 1.0)?, exponent: s.f64_or("delta_exponent", -0.5)? }
            }
        };
        let wkb = WkbSettings {
            t_end: s.f64_or("t_end", 0.5)?,
            time_step,
            dealias,
            shock_ceiling: s.f64_or("shock_ceiling", 1e3)?,
            frame_stride: s.usize_or("frame_stride", 0)?,
            symmetrizer_samples: s.usize_or("symmetrizer_samples", 1000)?,
            b_list: s.list_f64("b_list", &[4.0, 8.0, 16.0])?,
            reference_n: s.usize_or("reference_n", grid.points_per_axis())?,
            n_exponent: s.f64_or("n_exponent", 2.0)?,
            reference_dt: s.f64_or("reference_dt", solver.dt)?,
            dt_exponent: s.f64_or("dt_exponent", 3.0)?,
            refinement_check: s.bool_or("refinement_check", true)?,
            delta,
            threshold: s.f64_or("threshold", 1.0)?,
            rotation_fraction: s.f64_or("rotation_fraction", 0.05)?,
        };
        if !(wkb.t_end > 0.0) {
            return Err(Error::config("wkb", "t_end", "must be positive"));
        }
        if let TimeStep::Cfl { safety } = wkb.time_step {
            if !(safety > 0.0 && safety <= 1.0) {
                return Err(Error::config("wkb", "cfl_safety", "must lie in (0, 1]"));
            }
        }
        if wkb.b_list.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(Error::config("wkb", "b_list", "entries must be positive"));
        }
        if !(wkb.threshold > 0.0) || !(wkb.rotation_fraction > 0.0) || !(wkb.shock_ceiling > 0.0) {
            return Err(Error::config(
                "wkb",
                "threshold",
                "threshold, rotation_fraction and shock_ceiling must be positive",
            ));
        }
        s.finish()?;

        // [convergence]
        let mut s = sec("convergence");
        let convergence = ConvergenceSettings {
            mode: s.str_or("mode", "truncation").parse()?,
            m_list: s.list_f64("m_list", &[1.0, 2.0, 4.0, 8.0])?,
            pieces_list: {
                let steps = solver.steps();
                let divisors: Vec<usize> = (1..=steps.min(64)).filter(|p| steps.is_multiple_of(*p)).collect();
                s.list_usize("pieces_list", &divisors)?
            },
            refinements: s.usize_or("refinements", 3)?,
        };
        if convergence.m_list.iter().any(|m| !(*m >= 1.0)) {
            return Err(Error::config("convergence", "m_list", "truncation levels must be >= 1"));
        }
        if let Some(p) = convergence.pieces_list.iter().find(|p| **p == 0 || !solver.steps().is_multiple_of(**p)) {
            return Err(Error::config(
                "convergence",
                "pieces_list",
                format!("{p} does not divide the step count {}", solver.steps()),
            ));
        }
        s.finish()?;

        // [audit]
        let mut s = sec("audit");
        let audit = AuditSettings {
            window: [s.f64_or("window_start", 0.0)?, s.f64_or("window_end", solver.t_end)?],
            time_samples: s.usize_or("time_samples", 16)?,
            order: s.usize_or("order", 2)?,
            bounds: AuditBounds {
                dta: s.f64_or("bound_dta", 1e3)?,
                dxa: s.f64_or("bound_dxa", 1e3)?,
                weighted_dxb: s.f64_or("bound_weighted_dxb", 1e3)?,
            },
        };
        if !(audit.order == 1 || audit.order == 2) {
            return Err(Error::config("audit", "order", "must be 1 or 2"));
        }
        if !(audit.window[1] >= audit.window[0]) || audit.time_samples == 0 {
            return Err(Error::config("audit", "window_end", "window must be ordered and sampled at least once"));
        }
        s.finish()?;

        Ok(RunConfig { grid, potential, nonlinearity, initial, solver, wkb, convergence, audit, output, echo })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[grid]\ndim = 2\nn = 32\nlength = 16\n\n[solver]\nb = 4\ndt = 0.01\nt_end = 0.1\n";

    fn expect_config_error(text: &str, section: &str, key: &str) {
        match RunConfig::parse(text) {
            Err(Error::Config { section: s, key: k, .. }) => {
                assert_eq!((s.as_str(), k.as_str()), (section, key), "{text}");
            }
            other => panic!("expected config error for [{section}] {key}, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse(BASE).unwrap();
        assert_eq!(c.grid.points_per_axis(), 32);
        assert_eq!(c.solver.steps(), 10);
        assert_eq!(c.solver.cn_tolerance, 1e-10);
        assert_eq!(c.nonlinearity.sign, 1.0);
        assert_eq!(c.wkb.b_list, vec![4.0, 8.0, 16.0]);
        assert_eq!(c.potential, PotentialSpec::zero());
    }

    #[test]
    fn full_config_round_trips_values() {
        let text = format!(
            "{BASE}cn_tolerance = 1e-12\nladder = piecewise\npieces = 5\nleakage_run = off\n\
             [potential]\nkind = constant_field\nb0 = 1.5\nmodulation = sinusoidal\nmodulation_amplitude = 0.3\n\
             modulation_frequency = 2\ngauge = bump\ngauge_amplitude = 0.5\n\
             [nonlinearity]\nsign = -1\ngamma = 1\nsigma = 1\n\
             [initial]\nprofile = gaussian\namplitude = 2\nphase = analytic\nphase_amplitude = 0.3\n\
             [output]\ndiagnostics_stride = 2\n\
             [convergence]\nmode = piecewise\npieces_list = 1,2,5,10\n"
        );
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(c.solver.ladder, Ladder::PiecewiseA { pieces: 5 });
        assert_eq!(c.solver.leakage.run, None);
        assert_eq!(c.solver.diagnostics_stride, 2);
        assert_eq!(c.potential.modulation, Modulation::Sinusoidal { amplitude: 0.3, frequency: 2.0 });
        assert_eq!(c.nonlinearity.sign, -1.0);
        assert_eq!(c.convergence.mode, ConvergenceMode::Piecewise);
        assert!(matches!(c.initial.phase, PhaseProfile::Analytic { bump: Some(_), .. }));
    }

    #[test]
    fn errors_name_section_and_key() {
        expect_config_error(&format!("{BASE}foo = 1\n"), "solver", "foo");
        expect_config_error(&format!("{BASE}[extra]\nx = 1\n"), "extra", "*");
        expect_config_error(
            "[grid]\ndim = 2\nn = 32\nlength = 16\n[solver]\nb = 4\ndt = 0.2\nt_end = 0.1\n",
            "solver",
            "dt",
        );
        expect_config_error(
            "[grid]\ndim = 2\nn = 30\nlength = 16\n[solver]\nb = 4\ndt = 0.01\nt_end = 0.1\n",
            "grid",
            "n",
        );
        expect_config_error(&format!("{BASE}[potential]\nkind = magic\n"), "potential", "kind");
        expect_config_error(&format!("{BASE}[nonlinearity]\nsign = 2\n"), "nonlinearity", "sigma");
        expect_config_error(&format!("{BASE}cn_tolerance = abc\n"), "solver", "cn_tolerance");
        expect_config_error("[grid]\ndim = 2\nn = 32\n[solver]\nb = 4\ndt = 0.01\nt_end = 0.1\n", "grid", "length");
        expect_config_error(&format!("{BASE}[convergence]\npieces_list = 3\n"), "convergence", "pieces_list");
        expect_config_error("[grid]\ndim = 1\nn = 32\nlength = 16\n[potential]\nkind = constant_field\n[solver]\nb = 4\ndt = 0.01\nt_end = 0.1\n", "potential", "kind");
    }

    #[test]
    fn comments_are_ignored() {
        let text = format!("# run\n{BASE}# trailing\n");
        assert!(RunConfig::parse(&text).is_ok());
    }
}
