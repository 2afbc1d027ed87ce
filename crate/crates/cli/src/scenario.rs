//! Scenario files: a TOML document describing one run.
//!
//! ```toml
//! [params]            # scaled units unless [units] is present
//! n_axis = [0, 0, 1]
//! level = 0
//!
//! [units]             # optional: lengths in nm, velocities in nm/ps,
//! m_star_me = 0.015   # times in ps, energies in meV
//! hbar_omega_mev = 1.0
//!
//! [profile]
//! kind = "circular"   # sequential_square | broken_ellipsoidal | fourier | tabulated
//! xi0 = 1.0
//! alpha0 = 1.0
//! n = 3
//!
//! [solver]
//! method = "auto"     # analytic | rk4 | duhamel
//! samples = 4096
//!
//! [outputs]
//! dir = "out"
//! prefix = "run"
//!
//! [sweep]
//! variable = "n"      # delta_t | xi0 | alpha0
//! from = 2
//! to = 32
//! count = 31
//!
//! [verify]
//! n_x = 1024
//! steps = 8192
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use spinloop_core::driving::{
    make_broken_ellipsoidal, make_circular, make_fourier, make_sequential_square_with_offset, make_tabulated,
    DrivingProfile, FourierSeries, PhysicalParams, Ramp, TabulatedDriving,
};

use crate::error::{CliError, ConfigError};
use crate::units::UnitSystem;

pub const OUT_DIR_ENV: &str = "SPINLOOP_OUT_DIR";

/// Upper bound on N_x · steps accepted by `verify` unless overridden.
pub const DEFAULT_MAX_WORK: f64 = 6.7e7;

const PRESETS: [(&str, &str); 4] = [
    ("insb-square", include_str!("../configs/insb-square.toml")),
    ("circular-n3", include_str!("../configs/circular-n3.toml")),
    ("ellipsoidal-delay-sweep", include_str!("../configs/ellipsoidal-delay-sweep.toml")),
    ("circular-adiabatic-sweep", include_str!("../configs/circular-adiabatic-sweep.toml")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    params: Option<RawParams>,
    units: Option<UnitSystem>,
    profile: RawProfile,
    solver: Option<RawSolver>,
    outputs: Option<RawOutputs>,
    sweep: Option<RawSweep>,
    verify: Option<RawVerify>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawParams {
    m_star: Option<f64>,
    omega: Option<f64>,
    n_axis: Option<[f64; 3]>,
    zeeman: Option<f64>,
    level: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    kind: String,
    xi0: Option<f64>,
    alpha0: Option<f64>,
    n: Option<i64>,
    ramp: Option<Ramp>,
    alpha1: Option<f64>,
    delta_t: Option<f64>,
    delta_t_over_t0: Option<f64>,
    period: Option<f64>,
    xi: Option<FourierSeries>,
    alpha: Option<FourierSeries>,
    table: Option<String>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    method: Option<String>,
    samples: Option<usize>,
    dt: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    dir: Option<String>,
    prefix: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    variable: String,
    from: f64,
    to: f64,
    count: usize,
    threads: Option<usize>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawVerify {
    n_x: Option<usize>,
    steps: Option<usize>,
    max_work: Option<f64>,
}

/// Driving family with amplitudes already in scaled units.
#[derive(Debug, Clone, PartialEq)]
pub enum ProfileSpec {
    Circular { xi0: f64, alpha0: f64, n: i64 },
    SequentialSquare { xi0: f64, alpha0: f64, ramp: Ramp, alpha1: f64 },
    BrokenEllipsoidal { xi0: f64, alpha0: f64, delta_t: f64 },
    Fourier { period: f64, xi: FourierSeries, alpha: FourierSeries },
    Tabulated(TabulatedDriving),
}

impl ProfileSpec {
    pub fn build(&self, params: &PhysicalParams) -> spinloop_core::Result<DrivingProfile> {
        match self {
            ProfileSpec::Circular { xi0, alpha0, n } => make_circular(params, *xi0, *alpha0, *n),
            ProfileSpec::SequentialSquare {
                xi0,
                alpha0,
                ramp,
                alpha1,
            } => make_sequential_square_with_offset(params, *xi0, *alpha0, *alpha1, *ramp),
            ProfileSpec::BrokenEllipsoidal { xi0, alpha0, delta_t } => {
                make_broken_ellipsoidal(params, *xi0, *alpha0, *delta_t)
            }
            ProfileSpec::Fourier { period, xi, alpha } => make_fourier(params, *period, xi.clone(), alpha.clone()),
            ProfileSpec::Tabulated(t) => make_tabulated(params, t.clone()),
        }
    }

    /// Copy with one sweep variable replaced (scaled value).
    pub fn with(&self, var: SweepVariable, value: f64) -> Result<Self, String> {
        let mut out = self.clone();
        match (&mut out, var) {
            (ProfileSpec::Circular { n, .. }, SweepVariable::N) => *n = value.round() as i64,
            (ProfileSpec::BrokenEllipsoidal { delta_t, .. }, SweepVariable::DeltaT) => *delta_t = value,
            (
                ProfileSpec::Circular { xi0, .. }
                | ProfileSpec::SequentialSquare { xi0, .. }
                | ProfileSpec::BrokenEllipsoidal { xi0, .. },
                SweepVariable::Xi0,
            ) => *xi0 = value,
            (
                ProfileSpec::Circular { alpha0, .. }
                | ProfileSpec::SequentialSquare { alpha0, .. }
                | ProfileSpec::BrokenEllipsoidal { alpha0, .. },
                SweepVariable::Alpha0,
            ) => *alpha0 = value,
            _ => {
                return Err(format!(
                    "sweep variable `{}` does not apply to profile kind `{}`",
                    var.name(),
                    self.kind_name()
                ))
            }
        }
        Ok(out)
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ProfileSpec::Circular { .. } => "circular",
            ProfileSpec::SequentialSquare { .. } => "sequential_square",
            ProfileSpec::BrokenEllipsoidal { .. } => "broken_ellipsoidal",
            ProfileSpec::Fourier { .. } => "fourier",
            ProfileSpec::Tabulated(_) => "tabulated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    /// Closed form when available, otherwise RK4 from periodic initial
    /// conditions.
    Auto,
    Analytic,
    Rk4,
    Duhamel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSpec {
    pub method: SolverMethod,
    pub samples: usize,
    /// When set, the number of samples is T/dt.
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    N,
    DeltaT,
    Xi0,
    Alpha0,
}

impl SweepVariable {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "n" => Some(Self::N),
            "delta_t" | "delta_T" => Some(Self::DeltaT),
            "xi0" => Some(Self::Xi0),
            "alpha0" => Some(Self::Alpha0),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::N => "n",
            Self::DeltaT => "delta_t",
            Self::Xi0 => "xi0",
            Self::Alpha0 => "alpha0",
        }
    }

    /// Whether bisection between sweep points makes sense.
    pub fn is_continuous(self) -> bool {
        !matches!(self, Self::N)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    /// Sweep points as written in the config (input units).
    pub input_values: Vec<f64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifySpec {
    pub n_x: usize,
    pub steps: usize,
    pub max_work: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
    pub prefix: String,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: PhysicalParams,
    pub units: Option<UnitSystem>,
    pub profile_spec: ProfileSpec,
    pub profile: DrivingProfile,
    pub solver: SolverSpec,
    pub outputs: OutputSpec,
    pub sweep: Option<SweepSpec>,
    pub verify: VerifySpec,
}

/// 1-based line of `key` inside `[section]`, for error messages.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.starts_with('[') {
            current = l.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = l.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn err(&self, section: &str, key: &str, msg: impl Into<String>) -> CliError {
        CliError::Config(ConfigError {
            line: locate(self.text, section, key).or_else(|| locate(self.text, section, "")),
            message: msg.into(),
        })
    }

    fn need<T: Copy>(&self, section: &str, key: &str, v: Option<T>, kind: &str) -> Result<T, CliError> {
        v.ok_or_else(|| self.err(section, "kind", format!("{section}.{key} is required for kind = \"{kind}\"")))
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(ConfigError::plain(format!("cannot read {}: {e}", path.display()))))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        let text = preset_text(name).ok_or_else(|| {
            let known: Vec<_> = preset_names().collect();
            CliError::Config(ConfigError::plain(format!(
                "unknown preset `{name}` (known: {})",
                known.join(", ")
            )))
        })?;
        Self::from_toml_str(text, Path::new("."))
    }

    /// Parses and validates a scenario; relative table paths resolve
    /// against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            CliError::Config(ConfigError {
                line,
                message: e.message().to_string(),
            })
        })?;
        let cx = Ctx { text };
        let units = raw.units;
        if let Some(u) = &units {
            u.validate().map_err(|m| cx.err("units", "", m))?;
        }

        let rp = raw.params.unwrap_or_default();
        if units.is_some() && (rp.m_star.is_some() || rp.omega.is_some()) {
            return Err(cx.err(
                "params",
                if rp.m_star.is_some() { "m_star" } else { "omega" },
                "params.m_star and params.omega are fixed to 1 when [units] is given; set units.m_star_me / units.hbar_omega_mev instead",
            ));
        }
        let energy = |v: f64| units.map_or(v, |u| u.energy_to_scaled(v));
        let length = |v: f64| units.map_or(v, |u| u.length_to_scaled(v));
        let velocity = |v: f64| units.map_or(v, |u| u.velocity_to_scaled(v));
        let time = |v: f64| units.map_or(v, |u| u.time_to_scaled(v));

        let mut params = PhysicalParams::new(
            rp.m_star.unwrap_or(1.0),
            rp.omega.unwrap_or(1.0),
            rp.n_axis.unwrap_or([0.0, 0.0, 1.0]),
        )
        .map_err(|e| cx.err("params", "", e.to_string()))?;
        if let Some(z) = rp.zeeman {
            params = params.with_zeeman(energy(z));
        }
        params = params.with_level(rp.level.unwrap_or(0));
        params.validate().map_err(|e| cx.err("params", "zeeman", e.to_string()))?;

        let p = &raw.profile;
        let kind = p.kind.as_str();
        let allowed: &[&str] = match kind {
            "circular" => &["xi0", "alpha0", "n"],
            "sequential_square" => &["xi0", "alpha0", "ramp", "alpha1"],
            "broken_ellipsoidal" => &["xi0", "alpha0", "delta_t", "delta_t_over_t0"],
            "fourier" => &["period", "xi", "alpha"],
            "tabulated" => &["table"],
            other => {
                return Err(cx.err(
                    "profile",
                    "kind",
                    format!(
                        "unknown profile.kind `{other}` (expected circular, sequential_square, broken_ellipsoidal, fourier or tabulated)"
                    ),
                ))
            }
        };
        let present = [
            ("xi0", p.xi0.is_some()),
            ("alpha0", p.alpha0.is_some()),
            ("n", p.n.is_some()),
            ("ramp", p.ramp.is_some()),
            ("alpha1", p.alpha1.is_some()),
            ("delta_t", p.delta_t.is_some()),
            ("delta_t_over_t0", p.delta_t_over_t0.is_some()),
            ("period", p.period.is_some()),
            ("xi", p.xi.is_some()),
            ("alpha", p.alpha.is_some()),
            ("table", p.table.is_some()),
        ];
        if let Some((k, _)) = present.iter().find(|(k, on)| *on && !allowed.contains(k)) {
            return Err(cx.err("profile", k, format!("profile.{k} is not used by kind = \"{kind}\"")));
        }

        let profile_spec = match kind {
            "circular" => ProfileSpec::Circular {
                xi0: length(cx.need("profile", "xi0", p.xi0, kind)?),
                alpha0: velocity(cx.need("profile", "alpha0", p.alpha0, kind)?),
                n: cx.need("profile", "n", p.n, kind)?,
            },
            "sequential_square" => ProfileSpec::SequentialSquare {
                xi0: length(cx.need("profile", "xi0", p.xi0, kind)?),
                alpha0: velocity(cx.need("profile", "alpha0", p.alpha0, kind)?),
                ramp: p.ramp.unwrap_or(Ramp::Sinusoidal),
                alpha1: velocity(p.alpha1.unwrap_or(0.0)),
            },
            "broken_ellipsoidal" => {
                let delta_t = match (p.delta_t, p.delta_t_over_t0) {
                    (Some(d), None) => time(d),
                    (None, Some(r)) => r * params.t0(),
                    (None, None) => return Err(cx.err("profile", "kind", "profile.delta_t or profile.delta_t_over_t0 is required for kind = \"broken_ellipsoidal\"")),
                    (Some(_), Some(_)) => return Err(cx.err("profile", "delta_t_over_t0", "give only one of profile.delta_t and profile.delta_t_over_t0")),
                };
                ProfileSpec::BrokenEllipsoidal {
                    xi0: length(cx.need("profile", "xi0", p.xi0, kind)?),
                    alpha0: velocity(cx.need("profile", "alpha0", p.alpha0, kind)?),
                    delta_t,
                }
            }
            "fourier" => {
                let scale = |s: &FourierSeries, f: &dyn Fn(f64) -> f64| FourierSeries {
                    constant: f(s.constant),
                    cos: s.cos.iter().map(|v| f(*v)).collect(),
                    sin: s.sin.iter().map(|v| f(*v)).collect(),
                };
                let xi = p.xi.clone().unwrap_or_default();
                let alpha = p.alpha.clone().unwrap_or_default();
                ProfileSpec::Fourier {
                    period: time(cx.need("profile", "period", p.period, kind)?),
                    xi: scale(&xi, &length),
                    alpha: scale(&alpha, &velocity),
                }
            }
            _ => {
                let rel = p
                    .table
                    .as_ref()
                    .ok_or_else(|| cx.err("profile", "kind", "profile.table is required for kind = \"tabulated\""))?;
                let path = base_dir.join(rel);
                let body = std::fs::read_to_string(&path)
                    .map_err(|e| cx.err("profile", "table", format!("cannot read {}: {e}", path.display())))?;
                let mut t = TabulatedDriving::from_csv_str(&body)
                    .map_err(|e| cx.err("profile", "table", format!("{}: {e}", path.display())))?;
                for v in &mut t.t {
                    *v = time(*v);
                }
                for v in &mut t.xi {
                    *v = length(*v);
                }
                for v in &mut t.alpha {
                    *v = velocity(*v);
                }
                ProfileSpec::Tabulated(t)
            }
        };
        let profile = profile_spec.build(&params).map_err(|e| cx.err("profile", "kind", e.to_string()))?;

        let rs = raw.solver.unwrap_or_default();
        let method = match rs.method.as_deref().unwrap_or("auto") {
            "auto" => SolverMethod::Auto,
            "analytic" => SolverMethod::Analytic,
            "rk4" => SolverMethod::Rk4,
            "duhamel" => SolverMethod::Duhamel,
            other => {
                return Err(cx.err(
                    "solver",
                    "method",
                    format!("unknown solver.method `{other}` (expected auto, analytic, rk4 or duhamel)"),
                ))
            }
        };
        let samples = rs.samples.unwrap_or(spinloop_core::response::DEFAULT_SAMPLES);
        if samples < 16 || samples % 2 == 1 {
            return Err(cx.err("solver", "samples", format!("solver.samples must be even and >= 16, got {samples}")));
        }
        let dt = rs.dt.map(time);
        if let Some(dt) = dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(cx.err("solver", "dt", "solver.dt must be positive"));
            }
        }

        let ro = raw.outputs.unwrap_or_default();
        let outputs = OutputSpec {
            dir: PathBuf::from(ro.dir.unwrap_or_else(|| "out".into())),
            prefix: ro.prefix.unwrap_or_else(|| "run".into()),
        };
        if outputs.prefix.is_empty() || outputs.prefix.contains(['/', '\\']) {
            return Err(cx.err("outputs", "prefix", "outputs.prefix must be a plain, non-empty file name stem"));
        }

        let sweep = match raw.sweep {
            None => None,
            Some(s) => {
                let variable = SweepVariable::parse(&s.variable).ok_or_else(|| {
                    cx.err(
                        "sweep",
                        "variable",
                        format!("unknown sweep.variable `{}` (expected n, delta_t, xi0 or alpha0)", s.variable),
                    )
                })?;
                if s.count == 0 || !(s.from.is_finite() && s.to.is_finite()) {
                    return Err(cx.err("sweep", "count", "sweep range must be finite with count >= 1"));
                }
                let input_values: Vec<f64> = if s.count == 1 {
                    vec![s.from]
                } else {
                    (0..s.count)
                        .map(|i| s.from + (s.to - s.from) * i as f64 / (s.count - 1) as f64)
                        .collect()
                };
                if variable == SweepVariable::N && input_values.iter().any(|v| (v - v.round()).abs() > 1e-9) {
                    return Err(cx.err("sweep", "count", "an n sweep must land on integers; adjust from/to/count"));
                }
                if matches!(s.threads, Some(0)) {
                    return Err(cx.err("sweep", "threads", "sweep.threads must be >= 1"));
                }
                for v in &input_values {
                    let scaled = sweep_to_scaled(units.as_ref(), variable, *v);
                    profile_spec
                        .with(variable, scaled)
                        .and_then(|p| p.build(&params).map_err(|e| e.to_string()))
                        .map_err(|m| cx.err("sweep", "variable", format!("sweep point {v}: {m}")))?;
                }
                let spec = SweepSpec {
                    variable,
                    input_values,
                    threads: s.threads,
                };
                Some(spec)
            }
        };

        let rv = raw.verify.unwrap_or_default();
        let verify = VerifySpec {
            n_x: rv.n_x.unwrap_or(spinloop_core::oracle::DEFAULT_NX),
            steps: rv.steps.unwrap_or(spinloop_core::oracle::DEFAULT_STEPS_PER_CYCLE),
            max_work: rv.max_work.unwrap_or(DEFAULT_MAX_WORK),
        };
        if !verify.n_x.is_power_of_two() || verify.n_x < 16 {
            return Err(cx.err("verify", "n_x", format!("verify.n_x must be a power of two >= 16, got {}", verify.n_x)));
        }
        if verify.steps < 2 {
            return Err(cx.err("verify", "steps", "verify.steps must be >= 2"));
        }

        Ok(Scenario {
            params,
            units,
            profile_spec,
            profile,
            solver: SolverSpec { method, samples, dt },
            outputs,
            sweep,
            verify,
        })
    }
}

/// Converts a sweep point from config units to scaled units.
pub fn sweep_to_scaled(units: Option<&UnitSystem>, var: SweepVariable, v: f64) -> f64 {
    match (units, var) {
        (_, SweepVariable::N) | (None, _) => v,
        (Some(u), SweepVariable::DeltaT) => u.time_to_scaled(v),
        (Some(u), SweepVariable::Xi0) => u.length_to_scaled(v),
        (Some(u), SweepVariable::Alpha0) => u.velocity_to_scaled(v),
    }
}

impl Scenario {
    pub fn sweep_point(&self, value: f64) -> Result<DrivingProfile, CliError> {
        let var = self
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Config(ConfigError::plain("scenario has no [sweep] section")))?
            .variable;
        self.profile_at(var, value)
    }

    /// Profile with `var` set to `value` (config units).
    pub fn profile_at(&self, var: SweepVariable, value: f64) -> Result<DrivingProfile, CliError> {
        let scaled = sweep_to_scaled(self.units.as_ref(), var, value);
        let spec = self
            .profile_spec
            .with(var, scaled)
            .map_err(|m| CliError::Config(ConfigError::plain(m)))?;
        Ok(spec.build(&self.params)?)
    }
}
