//! Physical parameters and periodic drivings ξ(t) (dot position) and α(t)
//! (Rashba coupling).
//!
//! All quantities use ħ = 1. Masses, frequencies and lengths are otherwise
//! free; the usual choice is the scaled system m* = ω = 1, where lengths are
//! measured in oscillator lengths and time in 1/ω.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used to snap times onto period ends and breakpoints.
const TIME_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub m_star: f64,
    pub omega: f64,
    /// Spin-rotation axis **n** (unit vector).
    pub n_axis: [f64; 3],
    /// Zeeman energy g·μ_B·B along `n_axis`, if a field is applied.
    #[serde(default)]
    pub zeeman: Option<f64>,
    /// Oscillator level m of the Kramers doublet.
    #[serde(default)]
    pub level_m: u32,
}

impl PhysicalParams {
    pub fn new(m_star: f64, omega: f64, n_axis: [f64; 3]) -> Result<Self> {
        let p = Self {
            m_star,
            omega,
            n_axis,
            zeeman: None,
            level_m: 0,
        };
        p.validate()?;
        Ok(p)
    }

    /// m* = ω = 1, **n** = ẑ, ground doublet, no field.
    pub fn scaled() -> Self {
        Self {
            m_star: 1.0,
            omega: 1.0,
            n_axis: [0.0, 0.0, 1.0],
            zeeman: None,
            level_m: 0,
        }
    }

    pub fn with_zeeman(mut self, zeeman: f64) -> Self {
        self.zeeman = Some(zeeman);
        self
    }

    pub fn with_level(mut self, m: u32) -> Self {
        self.level_m = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_star.is_finite() && self.m_star > 0.0) {
            return Err(Error::InvalidParam(format!("m_star must be > 0, got {}", self.m_star)));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidParam(format!("omega must be > 0, got {}", self.omega)));
        }
        let norm = self.n_axis.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!("n_axis must be a unit vector, |n| = {norm}")));
        }
        if let Some(z) = self.zeeman {
            if !z.is_finite() {
                return Err(Error::InvalidParam("zeeman must be finite".into()));
            }
        }
        Ok(())
    }

    /// ω_m = (m + 1/2)ω.
    pub fn omega_m(&self) -> f64 {
        (self.level_m as f64 + 0.5) * self.omega
    }

    /// Trap period T0 = 2π/ω.
    pub fn t0(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Oscillator length √(1/(m*ω)).
    pub fn oscillator_length(&self) -> f64 {
        (1.0 / (self.m_star * self.omega)).sqrt()
    }

    pub fn zeeman_energy(&self) -> f64 {
        self.zeeman.unwrap_or(0.0)
    }
}

/// Which one-sided limit to take at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Driving values and first derivatives at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DrivingSample {
    pub xi: f64,
    pub alpha: f64,
    pub dxi_dt: f64,
    pub dalpha_dt: f64,
    /// Set when `t` sits on a jump discontinuity; values are then the right limit.
    pub jump: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ramp {
    Sinusoidal,
    Instantaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DrivingKind {
    SequentialSquare,
    Circular,
    BrokenEllipsoidal,
    Fourier,
    Tabulated,
}

impl DrivingKind {
    pub fn name(self) -> &'static str {
        match self {
            DrivingKind::SequentialSquare => "sequential-square",
            DrivingKind::Circular => "circular",
            DrivingKind::BrokenEllipsoidal => "broken-ellipsoidal",
            DrivingKind::Fourier => "fourier",
            DrivingKind::Tabulated => "tabulated",
        }
    }
}

/// A simultaneous jump of the drivings at time `t`.
///
/// When both ξ and α jump at the same instant, `xi_first` records whether
/// the ξ jump happens before the α jump. This fixes the value of α used in
/// the Stieltjes sum of ∮α dξ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub t: f64,
    pub xi_before: f64,
    pub xi_after: f64,
    pub alpha_before: f64,
    pub alpha_after: f64,
    pub xi_first: bool,
}

impl Jump {
    pub fn delta_xi(&self) -> f64 {
        self.xi_after - self.xi_before
    }

    pub fn delta_alpha(&self) -> f64 {
        self.alpha_after - self.alpha_before
    }

    /// Contribution of this jump to ∮α dξ.
    pub fn alpha_dxi(&self) -> f64 {
        let alpha = if self.xi_first {
            self.alpha_before
        } else {
            self.alpha_after
        };
        alpha * self.delta_xi()
    }
}

/// Truncated real Fourier series c₀ + Σₖ [aₖ cos(kνt) + bₖ sin(kνt)], k ≥ 1.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FourierSeries {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl FourierSeries {
    fn eval(&self, t: f64, nu: f64) -> (f64, f64) {
        let mut v = self.constant;
        let mut d = 0.0;
        for (i, &a) in self.cos.iter().enumerate() {
            let k = (i + 1) as f64 * nu;
            let (s, c) = (k * t).sin_cos();
            v += a * c;
            d -= a * k * s;
        }
        for (i, &b) in self.sin.iter().enumerate() {
            let k = (i + 1) as f64 * nu;
            let (s, c) = (k * t).sin_cos();
            v += b * s;
            d += b * k * c;
        }
        (v, d)
    }

    fn is_finite(&self) -> bool {
        self.constant.is_finite()
            && self.cos.iter().all(|c| c.is_finite())
            && self.sin.iter().all(|c| c.is_finite())
    }
}

/// Sampled drivings over one period, linearly interpolated.
///
/// Derivatives are the slopes of the interpolating segments, so this family
/// is only first-order accurate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedDriving {
    pub t: Vec<f64>,
    pub xi: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl TabulatedDriving {
    /// Checks the table: at least two rows, strictly increasing times from 0,
    /// finite values, and matching endpoints so the driving is periodic.
    pub fn validate(&self) -> Result<()> {
        let n = self.t.len();
        if n < 2 || self.xi.len() != n || self.alpha.len() != n {
            return Err(Error::InvalidParam(
                "tabulated driving needs >= 2 rows with equal-length columns".into(),
            ));
        }
        if self.t[0] != 0.0 {
            return Err(Error::InvalidParam("tabulated times must start at 0".into()));
        }
        for w in self.t.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidParam("tabulated times must be strictly increasing".into()));
            }
        }
        if self.xi.iter().chain(&self.alpha).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParam("tabulated values must be finite".into()));
        }
        let scale = |v: &[f64]| v.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        if (self.xi[0] - self.xi[n - 1]).abs() > 1e-12 * scale(&self.xi)
            || (self.alpha[0] - self.alpha[n - 1]).abs() > 1e-12 * scale(&self.alpha)
        {
            return Err(Error::InvalidParam(
                "tabulated driving is not periodic: first and last rows differ".into(),
            ));
        }
        Ok(())
    }

    /// Parses CSV text with a header containing `t`, `xi` and `alpha` columns.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))
        };
        let (it, ix, ia) = (col("t")?, col("xi")?, col("alpha")?);
        let mut table = TabulatedDriving {
            t: Vec::new(),
            xi: Vec::new(),
            alpha: Vec::new(),
        };
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse(format!("row {}: missing field", line + 2)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))
            };
            table.t.push(field(it)?);
            table.xi.push(field(ix)?);
            table.alpha.push(field(ia)?);
        }
        table.validate()?;
        Ok(table)
    }

    fn period(&self) -> f64 {
        *self.t.last().expect("validated table")
    }

    fn eval(&self, r: f64, side: Side) -> (f64, f64, f64, f64) {
        let n = self.t.len();
        let i = match side {
            Side::Right => self.t.partition_point(|&ti| ti <= r),
            Side::Left => self.t.partition_point(|&ti| ti < r),
        };
        let hi = i.clamp(1, n - 1);
        let lo = hi - 1;
        let dt = self.t[hi] - self.t[lo];
        let sx = (self.xi[hi] - self.xi[lo]) / dt;
        let sa = (self.alpha[hi] - self.alpha[lo]) / dt;
        let u = r - self.t[lo];
        (self.xi[lo] + sx * u, self.alpha[lo] + sa * u, sx, sa)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Family {
    Circular {
        xi0: f64,
        alpha0: f64,
        n: u32,
    },
    SequentialSquare {
        xi0: f64,
        alpha0: f64,
        alpha1: f64,
        ramp: Ramp,
    },
    BrokenEllipsoidal {
        xi0: f64,
        alpha0: f64,
        delta_t: f64,
    },
    Fourier {
        xi: FourierSeries,
        alpha: FourierSeries,
    },
    Tabulated(TabulatedDriving),
}

/// One leg of the sequential square loop: which driving moves and between
/// which values.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SquareLeg {
    pub moves_xi: bool,
    pub xi: (f64, f64),
    pub alpha: (f64, f64),
}

/// Periodic drivings ξ(t), α(t) with exact evaluators.
///
/// Profiles are immutable once built and can be shared across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingProfile {
    family: Family,
    omega: f64,
    period: f64,
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("{name} must be finite, got {v}")))
    }
}

/// ξ(t) = ξ0 cos(ωt/n), α(t) = α0 sin(ωt/n), T = n·2π/ω.
pub fn make_circular(params: &PhysicalParams, xi0: f64, alpha0: f64, n: i64) -> Result<DrivingProfile> {
    params.validate()?;
    if n < 2 {
        return Err(Error::ResonantDriving(n));
    }
    finite("xi0", xi0)?;
    finite("alpha0", alpha0)?;
    let n = u32::try_from(n).map_err(|_| Error::InvalidParam(format!("n = {n} too large")))?;
    Ok(DrivingProfile {
        family: Family::Circular { xi0, alpha0, n },
        omega: params.omega,
        period: n as f64 * params.t0(),
    })
}

/// Sequential square loop starting from α1 = 0.
pub fn make_sequential_square(
    params: &PhysicalParams,
    xi0: f64,
    alpha0: f64,
    ramp: Ramp,
) -> Result<DrivingProfile> {
    make_sequential_square_with_offset(params, xi0, alpha0, 0.0, ramp)
}

/// Sequential square loop: ξ: 0 → ξ0, then α: α1 → α1 + α0, then ξ: ξ0 → 0,
/// then α back to α1. Each leg ends with the response at rest on the driving.
///
/// Sinusoidal legs use ξ0(1 − cos Ωs)/2 with Ω = ω/3 over 3π/ω (T = 12π/ω);
/// instantaneous legs hold the driving at the leg midpoint for π/ω, so the
/// response makes exactly half an oscillation (T = 4π/ω).
pub fn make_sequential_square_with_offset(
    params: &PhysicalParams,
    xi0: f64,
    alpha0: f64,
    alpha1: f64,
    ramp: Ramp,
) -> Result<DrivingProfile> {
    params.validate()?;
    finite("xi0", xi0)?;
    finite("alpha0", alpha0)?;
    finite("alpha1", alpha1)?;
    let leg = match ramp {
        Ramp::Sinusoidal => 3.0 * PI / params.omega,
        Ramp::Instantaneous => PI / params.omega,
    };
    Ok(DrivingProfile {
        family: Family::SequentialSquare {
            xi0,
            alpha0,
            alpha1,
            ramp,
        },
        omega: params.omega,
        period: 4.0 * leg,
    })
}

/// ξ(t) = ξ0 sin(ωt/2) on [0, 2T0], zero elsewhere; α is the same pulse with
/// amplitude α0 delayed by ΔT. Period T = 2T0 + ΔT.
pub fn make_broken_ellipsoidal(
    params: &PhysicalParams,
    xi0: f64,
    alpha0: f64,
    delta_t: f64,
) -> Result<DrivingProfile> {
    params.validate()?;
    finite("xi0", xi0)?;
    finite("alpha0", alpha0)?;
    let t0 = params.t0();
    if !(delta_t.is_finite() && delta_t >= -TIME_EPS * t0 && delta_t <= 2.0 * t0 * (1.0 + TIME_EPS)) {
        return Err(Error::InvalidParam(format!(
            "delta_T must lie in [0, 2T0] = [0, {}], got {delta_t}",
            2.0 * t0
        )));
    }
    let delta_t = delta_t.clamp(0.0, 2.0 * t0);
    Ok(DrivingProfile {
        family: Family::BrokenEllipsoidal { xi0, alpha0, delta_t },
        omega: params.omega,
        period: 2.0 * t0 + delta_t,
    })
}

/// Drivings given as Fourier series with fundamental 2π/period.
pub fn make_fourier(
    params: &PhysicalParams,
    period: f64,
    xi: FourierSeries,
    alpha: FourierSeries,
) -> Result<DrivingProfile> {
    params.validate()?;
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidParam(format!("period must be > 0, got {period}")));
    }
    if !xi.is_finite() || !alpha.is_finite() {
        return Err(Error::InvalidParam("Fourier coefficients must be finite".into()));
    }
    Ok(DrivingProfile {
        family: Family::Fourier { xi, alpha },
        omega: params.omega,
        period,
    })
}

pub fn make_tabulated(params: &PhysicalParams, table: TabulatedDriving) -> Result<DrivingProfile> {
    params.validate()?;
    table.validate()?;
    let period = table.period();
    Ok(DrivingProfile {
        family: Family::Tabulated(table),
        omega: params.omega,
        period,
    })
}

impl DrivingProfile {
    pub fn kind(&self) -> DrivingKind {
        match self.family {
            Family::Circular { .. } => DrivingKind::Circular,
            Family::SequentialSquare { .. } => DrivingKind::SequentialSquare,
            Family::BrokenEllipsoidal { .. } => DrivingKind::BrokenEllipsoidal,
            Family::Fourier { .. } => DrivingKind::Fourier,
            Family::Tabulated(_) => DrivingKind::Tabulated,
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Characteristic amplitudes (ξ scale, α scale) used to normalise
    /// residuals. Falls back to the sampled maxima for the generic families.
    pub fn amplitudes(&self) -> (f64, f64) {
        match &self.family {
            Family::Circular { xi0, alpha0, .. } | Family::BrokenEllipsoidal { xi0, alpha0, .. } => {
                (xi0.abs(), alpha0.abs())
            }
            Family::SequentialSquare {
                xi0, alpha0, alpha1, ..
            } => (xi0.abs(), alpha0.abs().max(alpha1.abs()).max((alpha1 + alpha0).abs())),
            Family::Fourier { .. } | Family::Tabulated(_) => {
                let mut m = (0.0_f64, 0.0_f64);
                for i in 0..=512 {
                    let s = self.eval(self.period * i as f64 / 512.0);
                    m.0 = m.0.max(s.xi.abs());
                    m.1 = m.1.max(s.alpha.abs());
                }
                m
            }
        }
    }

    /// Drivings at time `t` (reduced modulo the period). At jump points the
    /// right limit is returned and `jump` is set.
    pub fn eval(&self, t: f64) -> DrivingSample {
        let mut s = self.eval_side(t, Side::Right);
        let r = reduce(t, self.period, Side::Right);
        s.jump = self
            .jumps()
            .iter()
            .any(|j| near(j.t, r, self.period) || near(j.t + self.period, r, self.period));
        s
    }

    /// One-sided evaluation; interior points give the same value on both sides.
    pub fn eval_side(&self, t: f64, side: Side) -> DrivingSample {
        let r = reduce(t, self.period, side);
        let w = self.omega;
        let (xi, alpha, dxi, dalpha) = match &self.family {
            Family::Circular { xi0, alpha0, n } => {
                let nu = w / *n as f64;
                let (s, c) = (nu * r).sin_cos();
                (xi0 * c, alpha0 * s, -xi0 * nu * s, alpha0 * nu * c)
            }
            Family::SequentialSquare { ramp, .. } => {
                let tau = self.period / 4.0;
                let (j, s) = locate_leg(r, tau, side);
                let leg = self.square_leg(j);
                let (mv, dmv) = match ramp {
                    Ramp::Sinusoidal => {
                        let omega_ramp = w / 3.0;
                        let (a, b) = if leg.moves_xi { leg.xi } else { leg.alpha };
                        let (sn, cs) = (omega_ramp * s).sin_cos();
                        (a + (b - a) * (1.0 - cs) / 2.0, (b - a) * omega_ramp * sn / 2.0)
                    }
                    Ramp::Instantaneous => {
                        let (a, b) = if leg.moves_xi { leg.xi } else { leg.alpha };
                        ((a + b) / 2.0, 0.0)
                    }
                };
                if leg.moves_xi {
                    (mv, leg.alpha.0, dmv, 0.0)
                } else {
                    (leg.xi.0, mv, 0.0, dmv)
                }
            }
            Family::BrokenEllipsoidal { xi0, alpha0, delta_t } => {
                let (vx, dx) = ellipsoid_pulse(r, 2.0 * PI / w, w, side);
                let u = reduce(t - delta_t, self.period, side);
                let (va, da) = ellipsoid_pulse(u, 2.0 * PI / w, w, side);
                (xi0 * vx, alpha0 * va, xi0 * dx, alpha0 * da)
            }
            Family::Fourier { xi, alpha } => {
                let nu = 2.0 * PI / self.period;
                let (x, dx) = xi.eval(r, nu);
                let (a, da) = alpha.eval(r, nu);
                (x, a, dx, da)
            }
            Family::Tabulated(table) => table.eval(r, side),
        };
        DrivingSample {
            xi,
            alpha,
            dxi_dt: dxi,
            dalpha_dt: dalpha,
            jump: false,
        }
    }

    /// Times in [0, T] where the drivings or their derivatives are
    /// non-smooth, always including 0 and T. Quadrature and ODE grids are
    /// split at these points.
    pub fn breakpoints(&self) -> Vec<f64> {
        let t = self.period;
        let mut pts = vec![0.0, t];
        match &self.family {
            Family::SequentialSquare { .. } => {
                pts.extend([t / 4.0, t / 2.0, 3.0 * t / 4.0]);
            }
            Family::BrokenEllipsoidal { delta_t, .. } => {
                let t0 = 2.0 * PI / self.omega;
                pts.extend([*delta_t, 2.0 * t0]);
            }
            _ => {}
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| near(*a, *b, t));
        pts
    }

    /// Jump discontinuities within one cycle (t in [0, T)).
    pub fn jumps(&self) -> Vec<Jump> {
        match &self.family {
            Family::SequentialSquare {
                ramp: Ramp::Instantaneous,
                ..
            } => {
                let tau = self.period / 4.0;
                (0..4)
                    .map(|j| {
                        let t = j as f64 * tau;
                        let before = self.eval_side(t, Side::Left);
                        let after = self.eval_side(t, Side::Right);
                        // the leg that is ending switches first
                        let ending = self.square_leg((j + 3) % 4);
                        Jump {
                            t,
                            xi_before: before.xi,
                            xi_after: after.xi,
                            alpha_before: before.alpha,
                            alpha_after: after.alpha,
                            xi_first: ending.moves_xi,
                        }
                    })
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    pub(crate) fn square_leg(&self, j: usize) -> SquareLeg {
        let Family::SequentialSquare {
            xi0, alpha0, alpha1, ..
        } = self.family
        else {
            unreachable!("square_leg on non-square profile");
        };
        let a2 = alpha1 + alpha0;
        match j {
            0 => SquareLeg {
                moves_xi: true,
                xi: (0.0, xi0),
                alpha: (alpha1, alpha1),
            },
            1 => SquareLeg {
                moves_xi: false,
                xi: (xi0, xi0),
                alpha: (alpha1, a2),
            },
            2 => SquareLeg {
                moves_xi: true,
                xi: (xi0, 0.0),
                alpha: (a2, a2),
            },
            _ => SquareLeg {
                moves_xi: false,
                xi: (0.0, 0.0),
                alpha: (a2, alpha1),
            },
        }
    }

    pub(crate) fn square_ramp(&self) -> Option<Ramp> {
        match self.family {
            Family::SequentialSquare { ramp, .. } => Some(ramp),
            _ => None,
        }
    }

    pub(crate) fn circular_params(&self) -> Option<(f64, f64, u32)> {
        match self.family {
            Family::Circular { xi0, alpha0, n } => Some((xi0, alpha0, n)),
            _ => None,
        }
    }

    pub(crate) fn ellipsoidal_params(&self) -> Option<(f64, f64, f64)> {
        match self.family {
            Family::BrokenEllipsoidal { xi0, alpha0, delta_t } => Some((xi0, alpha0, delta_t)),
            _ => None,
        }
    }
}

/// sin(ωr/2) on the support [0, 2T0] and its derivative; zero elsewhere.
fn ellipsoid_pulse(r: f64, t0: f64, w: f64, side: Side) -> (f64, f64) {
    let end = 2.0 * t0;
    let inside = match side {
        Side::Right => r < end - TIME_EPS * end,
        Side::Left => r <= end + TIME_EPS * end,
    };
    if inside {
        let (s, c) = (w * r / 2.0).sin_cos();
        (s, w * c / 2.0)
    } else {
        (0.0, 0.0)
    }
}

fn near(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= TIME_EPS * scale
}

/// Reduces `t` into [0, T) for the right limit or (0, T] for the left limit.
pub(crate) fn reduce(t: f64, period: f64, side: Side) -> f64 {
    let r = t.rem_euclid(period);
    let eps = TIME_EPS * period;
    match side {
        Side::Right if r < eps || period - r < eps => 0.0,
        Side::Left if r < eps || period - r < eps => period,
        _ => r,
    }
}

fn locate_leg(r: f64, tau: f64, side: Side) -> (usize, f64) {
    let x = r / tau;
    let k = x.round();
    let j = if (x - k).abs() < 1e-12 {
        match side {
            Side::Right => k as i64,
            Side::Left => k as i64 - 1,
        }
    } else {
        x.floor() as i64
    };
    let j = j.clamp(0, 3) as usize;
    (j, r - j as f64 * tau)
}
