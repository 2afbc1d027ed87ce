//! Phase functionals of one driving cycle.
//!
//! Every contour integral is evaluated as a time-parametrised line integral
//! over the trajectory samples, so self-intersecting or reversed contours
//! keep their orientation signs. Jumps of ξ enter ∮ … dξ as explicit
//! Stieltjes terms.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::driving::{DrivingProfile, PhysicalParams, Ramp, Side};
use crate::error::{Error, Result};
use crate::quadrature::simpson;
use crate::response::{check_cyclic, fmt_f64, segment_grid, ResponseTrajectory};

/// Endpoint mismatch (scaled) tolerated before a trajectory counts as
/// non-cyclic.
pub const CYCLIC_TOL: f64 = 1e-6;

/// Scalar phases of one cycle (ħ = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSet {
    /// Half the spin-rotation angle about **n**.
    #[serde(rename = "phi_T")]
    pub phi_t: f64,
    pub phi_c: f64,
    pub phi_a: f64,
    pub phi_ad: f64,
    /// ∫₀ᵀ (L_ξ + L_α) dτ.
    #[serde(rename = "action_S")]
    pub action_s: f64,
    /// ∫₀ᵀ E dτ.
    pub energy_integral: f64,
    #[serde(rename = "omega_m_T")]
    pub omega_m_t: f64,
    #[serde(rename = "period_T")]
    pub period_t: f64,
}

impl PhaseSet {
    /// All phases of a cyclic trajectory.
    pub fn compute(traj: &ResponseTrajectory, profile: &DrivingProfile, params: &PhysicalParams) -> Result<Self> {
        let (action_s, energy_integral) = action_and_energy(traj, params)?;
        Ok(Self {
            phi_t: phi_spin(traj, params)?,
            phi_c: phi_c(traj, params)?,
            phi_a: phi_a(traj, params)?,
            phi_ad: phi_ad(profile, params),
            action_s,
            energy_integral,
            omega_m_t: params.omega_m() * traj.period,
            period_t: traj.period,
        })
    }

    pub fn is_finite(&self) -> bool {
        [
            self.phi_t,
            self.phi_c,
            self.phi_a,
            self.phi_ad,
            self.action_s,
            self.energy_integral,
            self.omega_m_t,
            self.period_t,
        ]
        .iter()
        .all(|v| v.is_finite())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("PhaseSet serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: PhaseSet = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if !p.is_finite() {
            return Err(Error::Parse("phase set contains non-finite values".into()));
        }
        Ok(p)
    }
}

fn require_cyclic(traj: &ResponseTrajectory) -> Result<()> {
    let report = check_cyclic(traj, CYCLIC_TOL);
    if report.cyclic {
        Ok(())
    } else {
        Err(Error::NonCyclicTrajectory {
            mismatch: report.worst(),
        })
    }
}

/// φ_T = −m* ∫₀ᵀ ȧ_c ξ dτ.
pub fn phi_spin(traj: &ResponseTrajectory, params: &PhysicalParams) -> Result<f64> {
    require_cyclic(traj)?;
    Ok(-params.m_star * traj.integrate(|s| s.da * s.drive.xi))
}

/// Jumps of ξ between consecutive segments (including the wrap from T back
/// to 0), paired with a_c at the jump.
fn xi_jumps(traj: &ResponseTrajectory) -> impl Iterator<Item = (f64, f64)> + '_ {
    let n = traj.segments.len();
    (0..n).map(move |i| {
        let before = traj.segments[i].samples.last().expect("segment samples");
        let after = &traj.segments[(i + 1) % n].samples[0];
        (after.drive.xi - before.drive.xi, after.a)
    })
}

/// m* ∮_{C1} a_c dξ over the path [ξ(t), a_c(t)].
pub fn phi_contour_c1(traj: &ResponseTrajectory, params: &PhysicalParams) -> Result<f64> {
    require_cyclic(traj)?;
    let smooth = traj.integrate(|s| s.a * s.drive.dxi_dt);
    let jumps: f64 = xi_jumps(traj).map(|(d, a)| a * d).sum();
    Ok(params.m_star * (smooth + jumps))
}

/// m* ∮_{C2} α dx_c over the path [x_c(t), α(t)].
pub fn phi_contour_c2(traj: &ResponseTrajectory, params: &PhysicalParams) -> Result<f64> {
    require_cyclic(traj)?;
    Ok(params.m_star * traj.integrate(|s| s.drive.alpha * s.dx))
}

/// φ_c = m* ∮_{C3} a_c dx_c.
pub fn phi_c(traj: &ResponseTrajectory, params: &PhysicalParams) -> Result<f64> {
    require_cyclic(traj)?;
    Ok(params.m_star * traj.integrate(|s| s.a * s.dx))
}

/// φ_a = m* ∫ (ẋ_c² + ȧ_c²/ω²) dτ, the C4 and C5 phase-space loops.
pub fn phi_a(traj: &ResponseTrajectory, params: &PhysicalParams) -> Result<f64> {
    require_cyclic(traj)?;
    let w2 = params.omega * params.omega;
    Ok(params.m_star * traj.integrate(|s| s.dx * s.dx + s.da * s.da / w2))
}

/// φ_ad = m* ∮ α dξ, from the drivings alone.
pub fn phi_ad(profile: &DrivingProfile, params: &PhysicalParams) -> f64 {
    let mut total = 0.0;
    for (start, end, n) in segment_grid(profile, 2 * crate::response::DEFAULT_SAMPLES) {
        let h = (end - start) / n as f64;
        let y: Vec<f64> = (0..=n)
            .map(|i| {
                let side = if i == n { Side::Left } else { Side::Right };
                let d = profile.eval_side(start + h * i as f64, side);
                d.alpha * d.dxi_dt
            })
            .collect();
        total += simpson(h, &y);
    }
    total += profile.jumps().iter().map(|j| j.alpha_dxi()).sum::<f64>();
    params.m_star * total
}

/// (S, ∫E dτ) with
/// L = m*ẋ²/2 − m*ω²(x − ξ)²/2 + m*ȧ²/(2ω²) − m*a²/2 + m*aα and
/// E = ω_m + m*(ẋ² + ȧ²/ω²)/2 + m*ω²(x − ξ)²/2 + m*a²/2 − m*aα.
pub fn action_and_energy(traj: &ResponseTrajectory, params: &PhysicalParams) -> Result<(f64, f64)> {
    require_cyclic(traj)?;
    let m = params.m_star;
    let w2 = params.omega * params.omega;
    let action = traj.integrate(|s| {
        let l_xi = m * s.dx * s.dx / 2.0 - m * w2 * (s.x - s.drive.xi).powi(2) / 2.0;
        let l_alpha = m * s.da * s.da / (2.0 * w2) - m * s.a * s.a / 2.0 + m * s.a * s.drive.alpha;
        l_xi + l_alpha
    });
    let excess = traj.integrate(|s| {
        m * (s.dx * s.dx + s.da * s.da / w2) / 2.0 + m * w2 * (s.x - s.drive.xi).powi(2) / 2.0 + m * s.a * s.a / 2.0
            - m * s.a * s.drive.alpha
    });
    Ok((action, params.omega_m() * traj.period + excess))
}

/// Reference phases of circular driving with n ≥ 2.
pub fn closed_form_circular(n: i64, xi0: f64, alpha0: f64, params: &PhysicalParams) -> Result<PhaseSet> {
    if n < 2 {
        return Err(Error::ResonantDriving(n));
    }
    let m = params.m_star;
    let w = params.omega;
    let nf = n as f64;
    let n2 = nf * nf;
    let d = n2 - 1.0;
    let phi_ad = -PI * m * xi0 * alpha0;
    let period = nf * params.t0();
    let phi_a = PI * m * (nf * (n2 + 1.0) * xi0 * xi0 * w + 2.0 * nf * n2 * alpha0 * alpha0 / w) / (d * d);
    let action_s = PI * m * nf * (n2 * alpha0 * alpha0 / w + w * xi0 * xi0) / (2.0 * d);
    let omega_m_t = params.omega_m() * period;
    Ok(PhaseSet {
        phi_t: n2 / d * phi_ad,
        phi_c: n2 * (n2 + 1.0) / (d * d) * phi_ad,
        phi_a,
        phi_ad,
        action_s,
        energy_integral: omega_m_t + phi_a - action_s,
        omega_m_t,
        period_t: period,
    })
}

/// Reference phases of the sequential square loop (no action/energy).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquarePhases {
    pub phi_t: f64,
    pub phi_c: f64,
    pub phi_a: f64,
    pub phi_ad: f64,
}

pub fn closed_form_square(xi0: f64, alpha0: f64, ramp: Ramp, params: &PhysicalParams) -> SquarePhases {
    let m = params.m_star;
    let w = params.omega;
    let loop_phase = -m * xi0 * alpha0;
    let kinetic = w * xi0 * xi0 + alpha0 * alpha0 / w;
    let phi_a = match ramp {
        Ramp::Instantaneous => PI * m * kinetic / 4.0,
        Ramp::Sinusoidal => 15.0 * PI * m * kinetic / 128.0,
    };
    SquarePhases {
        phi_t: loop_phase,
        phi_c: loop_phase,
        phi_a,
        phi_ad: loop_phase,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contour {
    /// [ξ, a_c]
    C1,
    /// [x_c, α]
    C2,
    /// [x_c, a_c]
    C3,
    /// [x_c, ẋ_c]
    C4,
    /// [a_c, ȧ_c]
    C5,
    /// [ξ, α]
    Adiabatic,
}

impl Contour {
    pub const ALL: [Contour; 6] = [
        Contour::C1,
        Contour::C2,
        Contour::C3,
        Contour::C4,
        Contour::C5,
        Contour::Adiabatic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Contour::C1 => "C1",
            Contour::C2 => "C2",
            Contour::C3 => "C3",
            Contour::C4 => "C4",
            Contour::C5 => "C5",
            Contour::Adiabatic => "C_ad",
        }
    }

    pub fn columns(self) -> [&'static str; 2] {
        match self {
            Contour::C1 => ["xi", "a_c"],
            Contour::C2 => ["x_c", "alpha"],
            Contour::C3 => ["x_c", "a_c"],
            Contour::C4 => ["x_c", "dx_c"],
            Contour::C5 => ["a_c", "da_c"],
            Contour::Adiabatic => ["xi", "alpha"],
        }
    }
}

/// Points of a contour in time order.
pub fn contour_points(traj: &ResponseTrajectory, contour: Contour) -> Vec<(f64, f64)> {
    traj.samples()
        .map(|s| match contour {
            Contour::C1 => (s.drive.xi, s.a),
            Contour::C2 => (s.x, s.drive.alpha),
            Contour::C3 => (s.x, s.a),
            Contour::C4 => (s.x, s.dx),
            Contour::C5 => (s.a, s.da),
            Contour::Adiabatic => (s.drive.xi, s.drive.alpha),
        })
        .collect()
}

/// ∮ y dx of a closed polygon through the points (trapezoid rule, i.e. the
/// negated shoelace area). Positive for clockwise loops.
pub fn polygon_loop_integral(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| {
            let (x0, y0) = points[i];
            let (x1, y1) = points[(i + 1) % n];
            0.5 * (y0 + y1) * (x1 - x0)
        })
        .sum()
}

pub fn write_contour_csv<W: Write>(traj: &ResponseTrajectory, contour: Contour, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(contour.columns()).map_err(io)?;
    for (x, y) in contour_points(traj, contour) {
        w.write_record([fmt_f64(x), fmt_f64(y)]).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driving::{make_circular, make_sequential_square};
    use crate::response::{solve_analytic, solve_numeric, InitialConditions, Method};
    use approx::assert_relative_eq;

    fn p() -> PhysicalParams {
        PhysicalParams::scaled()
    }

    #[test]
    fn circular_n3_spin_phase() {
        let prof = make_circular(&p(), 1.0, 1.0, 3).unwrap();
        let tr = solve_analytic(&prof, 4096).unwrap();
        let phi = phi_spin(&tr, &p()).unwrap();
        assert_relative_eq!(phi, -9.0 / 8.0 * PI, max_relative = 1e-10);
    }

    #[test]
    fn zero_soi_gives_zero_spin_phases() {
        let prof = make_circular(&p(), 1.0, 0.0, 3).unwrap();
        let tr = solve_analytic(&prof, 1024).unwrap();
        let ph = PhaseSet::compute(&tr, &prof, &p()).unwrap();
        assert_eq!(ph.phi_t, 0.0);
        assert_eq!(ph.phi_c, 0.0);
        assert_eq!(ph.phi_ad, 0.0);
        assert!(ph.phi_a > 0.0);
    }

    #[test]
    fn non_cyclic_is_rejected() {
        let prof = crate::driving::make_broken_ellipsoidal(&p(), 1.0, 1.0, 0.5).unwrap();
        let tr = solve_numeric(
            &prof,
            InitialConditions::new(0.3, 0.0, 0.0, 0.0),
            prof.period() / 2048.0,
            Method::Duhamel,
        )
        .unwrap();
        assert!(matches!(phi_spin(&tr, &p()), Err(Error::NonCyclicTrajectory { .. })));
        assert!(matches!(phi_a(&tr, &p()), Err(Error::NonCyclicTrajectory { .. })));
    }

    #[test]
    fn square_closed_form_matches_quadrature() {
        for ramp in [Ramp::Sinusoidal, Ramp::Instantaneous] {
            let prof = make_sequential_square(&p(), 1.3, 0.7, ramp).unwrap();
            let tr = solve_analytic(&prof, 4096).unwrap();
            let ph = PhaseSet::compute(&tr, &prof, &p()).unwrap();
            let cf = closed_form_square(1.3, 0.7, ramp, &p());
            assert_relative_eq!(ph.phi_t, cf.phi_t, max_relative = 1e-10);
            assert_relative_eq!(ph.phi_c, cf.phi_c, max_relative = 1e-10);
            assert_relative_eq!(ph.phi_a, cf.phi_a, max_relative = 1e-10);
            assert_relative_eq!(ph.phi_ad, cf.phi_ad, max_relative = 1e-10);
        }
    }

    #[test]
    fn closed_form_limits() {
        let two = closed_form_circular(2, 1.0, 1.0, &p()).unwrap();
        assert_relative_eq!(two.phi_t / two.phi_ad, 4.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(two.phi_c / two.phi_ad, 20.0 / 9.0, max_relative = 1e-15);
        let big = closed_form_circular(1_000_000, 1.0, 1.0, &p()).unwrap();
        assert_relative_eq!(big.phi_t / big.phi_ad, 1.0 + 1e-12, max_relative = 1e-15);
        let c = closed_form_circular(3, 2.0, 0.5, &p()).unwrap();
        assert_relative_eq!(c.phi_ad, -PI, max_relative = 1e-15);
        assert!(matches!(closed_form_circular(1, 1.0, 1.0, &p()), Err(Error::ResonantDriving(1))));
    }

    #[test]
    fn json_round_trip() {
        let c = closed_form_circular(3, 1.0, 1.0, &p()).unwrap();
        let back = PhaseSet::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
        assert!(c.to_json().contains("\"phi_T\""));
        assert!(PhaseSet::from_json("{").is_err());
    }
}
