//! Grid Schrödinger integrator used as an independent check of the exact
//! solution.
//!
//! In the **n**·σ eigenbasis the Hamiltonian splits into two scalar problems
//! H_σ = p²/2m + mω²(x − ξ)²/2 + σαp − σZ, σ = ±1, so each spinor component
//! is evolved on its own. Translations and kinetic factors are applied in
//! momentum space; the box is periodic.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::driving::{DrivingProfile, PhysicalParams};
use crate::error::{Error, Result};
use crate::response::{fmt_f64, ResponseTrajectory};

/// Edge-to-peak density ratio above which the box or the momentum grid is
/// considered too small.
pub const LEAK_TOL: f64 = 1e-12;
pub const NORM_TOL: f64 = 1e-8;
pub const DEFAULT_NX: usize = 1024;
pub const DEFAULT_STEPS_PER_CYCLE: usize = 8192;

/// Number of edge points inspected by the leak check.
const EDGE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_x: usize,
    /// Half-width; the grid covers [−L, L).
    pub l_box: f64,
}

impl GridSpec {
    pub fn new(n_x: usize, l_box: f64) -> Result<Self> {
        let g = Self { n_x, l_box };
        g.validate()?;
        Ok(g)
    }

    /// L ≥ max|x_c| + max|ȧ_c|/ω² + 8 oscillator lengths, widened for
    /// excited levels by the classical turning point √(2m+1).
    pub fn for_trajectory(traj: &ResponseTrajectory, params: &PhysicalParams, n_x: usize) -> Result<Self> {
        let w2 = params.omega * params.omega;
        let (mut xmax, mut shift) = (0.0_f64, 0.0_f64);
        for s in traj.samples() {
            xmax = xmax.max(s.x.abs());
            shift = shift.max(s.da.abs() / w2);
        }
        let ell = params.oscillator_length();
        let tail = (8.0 + (2.0 * params.level_m as f64 + 1.0).sqrt()) * ell;
        Self::new(n_x, xmax + shift + tail)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.n_x.is_power_of_two() || self.n_x < 16 {
            return Err(Error::InvalidParam(format!(
                "n_x must be a power of two >= 16, got {}",
                self.n_x
            )));
        }
        if !(self.l_box.is_finite() && self.l_box > 0.0) {
            return Err(Error::InvalidParam(format!("l_box must be > 0, got {}", self.l_box)));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.l_box / self.n_x as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_x).map(|j| -self.l_box + j as f64 * dx).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_x as i64;
        let dk = 2.0 * PI / (n as f64 * self.dx());
        (0..n)
            .map(|j| if j < (n + 1) / 2 { j } else { j - n } as f64 * dk)
            .collect()
    }
}

/// Two-component wavefunction; `psi_up`/`psi_down` are the components along
/// the +1/−1 eigenvectors of **n**·σ.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorGridState {
    pub grid: GridSpec,
    pub x_grid: Vec<f64>,
    pub psi_up: Vec<C64>,
    pub psi_down: Vec<C64>,
}

impl SpinorGridState {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            x_grid: grid.positions(),
            psi_up: vec![C64::default(); grid.n_x],
            psi_down: vec![C64::default(); grid.n_x],
        }
    }

    pub fn component(&self, sigma: f64) -> &[C64] {
        if sigma > 0.0 {
            &self.psi_up
        } else {
            &self.psi_down
        }
    }

    fn component_mut(&mut self, sigma: f64) -> &mut Vec<C64> {
        if sigma > 0.0 {
            &mut self.psi_up
        } else {
            &mut self.psi_down
        }
    }

    pub fn norm(&self) -> f64 {
        let s: f64 = self.psi_up.iter().chain(&self.psi_down).map(|z| z.norm_sqr()).sum();
        s * self.grid.dx()
    }

    pub fn expectation_x(&self) -> f64 {
        let s: f64 = self
            .x_grid
            .iter()
            .zip(self.psi_up.iter().zip(&self.psi_down))
            .map(|(x, (u, d))| x * (u.norm_sqr() + d.norm_sqr()))
            .sum();
        s * self.grid.dx() / self.norm()
    }

    /// ⟨p⟩ of one component, normalised to that component, evaluated
    /// spectrally.
    pub fn expectation_p(&self, sigma: f64) -> f64 {
        let fft = Spectral::new(self.grid);
        let mut buf = self.component(sigma).to_vec();
        fft.forward(&mut buf);
        let (mut num, mut den) = (0.0, 0.0);
        for (z, k) in buf.iter().zip(&fft.k) {
            num += k * z.norm_sqr();
            den += z.norm_sqr();
        }
        num / den
    }

    /// Largest edge-to-peak density ratio in position and in momentum.
    pub fn leak_ratio(&self) -> f64 {
        let fft = Spectral::new(self.grid);
        let n = self.grid.n_x;
        let mut worst = 0.0_f64;
        for sigma in [1.0, -1.0] {
            let psi = self.component(sigma);
            let peak = psi.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
            if peak == 0.0 {
                continue;
            }
            let edge = psi[..EDGE].iter().chain(&psi[n - EDGE..]).map(|z| z.norm_sqr()).fold(0.0, f64::max);
            worst = worst.max(edge / peak);

            let mut spec = psi.to_vec();
            fft.forward(&mut spec);
            let peak = spec.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
            let mid = n / 2;
            let edge = spec[mid - EDGE..mid + EDGE].iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
            worst = worst.max(edge / peak);
        }
        worst
    }

    fn check_leak(&self) -> Result<()> {
        let ratio = self.leak_ratio();
        if ratio > LEAK_TOL {
            return Err(Error::GridTooSmall { ratio });
        }
        Ok(())
    }

    /// CSV with columns x, re_up, im_up, re_down, im_down.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["x", "re_up", "im_up", "re_down", "im_down"]).map_err(io)?;
        for ((x, u), d) in self.x_grid.iter().zip(&self.psi_up).zip(&self.psi_down) {
            let row = [*x, u.re, u.im, d.re, d.im];
            w.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Spectral {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
    scale: f64,
}

impl Spectral {
    fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fwd: planner.plan_fft_forward(grid.n_x),
            inv: planner.plan_fft_inverse(grid.n_x),
            k: grid.wavenumbers(),
            scale: 1.0 / grid.n_x as f64,
        }
    }

    fn forward(&self, buf: &mut [C64]) {
        self.fwd.process(buf);
    }

    fn inverse(&self, buf: &mut [C64]) {
        self.inv.process(buf);
        for z in buf.iter_mut() {
            *z *= self.scale;
        }
    }

    /// f(x) → f(x − d).
    fn translate(&self, buf: &mut [C64], d: f64) {
        if d == 0.0 {
            return;
        }
        self.forward(buf);
        for (z, k) in buf.iter_mut().zip(&self.k) {
            *z *= C64::from_polar(1.0, -k * d);
        }
        self.inverse(buf);
    }
}

/// Normalised oscillator eigenfunction ψ_m on `x`.
pub fn hermite_function(level: u32, x: &[f64], params: &PhysicalParams) -> Vec<f64> {
    let s = (params.m_star * params.omega).sqrt();
    let c0 = (params.m_star * params.omega / PI).powf(0.25);
    x.iter()
        .map(|&x| {
            let q = s * x;
            let mut prev = 0.0;
            let mut cur = c0 * (-0.5 * q * q).exp();
            for k in 0..level {
                let k = k as f64;
                let next = (2.0 / (k + 1.0)).sqrt() * q * cur - (k / (k + 1.0)).sqrt() * prev;
                prev = cur;
                cur = next;
            }
            cur
        })
        .collect()
}

/// Responses and the accumulated phases φ_ξ, φ_α, φ at any t in [0, T],
/// by cubic Hermite interpolation between trajectory samples.
///
/// φ_ξ = −∫ L_ξ, φ_α = −∫ L_α, φ = −m∫ ȧ_c ξ with
/// L_ξ = mẋ_c²/2 − mω²(x_c − ξ)²/2 and L_α = mȧ_c²/2ω² − ma_c²/2 + ma_cα.
#[derive(Debug, Clone)]
pub struct PhaseAccumulators {
    segments: Vec<AccSegment>,
    period: f64,
}

#[derive(Debug, Clone)]
struct AccSegment {
    t: Vec<f64>,
    /// x, ẋ, a, ȧ, φ_ξ, φ_α, φ
    val: Vec<[f64; 7]>,
    der: Vec<[f64; 7]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccState {
    pub x: f64,
    pub dx: f64,
    pub a: f64,
    pub da: f64,
    pub phi_xi: f64,
    pub phi_alpha: f64,
    pub phi: f64,
}

impl PhaseAccumulators {
    pub fn new(traj: &ResponseTrajectory, params: &PhysicalParams) -> Self {
        let m = params.m_star;
        let w2 = params.omega * params.omega;
        let l_xi = |s: &crate::response::ResponseSample| {
            0.5 * m * s.dx * s.dx - 0.5 * m * w2 * (s.x - s.drive.xi).powi(2)
        };
        let l_alpha = |s: &crate::response::ResponseSample| {
            0.5 * m * s.da * s.da / w2 - 0.5 * m * s.a * s.a + m * s.a * s.drive.alpha
        };
        let p_xi = traj.cumulative(|s| -l_xi(s));
        let p_alpha = traj.cumulative(|s| -l_alpha(s));
        let p_spin = traj.cumulative(|s| -m * s.da * s.drive.xi);

        let mut offset = 0;
        let segments = traj
            .segments
            .iter()
            .map(|seg| {
                let mut out = AccSegment {
                    t: Vec::with_capacity(seg.samples.len()),
                    val: Vec::with_capacity(seg.samples.len()),
                    der: Vec::with_capacity(seg.samples.len()),
                };
                for (i, s) in seg.samples.iter().enumerate() {
                    let j = offset + i;
                    out.t.push(s.t);
                    out.val.push([s.x, s.dx, s.a, s.da, p_xi[j], p_alpha[j], p_spin[j]]);
                    out.der.push([
                        s.dx,
                        w2 * (s.drive.xi - s.x),
                        s.da,
                        w2 * (s.drive.alpha - s.a),
                        -l_xi(s),
                        -l_alpha(s),
                        -m * s.da * s.drive.xi,
                    ]);
                }
                offset += seg.samples.len();
                out
            })
            .collect();
        Self {
            segments,
            period: traj.period,
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn at(&self, t: f64) -> Result<AccState> {
        let eps = 1e-12 * self.period;
        if !(t >= -eps && t <= self.period + eps) {
            return Err(Error::InvalidParam(format!("t = {t} outside [0, {}]", self.period)));
        }
        let seg = self
            .segments
            .iter()
            .find(|s| t <= s.t[s.t.len() - 1] + eps)
            .unwrap_or_else(|| self.segments.last().expect("non-empty"));
        let n = seg.t.len();
        let h = (seg.t[n - 1] - seg.t[0]) / (n - 1) as f64;
        let i = (((t - seg.t[0]) / h).floor().max(0.0) as usize).min(n - 2);
        let u = ((t - seg.t[i]) / h).clamp(0.0, 1.0);
        let (h00, h10, h01, h11) = (
            (1.0 + 2.0 * u) * (1.0 - u) * (1.0 - u),
            u * (1.0 - u) * (1.0 - u),
            u * u * (3.0 - 2.0 * u),
            u * u * (u - 1.0),
        );
        let v: [f64; 7] = std::array::from_fn(|c| {
            h00 * seg.val[i][c] + h10 * h * seg.der[i][c] + h01 * seg.val[i + 1][c] + h11 * h * seg.der[i + 1][c]
        });
        Ok(AccState {
            x: v[0],
            dx: v[1],
            a: v[2],
            da: v[3],
            phi_xi: v[4],
            phi_alpha: v[5],
            phi: v[6],
        })
    }
}

/// Applies U†(t) to a reference state (the transformations of the exact
/// solution, right to left):
/// translate by x_c, boost by mẋ_c, phase e^{−iφ_ξ}; then per component
/// e^{−iσm x a_c}, translate by σȧ_c/ω², phase e^{−i(φ_α + mȧ_c a_c/ω²)}
/// and e^{−iσφ}.
pub fn apply_u_dagger(
    state_ref: &SpinorGridState,
    t: f64,
    acc: &PhaseAccumulators,
    params: &PhysicalParams,
) -> Result<SpinorGridState> {
    let st = acc.at(t)?;
    let fft = Spectral::new(state_ref.grid);
    let m = params.m_star;
    let w2 = params.omega * params.omega;
    let mut out = state_ref.clone();
    for sigma in [1.0, -1.0] {
        let psi = out.component_mut(sigma);
        if psi.iter().all(|z| z.norm_sqr() == 0.0) {
            continue;
        }
        fft.translate(psi, st.x);
        let global = -st.phi_xi - st.phi_alpha - m * st.da * st.a / w2 - sigma * st.phi;
        for (z, x) in psi.iter_mut().zip(&state_ref.x_grid) {
            *z *= C64::from_polar(1.0, m * (x - st.x) * st.dx - sigma * m * x * st.a);
        }
        fft.translate(psi, sigma * st.da / w2);
        let g = C64::from_polar(1.0, global);
        for z in psi.iter_mut() {
            *z *= g;
        }
    }
    out.check_leak()?;
    Ok(out)
}

/// ψ_m ⊗ (c₊χ₊ + c₋χ₋) centred at the origin, before any transformation.
pub fn reference_state(level: u32, spin: [C64; 2], params: &PhysicalParams, grid: GridSpec) -> Result<SpinorGridState> {
    grid.validate()?;
    let norm = (spin[0].norm_sqr() + spin[1].norm_sqr()).sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NonUnitVector(norm));
    }
    let mut s = SpinorGridState::zeros(grid);
    let f = hermite_function(level, &s.x_grid, params);
    s.psi_up = f.iter().map(|v| spin[0] * v).collect();
    s.psi_down = f.iter().map(|v| spin[1] * v).collect();
    s.check_leak()?;
    Ok(s)
}

/// |Ψ(0)⟩ = U†(0)|ψ_m⟩|χ⟩ for the spinor `spin` given in the **n** basis.
pub fn eigenstate_initial(
    level: u32,
    spin: [C64; 2],
    acc: &PhaseAccumulators,
    params: &PhysicalParams,
    grid: GridSpec,
) -> Result<SpinorGridState> {
    let r = reference_state(level, spin, params, grid)?;
    apply_u_dagger(&r, 0.0, acc, params)
}

/// Exact state U†(t) e^{−iH₀t}|ψ_m⟩|χ⟩, with H₀ including −Z(**n**·σ).
pub fn exact_state(
    level: u32,
    spin: [C64; 2],
    t: f64,
    acc: &PhaseAccumulators,
    params: &PhysicalParams,
    grid: GridSpec,
) -> Result<SpinorGridState> {
    let z = params.zeeman_energy();
    let e = -params.omega * (level as f64 + 0.5) * t;
    let phased = [spin[0] * C64::from_polar(1.0, e + z * t), spin[1] * C64::from_polar(1.0, e - z * t)];
    let r = reference_state(level, phased, params, grid)?;
    apply_u_dagger(&r, t, acc, params)
}

/// Strang split-step evolution from t = 0 to `t_final` with steps no longer
/// than `dt`. Coefficients are taken at step midpoints; adjacent kinetic
/// half-steps are merged since they commute.
pub fn evolve_split_step(
    profile: &DrivingProfile,
    params: &PhysicalParams,
    state0: &SpinorGridState,
    dt: f64,
    t_final: f64,
) -> Result<SpinorGridState> {
    if !(dt.is_finite() && dt > 0.0 && t_final.is_finite() && t_final >= 0.0) {
        return Err(Error::InvalidParam(format!("need dt > 0 and t_final >= 0, got {dt}, {t_final}")));
    }
    let steps = ((t_final / dt) * (1.0 - 1e-12)).ceil().max(0.0) as usize;
    let mut out = state0.clone();
    if steps == 0 {
        return Ok(out);
    }
    let h = t_final / steps as f64;
    let fft = Spectral::new(state0.grid);
    let m = params.m_star;
    let w2 = params.omega * params.omega;
    let z = params.zeeman_energy();
    let mids: Vec<(f64, f64)> = (0..steps)
        .map(|j| {
            let d = profile.eval((j as f64 + 0.5) * h);
            (d.xi, d.alpha)
        })
        .collect();
    let kin_full: Vec<C64> = fft.k.iter().map(|k| C64::from_polar(1.0, -k * k * h / (2.0 * m))).collect();
    let kin_half: Vec<C64> = fft.k.iter().map(|k| C64::from_polar(1.0, -k * k * h / (4.0 * m))).collect();
    let norm0 = state0.norm();

    for sigma in [1.0, -1.0] {
        let psi = out.component_mut(sigma);
        if psi.iter().all(|c| c.norm_sqr() == 0.0) {
            continue;
        }
        fft.forward(psi);
        for j in 0..steps {
            let (xi, alpha) = mids[j];
            // kinetic: second half of step j−1 merged with first half of j
            let (base, shift) = if j == 0 {
                (&kin_half, 0.5 * alpha)
            } else {
                (&kin_full, 0.5 * (mids[j - 1].1 + alpha))
            };
            for ((c, b), k) in psi.iter_mut().zip(base).zip(&fft.k) {
                *c *= b * C64::from_polar(1.0, -sigma * shift * k * h);
            }
            fft.inverse(psi);
            for (c, x) in psi.iter_mut().zip(&state0.x_grid) {
                let v = 0.5 * m * w2 * (x - xi).powi(2) - sigma * z;
                *c *= C64::from_polar(1.0, -v * h);
            }
            fft.forward(psi);
        }
        let alpha = mids[steps - 1].1;
        for ((c, b), k) in psi.iter_mut().zip(&kin_half).zip(&fft.k) {
            *c *= b * C64::from_polar(1.0, -sigma * 0.5 * alpha * k * h);
        }
        fft.inverse(psi);
    }

    let drift = (out.norm() - norm0).abs();
    if drift > NORM_TOL {
        return Err(Error::NormDrift { drift });
    }
    out.check_leak()?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub magnitude: f64,
    pub phase: f64,
}

/// ⟨a|b⟩ by grid quadrature, as magnitude and argument.
pub fn fidelity(a: &SpinorGridState, b: &SpinorGridState) -> Result<Fidelity> {
    let ov = overlap(a, b)?;
    Ok(Fidelity {
        magnitude: ov.norm(),
        phase: ov.arg(),
    })
}

pub fn overlap(a: &SpinorGridState, b: &SpinorGridState) -> Result<C64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let s: C64 = a
        .psi_up
        .iter()
        .zip(&b.psi_up)
        .chain(a.psi_down.iter().zip(&b.psi_down))
        .map(|(x, y)| x.conj() * y)
        .sum();
    Ok(s * a.grid.dx())
}

/// Evolves (χ₊ + χ₋)/√2 ⊗ ψ_m through one cycle and returns the measured
/// arg(c₋/c₊) in (−π, π], which equals 2(φ_T − ZT) mod 2π.
pub fn extract_spin_rotation(
    traj: &ResponseTrajectory,
    profile: &DrivingProfile,
    params: &PhysicalParams,
    grid: GridSpec,
    dt: f64,
) -> Result<f64> {
    let acc = PhaseAccumulators::new(traj, params);
    let h = C64::from(std::f64::consts::FRAC_1_SQRT_2);
    let psi0 = eigenstate_initial(params.level_m, [h, h], &acc, params, grid)?;
    let psi_t = evolve_split_step(profile, params, &psi0, dt, profile.period())?;
    let dot = |s: &[C64], t: &[C64]| -> C64 { s.iter().zip(t).map(|(a, b)| a.conj() * b).sum() };
    let up = dot(&psi0.psi_up, &psi_t.psi_up);
    let down = dot(&psi0.psi_down, &psi_t.psi_down);
    Ok((down / up).arg())
}
