//! Classical responses x_c(t), a_c(t) of the two undamped driven oscillators
//!
//! ```text
//! ẍ_c + ω² x_c = ω² ξ(t)
//! ä_c + ω² a_c = ω² α(t)
//! ```
//!
//! Trajectories are sampled over one cycle on a grid split at the profile
//! breakpoints; every segment is uniform with an even number of intervals,
//! so Simpson quadrature stays fourth order across kinks and jumps.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::driving::{DrivingProfile, DrivingSample, Ramp, Side};
use crate::error::{Error, Result};
use crate::quadrature::{simpson, simpson_fn};

pub const DEFAULT_SAMPLES: usize = 4096;

/// Scaled ODE residual above which a numeric solve is rejected.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-6;

/// |ω − 2πk/T| below this fraction of ω counts as resonant.
const RESONANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InitialConditions {
    pub x: f64,
    pub dx: f64,
    pub a: f64,
    pub da: f64,
}

impl InitialConditions {
    pub fn new(x: f64, dx: f64, a: f64, da: f64) -> Self {
        Self { x, dx, a, da }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rk4,
    Duhamel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseSample {
    pub t: f64,
    /// Driving at `t`, one-sided at segment ends.
    pub drive: DrivingSample,
    pub x: f64,
    pub dx: f64,
    pub a: f64,
    pub da: f64,
}

/// Uniformly sampled stretch of a trajectory between two breakpoints. The
/// first sample carries right limits of the drivings, the last left limits.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub samples: Vec<ResponseSample>,
}

impl Segment {
    pub fn step(&self) -> f64 {
        let n = self.samples.len();
        (self.samples[n - 1].t - self.samples[0].t) / (n - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTrajectory {
    pub segments: Vec<Segment>,
    pub period: f64,
    pub omega: f64,
    pub ic: InitialConditions,
    pub source: Source,
}

impl ResponseTrajectory {
    pub fn samples(&self) -> impl Iterator<Item = &ResponseSample> {
        self.segments.iter().flat_map(|s| s.samples.iter())
    }

    pub fn first(&self) -> &ResponseSample {
        &self.segments[0].samples[0]
    }

    pub fn last(&self) -> &ResponseSample {
        self.segments.last().and_then(|s| s.samples.last()).expect("non-empty trajectory")
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.samples.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// ∫₀ᵀ f dt, Simpson per segment.
    pub fn integrate<F: Fn(&ResponseSample) -> f64>(&self, f: F) -> f64 {
        self.segments
            .iter()
            .map(|seg| {
                let y: Vec<f64> = seg.samples.iter().map(&f).collect();
                simpson(seg.step(), &y)
            })
            .sum()
    }

    /// Running integral ∫₀ᵗ f dτ at every sample, in sample order.
    ///
    /// Even nodes of a segment get the Simpson value; odd nodes use the
    /// quadratic through the neighbouring pair, so all nodes are third-order
    /// or better.
    pub fn cumulative<F: Fn(&ResponseSample) -> f64>(&self, f: F) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        let mut base = 0.0;
        for seg in &self.segments {
            let y: Vec<f64> = seg.samples.iter().map(&f).collect();
            let h = seg.step();
            let n = y.len();
            let mut acc = base;
            out.push(acc);
            let mut i = 0;
            while i + 2 < n {
                let (y0, y1, y2) = (y[i], y[i + 1], y[i + 2]);
                // half-panel of the quadratic through (y0, y1, y2)
                out.push(acc + h * (5.0 * y0 + 8.0 * y1 - y2) / 12.0);
                acc += h * (y0 + 4.0 * y1 + y2) / 3.0;
                out.push(acc);
                i += 2;
            }
            if i + 1 < n {
                acc += 0.5 * h * (y[i] + y[i + 1]);
                out.push(acc);
            }
            base = acc;
        }
        out
    }

    /// Amplitude scales (ξ, α) used to normalise residuals: the driving
    /// maxima, else the response maxima, else 1.
    pub fn scales(&self) -> (f64, f64) {
        let mut m = [0.0_f64; 4];
        for s in self.samples() {
            m[0] = m[0].max(s.drive.xi.abs());
            m[1] = m[1].max(s.drive.alpha.abs());
            m[2] = m[2].max(s.x.abs());
            m[3] = m[3].max(s.a.abs());
        }
        let pick = |d: f64, r: f64| {
            if d > 0.0 {
                d
            } else if r > 0.0 {
                r
            } else {
                1.0
            }
        };
        (pick(m[0], m[2]), pick(m[1], m[3]))
    }

    /// CSV with columns t, xi, alpha, x_c, dx_c, a_c, da_c.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["t", "xi", "alpha", "x_c", "dx_c", "a_c", "da_c"]).map_err(io)?;
        for s in self.samples() {
            let row = [s.t, s.drive.xi, s.drive.alpha, s.x, s.dx, s.a, s.da];
            w.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Round-trip float formatting with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Sample times per segment: `(start, end, intervals)` with even interval
/// counts distributed in proportion to segment length.
pub fn segment_grid(profile: &DrivingProfile, samples: usize) -> Vec<(f64, f64, usize)> {
    let period = profile.period();
    let bp = profile.breakpoints();
    bp.windows(2)
        .map(|w| {
            let share = samples as f64 * (w[1] - w[0]) / period;
            let n = ((share / 2.0).round() as usize * 2).max(2);
            (w[0], w[1], n)
        })
        .collect()
}

fn grid_times(start: f64, end: f64, n: usize) -> impl Iterator<Item = (f64, Side)> {
    let h = (end - start) / n as f64;
    (0..=n).map(move |i| {
        if i == n {
            (end, Side::Left)
        } else {
            (start + h * i as f64, Side::Right)
        }
    })
}

/// Closed-form responses for the circular, broken-ellipsoidal and
/// sequential-square families, with their built-in initial conditions.
pub fn solve_analytic(profile: &DrivingProfile, samples: usize) -> Result<ResponseTrajectory> {
    let w = profile.omega();
    let eval: Box<dyn Fn(f64) -> [f64; 4]> = if let Some((xi0, alpha0, n)) = profile.circular_params() {
        let n = n as f64;
        let nu = w / n;
        let d = n * n - 1.0;
        Box::new(move |t| {
            let (sn, cn) = (nu * t).sin_cos();
            let (s1, c1) = (w * t).sin_cos();
            [
                xi0 * (n * n * cn - c1) / d,
                xi0 * (-n * n * nu * sn + w * s1) / d,
                alpha0 * n * (n * sn - s1) / d,
                alpha0 * n * (n * nu * cn - w * c1) / d,
            ]
        })
    } else if let Some((xi0, alpha0, delta_t)) = profile.ellipsoidal_params() {
        let period = profile.period();
        let t0 = 2.0 * PI / w;
        // (2/3)[2 sin(ωr/2) − sin(ωr)] on [0, 2T0]
        let pulse = move |r: f64| -> (f64, f64) {
            if r <= 2.0 * t0 {
                let (s2, c2) = (w * r / 2.0).sin_cos();
                let (s1, c1) = (w * r).sin_cos();
                (2.0 / 3.0 * (2.0 * s2 - s1), 2.0 / 3.0 * (w * c2 - w * c1))
            } else {
                (0.0, 0.0)
            }
        };
        Box::new(move |t| {
            let (x, dx) = pulse(t.rem_euclid(period));
            let (a, da) = pulse((t - delta_t).rem_euclid(period));
            [xi0 * x, xi0 * dx, alpha0 * a, alpha0 * da]
        })
    } else if let Some(ramp) = profile.square_ramp() {
        let tau = profile.period() / 4.0;
        let legs: Vec<_> = (0..4).map(|j| profile.square_leg(j)).collect();
        Box::new(move |t| {
            let j = ((t / tau).floor() as usize).min(3);
            let s = t - j as f64 * tau;
            let leg = legs[j];
            let (a, b) = if leg.moves_xi { leg.xi } else { leg.alpha };
            let (r, dr) = match ramp {
                Ramp::Sinusoidal => {
                    let big = w / 3.0;
                    let ratio = w * w / (w * w - big * big);
                    let (sb, cb) = (big * s).sin_cos();
                    let (sw, cw) = (w * s).sin_cos();
                    (
                        a + (b - a) * (0.5 - 0.5 * ratio * cb + 0.5 * (ratio - 1.0) * cw),
                        (b - a) * (0.5 * ratio * big * sb - 0.5 * (ratio - 1.0) * w * sw),
                    )
                }
                Ramp::Instantaneous => {
                    let (sw, cw) = (w * s).sin_cos();
                    ((a + b) / 2.0 - (b - a) / 2.0 * cw, (b - a) * w / 2.0 * sw)
                }
            };
            if leg.moves_xi {
                [r, dr, leg.alpha.0, 0.0]
            } else {
                [leg.xi.0, 0.0, r, dr]
            }
        })
    } else {
        return Err(Error::UnsupportedProfile(profile.kind().name()));
    };

    let segments = segment_grid(profile, samples)
        .into_iter()
        .map(|(start, end, n)| Segment {
            samples: grid_times(start, end, n)
                .map(|(t, side)| {
                    let [x, dx, a, da] = eval(t);
                    ResponseSample {
                        t,
                        drive: profile.eval_side(t, side),
                        x,
                        dx,
                        a,
                        da,
                    }
                })
                .collect(),
        })
        .collect::<Vec<_>>();
    let f = segments[0].samples[0];
    Ok(ResponseTrajectory {
        segments,
        period: profile.period(),
        omega: w,
        ic: InitialConditions::new(f.x, f.dx, f.a, f.da),
        source: Source::Analytic,
    })
}

/// Numeric responses from the given initial conditions with the default
/// residual tolerance.
pub fn solve_numeric(
    profile: &DrivingProfile,
    ic: InitialConditions,
    dt: f64,
    method: Method,
) -> Result<ResponseTrajectory> {
    solve_numeric_with_tol(profile, ic, dt, method, DEFAULT_RESIDUAL_TOL)
}

/// Numeric responses; `dt` must divide the period. Segments between
/// breakpoints use the nearest even step count not coarser than `dt`.
pub fn solve_numeric_with_tol(
    profile: &DrivingProfile,
    ic: InitialConditions,
    dt: f64,
    method: Method,
    residual_tol: f64,
) -> Result<ResponseTrajectory> {
    let period = profile.period();
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParam(format!("dt must be > 0, got {dt}")));
    }
    let steps = period / dt;
    if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
        return Err(Error::InvalidParam(format!("dt = {dt} does not divide the period {period}")));
    }
    let w = profile.omega();
    let bp = profile.breakpoints();
    let mut segments = Vec::with_capacity(bp.len() - 1);
    let mut state = [ic.x, ic.dx, ic.a, ic.da];
    // running ∫cos(ωτ)f, ∫sin(ωτ)f for f = ξ, α
    let mut conv = [0.0_f64; 4];
    for win in bp.windows(2) {
        let (start, end) = (win[0], win[1]);
        let n = (((end - start) / dt - 1e-9).ceil() as usize).max(1).next_multiple_of(2);
        let h = (end - start) / n as f64;
        let mut samples = Vec::with_capacity(n + 1);
        for (i, (t, side)) in grid_times(start, end, n).enumerate() {
            let drive = profile.eval_side(t, side);
            if i > 0 {
                let t_prev = t - h;
                match method {
                    Method::Rk4 => state = rk4_step(profile, w, t_prev, h, state),
                    Method::Duhamel => {
                        let d0 = profile.eval_side(t_prev, Side::Right);
                        let dm = profile.eval_side(t_prev + 0.5 * h, Side::Right);
                        let f = |tt: f64, d: &DrivingSample| {
                            let (s, c) = (w * tt).sin_cos();
                            [c * d.xi, s * d.xi, c * d.alpha, s * d.alpha]
                        };
                        let (f0, fm, f1) = (f(t_prev, &d0), f(t_prev + 0.5 * h, &dm), f(t, &drive));
                        for k in 0..4 {
                            conv[k] += h / 6.0 * (f0[k] + 4.0 * fm[k] + f1[k]);
                        }
                        state = duhamel_state(w, t, ic, &conv);
                    }
                }
            }
            samples.push(ResponseSample {
                t,
                drive,
                x: state[0],
                dx: state[1],
                a: state[2],
                da: state[3],
            });
        }
        segments.push(Segment { samples });
    }
    let traj = ResponseTrajectory {
        segments,
        period,
        omega: w,
        ic,
        source: Source::Numeric,
    };
    let (rx, ra) = ode_residual(&traj);
    let worst = rx.max(ra);
    if !(worst <= residual_tol) {
        return Err(Error::StepTooLarge {
            dt,
            residual: worst,
            tol: residual_tol,
        });
    }
    Ok(traj)
}

fn rk4_step(profile: &DrivingProfile, w: f64, t: f64, h: f64, y: [f64; 4]) -> [f64; 4] {
    let w2 = w * w;
    let f = |d: DrivingSample, y: [f64; 4]| [y[1], w2 * (d.xi - y[0]), y[3], w2 * (d.alpha - y[2])];
    let add = |y: [f64; 4], k: [f64; 4], s: f64| std::array::from_fn::<f64, 4, _>(|i| y[i] + s * k[i]);
    let d0 = profile.eval_side(t, Side::Right);
    let dm = profile.eval_side(t + 0.5 * h, Side::Right);
    let d1 = profile.eval_side(t + h, Side::Left);
    let k1 = f(d0, y);
    let k2 = f(dm, add(y, k1, 0.5 * h));
    let k3 = f(dm, add(y, k2, 0.5 * h));
    let k4 = f(d1, add(y, k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Homogeneous part plus ω∫sin(ω(t−τ))f(τ)dτ, from the running convolution sums.
fn duhamel_state(w: f64, t: f64, ic: InitialConditions, conv: &[f64; 4]) -> [f64; 4] {
    let (s, c) = (w * t).sin_cos();
    let pos = |p0: f64, v0: f64, ci: f64, si: f64| p0 * c + v0 / w * s + w * (s * ci - c * si);
    let vel = |p0: f64, v0: f64, ci: f64, si: f64| -p0 * w * s + v0 * c + w * w * (c * ci + s * si);
    [
        pos(ic.x, ic.dx, conv[0], conv[1]),
        vel(ic.x, ic.dx, conv[0], conv[1]),
        pos(ic.a, ic.da, conv[2], conv[3]),
        vel(ic.a, ic.da, conv[2], conv[3]),
    ]
}

/// Largest scaled residuals |ẍ + ω²x − ω²ξ| / (ω²·scale) for the x and a
/// equations, using a 5-point second-difference stencil at interior
/// points of each segment.
pub fn ode_residual(traj: &ResponseTrajectory) -> (f64, f64) {
    let w2 = traj.omega * traj.omega;
    let (sx, sa) = traj.scales();
    let mut worst = (0.0_f64, 0.0_f64);
    for seg in &traj.segments {
        let s = &seg.samples;
        if s.len() < 5 {
            continue;
        }
        let h2 = seg.step().powi(2);
        for i in 2..s.len() - 2 {
            let d2 = |g: fn(&ResponseSample) -> f64| {
                (-g(&s[i - 2]) + 16.0 * g(&s[i - 1]) - 30.0 * g(&s[i]) + 16.0 * g(&s[i + 1]) - g(&s[i + 2]))
                    / (12.0 * h2)
            };
            let rx = (d2(|r| r.x) + w2 * (s[i].x - s[i].drive.xi)).abs() / (w2 * sx);
            let ra = (d2(|r| r.a) + w2 * (s[i].a - s[i].drive.alpha)).abs() / (w2 * sa);
            worst.0 = worst.0.max(rx);
            worst.1 = worst.1.max(ra);
        }
    }
    worst
}

/// Initial conditions giving a T-periodic response.
///
/// The periodic particular solution of ẍ + ω²x = ω²f is the Fourier sum
/// Σₖ f̂ₖ ω²/(ω² − (2πk/T)²) e^{2πikt/T}; summed in closed form it is the
/// convolution with the periodic kernel ω cos(ω(s − T/2)) / (2 sin(ωT/2)),
/// s ∈ [0, T). That kernel is integrated against the driving here.
///
/// When ωT is a multiple of 2π every free oscillation is itself periodic, so
/// the answer is not unique; the member starting at rest on the driving,
/// (ξ(0), 0, α(0), 0), is returned. This is the state that begins in the
/// Kramers doublet of H(0). A nonzero driving component at the resonant
/// mode makes periodic motion impossible and is reported as `ResonantMode`.
pub fn find_periodic_ic(profile: &DrivingProfile) -> Result<InitialConditions> {
    let w = profile.omega();
    let period = profile.period();
    let k = (w * period / (2.0 * PI)).round();
    let degenerate = k >= 1.0 && (w - 2.0 * PI * k / period).abs() < RESONANCE_TOL * w;
    let grid = segment_grid(profile, 8192);
    let integrate = |g: &dyn Fn(f64, &DrivingSample) -> [f64; 2]| -> [f64; 2] {
        let mut acc = [0.0; 2];
        for &(start, end, n) in &grid {
            let vals: Vec<[f64; 2]> = grid_times(start, end, n)
                .map(|(t, side)| g(t, &profile.eval_side(t, side)))
                .collect();
            let h = (end - start) / n as f64;
            for (c, slot) in acc.iter_mut().enumerate() {
                let y: Vec<f64> = vals.iter().map(|v| v[c]).collect();
                *slot += simpson(h, &y);
            }
        }
        acc
    };

    let start = profile.eval_side(0.0, Side::Right);
    if degenerate {
        let (ax, aa) = profile.amplitudes();
        let coeff = |pick: fn(&DrivingSample) -> f64| {
            let [c, s] = integrate(&|t, d| {
                let (sn, cs) = (w * t).sin_cos();
                [cs * pick(d), sn * pick(d)]
            });
            c.hypot(s) / period
        };
        for (amp, c) in [(ax, coeff(|d| d.xi)), (aa, coeff(|d| d.alpha))] {
            if c > 1e-8 * amp.max(f64::MIN_POSITIVE) {
                return Err(Error::ResonantMode {
                    k: k as u64,
                    coefficient: c,
                });
            }
        }
        return Ok(InitialConditions::new(start.xi, 0.0, start.alpha, 0.0));
    }

    let denom = 2.0 * (w * period / 2.0).sin();
    let [xc, xs] = integrate(&|t, d| {
        let (s, c) = (w * (period / 2.0 - t)).sin_cos();
        [c * d.xi, s * d.xi]
    });
    let [ac, as_] = integrate(&|t, d| {
        let (s, c) = (w * (period / 2.0 - t)).sin_cos();
        [c * d.alpha, s * d.alpha]
    });
    Ok(InitialConditions::new(
        w * xc / denom,
        -w * w * xs / denom,
        w * ac / denom,
        -w * w * as_ / denom,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CyclicReport {
    /// |Δx|/ξs, |Δẋ|/(ωξs), |Δa|/αs, |Δȧ|/(ωαs) between t = 0 and t = T.
    pub mismatch: [f64; 4],
    pub cyclic: bool,
}

impl CyclicReport {
    pub fn worst(&self) -> f64 {
        self.mismatch.iter().copied().fold(0.0, f64::max)
    }
}

pub fn check_cyclic(traj: &ResponseTrajectory, tol: f64) -> CyclicReport {
    let (sx, sa) = traj.scales();
    let w = traj.omega;
    let (f, l) = (traj.first(), traj.last());
    let mismatch = [
        (l.x - f.x).abs() / sx,
        (l.dx - f.dx).abs() / (w * sx),
        (l.a - f.a).abs() / sa,
        (l.da - f.da).abs() / (w * sa),
    ];
    CyclicReport {
        mismatch,
        cyclic: mismatch.iter().all(|m| *m <= tol),
    }
}

/// Periodic response evaluated by a truncated Fourier sum of the driving.
/// Slow and only as accurate as the truncation; kept for cross-checks.
pub fn fourier_periodic_ic(profile: &DrivingProfile, modes: usize, quad: usize) -> InitialConditions {
    let w = profile.omega();
    let period = profile.period();
    let nu = 2.0 * PI / period;
    let bp = profile.breakpoints();
    let coeff = |k: usize, pick: fn(&DrivingSample) -> f64| -> (f64, f64) {
        let kk = k as f64 * nu;
        let mut re = 0.0;
        let mut im = 0.0;
        for win in bp.windows(2) {
            let n = quad.max(16);
            re += simpson_fn(win[0], win[1], n, |t| pick(&profile.eval(t)) * (kk * t).cos());
            im -= simpson_fn(win[0], win[1], n, |t| pick(&profile.eval(t)) * (kk * t).sin());
        }
        (re / period, im / period)
    };
    let sum = |pick: fn(&DrivingSample) -> f64| -> (f64, f64) {
        let mut pos = 0.0;
        let mut vel = 0.0;
        for k in 0..=modes {
            let (re, im) = coeff(k, pick);
            let kk = k as f64 * nu;
            let gain = w * w / (w * w - kk * kk);
            let weight = if k == 0 { 1.0 } else { 2.0 };
            pos += weight * gain * re;
            // d/dt of Re[c e^{ikνt}] at 0 = −kν·Im c
            vel -= weight * gain * kk * im;
        }
        (pos, vel)
    };
    let (x, dx) = sum(|d| d.xi);
    let (a, da) = sum(|d| d.alpha);
    InitialConditions::new(x, dx, a, da)
}

/// Closed form when the family has one, otherwise RK4 from the periodic
/// initial conditions with `samples` steps per cycle.
pub fn periodic_trajectory(profile: &DrivingProfile, samples: usize) -> Result<ResponseTrajectory> {
    match solve_analytic(profile, samples) {
        Err(Error::UnsupportedProfile(_)) => {
            let ic = find_periodic_ic(profile)?;
            solve_numeric(profile, ic, profile.period() / samples as f64, Method::Rk4)
        }
        other => other,
    }
}
