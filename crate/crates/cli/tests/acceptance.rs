//! Acceptance criteria 1–8, one PASS/FAIL line each. Runs without the test
//! harness so the lines always show; exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use spinloop_cli::run::{simulate, sweep, Tracked};
use spinloop_cli::Scenario;
use spinloop_core::driving::{
    make_broken_ellipsoidal, make_circular, make_fourier, make_sequential_square, DrivingProfile, FourierSeries,
    PhysicalParams, Ramp,
};
use spinloop_core::holonomy::{anandan_berry, decompose, total_phase_generator, Spin};
use spinloop_core::oracle::{
    eigenstate_initial, evolve_split_step, exact_state, extract_spin_rotation, fidelity, GridSpec, PhaseAccumulators,
};
use spinloop_core::phases::{phi_contour_c1, phi_contour_c2, PhaseSet};
use spinloop_core::response::{periodic_trajectory, solve_analytic};

struct Outcome {
    passed: bool,
    detail: String,
}

fn phases_of(profile: &DrivingProfile, p: &PhysicalParams) -> PhaseSet {
    PhaseSet::compute(&periodic_trajectory(profile, 4096).unwrap(), profile, p).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail = format!("{} [{:.2} s]", o.detail, took.as_secs_f64());
    if let Some(l) = limit {
        if took > l {
            o.passed = false;
            o.detail += &format!(" exceeds {:.0} s", l.as_secs_f64());
        }
    }
    o
}

fn criterion_1() -> Outcome {
    let (m, w, xi0, a0) = (0.7, 1.3, 0.9, 1.1);
    let p = PhysicalParams::new(m, w, [0.0, 0.0, 1.0]).unwrap();
    let mut worst: f64 = 0.0;
    for n in [2, 3, 4, 8, 16] {
        let prof = make_circular(&p, xi0, a0, n).unwrap();
        let ph = PhaseSet::compute(&solve_analytic(&prof, 4096).unwrap(), &prof, &p).unwrap();
        let nf = n as f64;
        let d = nf * nf - 1.0;
        let ad = -PI * m * xi0 * a0;
        let want = [
            nf * nf / d * ad,
            nf * nf * (nf * nf + 1.0) / (d * d) * ad,
            PI * m * (nf * (nf * nf + 1.0) * xi0 * xi0 * w + 2.0 * nf.powi(3) * a0 * a0 / w) / (d * d),
            ad,
        ];
        for (g, w) in [ph.phi_t, ph.phi_c, ph.phi_a, ph.phi_ad].iter().zip(want) {
            worst = worst.max(rel(*g, w));
        }
    }
    Outcome {
        passed: worst <= 1e-8,
        detail: format!("circular closed forms, worst relative error {worst:.2e} (<= 1e-8)"),
    }
}

fn criterion_2() -> Outcome {
    let p = PhysicalParams::new(1.4, 0.8, [0.0, 0.0, 1.0]).unwrap();
    let (xi0, a0) = (0.6, 1.7);
    let mut worst: f64 = 0.0;
    let mut periods = vec![];
    for ramp in [Ramp::Sinusoidal, Ramp::Instantaneous] {
        let prof = make_sequential_square(&p, xi0, a0, ramp).unwrap();
        periods.push(prof.period() * p.omega / PI);
        worst = worst.max((phases_of(&prof, &p).phi_t + p.m_star * xi0 * a0).abs());
    }
    let shapes_ok = (periods[0] - 12.0).abs() < 1e-12 && (periods[1] - 4.0).abs() < 1e-12;
    Outcome {
        passed: worst <= 1e-6 && shapes_ok,
        detail: format!(
            "square loop, |phi_T + m xi0 alpha0| = {worst:.2e} (<= 1e-6), T = {:.0} pi/omega and {:.0} pi/omega",
            periods[0], periods[1]
        ),
    }
}

fn builtin_scenarios(p: &PhysicalParams) -> Vec<DrivingProfile> {
    let t0 = p.t0();
    let mut v = vec![];
    for n in [2, 3, 4, 8, 16, 64] {
        v.push(make_circular(p, 1.0, 0.8, n).unwrap());
    }
    for ramp in [Ramp::Sinusoidal, Ramp::Instantaneous] {
        v.push(make_sequential_square(p, 1.0, 1.0, ramp).unwrap());
    }
    for k in [0.1, 0.25, 0.625, 1.0, 1.5, 1.9] {
        v.push(make_broken_ellipsoidal(p, 1.0, 1.0, k * t0).unwrap());
    }
    let xi = FourierSeries {
        constant: 0.1,
        cos: vec![0.5, 0.2],
        sin: vec![0.0, 0.1],
    };
    let al = FourierSeries {
        constant: 0.0,
        cos: vec![0.0, -0.3],
        sin: vec![0.7],
    };
    v.push(make_fourier(p, 2.5 * t0, xi, al).unwrap());
    v
}

fn criterion_3() -> Outcome {
    let p = PhysicalParams::scaled();
    let mut worst: f64 = 0.0;
    let (mut count, mut floored) = (0, 0);
    let mut profiles = builtin_scenarios(&p);
    for name in ["insb-square", "circular-n3"] {
        profiles.push(Scenario::preset(name).unwrap().profile);
    }
    for prof in &profiles {
        let traj = periodic_trajectory(prof, 4096).unwrap();
        let ph = PhaseSet::compute(&traj, prof, &p).unwrap();
        let gap = (phi_contour_c1(&traj, &p).unwrap() - phi_contour_c2(&traj, &p).unwrap()).abs();
        // φ_ad vanishes identically for the ellipse pair at ΔT = T0; fall
        // back to the loop's own phase scale there
        let (xs, als) = prof.amplitudes();
        let natural = p.m_star * xs * als;
        if ph.phi_ad.abs() < 1e-8 * natural {
            floored += 1;
        }
        worst = worst.max(gap / ph.phi_ad.abs().max(natural));
        count += 1;
    }
    Outcome {
        passed: worst <= 1e-8,
        detail: format!(
            "contour identity over {count} scenarios, worst |C1 - C2| / max(|phi_ad|, m xi0 alpha0) = {worst:.2e} (<= 1e-8; {floored} with phi_ad = 0)"
        ),
    }
}

fn criterion_4() -> Outcome {
    let base = PhysicalParams::scaled();
    let t0 = base.t0();
    let profiles = [
        make_circular(&base, 1.0, 1.0, 2).unwrap(),
        make_circular(&base, 1.0, 1.0, 8).unwrap(),
        make_broken_ellipsoidal(&base, 1.0, 1.0, t0 / 4.0).unwrap(),
        make_broken_ellipsoidal(&base, 1.0, 1.0, 5.0 * t0 / 8.0).unwrap(),
    ];
    let (mut matrix, mut scalar): (f64, f64) = (0.0, 0.0);
    for params in [base.clone(), base.clone().with_zeeman(0.3).with_level(1)] {
        for prof in &profiles {
            let ph = phases_of(prof, &params);
            let d = decompose(&ph, &params);
            matrix = matrix.max((d.dynamic + d.geometric - total_phase_generator(&ph, &params)).norm());
            scalar = scalar.max((-ph.energy_integral + ph.phi_a + ph.omega_m_t - ph.action_s).abs());
        }
    }
    Outcome {
        passed: matrix <= 1e-8 && scalar <= 1e-8,
        detail: format!("decomposition, matrix residual {matrix:.2e}, scalar identity residual {scalar:.2e} (<= 1e-8)"),
    }
}

fn criterion_5() -> Outcome {
    let p = PhysicalParams::scaled();
    let prof = make_circular(&p, 1.0, 1.0, 3).unwrap();
    let traj = solve_analytic(&prof, 4096).unwrap();
    let ph = PhaseSet::compute(&traj, &prof, &p).unwrap();
    let acc = PhaseAccumulators::new(&traj, &p);
    let grid = GridSpec::for_trajectory(&traj, &p, 1024).unwrap();
    let period = prof.period();
    let dt = period / 8192.0;
    let mut loss: f64 = 0.0;
    for spin in [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]] {
        let psi0 = eigenstate_initial(0, spin, &acc, &p, grid).unwrap();
        let evolved = evolve_split_step(&prof, &p, &psi0, dt, period).unwrap();
        let exact = exact_state(0, spin, period, &acc, &p, grid).unwrap();
        loss = loss.max(1.0 - fidelity(&exact, &evolved).unwrap().magnitude);
    }
    let measured = extract_spin_rotation(&traj, &prof, &p, grid, dt).unwrap();
    let d = (measured - 2.0 * ph.phi_t).rem_euclid(2.0 * PI);
    let angle_err = d.min(2.0 * PI - d);
    Outcome {
        passed: loss <= 1e-6 && angle_err <= 1e-3,
        detail: format!(
            "oracle n = 3, 1 - fidelity = {:.2e} (<= 1e-6), spin rotation error {angle_err:.2e} rad (<= 1e-3)",
            loss.max(0.0)
        ),
    }
}

fn criterion_6() -> Outcome {
    let p = PhysicalParams::scaled();
    let t0 = p.t0();
    let end = phases_of(&make_broken_ellipsoidal(&p, 1.0, 1.0, 2.0 * t0).unwrap(), &p);
    let s = Scenario::preset("ellipsoidal-delay-sweep").unwrap();
    let table = sweep(&s).unwrap();
    let in_range = |r: Option<f64>| r.is_some_and(|r| r > 0.0 && r < 2.0 * t0);
    let count = |q: Tracked| table.crossings_of(q).filter(|c| in_range(c.root)).count();
    let counts = Tracked::ALL.map(count);
    let roots = |q: Tracked| -> Vec<String> {
        table
            .crossings_of(q)
            .map(|c| format!("{:.4}", c.root.unwrap_or(f64::NAN) / t0))
            .collect()
    };
    let passed = end.phi_t.abs() <= 1e-8
        && table.rows.len() == 64
        && counts == [1, 1, 1, 2, 2]
        && table.crossings.len() == 7;
    Outcome {
        passed,
        detail: format!(
            "broken ellipsoid, |phi_T(2 T0)| = {:.1e}, sign changes [phi_T, phi_c, phi_ad, phi_T-phi_c, phi_T-2phi_c] = {counts:?} (want [1, 1, 1, 2, 2]); roots / T0: phi_T {:?}, phi_c {:?}, phi_ad {:?}, phi_T-phi_c {:?}, phi_T-2phi_c {:?}",
            end.phi_t.abs(),
            roots(Tracked::PhiT),
            roots(Tracked::PhiC),
            roots(Tracked::PhiAd),
            roots(Tracked::PhiTMinusPhiC),
            roots(Tracked::PhiTMinus2PhiC),
        ),
    }
}

fn criterion_7() -> Outcome {
    let p = PhysicalParams::scaled();
    let rows: Vec<[f64; 6]> = [8, 16, 32, 64]
        .iter()
        .map(|&n| {
            let ph = phases_of(&make_circular(&p, 1.0, 1.0, n).unwrap(), &p);
            let d = decompose(&ph, &p);
            [
                (ph.phi_t - ph.phi_ad).abs(),
                (ph.phi_c - ph.phi_ad).abs(),
                ph.phi_a.abs(),
                (anandan_berry(&ph, Spin::Up) + ph.phi_ad).abs(),
                (anandan_berry(&ph, Spin::Down) - ph.phi_ad).abs(),
                (d.geometric_spin + ph.phi_ad).abs(),
            ]
        })
        .collect();
    let monotone = rows.windows(2).all(|w| (0..6).all(|k| w[1][k] < w[0][k]));
    let last = rows[3];
    Outcome {
        passed: monotone,
        detail: format!(
            "adiabatic limit n = 8..64, all six distances decrease: {monotone}; at n = 64 |phi_T - phi_ad| = {:.1e}, |phi_a| = {:.3}, |geometric spin + phi_ad| = {:.1e}",
            last[0], last[2], last[5]
        ),
    }
}

fn criterion_8() -> Outcome {
    let s = Scenario::preset("insb-square").unwrap();
    let sim = simulate(&s).unwrap();
    let phi = sim.phases.phi_t.abs();
    Outcome {
        passed: (0.5..=2.0).contains(&phi),
        detail: format!("InSb square loop, |phi_T| = {phi:.4} (within a factor 2 of 1)"),
    }
}

fn main() {
    let criteria: [(u32, Option<u64>, fn() -> Outcome); 8] = [
        (1, Some(1), criterion_1),
        (2, Some(1), criterion_2),
        (3, None, criterion_3),
        (4, None, criterion_4),
        (5, Some(60), criterion_5),
        (6, Some(5), criterion_6),
        (7, None, criterion_7),
        (8, None, criterion_8),
    ];
    let mut failed = vec![];
    for (k, limit, f) in criteria {
        let o = timed(limit.map(Duration::from_secs), f);
        println!("{} criterion {k}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed.push(k);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
