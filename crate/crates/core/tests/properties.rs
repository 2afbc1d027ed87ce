use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use spinloop_core::driving::{make_broken_ellipsoidal, make_circular, make_sequential_square, PhysicalParams, Ramp};
use spinloop_core::holonomy::{compose, n_dot_sigma, pauli, rotate_bloch, BlochVector, HolonomyU2, Mat2};
use spinloop_core::phases::{phi_contour_c1, phi_contour_c2, PhaseSet};
use spinloop_core::response::{ode_residual, solve_analytic};

fn unit(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

fn conjugate(u: &Mat2, r: [f64; 3]) -> [f64; 3] {
    let rho = (Mat2::identity() + n_dot_sigma(r)) * C64::from(0.5);
    let out = u * rho * u.adjoint();
    std::array::from_fn(|k| (out * pauli(k)).trace().re)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn drivings_are_periodic(n in 2i64..9, xi0 in -2.0..2.0f64, a0 in -2.0..2.0f64, t in 0.0..200.0f64, k in 0.0..2.0f64) {
        let p = PhysicalParams::scaled();
        let profiles = [
            make_circular(&p, xi0, a0, n).unwrap(),
            make_sequential_square(&p, xi0, a0, Ramp::Sinusoidal).unwrap(),
            make_broken_ellipsoidal(&p, xi0, a0, k * p.t0()).unwrap(),
        ];
        for prof in &profiles {
            let (a, b) = (prof.eval(t), prof.eval(t + prof.period()));
            prop_assert!((a.xi - b.xi).abs() < 1e-12 * (1.0 + t));
            prop_assert!((a.alpha - b.alpha).abs() < 1e-12 * (1.0 + t));
        }
    }

    #[test]
    fn derivatives_match_finite_differences(n in 2i64..9, frac in 0.01..0.99f64, k in 0.0..2.0f64) {
        let p = PhysicalParams::scaled();
        let profiles = [
            make_circular(&p, 1.3, 0.7, n).unwrap(),
            make_sequential_square(&p, 1.3, 0.7, Ramp::Sinusoidal).unwrap(),
            make_broken_ellipsoidal(&p, 1.3, 0.7, k * p.t0()).unwrap(),
        ];
        for prof in &profiles {
            let t = frac * prof.period();
            let bp = prof.breakpoints();
            if bp.iter().any(|b| (b - t).abs() < 1e-3) {
                continue;
            }
            let h = 1e-5;
            let (l, c, r) = (prof.eval(t - h), prof.eval(t), prof.eval(t + h));
            let fx = (r.xi - l.xi) / (2.0 * h);
            let fa = (r.alpha - l.alpha) / (2.0 * h);
            prop_assert!((fx - c.dxi_dt).abs() <= 1e-6 * c.dxi_dt.abs().max(1.0));
            prop_assert!((fa - c.dalpha_dt).abs() <= 1e-6 * c.dalpha_dt.abs().max(1.0));
        }
    }

    #[test]
    fn circular_stays_on_the_ellipse(n in 2i64..40, xi0 in 0.1..3.0f64, a0 in 0.1..3.0f64, t in -50.0..50.0f64) {
        let p = PhysicalParams::scaled();
        let d = make_circular(&p, xi0, a0, n).unwrap().eval(t);
        prop_assert!(((d.xi / xi0).powi(2) + (d.alpha / a0).powi(2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_responses_solve_the_oscillator(n in 2i64..6, w in 0.5..2.0f64, k in 0.05..1.95f64) {
        let p = PhysicalParams::new(1.0, w, [0.0, 0.0, 1.0]).unwrap();
        for prof in [make_circular(&p, 1.0, 1.0, n).unwrap(), make_broken_ellipsoidal(&p, 1.0, 1.0, k * p.t0()).unwrap()] {
            let traj = solve_analytic(&prof, 4096).unwrap();
            let (rx, ra) = ode_residual(&traj);
            prop_assert!(rx < 1e-6 && ra < 1e-6, "{rx} {ra}");
        }
    }

    #[test]
    fn contour_forms_agree(n in 2i64..12, xi0 in -2.0..2.0f64, a0 in -2.0..2.0f64, m in 0.2..3.0f64) {
        let p = PhysicalParams::new(m, 1.0, [0.0, 0.0, 1.0]).unwrap();
        let prof = make_circular(&p, xi0, a0, n).unwrap();
        let traj = solve_analytic(&prof, 4096).unwrap();
        let (c1, c2) = (phi_contour_c1(&traj, &p).unwrap(), phi_contour_c2(&traj, &p).unwrap());
        let scale = (PI * m * xi0 * a0).abs().max(1e-6);
        prop_assert!((c1 - c2).abs() <= 1e-8 * scale);
    }

    #[test]
    fn spin_phase_is_bilinear(xi0 in -2.0..2.0f64, a0 in -2.0..2.0f64, s in -3.0..3.0f64) {
        let p = PhysicalParams::scaled();
        let phase = |x: f64, a: f64| {
            let prof = make_circular(&p, x, a, 3).unwrap();
            PhaseSet::compute(&solve_analytic(&prof, 2048).unwrap(), &prof, &p).unwrap().phi_t
        };
        let base = phase(xi0, a0);
        prop_assert!((phase(s * xi0, a0) - s * base).abs() < 1e-10);
        prop_assert!((phase(xi0, s * a0) - s * base).abs() < 1e-10);
    }

    #[test]
    fn holonomy_is_unitary_and_rotates_like_conjugation(
        d in -10.0..10.0f64, phi in -10.0..10.0f64,
        th in 0.0..PI, ph in 0.0..(2.0 * PI),
        rt in 0.0..PI, rp in 0.0..(2.0 * PI), len in 0.0..1.0f64,
    ) {
        let n = unit(th, ph);
        let h = HolonomyU2::from_parts(d, phi, n);
        prop_assert!(h.unitarity_error() < 1e-12);
        prop_assert!((h.matrix.determinant() - C64::from_polar(1.0, 2.0 * d)).norm() < 1e-12);
        let r = unit(rt, rp).map(|c| c * len);
        let got = rotate_bloch(&h, BlochVector::new(r).unwrap());
        let want = conjugate(&h.matrix, r);
        for k in 0..3 {
            prop_assert!((got.r[k] - want[k]).abs() < 1e-12);
        }
        prop_assert!((got.norm() - len).abs() < 1e-12);
    }

    #[test]
    fn composition_is_associative(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64, th in 0.0..PI) {
        let hs = [
            HolonomyU2::from_parts(0.1, a, [0.0, 0.0, 1.0]),
            HolonomyU2::from_parts(-0.4, b, unit(th, 0.3)),
            HolonomyU2::from_parts(0.7, c, [1.0, 0.0, 0.0]),
        ];
        let left = compose(&[compose(&hs[..2]).unwrap(), hs[2].clone()]).unwrap();
        let right = compose(&[hs[0].clone(), compose(&hs[1..]).unwrap()]).unwrap();
        prop_assert!((left.matrix - right.matrix).norm() < 1e-12);
        let rebuilt = HolonomyU2::from_parts(left.diagonal_phase, left.spin_phase, left.n_axis);
        prop_assert!((rebuilt.matrix - left.matrix).norm() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kinetic_phase_is_positive_when_driven(n in 2i64..10, xi0 in 0.05..2.0f64, a0 in -2.0..2.0f64, k in 0.05..1.95f64) {
        let p = PhysicalParams::scaled();
        for prof in [make_circular(&p, xi0, a0, n).unwrap(), make_broken_ellipsoidal(&p, xi0, a0, k * p.t0()).unwrap()] {
            let ph = PhaseSet::compute(&solve_analytic(&prof, 1024).unwrap(), &prof, &p).unwrap();
            prop_assert!(ph.phi_a > 0.0);
        }
    }
}
