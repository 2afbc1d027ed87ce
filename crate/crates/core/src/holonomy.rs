//! The U(2) cycle operator U(T) = exp(iΦ_T) on a Kramers doublet.
//!
//! Convention: Φ_T = (S − ω_m T)·I − φ_T (**n**·σ), so the SU(2) part
//! cos φ_T·I − i sin φ_T (**n**·σ) rotates Bloch vectors by 2φ_T about **n**
//! in the right-handed sense (σ_k → U σ_k U†). A Zeeman term −Z(**n**·σ)
//! adds +ZT to the **n**·σ coefficient.

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::driving::PhysicalParams;
use crate::error::{Error, Result};
use crate::phases::PhaseSet;

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;

const I: C64 = C64::new(0.0, 1.0);

/// **n**·σ in the lab (σ_z) basis.
pub fn n_dot_sigma(n: [f64; 3]) -> Mat2 {
    Mat2::new(
        C64::from(n[2]),
        C64::new(n[0], -n[1]),
        C64::new(n[0], n[1]),
        C64::from(-n[2]),
    )
}

pub fn pauli(k: usize) -> Mat2 {
    let mut n = [0.0; 3];
    n[k] = 1.0;
    n_dot_sigma(n)
}

/// a·I + b·(**n**·σ).
fn combine(a: f64, b: f64, n: [f64; 3]) -> Mat2 {
    Mat2::identity() * C64::from(a) + n_dot_sigma(n) * C64::from(b)
}

/// exp(i[a·I + b·(**n**·σ)]) = e^{ia}(cos b·I + i sin b·(**n**·σ)).
fn exp_i(a: f64, b: f64, n: [f64; 3]) -> Mat2 {
    let (s, c) = b.sin_cos();
    (Mat2::identity() * C64::from(c) + n_dot_sigma(n) * (I * s)) * C64::from_polar(1.0, a)
}

/// Eigenbasis of **n**·σ: columns are |+⟩ and |−⟩ in the lab basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinFrame {
    basis: Mat2,
}

impl SpinFrame {
    pub fn new(n: [f64; 3]) -> Self {
        let theta = n[2].clamp(-1.0, 1.0).acos();
        let phi = n[1].atan2(n[0]);
        let (s, c) = (theta / 2.0).sin_cos();
        let basis = Mat2::new(
            C64::from(c),
            -C64::from_polar(s, -phi),
            C64::from_polar(s, phi),
            C64::from(c),
        );
        Self { basis }
    }

    /// Components (c₊, c₋) along the **n** eigenbasis to lab components.
    pub fn to_lab(&self, up_down: [C64; 2]) -> [C64; 2] {
        let v = self.basis * nalgebra::Vector2::new(up_down[0], up_down[1]);
        [v[0], v[1]]
    }

    pub fn from_lab(&self, lab: [C64; 2]) -> [C64; 2] {
        let v = self.basis.adjoint() * nalgebra::Vector2::new(lab[0], lab[1]);
        [v[0], v[1]]
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.basis
    }
}

/// U(T) together with its diagonal phase and spin rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct HolonomyU2 {
    pub matrix: Mat2,
    /// Coefficient of I in Φ_T, i.e. S − ω_m T.
    pub diagonal_phase: f64,
    /// φ such that the SU(2) part is cos φ·I − i sin φ (**n**·σ).
    pub spin_phase: f64,
    pub n_axis: [f64; 3],
}

impl HolonomyU2 {
    pub fn from_parts(diagonal_phase: f64, spin_phase: f64, n_axis: [f64; 3]) -> Self {
        Self {
            matrix: exp_i(diagonal_phase, -spin_phase, n_axis),
            diagonal_phase,
            spin_phase,
            n_axis,
        }
    }

    /// Rotation angle about `n_axis` (2φ).
    pub fn spin_angle(&self) -> f64 {
        2.0 * self.spin_phase
    }

    /// Recovers (diagonal phase, φ, **n**) from a unitary matrix. The axis is
    /// only defined up to the sign of φ; for a pure phase `fallback_axis` is
    /// kept.
    pub fn from_matrix(matrix: Mat2, fallback_axis: [f64; 3]) -> Self {
        let diagonal_phase = matrix.determinant().arg() / 2.0;
        let v = matrix * C64::from_polar(1.0, -diagonal_phase);
        // v = c·I − i s (m·σ)
        let c = 0.5 * (v[(0, 0)] + v[(1, 1)]).re;
        let sx = -0.5 * (v[(0, 1)] + v[(1, 0)]).im;
        let sy = -0.5 * (v[(0, 1)] - v[(1, 0)]).re;
        let sz = -0.5 * (v[(0, 0)] - v[(1, 1)]).im;
        let s = (sx * sx + sy * sy + sz * sz).sqrt();
        let (n_axis, spin_phase) = if s < 1e-14 {
            (fallback_axis, c.signum().min(0.0).abs() * std::f64::consts::PI)
        } else {
            ([sx / s, sy / s, sz / s], s.atan2(c))
        };
        Self {
            matrix,
            diagonal_phase,
            spin_phase,
            n_axis,
        }
    }

    pub fn unitarity_error(&self) -> f64 {
        (self.matrix.adjoint() * self.matrix - Mat2::identity()).norm()
    }

    /// |φ| folded into [0, π] from the trace of the SU(2) part.
    pub fn rotation_phase_from_trace(&self) -> f64 {
        let v = self.matrix * C64::from_polar(1.0, -self.diagonal_phase);
        (0.5 * v.trace().re).clamp(-1.0, 1.0).acos()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&HolonomyRecord::from(self)).expect("holonomy serialises")
    }

    /// Parses the JSON record and checks that the matrix is unitary and
    /// consistent with the stated phases.
    pub fn from_json(text: &str) -> Result<Self> {
        let rec: HolonomyRecord = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut m = Mat2::zeros();
        for r in 0..2 {
            for c in 0..2 {
                let [re, im] = rec.matrix[r][c];
                m[(r, c)] = C64::new(re, im);
            }
        }
        let finite = m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
            && rec.diagonal_phase.is_finite()
            && rec.spin_angle.is_finite()
            && rec.n_axis.iter().all(|c| c.is_finite());
        if !finite {
            return Err(Error::Parse("holonomy contains non-finite values".into()));
        }
        let norm = rec.n_axis.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Parse(format!("n_axis is not a unit vector (|n| = {norm})")));
        }
        let h = Self::from_parts(rec.diagonal_phase, rec.spin_angle / 2.0, rec.n_axis);
        if (h.matrix - m).norm() > 1e-9 {
            return Err(Error::Parse("matrix does not match diagonal_phase/spin_angle/n_axis".into()));
        }
        Ok(Self { matrix: m, ..h })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct HolonomyRecord {
    /// Row-major entries as [re, im].
    matrix: [[[f64; 2]; 2]; 2],
    diagonal_phase: f64,
    spin_angle: f64,
    n_axis: [f64; 3],
}

impl From<&HolonomyU2> for HolonomyRecord {
    fn from(h: &HolonomyU2) -> Self {
        let e = |r, c| {
            let z: C64 = h.matrix[(r, c)];
            [z.re, z.im]
        };
        Self {
            matrix: [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]],
            diagonal_phase: h.diagonal_phase,
            spin_angle: h.spin_angle(),
            n_axis: h.n_axis,
        }
    }
}

/// U(T) = exp(iΦ_T) built from a phase set.
pub fn total_phase_matrix(phases: &PhaseSet, params: &PhysicalParams) -> HolonomyU2 {
    let diagonal = phases.action_s - phases.omega_m_t;
    let spin = phases.phi_t - params.zeeman_energy() * phases.period_t;
    HolonomyU2::from_parts(diagonal, spin, params.n_axis)
}

/// Hermitian Φ_T itself (not exponentiated).
pub fn total_phase_generator(phases: &PhaseSet, params: &PhysicalParams) -> Mat2 {
    let zt = params.zeeman_energy() * phases.period_t;
    combine(phases.action_s - phases.omega_m_t, -phases.phi_t + zt, params.n_axis)
}

/// Dynamical/geometric split Φ_T = Φ_dyn + Φ_geom, each a·I + b·(**n**·σ).
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub dynamic: Mat2,
    pub geometric: Mat2,
    pub dynamic_identity: f64,
    pub dynamic_spin: f64,
    pub geometric_identity: f64,
    pub geometric_spin: f64,
}

/// Φ_dyn = −∫E dτ·I − 2(φ_T − φ_c)(**n**·σ) (+ ZT(**n**·σ) with a field),
/// Φ_geom = φ_a·I + (φ_T − 2φ_c)(**n**·σ).
pub fn decompose(phases: &PhaseSet, params: &PhysicalParams) -> Decomposition {
    let zt = params.zeeman_energy() * phases.period_t;
    let dynamic_identity = -phases.energy_integral;
    let dynamic_spin = -2.0 * (phases.phi_t - phases.phi_c) + zt;
    let geometric_identity = phases.phi_a;
    let geometric_spin = phases.phi_t - 2.0 * phases.phi_c;
    Decomposition {
        dynamic: combine(dynamic_identity, dynamic_spin, params.n_axis),
        geometric: combine(geometric_identity, geometric_spin, params.n_axis),
        dynamic_identity,
        dynamic_spin,
        geometric_identity,
        geometric_spin,
    }
}

/// Kramers partner s = ±1/2; `Up` is the +1 eigenstate of **n**·σ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn sign(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }
}

/// Aharonov–Anandan phase β_s = φ_a ± (φ_T − 2φ_c) of the Zeeman-split
/// state with the field along **n**; tends to ∓φ_ad adiabatically.
pub fn anandan_berry(phases: &PhaseSet, spin: Spin) -> f64 {
    phases.phi_a + spin.sign() * (phases.phi_t - 2.0 * phases.phi_c)
}

pub fn apply(h: &HolonomyU2, spinor: [C64; 2]) -> Result<[C64; 2]> {
    let norm = (spinor[0].norm_sqr() + spinor[1].norm_sqr()).sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NonUnitVector(norm));
    }
    let v = h.matrix * nalgebra::Vector2::new(spinor[0], spinor[1]);
    Ok([v[0], v[1]])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochVector {
    pub r: [f64; 3],
}

impl BlochVector {
    pub fn new(r: [f64; 3]) -> Result<Self> {
        let norm = r.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > 1.0 + 1e-12 {
            return Err(Error::NonUnitVector(norm));
        }
        Ok(Self { r })
    }

    pub fn norm(&self) -> f64 {
        self.r.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Rodrigues rotation by 2φ about `n_axis`.
pub fn rotate_bloch(h: &HolonomyU2, v: BlochVector) -> BlochVector {
    let n = h.n_axis;
    let r = v.r;
    let (s, c) = h.spin_angle().sin_cos();
    let dot = n[0] * r[0] + n[1] * r[1] + n[2] * r[2];
    let cross = [
        n[1] * r[2] - n[2] * r[1],
        n[2] * r[0] - n[0] * r[2],
        n[0] * r[1] - n[1] * r[0],
    ];
    BlochVector {
        r: std::array::from_fn(|k| r[k] * c + cross[k] * s + n[k] * dot * (1.0 - c)),
    }
}

/// Product of cycle operators in time order (the first element acts first).
pub fn compose(cycles: &[HolonomyU2]) -> Result<HolonomyU2> {
    let first = cycles
        .first()
        .ok_or_else(|| Error::InvalidParam("compose needs at least one holonomy".into()))?;
    let m = cycles.iter().fold(Mat2::identity(), |acc, h| h.matrix * acc);
    Ok(HolonomyU2::from_matrix(m, first.n_axis))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const Z: [f64; 3] = [0.0, 0.0, 1.0];
    const X: [f64; 3] = [1.0, 0.0, 0.0];

    /// Bloch vector of UρU† for ρ = (I + r·σ)/2, by direct matrix products.
    fn conjugate(u: &Mat2, r: [f64; 3]) -> [f64; 3] {
        let rho = (Mat2::identity() + n_dot_sigma(r)) * C64::from(0.5);
        let out = u * rho * u.adjoint();
        std::array::from_fn(|k| (out * pauli(k)).trace().re)
    }

    #[test]
    fn half_pi_about_z_is_minus_i_sigma_z() {
        let h = HolonomyU2::from_parts(0.0, PI / 2.0, Z);
        let expect = pauli(2) * C64::new(0.0, -1.0);
        assert!((h.matrix - expect).norm() < 1e-15);
        assert!(h.unitarity_error() < 1e-12);
    }

    #[test]
    fn zero_spin_phase_is_scalar() {
        let h = HolonomyU2::from_parts(0.3, 0.0, [0.6, 0.0, 0.8]);
        let expect = Mat2::identity() * C64::from_polar(1.0, 0.3);
        assert!((h.matrix - expect).norm() < 1e-15);
    }

    #[test]
    fn determinant_and_trace_structure() {
        let h = HolonomyU2::from_parts(0.7, -1.1, [0.0, 0.6, 0.8]);
        let det = h.matrix.determinant();
        assert!((det - C64::from_polar(1.0, 1.4)).norm() < 1e-12);
        assert_abs_diff_eq!(h.rotation_phase_from_trace(), 1.1, epsilon = 1e-12);
    }

    #[test]
    fn rotate_bloch_matches_conjugation() {
        let h = HolonomyU2::from_parts(0.0, PI / 2.0, Z);
        let r = rotate_bloch(&h, BlochVector::new(X).unwrap()).r;
        let brute = conjugate(&h.matrix, X);
        for k in 0..3 {
            assert_abs_diff_eq!(r[k], brute[k], epsilon = 1e-14);
        }
        assert_abs_diff_eq!(r[0], -1.0, epsilon = 1e-14);

        let q = HolonomyU2::from_parts(0.4, PI / 4.0, Z);
        let r = rotate_bloch(&q, BlochVector::new(X).unwrap()).r;
        assert_abs_diff_eq!(r[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn axis_is_a_fixed_point() {
        let n = [0.48, 0.6, 0.64];
        let h = HolonomyU2::from_parts(0.2, 0.9, n);
        let r = rotate_bloch(&h, BlochVector::new(n).unwrap()).r;
        for k in 0..3 {
            assert_abs_diff_eq!(r[k], n[k], epsilon = 1e-14);
        }
        let id = HolonomyU2::from_parts(0.2, 0.0, n);
        let v = [0.3, -0.2, 0.1];
        assert_eq!(rotate_bloch(&id, BlochVector::new(v).unwrap()).r, v);
    }

    #[test]
    fn composition() {
        let h = HolonomyU2::from_parts(0.5, 0.8, [0.0, 0.6, 0.8]);
        let inv = HolonomyU2::from_parts(-0.5, -0.8, [0.0, 0.6, 0.8]);
        let id = compose(&[h.clone(), inv]).unwrap();
        assert!((id.matrix - Mat2::identity()).norm() < 1e-12);

        let q = HolonomyU2::from_parts(0.0, PI / 4.0, Z);
        let both = compose(&[q.clone(), q]).unwrap();
        assert_abs_diff_eq!(both.spin_phase, PI / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(both.n_axis[2], 1.0, epsilon = 1e-12);

        let zq = HolonomyU2::from_parts(0.0, PI / 4.0, Z);
        let xq = HolonomyU2::from_parts(0.0, PI / 4.0, X);
        let c = compose(&[zq.clone(), xq.clone()]).unwrap();
        assert!((c.matrix - xq.matrix * zq.matrix).norm() < 1e-14);
        assert!(c.unitarity_error() < 1e-12);
        let rebuilt = HolonomyU2::from_parts(c.diagonal_phase, c.spin_phase, c.n_axis);
        assert!((rebuilt.matrix - c.matrix).norm() < 1e-12);

        assert!(compose(&[]).is_err());
    }

    #[test]
    fn apply_rejects_unnormalised() {
        let h = HolonomyU2::from_parts(0.0, 0.3, Z);
        assert!(matches!(apply(&h, [C64::from(1.0), C64::from(1.0)]), Err(Error::NonUnitVector(_))));
        let out = apply(&h, [C64::from(1.0), C64::from(0.0)]).unwrap();
        assert_abs_diff_eq!(out[0].norm(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn spin_frame_diagonalises_n_sigma() {
        let n = [0.36, -0.48, 0.8];
        let f = SpinFrame::new(n);
        let d = f.matrix().adjoint() * n_dot_sigma(n) * f.matrix();
        assert!((d - pauli(2)).norm() < 1e-14);
        let lab = f.to_lab([C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let back = f.from_lab(lab);
        assert!((back[0] - C64::new(0.6, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let h = HolonomyU2::from_parts(0.1, -1.0, [0.0, 0.6, 0.8]);
        let back = HolonomyU2::from_json(&h.to_json()).unwrap();
        assert!((back.matrix - h.matrix).norm() < 1e-15);
        let broken = h.to_json().replace("\"diagonal_phase\": 0.1", "\"diagonal_phase\": 0.2");
        assert!(HolonomyU2::from_json(&broken).is_err());
        assert!(HolonomyU2::from_json("[]").is_err());
    }
}
