//! Conversion between laboratory units and the scaled units used internally
//! (ħ = 1, time unit 1/ω, length unit √(ħ/m*ω)).

use serde::{Deserialize, Serialize};

/// ħ in J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Electron mass in kg.
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
/// One meV in J.
pub const MEV: f64 = 1.602_176_634e-22;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitSystem {
    /// Effective mass in electron masses.
    pub m_star_me: f64,
    /// Confinement energy ħω in meV.
    #[serde(default = "default_hbar_omega")]
    pub hbar_omega_mev: f64,
}

fn default_hbar_omega() -> f64 {
    1.0
}

impl UnitSystem {
    pub fn new(m_star_me: f64, hbar_omega_mev: f64) -> Result<Self, String> {
        let u = Self {
            m_star_me,
            hbar_omega_mev,
        };
        u.validate()?;
        Ok(u)
    }

    /// m* = 0.015 mₑ with ħω = 1 meV.
    pub fn insb() -> Self {
        Self {
            m_star_me: 0.015,
            hbar_omega_mev: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (k, v) in [("m_star_me", self.m_star_me), ("hbar_omega_mev", self.hbar_omega_mev)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("units.{k} must be a positive number, got {v}"));
            }
        }
        Ok(())
    }

    /// ω in rad/ps.
    pub fn omega_per_ps(&self) -> f64 {
        self.hbar_omega_mev * MEV / HBAR * 1e-12
    }

    pub fn time_ps(&self) -> f64 {
        1.0 / self.omega_per_ps()
    }

    pub fn length_nm(&self) -> f64 {
        let omega = self.hbar_omega_mev * MEV / HBAR;
        (HBAR / (self.m_star_me * ELECTRON_MASS * omega)).sqrt() * 1e9
    }

    pub fn velocity_nm_per_ps(&self) -> f64 {
        self.length_nm() * self.omega_per_ps()
    }

    pub fn length_to_scaled(&self, nm: f64) -> f64 {
        nm / self.length_nm()
    }

    pub fn length_from_scaled(&self, x: f64) -> f64 {
        x * self.length_nm()
    }

    pub fn velocity_to_scaled(&self, nm_per_ps: f64) -> f64 {
        nm_per_ps / self.velocity_nm_per_ps()
    }

    pub fn velocity_from_scaled(&self, v: f64) -> f64 {
        v * self.velocity_nm_per_ps()
    }

    pub fn time_to_scaled(&self, ps: f64) -> f64 {
        ps / self.time_ps()
    }

    pub fn time_from_scaled(&self, t: f64) -> f64 {
        t * self.time_ps()
    }

    pub fn energy_to_scaled(&self, mev: f64) -> f64 {
        mev / self.hbar_omega_mev
    }

    pub fn energy_from_scaled(&self, e: f64) -> f64 {
        e * self.hbar_omega_mev
    }

    /// One-line summary of the conversion factors.
    pub fn header(&self) -> String {
        format!(
            "# units: m* = {} m_e, hbar*omega = {} meV; length unit {:.6} nm, time unit {:.6} ps, velocity unit {:.6} nm/ps",
            self.m_star_me,
            self.hbar_omega_mev,
            self.length_nm(),
            self.time_ps(),
            self.velocity_nm_per_ps()
        )
    }
}
