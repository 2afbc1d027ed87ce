//! Exact cyclic evolution of a spin-orbit qubit in a harmonic quantum dot
//! whose centre ξ(t) and Rashba coupling α(t) are driven periodically.
//!
//! Units have ħ = 1. The Hamiltonian is
//!
//! ```text
//! H = p²/2m + mω²(x − ξ)²/2 + α p (n·σ)
//! ```
//!
//! and one driving cycle maps the Kramers doublet at level m onto itself by
//! a U(2) operator whose spin part is a rotation about **n**.
//!
//! * [`driving`]: driving families and physical parameters
//! * [`response`]: classical responses x_c, a_c
//! * [`phases`]: phase functionals of a cycle
//! * [`holonomy`]: the cycle operator and its decomposition
//! * [`oracle`]: grid integrator used to check the exact solution

pub mod driving;
pub mod error;
pub mod holonomy;
pub mod oracle;
pub mod phases;
pub mod quadrature;
pub mod response;

pub use driving::{DrivingKind, DrivingProfile, PhysicalParams, Ramp};
pub use error::{Error, Result};
pub use holonomy::{HolonomyU2, Spin};
pub use phases::PhaseSet;
pub use response::{InitialConditions, ResponseTrajectory};
