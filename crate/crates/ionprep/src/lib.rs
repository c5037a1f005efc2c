//! Motional dynamics of trapped ions in harmonic wells with time-varying
//! curvature.
//!
//! The well curvature is parameterized by a dimensionless detuning γ(t), with
//! instantaneous frequency ω(t) = (1 + γ(t)) ω₀ relative to a fixed reference
//! ω₀. In the frame co-moving with the classical trajectory the motional state
//! evolves under a purely quadratic Hamiltonian, so the quantum part of the
//! dynamics is a Bogoliubov transformation of the reference-mode ladder
//! operators. This crate provides:
//!
//! - [`schedule`]: piecewise-analytic detuning schedules γ(t);
//! - [`classical`]: classical trajectories of one or two ions, including the
//!   moving-well catch law used to bring ions to rest after a separation;
//! - [`su11`]: the Bogoliubov pair (μ, ν), its evolution under a schedule, the
//!   Euler-angle (rotation–squeeze–rotation) decomposition, and the solver for
//!   the preparation squeeze that maps the initial ground state onto the final
//!   well's ground state;
//! - [`fock`]: an independent truncated number-basis integrator used to
//!   cross-check the Bogoliubov engine, including the exact (non-RWA)
//!   parametric modulation of the well;
//! - [`protocols`]: assembled frequency-change and two-ion separation runs;
//! - [`ode`]: the embedded Runge–Kutta integrator shared by all of the above.
//!
//! Internally everything is integrated in dimensionless units (ħ = m = 1,
//! ω₀ = 1); SI quantities appear only at the API boundary via
//! [`units::PhysicalParams`] and [`units::DimensionlessFrame`].

pub mod classical;
pub mod fock;
pub mod ode;
pub mod protocols;
pub mod schedule;
pub mod su11;
pub mod units;

pub use schedule::{GammaSchedule, GammaSource};
pub use su11::{Bogoliubov, EulerAngles, ParametricDrive, PreparationOrder};
pub use units::{DimensionlessFrame, PhysicalParams};
