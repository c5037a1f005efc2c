//! SI parameters and the dimensionless frame used by the integrators.

use thiserror::Error;

/// 2018 CODATA reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Coulomb constant 1/(4π ε₀), N m²/C².
pub const COULOMB_CONSTANT: f64 = 8.987_551_792_3e9;
/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS: f64 = 1.660_539_066_60e-27;

#[derive(Debug, Error, PartialEq)]
pub enum UnitsError {
    #[error("ion mass must be positive, got {0} kg")]
    NonPositiveMass(f64),
    #[error("reference frequency must be positive, got {0} rad/s")]
    NonPositiveFrequency(f64),
    #[error("hbar must be positive, got {0}")]
    NonPositiveHbar(f64),
    #[error("Coulomb constant must be non-negative, got {0}")]
    NegativeCoulomb(f64),
}

/// Trap and ion parameters in SI units.
///
/// `omega0` is the reference angular frequency of the well; detuning
/// schedules are expressed relative to it as ω(t) = (1 + γ(t)) ω₀.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Single-ion mass, kg.
    pub mass: f64,
    /// Ion charge, C.
    pub charge: f64,
    /// Reference angular frequency, rad/s.
    pub omega0: f64,
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// Coulomb constant 1/(4π ε₀), N m²/C².
    pub coulomb_constant: f64,
}

impl PhysicalParams {
    /// Parameters with the standard values of ħ and 1/(4π ε₀).
    pub fn new(mass: f64, charge: f64, omega0: f64) -> Result<Self, UnitsError> {
        Self::with_constants(mass, charge, omega0, HBAR, COULOMB_CONSTANT)
    }

    pub fn with_constants(
        mass: f64,
        charge: f64,
        omega0: f64,
        hbar: f64,
        coulomb_constant: f64,
    ) -> Result<Self, UnitsError> {
        if !(mass > 0.0) {
            return Err(UnitsError::NonPositiveMass(mass));
        }
        if !(omega0 > 0.0) {
            return Err(UnitsError::NonPositiveFrequency(omega0));
        }
        if !(hbar > 0.0) {
            return Err(UnitsError::NonPositiveHbar(hbar));
        }
        if !(coulomb_constant >= 0.0) {
            return Err(UnitsError::NegativeCoulomb(coulomb_constant));
        }
        Ok(Self { mass, charge, omega0, hbar, coulomb_constant })
    }

    /// ke² for this ion, J m.
    pub fn coulomb_coupling(&self) -> f64 {
        self.coulomb_constant * self.charge * self.charge
    }

    /// Ground-state length x₀ = √(ħ / 2 m ω₀) of a mass-m ion at ω₀, m.
    pub fn ground_state_length(&self) -> f64 {
        (self.hbar / (2.0 * self.mass * self.omega0)).sqrt()
    }

    /// Equilibrium half-separation of two ions sharing one ω₀ well, m.
    ///
    /// Balances m ω₀² d against ke²/(2d)², giving d = (ke²/4mω₀²)^{1/3}.
    pub fn two_ion_half_separation(&self) -> f64 {
        (self.coulomb_coupling() / (4.0 * self.mass * self.omega0 * self.omega0)).cbrt()
    }

    pub fn frame(&self) -> DimensionlessFrame {
        DimensionlessFrame::new(self)
    }
}

/// Conversion between SI and the internal dimensionless units
/// (ħ = m = 1, ω₀ = 1, lengths in units of x₀ = √(ħ/2mω₀)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionlessFrame {
    /// Time unit, s.
    pub time: f64,
    /// Length unit, m.
    pub length: f64,
    /// Velocity unit, m/s.
    pub velocity: f64,
    /// Energy unit, J.
    pub energy: f64,
}

impl DimensionlessFrame {
    pub fn new(params: &PhysicalParams) -> Self {
        let time = 1.0 / params.omega0;
        let length = params.ground_state_length();
        Self {
            time,
            length,
            velocity: length / time,
            energy: params.hbar * params.omega0,
        }
    }

    pub fn time_to_si(&self, t: f64) -> f64 {
        t * self.time
    }

    pub fn time_from_si(&self, t: f64) -> f64 {
        t / self.time
    }

    pub fn length_to_si(&self, x: f64) -> f64 {
        x * self.length
    }

    pub fn length_from_si(&self, x: f64) -> f64 {
        x / self.length
    }

    pub fn velocity_to_si(&self, v: f64) -> f64 {
        v * self.velocity
    }

    pub fn velocity_from_si(&self, v: f64) -> f64 {
        v / self.velocity
    }
}
