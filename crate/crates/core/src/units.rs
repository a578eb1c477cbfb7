//! Unit systems and field scales.
//!
//! All computations run in natural units ħ = m = c = 1: lengths in λ_c,
//! times in t_c and energies in mc². A [`UnitSystem`] carries the SI size of
//! those three scales, either for the physical electron or for a trapped-ion
//! simulation where c and mc² are replaced by laser/trap quantities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// CODATA 2018 values, SI.
pub mod consts {
    pub const HBAR: f64 = 1.054_571_817e-34;
    pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
    /// Atomic mass of ⁴⁰Ca, used for the ion.
    pub const CA40_ION_MASS_U: f64 = 39.962_590_863;
    pub const ANGSTROM: f64 = 1e-10;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitMode {
    PhysicalElectron,
    Simulated,
}

/// SI sizes of the natural scales mc², λ_c = ħ/mc and t_c = ħ/mc².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    /// mc² in joules.
    pub rest_energy: f64,
    /// λ_c in metres.
    pub compton_length: f64,
    /// t_c in seconds.
    pub compton_time: f64,
    pub mode: UnitMode,
}

impl UnitSystem {
    pub fn physical_electron() -> Self {
        use consts::*;
        let rest_energy = ELECTRON_MASS * SPEED_OF_LIGHT * SPEED_OF_LIGHT;
        Self {
            rest_energy,
            compton_length: HBAR / (ELECTRON_MASS * SPEED_OF_LIGHT),
            compton_time: HBAR / rest_energy,
            mode: UnitMode::PhysicalElectron,
        }
    }

    /// Simulated scales with effective light speed `c_eff` (m/s) and gap
    /// frequency `omega` (rad/s), so that mc² = ħΩ.
    pub fn simulated(c_eff: f64, omega: f64) -> Result<Self> {
        if !(c_eff > 0.0 && omega > 0.0 && c_eff.is_finite() && omega.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "simulated units need positive c and Omega, got c = {c_eff}, Omega = {omega}"
            )));
        }
        Ok(Self {
            rest_energy: consts::HBAR * omega,
            compton_length: c_eff / omega,
            compton_time: 1.0 / omega,
            mode: UnitMode::Simulated,
        })
    }

    /// Effective speed of light λ_c / t_c in m/s.
    pub fn speed(&self) -> f64 {
        self.compton_length / self.compton_time
    }

    /// mc²/ħ in rad/s.
    pub fn rest_frequency(&self) -> f64 {
        1.0 / self.compton_time
    }

    pub fn length_to_si(&self, natural: f64) -> f64 {
        natural * self.compton_length
    }

    pub fn length_from_si(&self, metres: f64) -> f64 {
        metres / self.compton_length
    }

    pub fn time_to_si(&self, natural: f64) -> f64 {
        natural * self.compton_time
    }

    pub fn time_from_si(&self, seconds: f64) -> f64 {
        seconds / self.compton_time
    }

    /// Converts a natural angular frequency (units of mc²/ħ) to rad/s.
    pub fn frequency_to_si(&self, natural: f64) -> f64 {
        natural / self.compton_time
    }

    pub fn wavenumber_from_si(&self, per_metre: f64) -> f64 {
        per_metre * self.compton_length
    }
}

/// Magnetic field expressed through its magnetic length L (in λ_c).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    /// L in units of λ_c.
    pub magnetic_length: f64,
    /// B in tesla when the field was specified physically.
    pub field_strength: Option<f64>,
}

impl FieldConfig {
    pub fn from_magnetic_length(l: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "magnetic length must be positive and finite, got {l}"
            )));
        }
        Ok(Self { magnetic_length: l, field_strength: None })
    }

    /// Field for a physical electron, B in tesla.
    pub fn from_tesla(b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidParameter(format!("field must be positive, got B = {b} T")));
        }
        let units = UnitSystem::physical_electron();
        let l_si = (consts::HBAR / (consts::ELEMENTARY_CHARGE * b)).sqrt();
        Ok(Self { magnetic_length: l_si / units.compton_length, field_strength: Some(b) })
    }

    /// Field with κ = ħω_c / 2mc² = 1/(2L²).
    pub fn from_kappa(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
        }
        Self::from_magnetic_length((0.5 / kappa).sqrt())
    }

    /// ω = √2 c / L in units of mc²/ħ.
    pub fn omega(&self) -> f64 {
        std::f64::consts::SQRT_2 / self.magnetic_length
    }

    /// ω_c = ħ / (m L²) in units of mc²/ħ.
    pub fn omega_cyclotron(&self) -> f64 {
        1.0 / (self.magnetic_length * self.magnetic_length)
    }

    /// κ = ħω_c / 2mc².
    pub fn kappa(&self) -> f64 {
        0.5 * self.omega_cyclotron()
    }

    pub fn magnetic_length_si(&self, units: &UnitSystem) -> f64 {
        units.length_to_si(self.magnetic_length)
    }
}

/// Field at which L = λ_c, in tesla.
pub fn critical_field() -> f64 {
    use consts::*;
    ELECTRON_MASS * ELECTRON_MASS * SPEED_OF_LIGHT * SPEED_OF_LIGHT / (ELEMENTARY_CHARGE * HBAR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn electron_scales() {
        let u = UnitSystem::physical_electron();
        assert_relative_eq!(u.compton_length, 3.86159267724e-13, max_relative = 1e-10);
        assert_relative_eq!(u.compton_time, 1.28808866741e-21, max_relative = 1e-10);
        assert_relative_eq!(u.rest_frequency(), 7.76344071105e20, max_relative = 1e-10);
        assert_relative_eq!(u.speed(), consts::SPEED_OF_LIGHT, max_relative = 1e-12);
    }

    #[test]
    fn field_scales() {
        let u = UnitSystem::physical_electron();
        let f20 = FieldConfig::from_tesla(20.0).unwrap();
        assert_relative_eq!(f20.magnetic_length_si(&u), 5.73677590876e-9, max_relative = 1e-10);
        let f40 = FieldConfig::from_tesla(40.0).unwrap();
        assert_relative_eq!(f40.magnetic_length_si(&u), 4.05651314723e-9, max_relative = 1e-10);
        assert!((f40.magnetic_length_si(&u) / consts::ANGSTROM - 40.6).abs() < 0.05);
        assert_relative_eq!(critical_field(), 4.41400522e9, max_relative = 1e-8);
        let fc = FieldConfig::from_tesla(critical_field()).unwrap();
        assert_relative_eq!(fc.magnetic_length, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn field_invariants() {
        for l in [0.3, 1.0, 14856.0] {
            let f = FieldConfig::from_magnetic_length(l).unwrap();
            assert_relative_eq!(f.omega() * l, 2f64.sqrt(), max_relative = 1e-12);
            assert_relative_eq!(f.omega_cyclotron(), 1.0 / (l * l), max_relative = 1e-12);
            let back = FieldConfig::from_kappa(f.kappa()).unwrap();
            assert_relative_eq!(back.magnetic_length, l, max_relative = 1e-12);
        }
        assert!(FieldConfig::from_magnetic_length(0.0).is_err());
        assert!(FieldConfig::from_tesla(-1.0).is_err());
    }

    #[test]
    fn simulated_speed() {
        let u = UnitSystem::simulated(12.3, 2.0 * std::f64::consts::PI * 1000.0).unwrap();
        assert_relative_eq!(u.speed(), 12.3, max_relative = 1e-12);
        assert!(UnitSystem::simulated(0.0, 1.0).is_err());
    }
}
