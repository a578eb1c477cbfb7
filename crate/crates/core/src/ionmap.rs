//! Trapped-ion realization: trap and laser settings mapped onto the
//! simulated Dirac parameters, and the laser excitation schedule.
//!
//! c ⇔ 2ηΔΩ̃, mc² ⇔ ħΩ, L/√2 ⇔ Δ, hence κ ⇔ (ηΩ̃/Ω)².

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::packet::Dimensionality;
use crate::units::{consts, FieldConfig, UnitSystem};

/// Relative mismatch above which an explicit Δ and the one implied by (M, ν) disagree.
pub const DELTA_CONSISTENCY: f64 = 1e-6;

/// Trap and drive settings. Angular frequencies in rad/s, lengths in metres, mass in kg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapParams {
    pub eta: f64,
    pub omega_tilde: f64,
    pub omega_carrier: f64,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub ion_mass: Option<f64>,
    /// ν_x, ν_y, ν_z.
    #[serde(default)]
    pub trap_freqs: Option<[f64; 3]>,
}

impl TrapParams {
    /// η = 0.06, Ω̃ = 2π × 68 kHz, Δ = 96 Å with the given gap frequency Ω.
    pub fn reference(omega_carrier: f64) -> Self {
        Self {
            eta: 0.06,
            omega_tilde: 2.0 * PI * 68e3,
            omega_carrier,
            delta: Some(96.0 * consts::ANGSTROM),
            ion_mass: None,
            trap_freqs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("trap parameter {name} must be positive, got {v}")))
            }
        };
        positive("eta", self.eta)?;
        positive("omega_tilde", self.omega_tilde)?;
        positive("omega_carrier", self.omega_carrier)?;
        if let Some(d) = self.delta {
            positive("delta", d)?;
        }
        if let Some(m) = self.ion_mass {
            positive("ion_mass", m)?;
        }
        if let Some(f) = self.trap_freqs {
            for (name, v) in ["nu_x", "nu_y", "nu_z"].iter().zip(f) {
                positive(name, v)?;
            }
        }
        if self.delta.is_none() && (self.ion_mass.is_none() || self.trap_freqs.is_none()) {
            return Err(Error::InvalidParameter(
                "trap needs either delta or both ion_mass and trap_freqs".into(),
            ));
        }
        Ok(())
    }

    /// Δ_q = √(ħ / 2Mν_q) per axis, when mass and trap frequencies are given.
    pub fn derived_deltas(&self) -> Option<[f64; 3]> {
        let m = self.ion_mass?;
        let nu = self.trap_freqs?;
        Some(nu.map(|v| ground_state_spread(m, v)))
    }
}

/// Ground-state spread √(ħ / 2Mν).
pub fn ground_state_spread(mass: f64, nu: f64) -> f64 {
    (consts::HBAR / (2.0 * mass * nu)).sqrt()
}

/// ⁴⁰Ca mass in kg.
pub fn calcium_40_mass() -> f64 {
    consts::CA40_ION_MASS_U * consts::ATOMIC_MASS_UNIT
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "kebab-case")]
pub enum TrapWarning {
    /// Explicit Δ and √(ħ/2Mν) disagree; the explicit value is used.
    DeltaMismatch { explicit: f64, derived: f64, relative: f64 },
    /// Δ_x = Δ_y = Δ_z does not hold.
    Anisotropic { deltas: [f64; 3] },
}

impl std::fmt::Display for TrapWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::DeltaMismatch { explicit, derived, relative } => write!(
                f,
                "explicit delta {explicit:.6e} m differs from sqrt(hbar/2M nu) = {derived:.6e} m (relative {relative:.2e}); using the explicit value"
            ),
            Self::Anisotropic { deltas } => write!(
                f,
                "trap is anisotropic: delta = ({:.6e}, {:.6e}, {:.6e}) m; the mapping assumes equal spreads",
                deltas[0], deltas[1], deltas[2]
            ),
        }
    }
}

/// Simulated scales of a trap configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedSystem {
    pub units: UnitSystem,
    pub field: FieldConfig,
    /// Δ actually used, metres.
    pub delta: f64,
    /// Effective light speed 2ηΔΩ̃ in m/s.
    pub c_eff: f64,
    pub kappa: f64,
    pub warnings: Vec<TrapWarning>,
}

impl SimulatedSystem {
    /// L in metres.
    pub fn magnetic_length_si(&self) -> f64 {
        self.field.magnetic_length_si(&self.units)
    }

    /// ω_c in rad/s.
    pub fn omega_cyclotron_si(&self) -> f64 {
        self.units.frequency_to_si(self.field.omega_cyclotron())
    }
}

fn resolve_delta(trap: &TrapParams) -> (f64, Vec<TrapWarning>) {
    let mut warnings = Vec::new();
    let derived = trap.derived_deltas();
    if let Some(d) = derived {
        let spread = d.iter().fold(0.0_f64, |m, v| m.max((v / d[0] - 1.0).abs()));
        if spread > DELTA_CONSISTENCY {
            warnings.push(TrapWarning::Anisotropic { deltas: d });
        }
    }
    let delta = match (trap.delta, derived) {
        (Some(e), Some(d)) => {
            let mean = (d[0] + d[1] + d[2]) / 3.0;
            let relative = (e / mean - 1.0).abs();
            if relative > DELTA_CONSISTENCY {
                warnings.push(TrapWarning::DeltaMismatch { explicit: e, derived: mean, relative });
            }
            e
        }
        (Some(e), None) => e,
        (None, Some(d)) => (d[0] + d[1] + d[2]) / 3.0,
        (None, None) => unreachable!("validated"),
    };
    (delta, warnings)
}

pub fn simulated_units(trap: &TrapParams) -> Result<SimulatedSystem> {
    trap.validate()?;
    let (delta, warnings) = resolve_delta(trap);
    let c_eff = 2.0 * trap.eta * delta * trap.omega_tilde;
    let units = UnitSystem::simulated(c_eff, trap.omega_carrier)?;
    let field = FieldConfig::from_magnetic_length(units.length_from_si(SQRT_2 * delta))?;
    Ok(SimulatedSystem { units, field, delta, c_eff, kappa: field.kappa(), warnings })
}

/// κ = (ηΩ̃/Ω)².
pub fn kappa(trap: &TrapParams) -> f64 {
    (trap.eta * trap.omega_tilde / trap.omega_carrier).powi(2)
}

/// Ω = ηΩ̃/√κ.
pub fn invert_kappa(target_kappa: f64, eta: f64, omega_tilde: f64) -> Result<f64> {
    if !(target_kappa > 0.0 && target_kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("target kappa must be positive, got {target_kappa}")));
    }
    Ok(eta * omega_tilde / target_kappa.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InteractionKind {
    #[serde(rename = "JC")]
    Jc,
    #[serde(rename = "AJC")]
    Ajc,
    #[serde(rename = "carrier")]
    Carrier,
    /// σ_j p_q built from a JC and an AJC drive on the same axis.
    #[serde(rename = "sigma-p")]
    SigmaP,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Laser phases of one interaction (None when the drive is absent).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Phases {
    pub red: Option<f64>,
    pub blue: Option<f64>,
    pub carrier: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub kind: InteractionKind,
    pub axis: Option<Axis>,
    /// Internal ion levels coupled, from {a, b, c, d}.
    pub levels: (char, char),
    pub pauli: &'static str,
    pub sign: i8,
    pub phases: Phases,
    pub laser_pairs: u32,
    pub simulates: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSchedule {
    pub model: Dimensionality,
    /// The Hamiltonian is driven in the off-diagonal representation reached by P = δ(δ+β)/√2, δ = α_x α_y α_z β.
    pub representation: &'static str,
    pub interactions: Vec<Interaction>,
}

impl ExcitationSchedule {
    pub fn laser_pairs(&self) -> u32 {
        self.interactions.iter().map(|i| i.laser_pairs).sum()
    }

    pub fn count(&self, kind: InteractionKind) -> usize {
        self.interactions.iter().filter(|i| i.kind == kind).count()
    }
}

pub fn excitation_schedule(model: Dimensionality) -> ExcitationSchedule {
    let sigma_p = |axis, levels, sign, simulates| Interaction {
        kind: InteractionKind::SigmaP,
        axis: Some(axis),
        levels,
        pauli: "sigma_x",
        sign,
        phases: Phases { red: Some(-FRAC_PI_2), blue: Some(FRAC_PI_2), carrier: None },
        laser_pairs: 2,
        simulates,
    };
    let mut list = vec![
        sigma_p(Axis::X, ('a', 'd'), 1, "c p_x"),
        sigma_p(Axis::X, ('b', 'c'), 1, "c p_x"),
        Interaction {
            kind: InteractionKind::Jc,
            axis: Some(Axis::Y),
            levels: ('a', 'd'),
            pauli: "sigma_+ a_y + h.c.",
            sign: 1,
            phases: Phases { red: Some(PI), ..Default::default() },
            laser_pairs: 1,
            simulates: "-hbar omega a_y (upper off-diagonal)",
        },
        Interaction {
            kind: InteractionKind::Ajc,
            axis: Some(Axis::Y),
            levels: ('b', 'c'),
            pauli: "sigma_+ a_y^dagger + h.c.",
            sign: 1,
            phases: Phases { blue: Some(PI), ..Default::default() },
            laser_pairs: 1,
            simulates: "-hbar omega a_y^dagger (lower off-diagonal)",
        },
    ];
    if model == Dimensionality::ThreePlusOne {
        list.push(sigma_p(Axis::Z, ('a', 'c'), 1, "c p_z"));
        list.push(sigma_p(Axis::Z, ('b', 'd'), -1, "-c p_z"));
    }
    for levels in [('a', 'c'), ('b', 'd')] {
        list.push(Interaction {
            kind: InteractionKind::Carrier,
            axis: None,
            levels,
            pauli: "sigma_y",
            sign: 1,
            phases: Phases { carrier: Some(-FRAC_PI_2), ..Default::default() },
            laser_pairs: 1,
            simulates: "mc^2",
        });
    }
    ExcitationSchedule { model, representation: "off-diagonal, P = delta (delta + beta) / sqrt(2)", interactions: list }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_kappas() {
        let k = |hz: f64| kappa(&TrapParams::reference(2.0 * PI * hz));
        assert!((k(1000.0) - 16.65).abs() < 0.01);
        assert_relative_eq!(k(12000.0), 0.116, max_relative = 5e-3);
        assert_relative_eq!(k(4000.0), 1.0404, max_relative = 1e-12);
    }

    #[test]
    fn kappa_agrees_with_field_config() {
        for hz in [1000.0, 4000.0, 12000.0, 8000.0] {
            let trap = TrapParams::reference(2.0 * PI * hz);
            let sys = simulated_units(&trap).unwrap();
            assert_relative_eq!(sys.kappa, kappa(&trap), max_relative = 1e-12);
        }
    }

    #[test]
    fn magnetic_length_from_delta() {
        let sys = simulated_units(&TrapParams::reference(2.0 * PI * 1000.0)).unwrap();
        assert_relative_eq!(sys.magnetic_length_si() / consts::ANGSTROM, 135.76450198781711, max_relative = 1e-12);
        let doubled = simulated_units(&TrapParams::reference(2.0 * PI * 2000.0)).unwrap();
        assert_relative_eq!(doubled.units.compton_length, 0.5 * sys.units.compton_length, max_relative = 1e-14);
        assert_relative_eq!(doubled.c_eff, sys.c_eff, max_relative = 1e-15);
    }

    #[test]
    fn dimensional_consistency() {
        let sys = simulated_units(&TrapParams::reference(2.0 * PI * 4000.0)).unwrap();
        // ħω = √2 ħ c / L in SI.
        let lhs = sys.units.frequency_to_si(sys.field.omega());
        let rhs = SQRT_2 * sys.c_eff / sys.magnetic_length_si();
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
    }

    #[test]
    fn calcium_spread() {
        let d = ground_state_spread(calcium_40_mass(), 2.0 * PI * 1.36e6);
        assert_relative_eq!(d, 9.643_003_560_290_055_3e-9, max_relative = 1e-9);
    }

    #[test]
    fn delta_warnings() {
        let nu = 2.0 * PI * 1.36e6;
        let mut trap = TrapParams::reference(2.0 * PI * 1000.0);
        trap.ion_mass = Some(calcium_40_mass());
        trap.trap_freqs = Some([nu, nu, nu]);
        let sys = simulated_units(&trap).unwrap();
        assert!(matches!(sys.warnings.as_slice(), [TrapWarning::DeltaMismatch { .. }]));
        assert_eq!(sys.delta, 96e-10);
        trap.delta = None;
        trap.trap_freqs = Some([nu, nu, 0.5 * nu]);
        let sys = simulated_units(&trap).unwrap();
        assert!(matches!(sys.warnings.as_slice(), [TrapWarning::Anisotropic { .. }]));
        trap.trap_freqs = Some([nu, nu, nu]);
        assert!(simulated_units(&trap).unwrap().warnings.is_empty());
    }

    #[test]
    fn invalid_trap() {
        let mut trap = TrapParams::reference(2.0 * PI * 1000.0);
        trap.eta = -0.1;
        assert!(simulated_units(&trap).is_err());
        let mut trap = TrapParams::reference(2.0 * PI * 1000.0);
        trap.delta = None;
        assert!(trap.validate().is_err());
    }

    #[test]
    fn inversion() {
        let (eta, wt) = (0.06, 2.0 * PI * 68e3);
        assert_eq!(invert_kappa(1.0, eta, wt).unwrap(), eta * wt);
        let w = invert_kappa(16.65, eta, wt).unwrap();
        assert_relative_eq!(w / (2.0 * PI), 1000.0, max_relative = 1e-3);
        assert!(invert_kappa(0.0, eta, wt).is_err());
    }

    #[test]
    fn schedules() {
        let s3 = excitation_schedule(Dimensionality::ThreePlusOne);
        let s2 = excitation_schedule(Dimensionality::TwoPlusOne);
        assert_eq!((s3.laser_pairs(), s2.laser_pairs()), (12, 8));
        assert_eq!(s3.interactions.len(), 8);
        for s in [&s3, &s2] {
            let jc: Vec<_> = s.interactions.iter().filter(|i| i.kind == InteractionKind::Jc).collect();
            let ajc: Vec<_> = s.interactions.iter().filter(|i| i.kind == InteractionKind::Ajc).collect();
            assert_eq!((jc.len(), ajc.len()), (1, 1));
            assert_eq!((jc[0].levels, ajc[0].levels), (('a', 'd'), ('b', 'c')));
            assert_eq!((jc[0].phases.red, ajc[0].phases.blue), (Some(PI), Some(PI)));
        }
        assert!(s2.interactions.iter().all(|i| i.axis != Some(Axis::Z)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn kappa_round_trip(k in 1e-4f64..1e3, eta in 0.01f64..0.2, wt in 1e3f64..1e6) {
                let omega = invert_kappa(k, eta, wt).unwrap();
                let trap = TrapParams { eta, omega_tilde: wt, omega_carrier: omega, delta: Some(1e-8), ion_mass: None, trap_freqs: None };
                prop_assert!((kappa(&trap) / k - 1.0).abs() < 1e-12);
            }
        }
    }
}
