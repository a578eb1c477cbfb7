//! Run configuration files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use zitter::dynamics::{DynamicsOptions, KzRule};
use zitter::ionmap::{simulated_units, SimulatedSystem, TrapParams};
use zitter::num_complex::Complex64;
use zitter::oracle::OracleOptions;
use zitter::packet::{CoefficientOptions, Dimensionality, GaussianPacket};
use zitter::units::{FieldConfig, UnitSystem};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Figure this configuration reproduces.
    #[serde(default)]
    pub figure: Option<String>,
    /// Acceptance tolerance the run is expected to meet.
    #[serde(default)]
    pub acceptance: Option<String>,
    #[serde(default = "default_model")]
    pub model: Dimensionality,
    #[serde(default)]
    pub units: UnitChoice,
    #[serde(default)]
    pub field: Option<FieldSpec>,
    #[serde(default)]
    pub trap: Option<TrapParams>,
    pub packet: PacketSpec,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub time: TimeSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_model() -> Dimensionality {
    Dimensionality::TwoPlusOne
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitChoice {
    /// λ_c, t_c and c with no SI scale attached.
    #[default]
    Natural,
    /// Free electron.
    Physical,
    /// Scales simulated by a trapped ion.
    Trap,
}

/// Exactly one of the three keys.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    /// L in λ_c.
    pub magnetic_length: Option<f64>,
    pub tesla: Option<f64>,
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PacketScale {
    /// Widths in λ_c, momenta in 1/λ_c.
    #[default]
    Compton,
    /// Widths in L, momenta in 1/L.
    Magnetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    pub d_x: f64,
    pub d_y: f64,
    #[serde(default)]
    pub d_z: Option<f64>,
    pub k0x: f64,
    #[serde(default)]
    pub k0z: f64,
    /// [re, im]
    #[serde(default)]
    pub a1: [f64; 2],
    #[serde(default = "second_component")]
    pub a2: [f64; 2],
    #[serde(default)]
    pub scale: PacketScale,
    /// Clamp |k0| just below 1 when the scaled momentum reaches the light cone.
    #[serde(default)]
    pub clamp_k0: Option<f64>,
}

fn second_component() -> [f64; 2] {
    [1.0, 0.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub n_max: usize,
    pub quad_orders: QuadOrders,
    pub tolerances: Tolerances,
}

impl Default for Numerics {
    fn default() -> Self {
        Self { n_max: CoefficientOptions::default().n_max, quad_orders: QuadOrders::default(), tolerances: Tolerances::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadOrders {
    /// Fixed Gauss–Hermite order for k_z; adaptive panels when absent.
    pub kz: Option<usize>,
    /// Gauss–Hermite order shared by both paths in `oracle-check`.
    pub oracle_kz: usize,
    /// Guard levels above n_max in the dense basis.
    pub oracle_guard: usize,
}

impl Default for QuadOrders {
    fn default() -> Self {
        let o = OracleOptions::default();
        Self { kz: None, oracle_kz: o.kz_order, oracle_guard: o.guard }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Missing probability allowed by the level truncation.
    pub tail: f64,
    pub sum_rule: f64,
    /// Relative change allowed in the adaptive k_z rule.
    pub kz: f64,
    /// Max relative deviation between analytic and dense paths.
    pub oracle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { tail: 1e-10, sum_rule: 1e-10, kz: 1e-9, oracle: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSpec {
    pub t_start: f64,
    pub t_end: f64,
    /// Defaults to 40 samples per period of the fastest line.
    pub samples: Option<usize>,
}

impl Default for TimeSpec {
    fn default() -> Self {
        Self { t_start: 0.0, t_end: 100.0, samples: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub path: Option<String>,
    pub format: Format,
    pub include_velocities: bool,
    pub include_spectrum: bool,
    /// Extra columns in seconds and metres (physical and trap units only).
    pub include_si: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { path: None, format: Format::Csv, include_velocities: true, include_spectrum: false, include_si: false }
    }
}

/// A configuration with every physical quantity in natural units.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub packet: GaussianPacket,
    pub field: FieldConfig,
    pub units: Option<UnitSystem>,
    pub trap: Option<SimulatedSystem>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let (field, units, trap) = match self.units {
            UnitChoice::Trap => {
                let trap = self
                    .trap
                    .as_ref()
                    .ok_or_else(|| CliError::Config("units = \"trap\" needs a [trap] table".into()))?;
                if self.field.is_some() {
                    return Err(CliError::Config("[field] conflicts with units = \"trap\"; the trap fixes the field".into()));
                }
                let sys = simulated_units(trap)?;
                (sys.field, Some(sys.units), Some(sys))
            }
            choice => {
                if self.trap.is_some() {
                    return Err(CliError::Config("[trap] is only read with units = \"trap\"".into()));
                }
                let spec = self.field.ok_or_else(|| CliError::Config("missing [field] table".into()))?;
                let field = match (spec.magnetic_length, spec.tesla, spec.kappa) {
                    (Some(l), None, None) => FieldConfig::from_magnetic_length(l)?,
                    (None, Some(b), None) if choice == UnitChoice::Physical => FieldConfig::from_tesla(b)?,
                    (None, Some(_), None) => {
                        return Err(CliError::Config("field.tesla needs units = \"physical\"".into()))
                    }
                    (None, None, Some(k)) => FieldConfig::from_kappa(k)?,
                    _ => {
                        return Err(CliError::Config(
                            "[field] takes exactly one of magnetic_length, tesla, kappa".into(),
                        ))
                    }
                };
                let units = (choice == UnitChoice::Physical).then(UnitSystem::physical_electron);
                (field, units, None)
            }
        };
        let packet = self.packet(&field)?;
        Ok(Resolved { packet, field, units, trap })
    }

    fn packet(&self, field: &FieldConfig) -> Result<GaussianPacket, CliError> {
        let p = &self.packet;
        let (len, mom) = match p.scale {
            PacketScale::Compton => (1.0, 1.0),
            PacketScale::Magnetic => (field.magnetic_length, 1.0 / field.magnetic_length),
        };
        let mut k0x = p.k0x * mom;
        let mut k0z = p.k0z * mom;
        if let Some(limit) = p.clamp_k0 {
            if !(limit > 0.0 && limit < 1.0) {
                return Err(CliError::Config(format!("packet.clamp_k0 must lie in (0, 1), got {limit}")));
            }
            let k = k0x.hypot(k0z);
            if k > limit {
                k0x *= limit / k;
                k0z *= limit / k;
            }
        }
        let d_z = match (self.model, p.d_z) {
            (Dimensionality::ThreePlusOne, Some(d)) => d * len,
            (Dimensionality::ThreePlusOne, None) => {
                return Err(CliError::Config("packet.d_z is required for model = \"3+1\"".into()))
            }
            (Dimensionality::TwoPlusOne, Some(_)) => {
                return Err(CliError::Config("packet.d_z is only meaningful for model = \"3+1\"".into()))
            }
            (Dimensionality::TwoPlusOne, None) => 0.0,
        };
        let packet = GaussianPacket {
            d_x: p.d_x * len,
            d_y: p.d_y * len,
            d_z,
            k0x,
            k0z,
            a1: Complex64::new(p.a1[0], p.a1[1]),
            a2: Complex64::new(p.a2[0], p.a2[1]),
            dimensionality: self.model,
        };
        packet.validate()?;
        Ok(packet)
    }

    pub fn coefficient_options(&self) -> CoefficientOptions {
        CoefficientOptions {
            n_max: self.numerics.n_max,
            tail_tolerance: self.numerics.tolerances.tail,
            ..CoefficientOptions::default()
        }
    }

    pub fn dynamics_options(&self) -> DynamicsOptions {
        let kz_rule = match (self.numerics.quad_orders.kz, KzRule::default()) {
            (Some(order), _) => KzRule::GaussHermite { order },
            (None, KzRule::Adaptive { half_width, max_panels, .. }) => {
                KzRule::Adaptive { rel_tol: self.numerics.tolerances.kz, half_width, max_panels }
            }
            (None, rule) => rule,
        };
        DynamicsOptions { kz_rule }
    }

    pub fn oracle_options(&self) -> OracleOptions {
        OracleOptions {
            guard: self.numerics.quad_orders.oracle_guard,
            kz_order: self.numerics.quad_orders.oracle_kz,
            ..OracleOptions::default()
        }
    }
}
