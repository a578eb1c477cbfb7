use std::fmt;
use std::process::ExitCode;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Tolerance(String),
    Capacity(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Tolerance(_) => 3,
            Self::Capacity(_) => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Tolerance(m) => write!(f, "tolerance not met: {m}"),
            Self::Capacity(m) => write!(f, "capacity exceeded: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<zitter::Error> for CliError {
    fn from(e: zitter::Error) -> Self {
        use zitter::Error as E;
        let msg = e.to_string();
        match e {
            E::InvalidParameter(_) | E::PlanarPacket(_) | E::OutsideLowField { .. } | E::SingularSpinor => {
                Self::Config(msg)
            }
            E::Truncation { .. } | E::Quadrature { .. } | E::Leakage { .. } => Self::Tolerance(msg),
            E::Capacity { .. } | E::GuardBand { .. } => Self::Capacity(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
