use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("level {level} exceeds capacity {cap}")]
    Capacity { level: usize, cap: usize },

    #[error("spinor norm singular at branch-edge state")]
    SingularSpinor,

    #[error(
        "truncation tail mass {tail:.3e} exceeds tolerance {tolerance:.3e} at n_max = {n_max}; increase n_max"
    )]
    Truncation { tail: f64, tolerance: f64, n_max: usize },

    #[error("quadrature did not converge: achieved {achieved:.3e}, required {required:.3e}")]
    Quadrature { achieved: f64, required: f64 },

    #[error("{0} needs a 3+1 packet; the 2+1 model uses the |g(k_z)|^2 = delta(k_z) reduction")]
    PlanarPacket(&'static str),

    #[error("outside the low-field regime: kappa = {kappa:.3e} (needs kappa < 1e-2)")]
    OutsideLowField { kappa: f64 },

    #[error(
        "guard band of {guard} levels above n_max = {n_max} does not fit truncation N = {truncation}; spectral contamination"
    )]
    GuardBand { truncation: usize, n_max: usize, guard: usize },

    #[error("truncation leakage: mass {leaked:.3e} above level {level} exceeds 1e-10")]
    Leakage { leaked: f64, level: usize },
}
