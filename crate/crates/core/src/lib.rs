//! Relativistic electron wave packets in a uniform magnetic field.
//!
//! Landau-level series for the 2+1 and 3+1 Dirac equations, Gaussian packet
//! coefficients, a dense brute-force evolution used to certify the series,
//! and the mapping onto trapped-ion simulation parameters.

pub mod dynamics;
pub mod error;
pub mod ionmap;
pub mod landau;
pub mod numerics;
pub mod oracle;
pub mod packet;
pub mod units;

pub use error::{Error, Result};
pub use num_complex;
