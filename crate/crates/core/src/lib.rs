//! Capillary Rayleigh–Taylor laboratory: the critical capillarity threshold, the
//! linear growth rate, and a time-domain solver for incompressible
//! Navier–Stokes–Korteweg perturbations in a periodic slab with Navier-slip walls.

pub mod acceptance;
pub mod banded;
pub mod diagnostics;
pub mod error;
pub mod fd;
pub mod growth;
pub mod par;
pub mod profile;
pub mod sim;
pub mod threshold;

pub use error::{NskError, Result};
pub use profile::{AnalyticProfile, DensityProfile, SlabConfig};

/// Version string embedded in run summaries.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
