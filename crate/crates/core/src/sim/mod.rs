//! Time-domain solver for the incompressible perturbation system in the periodic
//! slab: Fourier in `x₁`, staggered finite differences in `x₂`.

pub mod checkpoint;
pub mod escape;
pub mod grid;
pub mod run;
pub mod slab;
pub mod state;
pub mod stepper;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use escape::{escape_time, fit_escape, EscapeFit, EscapeSample};
pub use grid::SlabGrid;
pub use run::{l1_velocity, run, run_with, RunOutcome, StopReason};
pub use state::{DtMode, FieldState, InitKind, RunConfig};
pub use stepper::{init_state, step, Simulation};
