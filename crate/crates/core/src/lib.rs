//! Sequential fully implicit (SFI) simulation of compressible, immiscible
//! multiphase flow in porous media.
//!
//! The crate is organised bottom-up:
//!
//! * [`grid`]: structured x–z grids with two-point flux transmissibilities.
//! * [`rockfluid`]: exponential compressibility, power-law relative
//!   permeabilities (Baker interpolation for three phases) and mobilities.
//! * [`flux`]: phase-potential upwinded and hybrid-upwinded face fluxes.
//! * [`assembly`]: pressure, transport and coupled residuals with sparse
//!   Jacobians.
//! * [`newton`]: the inner Newton driver and the inexact tolerance policies.
//! * [`sfi`]: the outer coupling loop, quasi-Newton acceleration and time
//!   stepping.
//! * [`oracle`]: a monolithic Newton solve of the same discrete system.
//! * [`harness`]: the case library, configuration files and CSV reports.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assembly;
mod ad;
pub mod error;
pub mod flux;
pub mod grid;
pub mod harness;
pub mod linalg;
pub mod newton;
pub mod oracle;
pub mod rockfluid;
pub mod sfi;
pub mod units;
pub mod wells;

pub use assembly::{ResidualSystem, SimState};
pub use error::{Error, Result};
pub use grid::{Face, PermeabilityField, StructuredGrid};
pub use newton::{InnerResult, Strategy, TolerancePolicy};
pub use rockfluid::{PhaseKind, PhaseProps, RockFluidModel};
pub use sfi::{IterationReport, OuterConfig, QnConfig, StepFailure};
pub use wells::{Well, WellControl};

/// Largest number of phases supported by the immiscible model.
pub const MAX_PHASES: usize = 3;
