//! Minimum density power divergence estimation for finite Markov chains.

pub mod asymptotics;
pub mod chain;
pub mod dpd;
pub mod error;
pub mod extensions;
pub mod hypothesis;
pub mod models;
pub mod rng;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};

pub use asymptotics::{AsymptoticReport, VarianceMode};
pub use chain::{EmpiricalTransition, StateSequence, TransitionCounts};
pub use dpd::{DpdConfig, DpdEstimate};
pub use extensions::SequenceBundle;
pub use hypothesis::WaldResult;
pub use models::{FamilyId, MonomialFamily, ParametricFamily};
