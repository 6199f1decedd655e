//! Inverse design of programmable linear optical circuits embedded in large
//! mode-mixers.
//!
//! A d-dimensional target gate is synthesized inside an n-dimensional device
//! (n ≥ d) built from fixed unitary mode-mixers interleaved with L
//! programmable phase planes. The [`wfm`] module solves for the phases by
//! wavefront matching; [`metrics`] scores the result; [`sweep`] runs the
//! scalability study over (n, d, L); [`quantum`] simulates two-photon
//! statistics, tomography, and entanglement witnessing with the synthesized
//! gates; [`recovery`] recovers an unknown mixer from intensity-only data.

pub mod circuit;
pub mod error;
pub mod gates;
pub mod linalg;
pub mod matio;
pub mod metrics;
pub mod quantum;
pub mod recovery;
pub mod sweep;
pub mod wfm;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, PhasePlane, RngSeed, Unitary};
