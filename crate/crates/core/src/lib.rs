//! Simulation of RIS-assisted physical-layer secret key generation over
//! spatially correlated multi-antenna channels.
//!
//! - [`correlation`]: BS (Toeplitz/Kronecker) and RIS (sinc) correlation matrices.
//! - [`channel`]: geometry, path loss and Kronecker-model channel draws.
//! - [`probing`]: the uplink/downlink sounding protocol.
//! - [`kgr`]: closed-form key generation rate and its Monte Carlo check.
//! - [`beamforming`]: optimal and random beamformers, analytic bounds.
//! - [`experiment`]: sweep definitions, presets and result files.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod channel;
pub mod correlation;
pub mod error;
pub mod experiment;
pub mod kgr;
pub mod probing;
pub mod rng;

pub use error::{Error, Result};
