//! Simulator for the two-photon parity-state re-encoder.

pub mod density;
pub mod detection;
pub mod error;
pub mod mismatch;
pub mod optics;
pub mod parity;
pub mod pdc;
pub mod photonic;
pub mod quadrature;
pub mod reencoder;
pub mod selftest;
pub mod teleport;

pub use error::{Error, Result};
