//! Reconstruction of the initial Wigner function (and the s-parametrized
//! quasiprobabilities) of a single cavity mode from the photon statistics of
//! the displaced, decayed field, including a simulated atomic-probe readout.

pub mod channel;
pub mod cli;
pub mod error;
pub mod fockspace;
pub mod numeric;
pub mod probe;
pub mod quasiprob;
pub mod recon;

pub use error::{Error, Result};
