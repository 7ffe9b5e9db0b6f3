//! Simulation of a pulsed, spectrally filtered photon-pair source with
//! extended heralding and feed-forward switching.
//!
//! The crate models the full chain from the joint spectral amplitude of a
//! two-mode squeezer bank, through click statistics of threshold detectors,
//! down to timestamp-level Monte Carlo event streams and their analysis.

pub mod analysis;
pub mod cli;
pub mod closedform;
pub mod error;
pub mod eventsim;
pub mod heralding;
pub mod pdcstate;
pub mod scenario;
pub mod spectra;

mod kahan;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
