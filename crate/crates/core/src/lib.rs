//! Exact intersymbol and intercarrier interference analysis for CP-OFDM and
//! ZP-OFDM (overlap-and-add) over FIR channels of any length.
//!
//! The channel may span many transmitted blocks. [`analysis`] builds the
//! interference operators for every block that leaks into a received frame
//! and turns them into per-tone SINR; [`rate`] maps SINR to achievable rate
//! through the SNR-gap approximation. [`montecarlo`] is an independent
//! time-domain simulation used to check the analysis, and [`teq`] designs
//! channel-shortening equalizers and runs rate sweeps.

pub mod analysis;
pub mod channels;
pub mod equalizer;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod rate;
pub mod teq;

pub use analysis::{analyze, InterferenceMatrices, InterferenceReport, SignalStats};
pub use error::{Error, Result};
pub use model::{ChannelModel, ComplexMatrix, OfdmConfig, Scheme};
pub use num_complex::Complex64;
pub use rate::RateParams;
