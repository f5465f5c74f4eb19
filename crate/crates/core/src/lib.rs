//! Superimposed-pilot channel estimation and symbol detection for
//! RIS-assisted OFDM uplinks.
//!
//! The crate covers the full link: channel generation ([`channel`]), pilot
//! superposition and the received signal ([`waveform`]), classical estimators
//! and equalizers ([`estimators`]), a small MLP engine ([`neuralnet`]), the
//! CE-Net/FUS-Net models ([`models`]), dataset generation, training and
//! Monte-Carlo evaluation ([`pipeline`]) and complexity/energy accounting
//! ([`analysis`]).

pub mod analysis;
pub mod channel;
pub mod error;
pub mod estimators;
pub mod models;
pub mod neuralnet;
pub mod pipeline;
pub mod rng;
pub mod waveform;

pub use error::{Error, Result};
pub use num_complex::Complex64;
