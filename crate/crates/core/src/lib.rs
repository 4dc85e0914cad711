//! No-regret transmit policies for MIMO–OFDM cognitive radio.

pub mod config;
pub mod error;
pub mod fading;
pub mod harness;
pub mod hermitian;
pub mod mac;
pub mod maps;
pub mod metrics;
pub mod network;
pub mod noise;
pub mod policies;
pub mod rate;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
