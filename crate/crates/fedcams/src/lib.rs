//! Deterministic simulator for adaptive federated optimization with
//! compressed client-to-server communication.
//!
//! The library models the full round structure: partial client
//! participation, local SGD on synthetic objectives, biased compression
//! with per-client error feedback, an adaptive server step (FedAvg,
//! FedAdam, FedAMSGrad, FedAMS, FedYogi), and bit-exact communication
//! accounting. Every source of randomness is a counter-based stream
//! derived from one master seed, so runs replay byte-for-byte regardless
//! of worker-thread count.

pub mod accounting;
pub mod client;
pub mod compressors;
pub mod config;
pub mod error;
pub mod feedback;
pub mod harness;
pub mod objectives;
pub mod rng;
pub mod sampler;
pub mod selftest;
pub mod server;
pub mod vector;

pub use error::{Error, Result};
pub use vector::ParamVector;
