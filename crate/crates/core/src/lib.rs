//! Link-level simulator for IRS-assisted uplink with an adaptive,
//! codebook-based limited feedback protocol.
//!
//! The crate is organized bottom-up:
//!
//! * [`metaatom`]: varactor equivalent-circuit impedance and reflection.
//! * [`channel`]: geometric multi-path channels and the compound channel.
//! * [`protocol`]: sounding, selection, feedback bits, overhead, rates.
//! * [`codebook`]: RVQ, random adjacency and direction-codebook updates.
//! * [`neural`]: dense networks, backprop and Adam.
//! * [`agent`]: the codeword-update MDP and DDPG training/utilization.
//! * [`harness`]: configuration, experiment campaigns and CSV output.

pub mod agent;
pub mod channel;
pub mod codebook;
pub mod error;
pub mod harness;
pub mod metaatom;
pub mod neural;
pub mod protocol;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
