//! Desk-scale simulator of a multi-user quantum key distribution network
//! built on shared EPR pairs and dense-coding unitaries.
//!
//! A branch server prepares |φ⁺⟩ pairs and performs all joint measurements;
//! the users only measure single particles and apply local unitaries. Each
//! round the sender either checks the incoming channel (control mode),
//! encodes two bits with one of four Pauli operations (coding mode), or
//! swaps in a self-prepared decoy qubit that an information-hungry server
//! cannot distinguish from the real particle (decoy mode); the receiver
//! checks or encodes in turn, and the server announces the composition of
//! both operations, from which the receiver recovers the sender's bits.
//! Error rates on four sample classes decide accept/abort, and accepted runs
//! distill a shared key.
//!
//! The crate exposes the quantum algebra ([`quantum`]), the role state
//! machines and wire schema ([`protocol`], [`session`]), attack models
//! ([`adversary`]), topology/channel plumbing ([`network`]), post-processing
//! ([`analysis`]), and a batch runner ([`run`]) driven by a TOML config
//! ([`config`]). Sessions are independent seeded Monte Carlo runs; with the
//! `parallel` feature (default) batches execute on a rayon pool with output
//! identical to the sequential path.

pub mod adversary;
pub mod analysis;
pub mod carrier;
pub mod config;
pub mod error;
pub mod network;
pub mod protocol;
pub mod quantum;
pub mod rng;
pub mod run;
pub mod session;

pub use adversary::AdversaryModel;
pub use analysis::{SessionReport, Verdict};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use run::{run, RunOutput};
