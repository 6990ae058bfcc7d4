//! Uplink resource allocation for wireless-powered IoT networks.
//!
//! Users are first matched to channels by a swap-matching game
//! ([`matching`]); each user then plans its per-slot transmit power over a
//! finite frame with a Markov decision process solved by backward induction
//! ([`mdp`]). [`baselines`] holds the comparison schemes and [`sim`] wires
//! everything into seeded experiments.

pub mod baselines;
pub mod chain;
pub mod config;
pub mod error;
pub mod matching;
pub mod mdp;
pub mod model;
pub mod selftest;
pub mod sim;
pub mod table;

pub use error::{Error, Result};
