//! Aligned interference neutralization for 2x2x2 relay networks.
//!
//! Two sources talk to their own destinations through two relays. Over an
//! `M`-slot symbol extension source 1 sends `M` streams and source 2 sends
//! `M - 1`; alignment at the relays and antiphase forwarding cancel the
//! cross-user interference at both destinations.

pub mod beamforming;
pub mod channel;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod multihop;
pub mod rational;
pub mod relay;
pub mod rng;
pub mod transceiver;

pub use error::{Error, Result};
pub use num_complex::Complex64;
