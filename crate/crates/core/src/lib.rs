//! Finite-blocklength latency laboratory.
//!
//! Analytic bounds on the latency of short-packet AWGN links, the latency of
//! optimal early detection, Monte-Carlo sequential detectors (MSPRT, SPRT and
//! CRC-guided stopping), OFDM distance-over-time analysis and multi-hop
//! relaying latency planning.

pub mod early;
pub mod seqdetect;
pub mod error;
pub mod fbl;
pub mod harness;
pub mod multihop;
pub mod ofdm;
pub mod quadrature;
pub mod special;

pub use error::{LatError, Result};
