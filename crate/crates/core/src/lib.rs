//! Super-Nyquist (SNQ) signaling over band-limited ISI and MIMO channels.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod dfe;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod mimo_snq;
pub mod snq_link;
pub mod spectral;
pub mod vblast;

pub use error::{Error, Result};
