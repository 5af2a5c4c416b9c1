//! Minimum-power slicing of a shared downlink grid between one eMBB user
//! and one URLLC user, under orthogonal and non-orthogonal access.
//!
//! Powers are linear watts throughout; mean SNRs are normalized by the
//! noise power and expressed per watt of transmit power.

pub mod alloc;
pub mod channel;
pub mod error;
pub mod exper;
pub mod grid;
pub mod outage;
pub mod rng;
pub mod units;
pub mod verify;
pub mod waterfill;

pub use error::{Error, Result};
