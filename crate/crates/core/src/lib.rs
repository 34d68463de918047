//! Importance-aware M-QAM constellation design for goal-oriented links.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every algorithm of the
//! toolkit: concept quantization of image patches, task-relevance scoring,
//! source statistics, the frozen task classifier, Gray and learned
//! constellations, the AWGN link, the vulnerability metrics, the stationarity
//! and gap checks, and the tabular rate controller. File IO, configuration and
//! the command line live in the companion `semqam` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod channel;
pub mod constellation;
pub mod error;
pub mod ingest;
pub mod metrics;
pub mod ratecontrol;
pub mod rng;
pub mod semantics;
pub mod source;
pub mod theory;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Modulation orders supported by square QAM grids.
pub const SQUARE_QAM_ORDERS: [usize; 5] = [4, 16, 64, 256, 1024];

/// Lower clamp applied to task-relevance scores; they live in `(EPS, 1 - EPS)`.
pub const SCI_EPSILON: f64 = 1e-3;

/// Returns `log2(order)` when `order` is one of [`SQUARE_QAM_ORDERS`].
pub fn square_qam_bits(order: usize) -> Option<u32> {
    SQUARE_QAM_ORDERS
        .contains(&order)
        .then(|| order.trailing_zeros())
}
