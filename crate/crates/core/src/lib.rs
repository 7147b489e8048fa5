//! Staggered-grid multiscale patch schemes for weakly damped linear waves.

pub mod error;
pub mod geometry;
pub mod linalg;
pub mod micro;
pub mod scheme;
pub mod coupling;
pub mod eigen;
pub mod census;
pub mod sim;

pub use error::{Error, Result};
