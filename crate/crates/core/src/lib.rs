//! Coded caching for libraries whose files share content.
//!
//! Files are decomposed into subfiles, each shared by a fixed set of files.
//! The crate evaluates delivery rates in closed form, picks per-level cache
//! allocations, and simulates placement, delivery and decoding bit for bit.

pub mod allocator;
pub mod bits;
pub mod closed_form;
pub mod combinatorics;
pub mod delivery;
pub mod error;
pub mod experiment;
pub mod gf256;
pub mod model;
pub mod oracle;
pub mod schedule;

pub use error::{Error, Result};
