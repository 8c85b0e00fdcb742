//! Evidential inverse sensor models for radar occupancy grids.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, dataset
//! handling and the command line live in the `radar-ism` companion crate.
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diffnet;
pub mod error;
pub mod eval;
pub mod evidential;
pub mod grid;
pub mod ray_ism;
pub mod real;
pub mod sim;

pub use error::{Error, Result};
