// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod config;
pub mod cycle;
pub mod error;
pub mod ga;
pub mod io;
pub mod lfm;
pub mod library;
pub mod reference;
pub mod stridge;
pub mod workflow;

pub use error::{Electrode, Error, Result};
