//! Recurrent networks for asynchronous time series.
//!
//! The crate implements the Sparse Time LSTM (STLSTM) cell together with its
//! TLSTM and LSTM special cases, exact backpropagation through time, a
//! classifier that handles five feature types (dense, sparse, delta, static
//! dense, static delta), the data pipeline that turns a per-minute power
//! consumption log into such sequences, a synthetic asynchronous-event
//! generator, and an ADAM training loop with macro-F1 early stopping.
//!
//! The accompanying book (`book/`) walks through the maths; its code
//! listings are compiled and run as doc-tests of this crate.

pub mod cells;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod io;
pub mod model;
pub mod numeric;
pub mod params;
pub mod training;

pub use error::{Error, Result};
pub use params::ParamSet;

/// The book's chapters, compiled so their listings run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/cells.md")]
    mod cells {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
}
