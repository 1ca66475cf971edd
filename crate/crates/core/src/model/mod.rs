//! Stacked classifier: bottom STLSTM/TLSTM/LSTM layer, optional upper LSTM
//! layers, static dense embedding, static delta decay of the final hidden
//! state, and a softmax decoder.

pub mod config;
pub mod network;
pub mod params;

pub use config::{CellKind, ModelConfig};
pub use network::{Model, ModelCache};
pub use params::{Gradients, HeadParams, ModelParams};
