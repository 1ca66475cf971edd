//! LSTM, TLSTM and STLSTM cells as single-step transitions.
//!
//! All three share one implementation: a TLSTM is an STLSTM without sparse
//! features, and an LSTM additionally has no delta features (decay factor
//! fixed at one). The reductions are exact, not approximate.

pub mod config;
pub mod ops;
pub mod params;
pub mod step;

pub use config::{AggregationMode, CellConfig};
pub use ops::{aggregate, decay, decompose_and_decay, lstm_gate_step, sparse_step, GateOutput, SparseState};
pub use params::{AggregationParams, CellParams, DeltaDecayParams, GateParams};
pub use step::{
    backward_sequence, backward_step, forward_sequence, forward_step, lstm_step, stlstm_step,
    SequenceTrace, StateGrad, StepCache, StepInput, StlstmState,
};
