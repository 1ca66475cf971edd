use serde::{Deserialize, Serialize};

use crate::numeric::Activation;

/// How the per-sparse-feature hidden states are merged into the sparse half
/// of the cell output.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// `tanh(W [h_1; ...; h_m] + b)`.
    #[default]
    DenseLayer,
    Average,
    Max,
}

impl AggregationMode {
    pub const ALL: [AggregationMode; 3] = [
        AggregationMode::DenseLayer,
        AggregationMode::Average,
        AggregationMode::Max,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AggregationMode::DenseLayer => "dense_layer",
            AggregationMode::Average => "average",
            AggregationMode::Max => "max",
        }
    }
}

impl std::str::FromStr for AggregationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dense_layer" => Ok(AggregationMode::DenseLayer),
            "average" => Ok(AggregationMode::Average),
            "max" => Ok(AggregationMode::Max),
            other => Err(format!("unknown aggregation mode `{other}`")),
        }
    }
}

/// Shape and behaviour of one recurrent cell.
///
/// A plain LSTM is the special case `n_delta == 0, n_sparse == 0`, and a
/// TLSTM is `n_sparse == 0`. With no sparse features the sparse half of the
/// hidden state does not exist and `hidden_full() == hidden_dense`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    /// Width of the dense per-step input.
    pub input_dim: usize,
    pub hidden_dense: usize,
    pub hidden_sparse: usize,
    /// Number of delta (elapsed time) features; 0 disables memory decay.
    pub n_delta: usize,
    pub n_sparse: usize,
    pub aggregation: AggregationMode,
    pub candidate: Activation,
    /// One gate set shared by all sparse features instead of one each.
    pub share_sparse_weights: bool,
    /// Also aggregate the sparse output gates (`o_t`). Not consumed downstream.
    pub output_gate_aggregate: bool,
}

impl CellConfig {
    pub fn lstm(input_dim: usize, hidden: usize) -> Self {
        CellConfig {
            input_dim,
            hidden_dense: hidden,
            hidden_sparse: 0,
            n_delta: 0,
            n_sparse: 0,
            aggregation: AggregationMode::default(),
            candidate: Activation::Tanh,
            share_sparse_weights: false,
            output_gate_aggregate: false,
        }
    }

    pub fn tlstm(input_dim: usize, hidden: usize, n_delta: usize) -> Self {
        CellConfig {
            n_delta,
            ..CellConfig::lstm(input_dim, hidden)
        }
    }

    pub fn stlstm(
        input_dim: usize,
        hidden_dense: usize,
        hidden_sparse: usize,
        n_delta: usize,
        n_sparse: usize,
    ) -> Self {
        CellConfig {
            hidden_sparse,
            n_sparse,
            ..CellConfig::tlstm(input_dim, hidden_dense, n_delta)
        }
    }

    /// Width of the sparse half of the hidden state (0 without sparse features).
    pub fn hidden_sparse_eff(&self) -> usize {
        if self.n_sparse == 0 {
            0
        } else {
            self.hidden_sparse
        }
    }

    pub fn hidden_full(&self) -> usize {
        self.hidden_dense + self.hidden_sparse_eff()
    }

    pub fn sparse_param_sets(&self) -> usize {
        match (self.n_sparse, self.share_sparse_weights) {
            (0, _) => 0,
            (_, true) => 1,
            (m, false) => m,
        }
    }

    pub(crate) fn validate(&self) -> crate::Result<()> {
        if self.hidden_dense == 0 {
            return Err(crate::Error::invalid("hidden_dense must be positive"));
        }
        if self.n_sparse > 0 && self.hidden_sparse == 0 {
            return Err(crate::Error::invalid(
                "hidden_sparse must be positive when sparse features are configured",
            ));
        }
        Ok(())
    }
}
