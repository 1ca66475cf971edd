use serde::{Deserialize, Serialize};

use crate::cells::{AggregationMode, CellConfig};
use crate::error::{Error, Result};
use crate::numeric::Activation;

/// Recurrent cell used for the bottom layer of the stack.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Lstm,
    Tlstm,
    #[default]
    Stlstm,
}

impl CellKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CellKind::Lstm => "lstm",
            CellKind::Tlstm => "tlstm",
            CellKind::Stlstm => "stlstm",
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "lstm" => Ok(CellKind::Lstm),
            "tlstm" => Ok(CellKind::Tlstm),
            "stlstm" => Ok(CellKind::Stlstm),
            other => Err(format!("unknown cell `{other}`")),
        }
    }
}

/// Architecture of a classifier.
///
/// Feature widths describe the data. How the bottom cell consumes them
/// depends on `cell`: an STLSTM reads sparse features through its per-feature
/// state machines, while LSTM and TLSTM receive them as extra dense columns
/// holding the last observed value. Static heads are active when their
/// widths are non-zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub cell: CellKind,
    /// Plain LSTM layers stacked on top of the bottom cell.
    pub upper_layers: usize,
    pub hidden_dense: usize,
    pub hidden_sparse: usize,
    pub d_dense: usize,
    pub d_delta: usize,
    pub n_sparse: usize,
    pub d_static_dense: usize,
    pub d_static_delta: usize,
    pub embedding_dim: usize,
    pub num_classes: usize,
    pub aggregation: AggregationMode,
    pub candidate_activation: Activation,
    pub share_sparse_weights: bool,
    pub output_gate_aggregate: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            cell: CellKind::Stlstm,
            upper_layers: 1,
            hidden_dense: 32,
            hidden_sparse: 32,
            d_dense: 0,
            d_delta: 0,
            n_sparse: 0,
            d_static_dense: 0,
            d_static_delta: 0,
            embedding_dim: 0,
            num_classes: 3,
            aggregation: AggregationMode::DenseLayer,
            candidate_activation: Activation::Tanh,
            share_sparse_weights: false,
            output_gate_aggregate: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn hidden_total(&self) -> usize {
        self.hidden_dense + self.hidden_sparse
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::invalid("num_classes must be at least 2"));
        }
        if (self.embedding_dim > 0) != (self.d_static_dense > 0) {
            return Err(Error::invalid(
                "embedding_dim must be positive exactly when static dense features are configured",
            ));
        }
        if self.hidden_dense == 0 {
            return Err(Error::invalid("hidden_dense must be positive"));
        }
        if self.cell == CellKind::Stlstm && self.n_sparse > 0 && self.hidden_sparse == 0 {
            return Err(Error::invalid("hidden_sparse must be positive with sparse features"));
        }
        Ok(())
    }

    /// Whether the bottom cell reads sparse features as state machines.
    pub fn uses_sparse_cells(&self) -> bool {
        self.cell == CellKind::Stlstm && self.n_sparse > 0
    }

    /// Configuration of every layer, bottom first.
    pub fn cell_configs(&self) -> Vec<CellConfig> {
        let total = self.hidden_total();
        let bottom = match self.cell {
            CellKind::Stlstm if self.n_sparse > 0 => {
                let mut c = CellConfig::stlstm(
                    self.d_dense,
                    self.hidden_dense,
                    self.hidden_sparse,
                    self.d_delta,
                    self.n_sparse,
                );
                c.aggregation = self.aggregation;
                c.share_sparse_weights = self.share_sparse_weights;
                c.output_gate_aggregate = self.output_gate_aggregate;
                c
            }
            CellKind::Stlstm => CellConfig::tlstm(self.d_dense, total, self.d_delta),
            CellKind::Tlstm => CellConfig::tlstm(self.d_dense + self.n_sparse, total, self.d_delta),
            CellKind::Lstm => CellConfig::lstm(self.d_dense + self.n_sparse, total),
        };
        let mut layers = vec![CellConfig {
            candidate: self.candidate_activation,
            ..bottom
        }];
        for _ in 0..self.upper_layers {
            let below = layers.last().unwrap().hidden_full();
            layers.push(CellConfig {
                candidate: self.candidate_activation,
                ..CellConfig::lstm(below, total)
            });
        }
        layers
    }

    /// Width of the top layer's final hidden state.
    pub fn top_hidden(&self) -> usize {
        self.cell_configs().last().unwrap().hidden_full()
    }
}
