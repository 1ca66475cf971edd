//! Experiment configuration: a TOML file, `key=value` overrides, and the
//! resolved settings every command reads.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stlstm::cells::AggregationMode;
use stlstm::data::{SequenceSpec, SynthSpec};
use stlstm::model::{CellKind, ModelConfig};
use stlstm::numeric::Activation;
use stlstm::training::TrainConfig;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    #[default]
    Synthetic,
    Power,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: SourceKind,
    /// The semicolon-separated power log (power source only).
    pub csv: Option<PathBuf>,
    pub sequence: SequenceSpec,
    pub synthetic: SynthSpec,
}

/// Architecture settings; feature widths come from the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub cell: CellKind,
    pub upper_layers: usize,
    pub hidden_dense: usize,
    pub hidden_sparse: usize,
    pub embedding_dim: usize,
    pub aggregation: AggregationMode,
    pub candidate_activation: Activation,
    pub share_sparse_weights: bool,
    pub output_gate_aggregate: bool,
    pub static_dense: bool,
    pub static_delta: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            cell: CellKind::Stlstm,
            upper_layers: 1,
            hidden_dense: 32,
            hidden_sparse: 32,
            embedding_dim: 64,
            aggregation: AggregationMode::DenseLayer,
            candidate_activation: Activation::Tanh,
            share_sparse_weights: false,
            output_gate_aggregate: false,
            static_dense: true,
            static_delta: true,
        }
    }
}

impl ModelSection {
    /// Model configuration for a dataset with widths `dims`.
    pub fn resolve(&self, dims: &stlstm::data::Dims, seed: u64) -> ModelConfig {
        let mut cfg = ModelConfig {
            cell: self.cell,
            upper_layers: self.upper_layers,
            hidden_dense: self.hidden_dense,
            hidden_sparse: self.hidden_sparse,
            embedding_dim: self.embedding_dim,
            aggregation: self.aggregation,
            candidate_activation: self.candidate_activation,
            share_sparse_weights: self.share_sparse_weights,
            output_gate_aggregate: self.output_gate_aggregate,
            seed,
            ..Default::default()
        };
        dims.apply(&mut cfg, self.static_dense, self.static_delta);
        cfg
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Sparsity,
    SparseSubset,
    Aggregation,
    Statics,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Sparsity => "sparsity",
            SweepAxis::SparseSubset => "sparse-subset",
            SweepAxis::Aggregation => "aggregation",
            SweepAxis::Statics => "statics",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: Option<SweepAxis>,
    /// Axis values; empty means the axis default.
    pub values: Vec<String>,
    /// Sparse ratios each value is run at; empty means the data config's.
    pub sparsities: Vec<f64>,
    /// Paired runs per point, with seeds `seed, seed + 1, ...`.
    pub repeats: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            axis: None,
            values: Vec::new(),
            sparsities: Vec::new(),
            repeats: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckConfig {
    pub cell: Option<CellKind>,
    pub hidden_dense: usize,
    pub hidden_sparse: usize,
    pub d_dense: usize,
    pub d_delta: usize,
    pub n_sparse: usize,
    pub d_static_dense: usize,
    pub embedding_dim: usize,
    pub d_static_delta: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub samples: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Perturb the analytic gradient of this tensor (fault injection).
    pub corrupt: Option<String>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            cell: None,
            hidden_dense: 4,
            hidden_sparse: 4,
            d_dense: 3,
            d_delta: 2,
            n_sparse: 2,
            d_static_dense: 3,
            embedding_dim: 3,
            d_static_delta: 1,
            min_len: 5,
            max_len: 6,
            samples: 2,
            step: 1e-5,
            tolerance: 1e-4,
            corrupt: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Seeds data generation, initialization and shuffling. It replaces
    /// the seed fields of the individual sections.
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub sweep: SweepConfig,
    pub gradcheck: GradcheckConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            out: PathBuf::from("runs/default"),
            data: DataConfig::default(),
            model: ModelSection::default(),
            train: TrainConfig::default(),
            sweep: SweepConfig::default(),
            gradcheck: GradcheckConfig::default(),
        }
    }
}

/// Parse an override value as a TOML literal, falling back to a string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Apply `a.b.c=value` to a TOML table, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{key}`")));
    }
    let mut node = table;
    for part in &path[..path.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{part}` in `{key}` is not a table")))?;
    }
    node.insert(path[path.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    /// Load `file` (or defaults), apply overrides in order, then the seed
    /// and output directory given on the command line.
    pub fn load(
        file: Option<&Path>,
        overrides: &[String],
        seed: Option<u64>,
        out: Option<&Path>,
    ) -> CliResult<Self> {
        let mut table = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let mut cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(o) = out {
            cfg.out = o.to_path_buf();
        }
        cfg.sync_seeds();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn sync_seeds(&mut self) {
        self.data.sequence.seed = self.seed;
        self.data.synthetic.seed = self.seed;
        self.train.seed = self.seed;
    }

    pub fn validate(&self) -> CliResult<()> {
        match self.data.source {
            SourceKind::Synthetic => self.data.synthetic.validate()?,
            SourceKind::Power => self.data.sequence.validate()?,
        }
        self.train.validate()?;
        if self.model.static_dense && self.model.embedding_dim == 0 {
            return Err(CliError::Config("static_dense needs a positive embedding_dim".into()));
        }
        if self.sweep.repeats == 0 {
            return Err(CliError::Config("sweep.repeats must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Write the effective configuration to `<out>/config.toml`.
    pub fn dump(&self) -> CliResult<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| stlstm::Error::io(&self.out, e))?;
        let path = self.out.join("config.toml");
        std::fs::write(&path, self.to_toml()?).map_err(|e| stlstm::Error::io(&path, e))?;
        Ok(())
    }
}
