//! Split datasets and their manifest.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::build::SequenceSpec;
use super::sample::SequenceSample;
use super::synth::SynthSpec;
use crate::model::ModelConfig;

/// Feature widths shared by every sample of a dataset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub d_dense: usize,
    pub d_delta: usize,
    pub n_sparse: usize,
    pub d_static_dense: usize,
    pub d_static_delta: usize,
    pub num_classes: usize,
}

impl Dims {
    pub fn of(sample: &SequenceSample, num_classes: usize) -> Dims {
        Dims {
            d_dense: sample.d_dense(),
            d_delta: sample.d_delta(),
            n_sparse: sample.n_sparse(),
            d_static_dense: sample.static_dense.len(),
            d_static_delta: sample.static_delta.len(),
            num_classes,
        }
    }

    /// Copy the input widths into a model configuration, enabling the
    /// static heads that are requested and present in the data. A static
    /// dense head keeps the configuration's embedding width.
    pub fn apply(&self, cfg: &mut ModelConfig, static_dense: bool, static_delta: bool) {
        cfg.d_dense = self.d_dense;
        cfg.d_delta = self.d_delta;
        cfg.n_sparse = self.n_sparse;
        cfg.num_classes = self.num_classes;
        if static_dense && self.d_static_dense > 0 {
            cfg.d_static_dense = self.d_static_dense;
        } else {
            cfg.d_static_dense = 0;
            cfg.embedding_dim = 0;
        }
        cfg.d_static_delta = if static_delta { self.d_static_delta } else { 0 };
    }
}

/// Per-feature affine normalization fitted on the training records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn apply(&self, row: &mut [f64]) {
        for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *x = (*x - m) / s;
        }
    }
}

/// Where a dataset came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Power {
        spec: SequenceSpec,
        /// Standard deviation of raw voltage over the training records.
        sigma: f64,
        normalization: Normalization,
        records: usize,
        filled_fraction: f64,
        /// Windows without enough future records for a label.
        unlabeled_windows: usize,
    },
    Synthetic {
        spec: SynthSpec,
        /// Score cut points separating the classes.
        thresholds: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub count: usize,
    pub label_counts: Vec<usize>,
}

impl SplitSummary {
    pub fn of(samples: &[SequenceSample], num_classes: usize) -> SplitSummary {
        SplitSummary {
            count: samples.len(),
            label_counts: label_counts(samples, num_classes),
        }
    }

    pub fn majority_fraction(&self) -> f64 {
        majority(&self.label_counts)
    }
}

pub fn label_counts(samples: &[SequenceSample], num_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; num_classes];
    for s in samples {
        if s.label < num_classes {
            counts[s.label] += 1;
        }
    }
    counts
}

fn majority(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    *counts.iter().max().unwrap_or(&0) as f64 / total as f64
}

/// Self-describing record of how a dataset was built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub source: Source,
    pub dims: Dims,
    pub dense_features: Vec<String>,
    pub sparse_features: Vec<String>,
    pub splits: BTreeMap<String, SplitSummary>,
    /// Validation/test windows dropped for sharing records with an earlier split.
    pub dropped_overlap: usize,
}

impl Manifest {
    /// Label distribution over all splits combined.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut total = vec![0; self.dims.num_classes];
        for s in self.splits.values() {
            for (t, c) in total.iter_mut().zip(&s.label_counts) {
                *t += c;
            }
        }
        total
    }

    pub fn majority_fraction(&self) -> f64 {
        majority(&self.label_counts())
    }
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "val", "test"];

/// Train, validation and test samples plus the manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplits {
    pub train: Vec<SequenceSample>,
    pub val: Vec<SequenceSample>,
    pub test: Vec<SequenceSample>,
    pub manifest: Manifest,
}

impl DatasetSplits {
    pub fn get(&self, name: &str) -> Option<&[SequenceSample]> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    pub(crate) fn summaries(
        train: &[SequenceSample],
        val: &[SequenceSample],
        test: &[SequenceSample],
        num_classes: usize,
    ) -> BTreeMap<String, SplitSummary> {
        [("train", train), ("val", val), ("test", test)]
            .into_iter()
            .map(|(n, s)| (n.to_string(), SplitSummary::of(s, num_classes)))
            .collect()
    }
}
