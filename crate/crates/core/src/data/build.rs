//! Power log to labelled sequence datasets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetSplits, Dims, Manifest, Normalization, Source};
use super::power::{feature_index, PowerLog, FEATURE_NAMES, VOLTAGE};
use super::sample::SequenceSample;
use super::sequence::{self, Sampling, SequenceAverage, GROUP_SIZE, STATIC_DENSE_WIDTH};
use super::split::{split, SplitFractions};
use crate::error::{Error, Result};
use crate::numeric::rng;

pub const NUM_CLASSES: usize = 3;

/// How windows are cut from the record stream and turned into samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceSpec {
    /// Window length in records (minutes).
    pub sample_time: usize,
    /// Advance between window starts.
    pub shift: usize,
    /// Records kept per window.
    pub seq_len: usize,
    pub sampling: Sampling,
    /// Names of the features turned into sparse streams.
    pub sparse_features: Vec<String>,
    /// Keep probability per sparse feature.
    pub sparse_ratios: Vec<f64>,
    /// Minutes after the prediction time averaged for the target.
    pub horizon: usize,
    pub sequence_average: SequenceAverage,
    pub split: SplitFractions,
    /// Standardize measurements with training statistics.
    pub normalize: bool,
    /// Use only the first this many records.
    pub max_records: Option<usize>,
    pub seed: u64,
}

impl Default for SequenceSpec {
    fn default() -> Self {
        SequenceSpec {
            sample_time: 120,
            shift: 30,
            seq_len: 50,
            sampling: Sampling::Random,
            sparse_features: vec!["voltage".into()],
            sparse_ratios: vec![0.07],
            horizon: 30,
            sequence_average: SequenceAverage::Window,
            split: SplitFractions::default(),
            normalize: true,
            max_records: None,
            seed: 0,
        }
    }
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sample_time == 0 || self.shift == 0 || self.seq_len == 0 || self.horizon == 0 {
            return Err(Error::invalid("sample_time, shift, seq_len and horizon must be positive"));
        }
        if self.seq_len > self.sample_time {
            return Err(Error::invalid(format!(
                "seq_len {} exceeds sample_time {}",
                self.seq_len, self.sample_time
            )));
        }
        if self.sampling == Sampling::Group5 && self.seq_len % GROUP_SIZE != 0 {
            return Err(Error::invalid(format!(
                "group sampling needs seq_len divisible by {GROUP_SIZE}"
            )));
        }
        if self.sparse_features.len() != self.sparse_ratios.len() {
            return Err(Error::invalid("one sparse ratio per sparse feature is required"));
        }
        if let Some(r) = self.sparse_ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(Error::invalid(format!("sparse ratio {r} outside (0, 1]")));
        }
        let idx = self.sparse_indices()?;
        for (i, a) in idx.iter().enumerate() {
            if idx[..i].contains(a) {
                return Err(Error::invalid(format!("sparse feature {} listed twice", FEATURE_NAMES[*a])));
            }
        }
        self.split.validate()
    }

    pub fn sparse_indices(&self) -> Result<Vec<usize>> {
        self.sparse_features
            .iter()
            .map(|n| feature_index(n).ok_or_else(|| Error::invalid(format!("unknown feature {n:?}"))))
            .collect()
    }

    pub fn dense_indices(&self) -> Result<Vec<usize>> {
        let sparse = self.sparse_indices()?;
        Ok((0..FEATURE_NAMES.len()).filter(|i| !sparse.contains(i)).collect())
    }
}

const SUBSAMPLE_STREAM: u64 = 0;
const SPARSIFY_STREAM: u64 = 1;

/// Per-window generator: depends only on the seed, the window start and
/// the purpose, so samples do not depend on scheduling.
fn window_rng(seed: u64, start: usize, purpose: u64) -> rng::Rng {
    rng::stream(seed, ((start as u64) << 1) | purpose)
}

fn population_std(v: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = v.clone().fold((0usize, 0.0), |(n, s), x| (n + 1, s + x));
    let mean = sum / n as f64;
    let var = v.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Build train/validation/test datasets from a gap-filled power log.
pub fn build_power_dataset(log: &PowerLog, spec: &SequenceSpec) -> Result<DatasetSplits> {
    spec.validate()?;
    let records = match spec.max_records {
        Some(n) => &log.records[..n.min(log.records.len())],
        None => &log.records[..],
    };
    let voltage: Vec<f64> = records.iter().map(|r| r.values[VOLTAGE]).collect();

    let all_starts = sequence::window_starts(records.len(), spec.sample_time, spec.shift);
    // A label needs `horizon` records after the prediction time.
    let starts: Vec<usize> = all_starts
        .iter()
        .copied()
        .filter(|&s| s + spec.sample_time + spec.horizon < records.len())
        .collect();
    let unlabeled_windows = all_starts.len() - starts.len();
    let parts = split(&starts, spec.sample_time, &spec.split)?;
    let (first, last) = match (parts.train.first(), parts.train.last()) {
        (Some(&a), Some(&b)) => (starts[a], starts[b] + spec.sample_time),
        _ => return Err(Error::Data("no training windows; the log is too short".into())),
    };

    let train_records = &records[first..last];
    let (_, sigma) = population_std(train_records.iter().map(|r| r.values[VOLTAGE]));
    if !(sigma > 0.0) {
        return Err(Error::Data("training voltage has zero variance".into()));
    }
    let mut normalization = Normalization {
        mean: vec![0.0; FEATURE_NAMES.len()],
        std: vec![1.0; FEATURE_NAMES.len()],
    };
    if spec.normalize {
        for f in 0..FEATURE_NAMES.len() {
            let (m, s) = population_std(train_records.iter().map(|r| r.values[f]));
            normalization.mean[f] = m;
            normalization.std[f] = if s > 0.0 { s } else { 1.0 };
        }
    }

    let sparse_idx = spec.sparse_indices()?;
    let dense_idx = spec.dense_indices()?;
    let make = |pos: &[usize]| -> Result<Vec<SequenceSample>> {
        pos.par_iter()
            .map(|&p| {
                let start = starts[p];
                let mut sub_rng = window_rng(spec.seed, start, SUBSAMPLE_STREAM);
                let kept = sequence::subsample(spec.sampling, spec.sample_time, spec.seq_len, &mut sub_rng)?;
                let rows: Vec<Vec<f64>> = kept
                    .iter()
                    .map(|&o| {
                        let mut row = records[start + o].values.to_vec();
                        normalization.apply(&mut row);
                        row
                    })
                    .collect();
                let mut sp_rng = window_rng(spec.seed, start, SPARSIFY_STREAM);
                let (mask, value) = sequence::sparsify(&rows, &sparse_idx, &spec.sparse_ratios, &mut sp_rng)?;
                let dense = rows
                    .iter()
                    .map(|r| dense_idx.iter().map(|&i| r[i]).collect())
                    .collect();
                let delta = sequence::deltas(&kept).into_iter().map(|d| vec![d]).collect();
                let label = sequence::label(
                    &voltage,
                    start,
                    spec.sample_time,
                    &kept,
                    spec.horizon,
                    sigma,
                    spec.sequence_average,
                )
                .ok_or_else(|| Error::Data(format!("window at record {start} has no label")))?;
                Ok(SequenceSample {
                    dense,
                    delta,
                    mask,
                    value,
                    static_dense: sequence::static_dense(&records[start].timestamp),
                    static_delta: vec![sequence::static_delta(spec.sample_time, &kept)],
                    label,
                    origin: start as u64,
                })
            })
            .collect()
    };
    let train = make(&parts.train)?;
    let val = make(&parts.val)?;
    let test = make(&parts.test)?;

    let dims = Dims {
        d_dense: dense_idx.len(),
        d_delta: 1,
        n_sparse: sparse_idx.len(),
        d_static_dense: STATIC_DENSE_WIDTH,
        d_static_delta: 1,
        num_classes: NUM_CLASSES,
    };
    let manifest = Manifest {
        splits: DatasetSplits::summaries(&train, &val, &test, NUM_CLASSES),
        source: Source::Power {
            spec: spec.clone(),
            sigma,
            normalization,
            records: records.len(),
            filled_fraction: log.filled_fraction(),
            unlabeled_windows,
        },
        dims,
        dense_features: dense_idx.iter().map(|&i| FEATURE_NAMES[i].to_string()).collect(),
        sparse_features: sparse_idx.iter().map(|&i| FEATURE_NAMES[i].to_string()).collect(),
        dropped_overlap: parts.dropped,
    };
    Ok(DatasetSplits {
        train,
        val,
        test,
        manifest,
    })
}
