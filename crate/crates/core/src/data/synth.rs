//! Synthetic asynchronous sequences whose label depends on the values of
//! rare sparse events and on how long ago they happened.
//!
//! Each sequence has `T ~ U{t_min..=t_max}` steps separated by
//! `U{1..=gap_max}` minutes. Dense channels are standard normal noise.
//! Sparse feature `k` is present at step 0 and thereafter with probability
//! `sparsity`; a present value is drawn from `U(-1, 1)`. The prediction time
//! lies `U{1..=static_gap_max}` minutes after the last step, and each
//! sequence belongs to one of `n_groups` groups (one-hot static feature).
//!
//! The latent score is
//!
//! ```text
//! score = sum_k w_k * sum_{events e of k} v_e / ln(e + (t_pred - t_e) / tau)
//!       + interaction * S_0 * S_1
//!       + static_effect * b_group
//! ```
//!
//! where `S_k` is feature `k`'s inner sum and `b_group` is evenly spaced in
//! `[-1, 1]`. With a non-zero `interaction` the effect of one sparse feature
//! depends on the state of another. Classes are the terciles of the
//! score (cut points calibrated on a separate set of draws); with
//! probability `label_noise` the label is replaced by a uniform class.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetSplits, Dims, Manifest, Source};
use super::sample::SequenceSample;
use crate::error::{Error, Result};
use crate::numeric::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub t_min: usize,
    pub t_max: usize,
    pub gap_max: usize,
    pub d_dense: usize,
    pub n_sparse: usize,
    /// Presence probability of each sparse feature after the first step.
    pub sparsity: f64,
    /// Score weight per sparse feature; cycled when shorter than `n_sparse`.
    pub weights: Vec<f64>,
    /// Time scale of the event decay, in minutes.
    pub tau: f64,
    /// Weight of the product of the first two features' decayed sums.
    pub interaction: f64,
    pub n_groups: usize,
    pub static_effect: f64,
    pub static_gap_max: usize,
    pub label_noise: f64,
    /// Add a second delta feature: minutes since the last sparse event.
    pub event_delta: bool,
    pub calibration_draws: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_train: 2000,
            n_val: 500,
            n_test: 500,
            t_min: 30,
            t_max: 60,
            gap_max: 5,
            d_dense: 2,
            n_sparse: 3,
            sparsity: 0.05,
            weights: vec![1.0, -0.8, 0.6],
            tau: 20.0,
            interaction: 0.0,
            n_groups: 4,
            static_effect: 0.5,
            static_gap_max: 60,
            label_noise: 0.02,
            event_delta: false,
            calibration_draws: 20_000,
            seed: 0,
        }
    }
}

pub const NUM_CLASSES: usize = 3;

const CALIBRATION_OFFSET: u64 = 1 << 40;

/// One generated sequence with its latent score and noiseless class.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthDraw {
    pub sample: SequenceSample,
    pub score: f64,
    pub clean_label: usize,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.t_min == 0 || self.t_min > self.t_max {
            return Err(Error::invalid("need 1 <= t_min <= t_max"));
        }
        if self.gap_max == 0 || self.static_gap_max == 0 || self.n_groups == 0 {
            return Err(Error::invalid("gap_max, static_gap_max and n_groups must be positive"));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(Error::invalid(format!("sparsity {} outside (0, 1]", self.sparsity)));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::invalid("label_noise outside [0, 1]"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::invalid("tau must be positive"));
        }
        if self.n_sparse > 0 && self.weights.is_empty() {
            return Err(Error::invalid("at least one sparse weight is required"));
        }
        if self.calibration_draws < NUM_CLASSES {
            return Err(Error::invalid("too few calibration draws"));
        }
        Ok(())
    }

    pub fn dims(&self) -> Dims {
        Dims {
            d_dense: self.d_dense,
            d_delta: 1 + self.event_delta as usize,
            n_sparse: self.n_sparse,
            d_static_dense: self.n_groups,
            d_static_delta: 1,
            num_classes: NUM_CLASSES,
        }
    }

    fn group_bias(&self, g: usize) -> f64 {
        if self.n_groups == 1 {
            0.0
        } else {
            -1.0 + 2.0 * g as f64 / (self.n_groups - 1) as f64
        }
    }

    /// Sequence and latent score of draw `index`; labels are assigned
    /// separately once the thresholds are known.
    fn draw_raw(&self, index: u64) -> (SequenceSample, f64, rng::Rng) {
        let mut r = rng::stream(self.seed, index);
        let t = r.gen_range(self.t_min..=self.t_max);
        let mut times = Vec::with_capacity(t);
        let mut now = 0usize;
        for s in 0..t {
            if s > 0 {
                now += r.gen_range(1..=self.gap_max);
            }
            times.push(now);
        }
        let t_pred = now + r.gen_range(1..=self.static_gap_max);
        let group = r.gen_range(0..self.n_groups);

        let mut dense = Vec::with_capacity(t);
        let mut delta = Vec::with_capacity(t);
        let mut mask = Vec::with_capacity(t);
        let mut value = Vec::with_capacity(t);
        let mut sums = vec![0.0; self.n_sparse];
        let mut last_event = 0usize;
        for s in 0..t {
            dense.push((0..self.d_dense).map(|_| StandardNormal.sample(&mut r)).collect::<Vec<f64>>());
            let mut m = Vec::with_capacity(self.n_sparse);
            let mut v = Vec::with_capacity(self.n_sparse);
            for k in 0..self.n_sparse {
                let on = s == 0 || r.gen_bool(self.sparsity);
                let x = if on { r.gen_range(-1.0..1.0) } else { 0.0 };
                if on {
                    let age = (t_pred - times[s]) as f64 / self.tau;
                    sums[k] += x / (std::f64::consts::E + age).ln();
                }
                m.push(on);
                v.push(x);
            }
            let gap = if s == 0 { 0 } else { times[s] - times[s - 1] };
            let mut d = vec![gap as f64];
            if self.event_delta {
                d.push((times[s] - times[last_event]) as f64);
            }
            if m.iter().any(|&b| b) {
                last_event = s;
            }
            delta.push(d);
            mask.push(m);
            value.push(v);
        }
        let mut score = self.static_effect * self.group_bias(group);
        for (k, s) in sums.iter().enumerate() {
            score += self.weights[k % self.weights.len()] * s;
        }
        if self.n_sparse >= 2 {
            score += self.interaction * sums[0] * sums[1];
        }
        let mut static_dense = vec![0.0; self.n_groups];
        static_dense[group] = 1.0;
        let sample = SequenceSample {
            dense,
            delta,
            mask,
            value,
            static_dense,
            static_delta: vec![(t_pred - now) as f64],
            label: 0,
            origin: index,
        };
        (sample, score, r)
    }

    /// Tercile cut points of the score over the calibration draws.
    pub fn thresholds(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let mut scores: Vec<f64> = (0..self.calibration_draws as u64)
            .map(|i| self.draw_raw(CALIBRATION_OFFSET + i).1)
            .collect();
        scores.sort_by(f64::total_cmp);
        Ok((1..NUM_CLASSES)
            .map(|c| scores[c * scores.len() / NUM_CLASSES])
            .collect())
    }

    /// Generate draw `index` given the class cut points.
    pub fn draw(&self, index: u64, thresholds: &[f64]) -> SynthDraw {
        let (mut sample, score, mut r) = self.draw_raw(index);
        let clean_label = classify(score, thresholds);
        sample.label = if self.label_noise > 0.0 && r.gen_bool(self.label_noise) {
            r.gen_range(0..NUM_CLASSES)
        } else {
            clean_label
        };
        SynthDraw {
            sample,
            score,
            clean_label,
        }
    }
}

/// Class of a score given ascending cut points.
pub fn classify(score: f64, thresholds: &[f64]) -> usize {
    thresholds.iter().filter(|&&t| score >= t).count()
}

/// Generate train/validation/test splits. Draw indices are consecutive
/// across splits, so changing a split size never alters another split's
/// earlier draws.
pub fn generate(spec: &SynthSpec) -> Result<DatasetSplits> {
    let thresholds = spec.thresholds()?;
    let gen = |from: usize, n: usize| -> Vec<SequenceSample> {
        (from..from + n)
            .map(|i| spec.draw(i as u64, &thresholds).sample)
            .collect()
    };
    let train = gen(0, spec.n_train);
    let val = gen(spec.n_train, spec.n_val);
    let test = gen(spec.n_train + spec.n_val, spec.n_test);
    let manifest = Manifest {
        splits: DatasetSplits::summaries(&train, &val, &test, NUM_CLASSES),
        source: Source::Synthetic {
            spec: spec.clone(),
            thresholds,
        },
        dims: spec.dims(),
        dense_features: (0..spec.d_dense).map(|i| format!("noise_{i}")).collect(),
        sparse_features: (0..spec.n_sparse).map(|k| format!("event_{k}")).collect(),
        dropped_overlap: 0,
    };
    Ok(DatasetSplits {
        train,
        val,
        test,
        manifest,
    })
}
