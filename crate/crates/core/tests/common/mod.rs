#![allow(dead_code)]
pub mod oracle;

use rand::Rng;
use stlstm::cells::AggregationMode;
use stlstm::data::SequenceSample;
use stlstm::model::{CellKind, ModelConfig};
use stlstm::numeric::rng::{seeded, Rng as ChaRng};

/// Random sample with the given feature widths; sparse masks are on at the
/// first step and with probability `p_present` afterwards.
pub fn random_sample(
    rng: &mut ChaRng,
    t: usize,
    d_dense: usize,
    d_delta: usize,
    m: usize,
    d_static_dense: usize,
    d_static_delta: usize,
    classes: usize,
    p_present: f64,
) -> SequenceSample {
    let dense = (0..t)
        .map(|_| (0..d_dense).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let delta = (0..t)
        .map(|s| {
            (0..d_delta)
                .map(|_| if s == 0 { 0.0 } else { rng.gen_range(0.5..5.0) })
                .collect()
        })
        .collect();
    let mask: Vec<Vec<bool>> = (0..t)
        .map(|s| (0..m).map(|_| s == 0 || rng.gen_bool(p_present)).collect())
        .collect();
    let value = mask
        .iter()
        .map(|row| {
            row.iter()
                .map(|&on| if on { rng.gen_range(-1.5..1.5) } else { 0.0 })
                .collect()
        })
        .collect();
    let mut static_dense = vec![0.0; d_static_dense];
    if d_static_dense > 0 {
        static_dense[rng.gen_range(0..d_static_dense)] = 1.0;
    }
    SequenceSample {
        dense,
        delta,
        mask,
        value,
        static_dense,
        static_delta: (0..d_static_delta).map(|_| rng.gen_range(0.5..10.0)).collect(),
        label: rng.gen_range(0..classes),
        origin: 0,
    }
}

/// The small configuration used for gradient verification.
pub fn tiny_config(cell: CellKind, aggregation: AggregationMode, seed: u64) -> ModelConfig {
    ModelConfig {
        cell,
        upper_layers: 1,
        hidden_dense: 4,
        hidden_sparse: 4,
        d_dense: 3,
        d_delta: 2,
        n_sparse: 2,
        d_static_dense: 3,
        d_static_delta: 1,
        embedding_dim: 3,
        num_classes: 3,
        aggregation,
        seed,
        ..ModelConfig::default()
    }
}

pub fn tiny_samples(seed: u64, n: usize, t: usize) -> Vec<SequenceSample> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| random_sample(&mut rng, t, 3, 2, 2, 3, 1, 3, 0.5))
        .collect()
}

/// Redraw every weight of `model` uniformly from `[-scale, scale]`.
pub fn perturb(model: &mut stlstm::model::Model, seed: u64, scale: f64) {
    use stlstm::ParamSet;
    let mut rng = seeded(seed);
    for (_, t) in model.params_mut().tensors_mut() {
        for v in t.as_mut_slice() {
            *v = rng.gen_range(-scale..scale);
        }
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
