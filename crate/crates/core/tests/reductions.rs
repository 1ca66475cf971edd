//! The STLSTM collapses to TLSTM without sparse features, and TLSTM to LSTM
//! when elapsed times carry no information.

mod common;

use common::{max_abs_diff, oracle, perturb, random_sample};
use stlstm::cells::AggregationMode;
use stlstm::data::SequenceSample;
use stlstm::model::{CellKind, Model, ModelConfig};
use stlstm::numeric::rng::seeded;
use stlstm::ParamSet;

const DRAWS: u64 = 100;

fn base(cell: CellKind, d_delta: usize) -> ModelConfig {
    ModelConfig {
        cell,
        upper_layers: 1,
        hidden_dense: 3,
        hidden_sparse: 2,
        d_dense: 3,
        d_delta,
        n_sparse: 0,
        d_static_dense: 4,
        d_static_delta: 1,
        embedding_dim: 2,
        num_classes: 3,
        aggregation: AggregationMode::DenseLayer,
        ..ModelConfig::default()
    }
}

/// A model of `cfg` carrying `src`'s weights; the layouts must agree.
fn with_weights_of(cfg: ModelConfig, src: &Model) -> Model {
    let mut m = Model::new(cfg).unwrap();
    let names: Vec<String> = m.params().tensors().into_iter().map(|(n, _)| n).collect();
    let want: Vec<String> = src.params().tensors().into_iter().map(|(n, _)| n).collect();
    assert_eq!(names, want);
    let from = src.params().tensors();
    for ((_, dst), (_, s)) in m.params_mut().tensors_mut().into_iter().zip(from) {
        assert_eq!(dst.shape(), s.shape());
        *dst = s.clone();
    }
    m
}

fn sample(d: u64, d_delta: usize) -> SequenceSample {
    let mut rng = seeded(500 + d);
    random_sample(&mut rng, 2 + (d as usize % 11), 3, d_delta, 0, 4, 1, 3, 0.0)
}

#[test]
fn stlstm_without_sparse_features_is_tlstm() {
    for d in 0..DRAWS {
        let mut st = Model::new(base(CellKind::Stlstm, 2)).unwrap();
        perturb(&mut st, d, 1.0);
        let tl = with_weights_of(base(CellKind::Tlstm, 2), &st);
        let s = sample(d, 2);
        let a = st.forward(&s).unwrap().1.logits;
        let b = tl.forward(&s).unwrap().1.logits;
        let c = oracle::logits(&tl, &s);
        assert_eq!(a, b, "draw {d}");
        assert!(max_abs_diff(&a, &c) < 1e-10, "draw {d}");
    }
}

#[test]
fn stlstm_without_deltas_or_sparse_features_is_lstm() {
    for d in 0..DRAWS {
        let mut st = Model::new(base(CellKind::Stlstm, 0)).unwrap();
        perturb(&mut st, d, 1.0);
        let ls = with_weights_of(base(CellKind::Lstm, 0), &st);
        let s = sample(d, 0);
        let a = st.forward(&s).unwrap().1.logits;
        let b = ls.forward(&s).unwrap().1.logits;
        assert!(max_abs_diff(&a, &b) < 1e-12, "draw {d}");
    }
}

#[test]
fn zero_elapsed_time_leaves_memory_undecayed() {
    // With every delta at zero the decomposition is the identity, so TLSTM
    // and LSTM agree exactly when sharing gate weights.
    for d in 0..DRAWS {
        let mut tl = Model::new(base(CellKind::Tlstm, 2)).unwrap();
        perturb(&mut tl, 7000 + d, 1.0);
        let mut s = sample(d, 2);
        for row in &mut s.delta {
            row.iter_mut().for_each(|x| *x = 0.0);
        }
        let mut ls = Model::new(base(CellKind::Lstm, 2)).unwrap();
        let src = tl.params().tensors();
        for (name, dst) in ls.params_mut().tensors_mut() {
            let (_, t) = src.iter().find(|(n, _)| *n == name).unwrap();
            *dst = (*t).clone();
        }
        let a = tl.forward(&s).unwrap().1.logits;
        let b = ls.forward(&s).unwrap().1.logits;
        assert_eq!(a, b, "draw {d}");
    }
}

#[test]
fn negative_alignment_with_alpha_is_clamped() {
    // alpha . x_delta <= 0 gives g = 1, the same as no elapsed time.
    let mut tl = Model::new(base(CellKind::Tlstm, 2)).unwrap();
    perturb(&mut tl, 3, 1.0);
    for (name, t) in tl.params_mut().tensors_mut() {
        if name == "layer0.decay.alpha" {
            t.fill(-0.5);
        }
    }
    let s = sample(9, 2);
    let mut z = s.clone();
    for row in &mut z.delta {
        row.iter_mut().for_each(|x| *x = 0.0);
    }
    assert_eq!(tl.forward(&s).unwrap().1.logits, tl.forward(&z).unwrap().1.logits);
}
