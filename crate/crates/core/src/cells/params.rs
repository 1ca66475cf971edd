use serde::{Deserialize, Serialize};

use super::config::{AggregationMode, CellConfig};
use crate::error::Result;
use crate::numeric::{glorot_uniform, orthogonal, Matrix, Rng};
use crate::params::ParamSet;

/// Number of gates in an LSTM-style block, stacked as `[f, i, c, o]`.
pub const GATES: usize = 4;

/// Stacked gate weights of an LSTM-style block with `H` units.
///
/// Rows `[0, H)` hold the forget gate, `[H, 2H)` the input gate, `[2H, 3H)`
/// the candidate memory and `[3H, 4H)` the output gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    /// `4H x hidden_full`, applied to the previous full hidden state.
    pub w_h: Matrix,
    /// `4H x input`.
    pub w_x: Matrix,
    /// `4H x 1`.
    pub b: Matrix,
}

impl GateParams {
    pub fn units(&self) -> usize {
        self.b.rows() / GATES
    }

    /// Glorot-uniform input weights, orthogonal recurrent weights, zero
    /// biases except a forget-gate bias of one.
    pub fn init(units: usize, recurrent_in: usize, input: usize, rng: &mut Rng) -> Result<Self> {
        let rows = GATES * units;
        let w_x = if input == 0 {
            Matrix::zeros(rows, 0)
        } else {
            glorot_uniform(input, rows, rng)?
        };
        let w_h = orthogonal(rows, recurrent_in, rng)?;
        let mut b = Matrix::zeros(rows, 1);
        for r in 0..units {
            b.set(r, 0, 1.0);
        }
        Ok(GateParams { w_h, w_x, b })
    }

    fn push_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix)>) {
        out.push((format!("{prefix}.w_h"), &self.w_h));
        out.push((format!("{prefix}.w_x"), &self.w_x));
        out.push((format!("{prefix}.b"), &self.b));
    }

    fn push_tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix)>) {
        out.push((format!("{prefix}.w_h"), &mut self.w_h));
        out.push((format!("{prefix}.w_x"), &mut self.w_x));
        out.push((format!("{prefix}.b"), &mut self.b));
    }
}

/// Short-term memory extraction `tanh(W C + b)` plus the decay weights
/// `alpha` over the delta features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaDecayParams {
    pub w: Matrix,
    pub b: Matrix,
    /// `n_delta x 1`.
    pub alpha: Matrix,
}

impl DeltaDecayParams {
    pub fn init(units: usize, n_delta: usize, rng: &mut Rng) -> Result<Self> {
        Ok(DeltaDecayParams {
            w: glorot_uniform(units, units, rng)?,
            b: Matrix::zeros(units, 1),
            alpha: Matrix::from_fn(n_delta, 1, |_, _| 1.0),
        })
    }

    fn push_tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix)>) {
        out.push((format!("{prefix}.w"), &self.w));
        out.push((format!("{prefix}.b"), &self.b));
        out.push((format!("{prefix}.alpha"), &self.alpha));
    }

    fn push_tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix)>) {
        out.push((format!("{prefix}.w"), &mut self.w));
        out.push((format!("{prefix}.b"), &mut self.b));
        out.push((format!("{prefix}.alpha"), &mut self.alpha));
    }
}

/// Weights of the dense-layer aggregation over `m` sparse hidden states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregationParams {
    /// `hidden_sparse x (m * hidden_sparse)`; column block `k` reads feature `k`.
    pub w_h: Matrix,
    pub b_h: Matrix,
    /// Output-gate aggregation weights, present only when `o_t` is computed.
    pub w_o: Option<Matrix>,
    pub b_o: Option<Matrix>,
}

/// All trainable tensors of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub dense: GateParams,
    pub decay: Option<DeltaDecayParams>,
    /// One entry per sparse feature, or a single shared entry.
    pub sparse: Vec<GateParams>,
    pub aggregation: Option<AggregationParams>,
}

impl CellParams {
    /// Draw fresh weights. Draw order is dense gates, decay, sparse gates,
    /// aggregation, so configurations that differ only in later blocks share
    /// the earlier weights for the same generator state.
    pub fn init(cfg: &CellConfig, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        let hidden_full = cfg.hidden_full();
        let dense = GateParams::init(cfg.hidden_dense, hidden_full, cfg.input_dim, rng)?;
        let decay = if cfg.n_delta > 0 {
            Some(DeltaDecayParams::init(cfg.hidden_dense, cfg.n_delta, rng)?)
        } else {
            None
        };
        let sparse = (0..cfg.sparse_param_sets())
            .map(|_| GateParams::init(cfg.hidden_sparse, hidden_full, 1, rng))
            .collect::<Result<Vec<_>>>()?;
        let aggregation = if cfg.n_sparse > 0 && cfg.aggregation == AggregationMode::DenseLayer {
            let hs = cfg.hidden_sparse;
            let fan_in = cfg.n_sparse * hs;
            let w_h = glorot_uniform(fan_in, hs, rng)?;
            let (w_o, b_o) = if cfg.output_gate_aggregate {
                (Some(glorot_uniform(fan_in, hs, rng)?), Some(Matrix::zeros(hs, 1)))
            } else {
                (None, None)
            };
            Some(AggregationParams {
                w_h,
                b_h: Matrix::zeros(hs, 1),
                w_o,
                b_o,
            })
        } else {
            None
        };
        Ok(CellParams {
            dense,
            decay,
            sparse,
            aggregation,
        })
    }

    /// Parameters driving sparse feature `k`.
    #[inline]
    pub fn sparse_for(&self, k: usize) -> &GateParams {
        if self.sparse.len() == 1 {
            &self.sparse[0]
        } else {
            &self.sparse[k]
        }
    }

    #[inline]
    pub(crate) fn sparse_index(&self, k: usize) -> usize {
        if self.sparse.len() == 1 {
            0
        } else {
            k
        }
    }

    pub(crate) fn named_tensors<'a>(&'a self, prefix: &str) -> Vec<(String, &'a Matrix)> {
        let mut out = Vec::new();
        self.dense.push_tensors(&format!("{prefix}dense"), &mut out);
        if let Some(d) = &self.decay {
            d.push_tensors(&format!("{prefix}decay"), &mut out);
        }
        for (k, s) in self.sparse.iter().enumerate() {
            s.push_tensors(&format!("{prefix}sparse.{k}"), &mut out);
        }
        if let Some(a) = &self.aggregation {
            out.push((format!("{prefix}aggregate.w_h"), &a.w_h));
            out.push((format!("{prefix}aggregate.b_h"), &a.b_h));
            if let (Some(w), Some(b)) = (&a.w_o, &a.b_o) {
                out.push((format!("{prefix}aggregate.w_o"), w));
                out.push((format!("{prefix}aggregate.b_o"), b));
            }
        }
        out
    }

    pub(crate) fn named_tensors_mut<'a>(&'a mut self, prefix: &str) -> Vec<(String, &'a mut Matrix)> {
        let mut out = Vec::new();
        self.dense.push_tensors_mut(&format!("{prefix}dense"), &mut out);
        if let Some(d) = &mut self.decay {
            d.push_tensors_mut(&format!("{prefix}decay"), &mut out);
        }
        for (k, s) in self.sparse.iter_mut().enumerate() {
            s.push_tensors_mut(&format!("{prefix}sparse.{k}"), &mut out);
        }
        if let Some(a) = &mut self.aggregation {
            out.push((format!("{prefix}aggregate.w_h"), &mut a.w_h));
            out.push((format!("{prefix}aggregate.b_h"), &mut a.b_h));
            if let (Some(w), Some(b)) = (&mut a.w_o, &mut a.b_o) {
                out.push((format!("{prefix}aggregate.w_o"), w));
                out.push((format!("{prefix}aggregate.b_o"), b));
            }
        }
        out
    }
}

impl ParamSet for CellParams {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        self.named_tensors("")
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        self.named_tensors_mut("")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng::seeded;

    #[test]
    fn shapes_follow_config() {
        let mut cfg = CellConfig::stlstm(3, 4, 5, 2, 3);
        let p = CellParams::init(&cfg, &mut seeded(0)).unwrap();
        assert_eq!(p.dense.w_h.shape(), (16, 9));
        assert_eq!(p.dense.w_x.shape(), (16, 3));
        assert_eq!(p.decay.as_ref().unwrap().alpha.shape(), (2, 1));
        assert_eq!(p.sparse.len(), 3);
        assert_eq!(p.sparse[0].w_h.shape(), (20, 9));
        assert_eq!(p.sparse[0].w_x.shape(), (20, 1));
        assert_eq!(p.aggregation.as_ref().unwrap().w_h.shape(), (5, 15));

        cfg.share_sparse_weights = true;
        cfg.aggregation = AggregationMode::Max;
        let p = CellParams::init(&cfg, &mut seeded(0)).unwrap();
        assert_eq!(p.sparse.len(), 1);
        assert!(p.aggregation.is_none());
        assert!(std::ptr::eq(p.sparse_for(2), &p.sparse[0]));
    }

    #[test]
    fn tlstm_and_sparse_free_stlstm_draw_identical_weights() {
        let t = CellParams::init(&CellConfig::tlstm(3, 6, 1), &mut seeded(9)).unwrap();
        let s = CellParams::init(&CellConfig::stlstm(3, 6, 4, 1, 0), &mut seeded(9)).unwrap();
        assert_eq!(t, s);
    }

    #[test]
    fn tensor_names_are_unique() {
        let mut cfg = CellConfig::stlstm(2, 3, 3, 2, 2);
        cfg.output_gate_aggregate = true;
        let p = CellParams::init(&cfg, &mut seeded(1)).unwrap();
        let names: Vec<String> = p.tensors().into_iter().map(|(n, _)| n).collect();
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(names.len(), dedup.len());
        assert!(names.contains(&"aggregate.w_o".to_string()));
    }
}
