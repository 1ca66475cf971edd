use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::cells::{CellParams, DeltaDecayParams};
use crate::error::Result;
use crate::numeric::{glorot_uniform, rng, Matrix};
use crate::params::ParamSet;

/// Generator stream reserved for weight initialization.
pub(crate) const INIT_STREAM: u64 = 1;

/// Sequence-level heads and the decoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    /// Static dense embedding `tanh(W x + b)`.
    pub embed_w: Option<Matrix>,
    pub embed_b: Option<Matrix>,
    /// Decomposition and decay of the final hidden state by the static
    /// delta features.
    pub static_delta: Option<DeltaDecayParams>,
    pub out_w: Matrix,
    pub out_b: Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<CellParams>,
    pub head: HeadParams,
}

/// Structure-mirroring gradient accumulator.
pub type Gradients = ModelParams;

impl ModelParams {
    pub fn init(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng::stream(cfg.seed, INIT_STREAM);
        let layers = cfg
            .cell_configs()
            .iter()
            .map(|c| CellParams::init(c, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let top = cfg.top_hidden();
        let (embed_w, embed_b) = if cfg.d_static_dense > 0 {
            (
                Some(glorot_uniform(cfg.d_static_dense, cfg.embedding_dim, &mut rng)?),
                Some(Matrix::zeros(cfg.embedding_dim, 1)),
            )
        } else {
            (None, None)
        };
        let static_delta = if cfg.d_static_delta > 0 {
            Some(DeltaDecayParams::init(top, cfg.d_static_delta, &mut rng)?)
        } else {
            None
        };
        let out_w = glorot_uniform(top + cfg.embedding_dim, cfg.num_classes, &mut rng)?;
        Ok(ModelParams {
            layers,
            head: HeadParams {
                embed_w,
                embed_b,
                static_delta,
                out_w,
                out_b: Matrix::zeros(cfg.num_classes, 1),
            },
        })
    }
}

impl ParamSet for ModelParams {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.extend(l.named_tensors(&format!("layer{i}.")));
        }
        let h = &self.head;
        if let (Some(w), Some(b)) = (&h.embed_w, &h.embed_b) {
            out.push(("head.embed.w".into(), w));
            out.push(("head.embed.b".into(), b));
        }
        if let Some(sd) = &h.static_delta {
            out.push(("head.static_delta.w".into(), &sd.w));
            out.push(("head.static_delta.b".into(), &sd.b));
            out.push(("head.static_delta.alpha".into(), &sd.alpha));
        }
        out.push(("head.out.w".into(), &h.out_w));
        out.push(("head.out.b".into(), &h.out_b));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.extend(l.named_tensors_mut(&format!("layer{i}.")));
        }
        let h = &mut self.head;
        if let (Some(w), Some(b)) = (&mut h.embed_w, &mut h.embed_b) {
            out.push(("head.embed.w".into(), w));
            out.push(("head.embed.b".into(), b));
        }
        if let Some(sd) = &mut h.static_delta {
            out.push(("head.static_delta.w".into(), &mut sd.w));
            out.push(("head.static_delta.b".into(), &mut sd.b));
            out.push(("head.static_delta.alpha".into(), &mut sd.alpha));
        }
        out.push(("head.out.w".into(), &mut h.out_w));
        out.push(("head.out.b".into(), &mut h.out_b));
        out
    }
}
