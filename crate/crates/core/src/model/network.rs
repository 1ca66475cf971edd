use rayon::prelude::*;

use super::config::{CellKind, ModelConfig};
use super::params::{Gradients, ModelParams};
use crate::cells::{backward_sequence, forward_sequence, CellConfig, SequenceTrace, StepInput};
use crate::cells::ops::{decay_argument, decay_of, decay_slope, short_term};
use crate::data::SequenceSample;
use crate::error::{Error, Result};
use crate::numeric::{softmax, softmax_cross_entropy};
use crate::params::ParamSet;

/// A stacked recurrent classifier with its weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    cells: Vec<CellConfig>,
    params: ModelParams,
    version: u64,
}

#[derive(Clone, Debug)]
struct StaticDeltaCache {
    h_t: Vec<f64>,
    x: Vec<f64>,
    s: f64,
    g: f64,
    short: Vec<f64>,
}

/// Everything the reverse pass needs from a forward pass.
#[derive(Clone, Debug)]
pub struct ModelCache {
    traces: Vec<SequenceTrace>,
    static_delta: Option<StaticDeltaCache>,
    static_dense_in: Vec<f64>,
    embedding: Vec<f64>,
    decoder_in: Vec<f64>,
    pub logits: Vec<f64>,
    version: u64,
}

impl ModelCache {
    /// Final hidden state of the top layer, before the static delta head.
    pub fn final_hidden(&self) -> &[f64] {
        &self.traces.last().unwrap().states.last().unwrap().h_full
    }

    /// Decoder input `[h_T*, embedding]`.
    pub fn decoder_input(&self) -> &[f64] {
        &self.decoder_in
    }
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        let params = ModelParams::init(&config)?;
        Ok(Model {
            cells: config.cell_configs(),
            config,
            params,
            version: 0,
        })
    }

    pub fn from_parts(config: ModelConfig, params: ModelParams) -> Result<Self> {
        config.validate()?;
        let template = ModelParams::init(&config)?;
        let want: Vec<_> = template.tensors().into_iter().map(|(n, t)| (n, t.shape())).collect();
        let got: Vec<_> = params.tensors().into_iter().map(|(n, t)| (n, t.shape())).collect();
        if want != got {
            return Err(Error::invalid("parameter layout does not match the model config"));
        }
        Ok(Model {
            cells: config.cell_configs(),
            config,
            params,
            version: 0,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn cell_configs(&self) -> &[CellConfig] {
        &self.cells
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Mutable access invalidates caches from earlier forward passes.
    pub fn params_mut(&mut self) -> &mut ModelParams {
        self.version += 1;
        &mut self.params
    }

    fn check_sample(&self, s: &SequenceSample) -> Result<()> {
        let c = &self.config;
        if s.is_empty() {
            return Err(Error::invalid("empty sequence"));
        }
        let mismatch = |what: &str, got: usize, want: usize| {
            Err(Error::invalid(format!("sample has {got} {what} features, model expects {want}")))
        };
        if s.d_dense() != c.d_dense {
            return mismatch("dense", s.d_dense(), c.d_dense);
        }
        if c.cell != CellKind::Lstm && c.d_delta > 0 && s.d_delta() != c.d_delta {
            return mismatch("delta", s.d_delta(), c.d_delta);
        }
        if s.n_sparse() != c.n_sparse {
            return mismatch("sparse", s.n_sparse(), c.n_sparse);
        }
        if c.d_static_dense > 0 && s.static_dense.len() != c.d_static_dense {
            return mismatch("static dense", s.static_dense.len(), c.d_static_dense);
        }
        if c.d_static_delta > 0 && s.static_delta.len() != c.d_static_delta {
            return mismatch("static delta", s.static_delta.len(), c.d_static_delta);
        }
        if s.label >= c.num_classes {
            return Err(Error::invalid(format!("label {} out of range", s.label)));
        }
        Ok(())
    }

    /// Per-step inputs of the bottom layer.
    pub fn step_inputs(&self, s: &SequenceSample) -> Vec<StepInput> {
        let bottom = &self.cells[0];
        let filled = if self.config.uses_sparse_cells() {
            None
        } else {
            Some(s.forward_filled())
        };
        (0..s.len())
            .map(|t| {
                let mut x_dense = s.dense[t].clone();
                if let Some(f) = &filled {
                    x_dense.extend_from_slice(&f[t]);
                }
                StepInput {
                    x_dense,
                    x_delta: if bottom.n_delta > 0 { s.delta[t].clone() } else { Vec::new() },
                    sparse_mask: if bottom.n_sparse > 0 { s.mask[t].clone() } else { Vec::new() },
                    sparse_value: if bottom.n_sparse > 0 { s.value[t].clone() } else { Vec::new() },
                }
            })
            .collect()
    }

    /// Class probabilities for `sample` and the cache for [`Model::backward`].
    pub fn forward(&self, sample: &SequenceSample) -> Result<(Vec<f64>, ModelCache)> {
        self.forward_with(&self.params, sample)
    }

    /// Forward pass using `params` in place of the model's own weights.
    /// `params` must have the model's layout.
    pub fn forward_with(
        &self,
        params: &ModelParams,
        sample: &SequenceSample,
    ) -> Result<(Vec<f64>, ModelCache)> {
        self.check_sample(sample)?;
        let mut traces = Vec::with_capacity(self.cells.len());
        let mut inputs = self.step_inputs(sample);
        for (cfg, p) in self.cells.iter().zip(&params.layers) {
            let trace = forward_sequence(cfg, p, &inputs)?;
            inputs = trace.outputs().map(|h| StepInput::dense(h.to_vec())).collect();
            traces.push(trace);
        }
        let h_t = traces.last().unwrap().states.last().unwrap().h_full.clone();
        let head = &params.head;

        let (h_star, static_delta) = match &head.static_delta {
            Some(p) => {
                let x = sample.static_delta.clone();
                let s = decay_argument(&x, p.alpha.as_slice());
                let g = decay_of(s);
                let short = short_term(&h_t, &p.w, &p.b);
                let h_star = h_t.iter().zip(&short).map(|(h, hs)| h + hs * (g - 1.0)).collect();
                (h_star, Some(StaticDeltaCache { h_t, x, s, g, short }))
            }
            None => (h_t, None),
        };

        let (static_dense_in, embedding) = match (&head.embed_w, &head.embed_b) {
            (Some(w), Some(b)) => {
                let x = sample.static_dense.clone();
                let e = short_term(&x, w, b);
                (x, e)
            }
            _ => (Vec::new(), Vec::new()),
        };

        let mut decoder_in = h_star;
        decoder_in.extend_from_slice(&embedding);
        let mut logits = head.out_b.as_slice().to_vec();
        head.out_w.matvec_acc(&decoder_in, &mut logits);
        let probs = softmax(&logits);
        Ok((
            probs,
            ModelCache {
                traces,
                static_delta,
                static_dense_in,
                embedding,
                decoder_in,
                logits,
                version: self.version,
            },
        ))
    }

    pub fn predict_proba(&self, sample: &SequenceSample) -> Result<Vec<f64>> {
        Ok(self.forward(sample)?.0)
    }

    pub fn predict(&self, sample: &SequenceSample) -> Result<usize> {
        let p = self.predict_proba(sample)?;
        Ok(argmax(&p))
    }

    /// Cross-entropy loss of one sample.
    pub fn loss(&self, sample: &SequenceSample) -> Result<f64> {
        self.loss_with(&self.params, sample)
    }

    pub fn loss_with(&self, params: &ModelParams, sample: &SequenceSample) -> Result<f64> {
        let (_, cache) = self.forward_with(params, sample)?;
        Ok(softmax_cross_entropy(&cache.logits, sample.label)?.0)
    }

    /// Gradients of the loss with respect to every parameter, given the
    /// loss gradient on the logits.
    pub fn backward(&self, cache: &ModelCache, dlogits: &[f64]) -> Result<Gradients> {
        if cache.version != self.version {
            return Err(Error::invalid("stale forward cache: parameters changed since forward"));
        }
        let mut grads = self.params.zeros_like();
        let head = &self.params.head;
        let gh = &mut grads.head;

        gh.out_w.add_outer(dlogits, &cache.decoder_in);
        for (b, d) in gh.out_b.as_mut_slice().iter_mut().zip(dlogits) {
            *b += d;
        }
        let mut d_in = vec![0.0; cache.decoder_in.len()];
        head.out_w.matvec_t_acc(dlogits, &mut d_in);
        let top = self.cells.last().unwrap().hidden_full();
        let (dh_star, de) = d_in.split_at(top);

        if let (Some(gw), Some(gb)) = (gh.embed_w.as_mut(), gh.embed_b.as_mut()) {
            let dpre: Vec<f64> = de
                .iter()
                .zip(&cache.embedding)
                .map(|(d, e)| d * (1.0 - e * e))
                .collect();
            gw.add_outer(&dpre, &cache.static_dense_in);
            for (b, d) in gb.as_mut_slice().iter_mut().zip(&dpre) {
                *b += d;
            }
        }

        let mut dh_t = dh_star.to_vec();
        if let (Some(sc), Some(p), Some(gsd)) =
            (&cache.static_delta, &head.static_delta, gh.static_delta.as_mut())
        {
            let mut dg = 0.0;
            let mut dpre = vec![0.0; top];
            for j in 0..top {
                dg += dh_star[j] * sc.short[j];
                dpre[j] = dh_star[j] * (sc.g - 1.0) * (1.0 - sc.short[j] * sc.short[j]);
            }
            gsd.w.add_outer(&dpre, &sc.h_t);
            for (b, d) in gsd.b.as_mut_slice().iter_mut().zip(&dpre) {
                *b += d;
            }
            p.w.matvec_t_acc(&dpre, &mut dh_t);
            if sc.s > 0.0 {
                let ds = dg * decay_slope(sc.s, sc.g);
                for (a, x) in gsd.alpha.as_mut_slice().iter_mut().zip(&sc.x) {
                    *a += ds * x;
                }
            }
        }

        // Backpropagate through the stack, top layer first.
        let steps = cache.traces[0].len();
        let mut d_outputs = vec![vec![0.0; top]; steps];
        d_outputs[steps - 1] = dh_t;
        for l in (0..self.cells.len()).rev() {
            let dx = backward_sequence(
                &self.cells[l],
                &self.params.layers[l],
                &cache.traces[l],
                &d_outputs,
                &mut grads.layers[l],
            );
            d_outputs = dx;
        }
        Ok(grads)
    }

    /// Loss and parameter gradients of one sample.
    pub fn loss_and_grad(&self, sample: &SequenceSample) -> Result<(f64, Gradients)> {
        let (_, cache) = self.forward(sample)?;
        let (loss, dlogits) = softmax_cross_entropy(&cache.logits, sample.label)?;
        Ok((loss, self.backward(&cache, &dlogits)?))
    }

    /// Mean loss and mean gradient over a batch.
    ///
    /// Per-sample passes run in parallel; the reduction is sequential in
    /// batch order so the result does not depend on scheduling.
    pub fn batch_loss_and_grad(&self, batch: &[&SequenceSample]) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let parts: Vec<(f64, Gradients)> = batch
            .par_iter()
            .map(|s| self.loss_and_grad(s))
            .collect::<Result<Vec<_>>>()?;
        let mut iter = parts.into_iter();
        let (mut loss, mut grads) = iter.next().unwrap();
        for (l, g) in iter {
            loss += l;
            grads.add_assign(&g);
        }
        let n = batch.len() as f64;
        grads.scale(1.0 / n);
        Ok((loss / n, grads))
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
