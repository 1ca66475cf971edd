//! Full cell transition with cached intermediates and its exact reverse pass.

use serde::{Deserialize, Serialize};

use super::config::{AggregationMode, CellConfig};
use super::ops::{
    argmax_per_component, decay_argument, decay_of, decay_slope, dense_aggregate,
    lstm_gate_step, short_term, GateOutput, SparseState,
};
use super::params::{CellParams, GateParams};
use crate::error::{Error, Result};
use crate::numeric::Activation;

/// Inputs of one time step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInput {
    pub x_dense: Vec<f64>,
    pub x_delta: Vec<f64>,
    pub sparse_mask: Vec<bool>,
    /// Ignored where the mask is off.
    pub sparse_value: Vec<f64>,
}

impl StepInput {
    pub fn dense(x: Vec<f64>) -> Self {
        StepInput {
            x_dense: x,
            ..Default::default()
        }
    }
}

/// Recurrent state of one cell layer.
#[derive(Clone, Debug, PartialEq)]
pub struct StlstmState {
    pub h_dense: Vec<f64>,
    pub c_dense: Vec<f64>,
    /// Dense output gate of the last step (only consumed by `o_full`).
    pub o_dense: Vec<f64>,
    pub sparse: Vec<SparseState>,
    /// `[h_dense, aggregate(h_sparse_1..m)]`; the layer output.
    pub h_full: Vec<f64>,
    /// `[o_dense, aggregate(o_sparse_1..m)]`, when enabled in the config.
    pub o_full: Option<Vec<f64>>,
}

impl StlstmState {
    pub fn zeros(cfg: &CellConfig) -> Self {
        StlstmState {
            h_dense: vec![0.0; cfg.hidden_dense],
            c_dense: vec![0.0; cfg.hidden_dense],
            o_dense: vec![0.0; cfg.hidden_dense],
            sparse: (0..cfg.n_sparse)
                .map(|_| SparseState::zeros(cfg.hidden_sparse))
                .collect(),
            h_full: vec![0.0; cfg.hidden_full()],
            o_full: None,
        }
    }
}

#[derive(Clone, Debug)]
struct DecayCache {
    x_delta: Vec<f64>,
    /// Clamped argument `max(0, alpha . x)`.
    s: f64,
    g: f64,
    short: Vec<f64>,
}

#[derive(Clone, Debug)]
struct SparseCache {
    value: f64,
    c_prev: Vec<f64>,
    gates: GateOutput,
}

#[derive(Clone, Debug)]
enum AggCache {
    None,
    Average,
    Max(Vec<usize>),
    Dense { concat: Vec<f64>, out: Vec<f64> },
}

/// Intermediate values of one forward step needed by [`backward_step`].
#[derive(Clone, Debug)]
pub struct StepCache {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    x: Vec<f64>,
    decay: Option<DecayCache>,
    c_star: Vec<f64>,
    dense: GateOutput,
    sparse: Vec<Option<SparseCache>>,
    agg: AggCache,
}

/// Gradient with respect to a layer state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateGrad {
    pub h_full: Vec<f64>,
    pub c_dense: Vec<f64>,
    pub h_sparse: Vec<Vec<f64>>,
    pub c_sparse: Vec<Vec<f64>>,
}

impl StateGrad {
    pub fn zeros(cfg: &CellConfig) -> Self {
        StateGrad {
            h_full: vec![0.0; cfg.hidden_full()],
            c_dense: vec![0.0; cfg.hidden_dense],
            h_sparse: vec![vec![0.0; cfg.hidden_sparse]; cfg.n_sparse],
            c_sparse: vec![vec![0.0; cfg.hidden_sparse]; cfg.n_sparse],
        }
    }
}

pub(crate) fn check_input(cfg: &CellConfig, input: &StepInput) -> Result<()> {
    if input.x_dense.len() != cfg.input_dim {
        return Err(Error::invalid(format!(
            "dense input has {} features, cell expects {}",
            input.x_dense.len(),
            cfg.input_dim
        )));
    }
    if cfg.n_delta > 0 && input.x_delta.len() != cfg.n_delta {
        return Err(Error::invalid(format!(
            "delta input has {} features, cell expects {}",
            input.x_delta.len(),
            cfg.n_delta
        )));
    }
    if input.sparse_mask.len() != cfg.n_sparse || input.sparse_value.len() != cfg.n_sparse {
        return Err(Error::invalid(format!(
            "sparse input has {}/{} mask/value entries, cell expects {}",
            input.sparse_mask.len(),
            input.sparse_value.len(),
            cfg.n_sparse
        )));
    }
    Ok(())
}

/// One transition of an STLSTM cell (and, by reduction, TLSTM and LSTM).
pub fn stlstm_step(
    cfg: &CellConfig,
    params: &CellParams,
    state: &StlstmState,
    input: &StepInput,
) -> StlstmState {
    forward_step(cfg, params, state, input).0
}

/// Classic LSTM transition; `cfg` must have no delta and no sparse features.
pub fn lstm_step(
    cfg: &CellConfig,
    params: &CellParams,
    state: &StlstmState,
    x_dense: &[f64],
) -> StlstmState {
    debug_assert!(cfg.n_delta == 0 && cfg.n_sparse == 0);
    let input = StepInput::dense(x_dense.to_vec());
    forward_step(cfg, params, state, &input).0
}

/// Forward transition returning the next state and the cache for the
/// reverse pass. Inputs are assumed validated (see `check_input`).
pub fn forward_step(
    cfg: &CellConfig,
    params: &CellParams,
    state: &StlstmState,
    input: &StepInput,
) -> (StlstmState, StepCache) {
    let hs = cfg.hidden_sparse_eff();

    // Decompose the dense memory and decay its short-term part.
    let (c_star, decay) = match &params.decay {
        Some(p) => {
            let s = decay_argument(&input.x_delta, p.alpha.as_slice());
            let g = decay_of(s);
            let short = short_term(&state.c_dense, &p.w, &p.b);
            let c_star = state
                .c_dense
                .iter()
                .zip(&short)
                .map(|(c, cs)| c + cs * (g - 1.0))
                .collect();
            (
                c_star,
                Some(DecayCache {
                    x_delta: input.x_delta.clone(),
                    s,
                    g,
                    short,
                }),
            )
        }
        None => (state.c_dense.clone(), None),
    };

    let dense = lstm_gate_step(
        &state.h_full,
        &input.x_dense,
        &c_star,
        &params.dense,
        cfg.candidate,
    );

    let mut sparse_states = Vec::with_capacity(cfg.n_sparse);
    let mut sparse_cache = Vec::with_capacity(cfg.n_sparse);
    for k in 0..cfg.n_sparse {
        let prev = &state.sparse[k];
        if input.sparse_mask[k] {
            let value = input.sparse_value[k];
            let gates = lstm_gate_step(
                &state.h_full,
                &[value],
                &prev.c,
                params.sparse_for(k),
                cfg.candidate,
            );
            sparse_states.push(SparseState {
                h: gates.h.clone(),
                c: gates.c.clone(),
                o: gates.o.clone(),
            });
            sparse_cache.push(Some(SparseCache {
                value,
                c_prev: prev.c.clone(),
                gates,
            }));
        } else {
            sparse_states.push(prev.clone());
            sparse_cache.push(None);
        }
    }

    let mut h_full = dense.h.clone();
    let agg = if cfg.n_sparse == 0 {
        AggCache::None
    } else {
        let hk: Vec<Vec<f64>> = sparse_states.iter().map(|s| s.h.clone()).collect();
        match cfg.aggregation {
            AggregationMode::Average => {
                h_full.extend(super::ops::aggregate(&hk, hs, cfg.aggregation, None));
                AggCache::Average
            }
            AggregationMode::Max => {
                h_full.extend(super::ops::aggregate(&hk, hs, cfg.aggregation, None));
                AggCache::Max(argmax_per_component(&hk, hs))
            }
            AggregationMode::DenseLayer => {
                let p = params
                    .aggregation
                    .as_ref()
                    .expect("dense-layer aggregation weights");
                let out = dense_aggregate(&hk, &p.w_h, &p.b_h);
                h_full.extend_from_slice(&out);
                AggCache::Dense {
                    concat: hk.concat(),
                    out,
                }
            }
        }
    };

    let o_full = if cfg.output_gate_aggregate {
        let ok: Vec<Vec<f64>> = sparse_states.iter().map(|s| s.o.clone()).collect();
        let mut o = dense.o.clone();
        if cfg.n_sparse > 0 {
            match (cfg.aggregation, params.aggregation.as_ref()) {
                (AggregationMode::DenseLayer, Some(p)) => {
                    let w = p.w_o.as_ref().expect("output-gate aggregation weights");
                    let b = p.b_o.as_ref().expect("output-gate aggregation bias");
                    o.extend(dense_aggregate(&ok, w, b));
                }
                (mode, _) => o.extend(super::ops::aggregate(&ok, hs, mode, None)),
            }
        }
        Some(o)
    } else {
        None
    };

    let next = StlstmState {
        h_dense: dense.h.clone(),
        c_dense: dense.c.clone(),
        o_dense: dense.o.clone(),
        sparse: sparse_states,
        h_full,
        o_full,
    };
    let cache = StepCache {
        h_prev: state.h_full.clone(),
        c_prev: state.c_dense.clone(),
        x: input.x_dense.clone(),
        decay,
        c_star,
        dense,
        sparse: sparse_cache,
        agg,
    };
    (next, cache)
}

/// Pre-activation gradients of a gate block and the gradient reaching its
/// input memory, given gradients on its hidden and memory outputs.
fn gate_backward(
    g: &GateOutput,
    c_in: &[f64],
    dh: &[f64],
    dc_out: &[f64],
    candidate: Activation,
) -> (Vec<f64>, Vec<f64>) {
    let units = g.h.len();
    let mut dz = vec![0.0; 4 * units];
    let mut dc_in = vec![0.0; units];
    for j in 0..units {
        let dc = dc_out[j] + dh[j] * g.o[j] * (1.0 - g.tanh_c[j] * g.tanh_c[j]);
        let d_o = dh[j] * g.tanh_c[j];
        dz[j] = dc * c_in[j] * g.f[j] * (1.0 - g.f[j]);
        dz[units + j] = dc * g.cand[j] * g.i[j] * (1.0 - g.i[j]);
        dz[2 * units + j] = dc * g.i[j] * candidate.prime_from_output(g.cand[j]);
        dz[3 * units + j] = d_o * g.o[j] * (1.0 - g.o[j]);
        dc_in[j] = dc * g.f[j];
    }
    (dz, dc_in)
}

fn accumulate_gate_grads(
    p: &GateParams,
    grads: &mut GateParams,
    dz: &[f64],
    h_prev: &[f64],
    x: &[f64],
    dh_prev: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    grads.w_h.add_outer(dz, h_prev);
    grads.w_x.add_outer(dz, x);
    for (b, d) in grads.b.as_mut_slice().iter_mut().zip(dz) {
        *b += d;
    }
    p.w_h.matvec_t_acc(dz, dh_prev);
    if let Some(dx) = dx {
        p.w_x.matvec_t_acc(dz, dx);
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Reverse pass of one step.
///
/// `d_out` is the total gradient on the state produced by this step (its
/// `h_full` must already include any loss gradient on the layer output).
/// Parameter gradients are accumulated into `grads`. Returns the gradient
/// on the state entering the step and on the dense input.
pub fn backward_step(
    cfg: &CellConfig,
    params: &CellParams,
    cache: &StepCache,
    d_out: &StateGrad,
    grads: &mut CellParams,
) -> (StateGrad, Vec<f64>) {
    let hd = cfg.hidden_dense;
    let hs = cfg.hidden_sparse_eff();
    let m = cfg.n_sparse;
    let mut dh_prev = vec![0.0; cfg.hidden_full()];
    let mut dx = vec![0.0; cfg.input_dim];

    // Aggregation: route the sparse half of d h_full to each feature's state.
    let mut dh_sparse = d_out.h_sparse.clone();
    if m > 0 {
        let da = &d_out.h_full[hd..hd + hs];
        match &cache.agg {
            AggCache::Average => {
                let scale = 1.0 / m as f64;
                for dh in dh_sparse.iter_mut() {
                    for (d, a) in dh.iter_mut().zip(da) {
                        *d += a * scale;
                    }
                }
            }
            AggCache::Max(argmax) => {
                for (j, &k) in argmax.iter().enumerate() {
                    dh_sparse[k][j] += da[j];
                }
            }
            AggCache::Dense { concat, out } => {
                let p = params.aggregation.as_ref().expect("aggregation weights");
                let g = grads.aggregation.as_mut().expect("aggregation grads");
                let dpre: Vec<f64> = da
                    .iter()
                    .zip(out)
                    .map(|(d, a)| d * (1.0 - a * a))
                    .collect();
                g.w_h.add_outer(&dpre, concat);
                add_into(g.b_h.as_mut_slice(), &dpre);
                let mut dconcat = vec![0.0; m * hs];
                p.w_h.matvec_t_acc(&dpre, &mut dconcat);
                for (k, dh) in dh_sparse.iter_mut().enumerate() {
                    add_into(dh, &dconcat[k * hs..(k + 1) * hs]);
                }
            }
            AggCache::None => unreachable!("sparse features without aggregation cache"),
        }
    }

    // Sparse state machines.
    let mut dc_sparse_prev = Vec::with_capacity(m);
    let mut dh_sparse_prev = Vec::with_capacity(m);
    for k in 0..m {
        match &cache.sparse[k] {
            None => {
                dh_sparse_prev.push(dh_sparse[k].clone());
                dc_sparse_prev.push(d_out.c_sparse[k].clone());
            }
            Some(sc) => {
                let (dz, dc_in) = gate_backward(
                    &sc.gates,
                    &sc.c_prev,
                    &dh_sparse[k],
                    &d_out.c_sparse[k],
                    cfg.candidate,
                );
                let idx = params.sparse_index(k);
                accumulate_gate_grads(
                    &params.sparse[idx],
                    &mut grads.sparse[idx],
                    &dz,
                    &cache.h_prev,
                    &[sc.value],
                    &mut dh_prev,
                    None,
                );
                dh_sparse_prev.push(vec![0.0; hs]);
                dc_sparse_prev.push(dc_in);
            }
        }
    }

    // Dense gates.
    let (dz, dc_star) = gate_backward(
        &cache.dense,
        &cache.c_star,
        &d_out.h_full[..hd],
        &d_out.c_dense,
        cfg.candidate,
    );
    accumulate_gate_grads(
        &params.dense,
        &mut grads.dense,
        &dz,
        &cache.h_prev,
        &cache.x,
        &mut dh_prev,
        Some(&mut dx),
    );

    // Memory decomposition and decay.
    let mut dc_prev = dc_star.clone();
    if let (Some(dc), Some(p)) = (&cache.decay, &params.decay) {
        let gd = grads.decay.as_mut().expect("decay grads");
        let mut dg = 0.0;
        let mut dpre = vec![0.0; hd];
        for j in 0..hd {
            dg += dc_star[j] * dc.short[j];
            let dshort = dc_star[j] * (dc.g - 1.0);
            dpre[j] = dshort * (1.0 - dc.short[j] * dc.short[j]);
        }
        gd.w.add_outer(&dpre, &cache.c_prev);
        add_into(gd.b.as_mut_slice(), &dpre);
        p.w.matvec_t_acc(&dpre, &mut dc_prev);
        // Zero subgradient where the clamp is active.
        if dc.s > 0.0 {
            let ds = dg * decay_slope(dc.s, dc.g);
            for (a, x) in gd.alpha.as_mut_slice().iter_mut().zip(&dc.x_delta) {
                *a += ds * x;
            }
        }
    }

    (
        StateGrad {
            h_full: dh_prev,
            c_dense: dc_prev,
            h_sparse: dh_sparse_prev,
            c_sparse: dc_sparse_prev,
        },
        dx,
    )
}

/// States and caches of a layer unrolled over a whole sequence.
#[derive(Clone, Debug)]
pub struct SequenceTrace {
    /// `states[t]` is the state after step `t`.
    pub states: Vec<StlstmState>,
    caches: Vec<StepCache>,
}

impl SequenceTrace {
    pub fn outputs(&self) -> impl Iterator<Item = &[f64]> {
        self.states.iter().map(|s| s.h_full.as_slice())
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Unroll a cell from the zero state over `inputs`.
pub fn forward_sequence(
    cfg: &CellConfig,
    params: &CellParams,
    inputs: &[StepInput],
) -> Result<SequenceTrace> {
    let mut state = StlstmState::zeros(cfg);
    let mut states = Vec::with_capacity(inputs.len());
    let mut caches = Vec::with_capacity(inputs.len());
    for input in inputs {
        check_input(cfg, input)?;
        let (next, cache) = forward_step(cfg, params, &state, input);
        states.push(next.clone());
        caches.push(cache);
        state = next;
    }
    Ok(SequenceTrace { states, caches })
}

/// Backpropagation through time for a layer.
///
/// `d_outputs[t]` is the loss gradient on the layer output `h_full` at step
/// `t`. Parameter gradients are added into `grads`; the returned vectors are
/// the gradients on each step's dense input.
pub fn backward_sequence(
    cfg: &CellConfig,
    params: &CellParams,
    trace: &SequenceTrace,
    d_outputs: &[Vec<f64>],
    grads: &mut CellParams,
) -> Vec<Vec<f64>> {
    assert_eq!(
        d_outputs.len(),
        trace.caches.len(),
        "gradient/trace length mismatch"
    );
    let mut carry = StateGrad::zeros(cfg);
    let mut dx = vec![Vec::new(); trace.caches.len()];
    for t in (0..trace.caches.len()).rev() {
        add_into(&mut carry.h_full, &d_outputs[t]);
        let (prev, dxt) = backward_step(cfg, params, &trace.caches[t], &carry, grads);
        dx[t] = dxt;
        carry = prev;
    }
    dx
}

