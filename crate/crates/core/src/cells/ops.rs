//! Single-step building blocks of the cells, each a pure function.

use std::f64::consts::E;

use super::config::AggregationMode;
use super::params::{AggregationParams, DeltaDecayParams, GateParams};
use crate::numeric::{dot, sigmoid, Activation};

/// Memory decay factor `1 / ln(e + max(0, alpha . x))`, always in `(0, 1]`.
pub fn decay(x_delta: &[f64], alpha: &[f64]) -> f64 {
    decay_of(decay_argument(x_delta, alpha))
}

/// Clamped inner product `max(0, alpha . x)`.
#[inline]
pub fn decay_argument(x_delta: &[f64], alpha: &[f64]) -> f64 {
    debug_assert_eq!(x_delta.len(), alpha.len());
    dot(alpha, x_delta).max(0.0)
}

#[inline]
pub(crate) fn decay_of(s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else {
        1.0 / (E + s).ln()
    }
}

/// `d g / d s` for `s > 0`, written through `g` itself: `-g^2 / (e + s)`.
#[inline]
pub(crate) fn decay_slope(s: f64, g: f64) -> f64 {
    -g * g / (E + s)
}

/// Split a memory vector into short- and long-term parts and decay the
/// short-term part by `g(x_delta)`.
///
/// Computed as `C + C_S (g - 1)`, which is algebraically
/// `(C - C_S) + C_S g` and reproduces `C` exactly whenever `g == 1`.
pub fn decompose_and_decay(c_prev: &[f64], x_delta: &[f64], p: &DeltaDecayParams) -> Vec<f64> {
    let g = decay(x_delta, p.alpha.as_slice());
    let short = short_term(c_prev, &p.w, &p.b);
    c_prev
        .iter()
        .zip(&short)
        .map(|(c, s)| c + s * (g - 1.0))
        .collect()
}

/// `tanh(W v + b)`.
pub(crate) fn short_term(v: &[f64], w: &crate::numeric::Matrix, b: &crate::numeric::Matrix) -> Vec<f64> {
    let mut pre = b.as_slice().to_vec();
    w.matvec_acc(v, &mut pre);
    pre.iter_mut().for_each(|x| *x = x.tanh());
    pre
}

/// Gate activations and outputs of one LSTM-style update.
#[derive(Clone, Debug, PartialEq)]
pub struct GateOutput {
    pub f: Vec<f64>,
    pub i: Vec<f64>,
    pub cand: Vec<f64>,
    pub o: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

/// LSTM update from a (possibly decayed) input memory `c_in`:
/// `C = f * c_in + i * cand`, `h = o * tanh(C)`.
pub fn lstm_gate_step(
    h_prev_full: &[f64],
    x: &[f64],
    c_in: &[f64],
    p: &GateParams,
    candidate: Activation,
) -> GateOutput {
    let units = p.units();
    let mut z = p.b.as_slice().to_vec();
    p.w_h.matvec_acc(h_prev_full, &mut z);
    p.w_x.matvec_acc(x, &mut z);
    let f: Vec<f64> = z[..units].iter().map(|&v| sigmoid(v)).collect();
    let i: Vec<f64> = z[units..2 * units].iter().map(|&v| sigmoid(v)).collect();
    let cand: Vec<f64> = z[2 * units..3 * units]
        .iter()
        .map(|&v| candidate.apply(v))
        .collect();
    let o: Vec<f64> = z[3 * units..].iter().map(|&v| sigmoid(v)).collect();
    let c: Vec<f64> = (0..units).map(|j| f[j] * c_in[j] + i[j] * cand[j]).collect();
    let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
    let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(a, b)| a * b).collect();
    GateOutput {
        f,
        i,
        cand,
        o,
        c,
        tanh_c,
        h,
    }
}

/// Hidden, memory and output-gate vectors of one sparse feature.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub o: Vec<f64>,
}

impl SparseState {
    pub fn zeros(units: usize) -> Self {
        SparseState {
            h: vec![0.0; units],
            c: vec![0.0; units],
            o: vec![0.0; units],
        }
    }
}

/// Update of one sparse feature's state machine. A masked-off step returns
/// the previous state untouched; a present value drives an LSTM update
/// against the full previous hidden state.
pub fn sparse_step(
    h_prev_full: &[f64],
    value: f64,
    mask: bool,
    state: &SparseState,
    p: &GateParams,
    candidate: Activation,
) -> SparseState {
    if !mask {
        return state.clone();
    }
    let g = lstm_gate_step(h_prev_full, &[value], &state.c, p, candidate);
    SparseState {
        h: g.h,
        c: g.c,
        o: g.o,
    }
}

/// Merge `m` sparse hidden vectors into one vector of width `units`.
///
/// With no inputs the result is the zero vector. `params` is only read in
/// [`AggregationMode::DenseLayer`].
pub fn aggregate(
    h_list: &[Vec<f64>],
    units: usize,
    mode: AggregationMode,
    params: Option<&AggregationParams>,
) -> Vec<f64> {
    if h_list.is_empty() {
        return vec![0.0; units];
    }
    match mode {
        AggregationMode::Average => {
            let m = h_list.len() as f64;
            (0..units)
                .map(|j| h_list.iter().map(|h| h[j]).sum::<f64>() / m)
                .collect()
        }
        AggregationMode::Max => (0..units)
            .map(|j| h_list.iter().map(|h| h[j]).fold(f64::NEG_INFINITY, f64::max))
            .collect(),
        AggregationMode::DenseLayer => {
            let p = params.expect("dense-layer aggregation requires weights");
            dense_aggregate(h_list, &p.w_h, &p.b_h)
        }
    }
}

pub(crate) fn dense_aggregate(
    h_list: &[Vec<f64>],
    w: &crate::numeric::Matrix,
    b: &crate::numeric::Matrix,
) -> Vec<f64> {
    let concat: Vec<f64> = h_list.iter().flatten().copied().collect();
    short_term(&concat, w, b)
}

/// Index of the input holding the maximum of each component (first on ties).
pub(crate) fn argmax_per_component(h_list: &[Vec<f64>], units: usize) -> Vec<usize> {
    (0..units)
        .map(|j| {
            let mut best = 0;
            for (k, h) in h_list.iter().enumerate().skip(1) {
                if h[j] > h_list[best][j] {
                    best = k;
                }
            }
            best
        })
        .collect()
}
