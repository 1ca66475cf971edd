//! Loop-by-loop reference forward pass, written directly from the cell
//! equations and reading weights by tensor name. Shares no code with the
//! library's forward pass.

use std::collections::HashMap;

use stlstm::cells::AggregationMode;
use stlstm::data::SequenceSample;
use stlstm::model::{CellKind, Model};
use stlstm::ParamSet;

pub struct Weights(HashMap<String, (usize, usize, Vec<f64>)>);

impl Weights {
    pub fn of(model: &Model) -> Self {
        Weights(
            model
                .params()
                .tensors()
                .into_iter()
                .map(|(n, m)| (n, (m.rows(), m.cols(), m.as_slice().to_vec())))
                .collect(),
        )
    }

    fn has(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    fn at(&self, name: &str, r: usize, c: usize) -> f64 {
        let (_, cols, v) = &self.0[name];
        v[r * cols + c]
    }

    fn rows(&self, name: &str) -> usize {
        self.0[name].0
    }
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `W x + b` for one output row.
fn affine(w: &Weights, wn: &str, x: &[f64], row: usize) -> f64 {
    let mut acc = 0.0;
    for (j, xj) in x.iter().enumerate() {
        acc += w.at(wn, row, j) * xj;
    }
    acc
}

/// One LSTM gate block; returns (h, c).
fn gates(w: &Weights, p: &str, h_prev: &[f64], x: &[f64], c_in: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let units = w.rows(&format!("{p}.b")) / 4;
    let mut h = vec![0.0; units];
    let mut c = vec![0.0; units];
    for u in 0..units {
        let pre = |g: usize| {
            let r = g * units + u;
            affine(w, &format!("{p}.w_h"), h_prev, r)
                + affine(w, &format!("{p}.w_x"), x, r)
                + w.at(&format!("{p}.b"), r, 0)
        };
        let f = sig(pre(0));
        let i = sig(pre(1));
        let cand = pre(2).tanh();
        let o = sig(pre(3));
        c[u] = f * c_in[u] + i * cand;
        h[u] = o * c[u].tanh();
    }
    (h, c)
}

fn g_of(w: &Weights, alpha: &str, x: &[f64]) -> f64 {
    let s: f64 = x.iter().enumerate().map(|(j, xj)| w.at(alpha, j, 0) * xj).sum();
    1.0 / (std::f64::consts::E + s.max(0.0)).ln()
}

/// `(v - S) + S * g` with `S = tanh(W v + b)`.
fn decompose(w: &Weights, p: &str, v: &[f64], x: &[f64]) -> Vec<f64> {
    let g = g_of(w, &format!("{p}.alpha"), x);
    (0..v.len())
        .map(|u| {
            let s = (affine(w, &format!("{p}.w"), v, u) + w.at(&format!("{p}.b"), u, 0)).tanh();
            (v[u] - s) + s * g
        })
        .collect()
}

/// Hidden outputs of every step of the bottom layer.
fn bottom_layer(model: &Model, w: &Weights, s: &SequenceSample) -> Vec<Vec<f64>> {
    let cfg = model.config();
    let sparse_cells = cfg.cell == CellKind::Stlstm && cfg.n_sparse > 0;
    let hd = if sparse_cells { cfg.hidden_dense } else { cfg.hidden_dense + cfg.hidden_sparse };
    let hs = if sparse_cells { cfg.hidden_sparse } else { 0 };
    let m = if sparse_cells { cfg.n_sparse } else { 0 };
    let use_delta = cfg.cell != CellKind::Lstm && cfg.d_delta > 0;

    // Forward fill for cells without sparse state machines.
    let mut last = vec![0.0; cfg.n_sparse];
    let mut h_full = vec![0.0; hd + hs];
    let mut c = vec![0.0; hd];
    let mut sh = vec![vec![0.0; hs]; m];
    let mut sc = vec![vec![0.0; hs]; m];
    let mut out = Vec::new();
    for t in 0..s.len() {
        let mut x = s.dense[t].clone();
        if !sparse_cells {
            for k in 0..cfg.n_sparse {
                if s.mask[t][k] {
                    last[k] = s.value[t][k];
                }
            }
            x.extend_from_slice(&last);
        }
        let c_star = if use_delta {
            decompose(w, "layer0.decay", &c, &s.delta[t])
        } else {
            c.clone()
        };
        let (h_d, c_d) = gates(w, "layer0.dense", &h_full, &x, &c_star);
        for k in 0..m {
            if s.mask[t][k] {
                let p = format!("layer0.sparse.{k}");
                let (h, cc) = gates(w, &p, &h_full, &[s.value[t][k]], &sc[k]);
                sh[k] = h;
                sc[k] = cc;
            }
        }
        let mut next = h_d;
        if m > 0 {
            let agg: Vec<f64> = match cfg.aggregation {
                AggregationMode::Average => (0..hs).map(|j| sh.iter().map(|h| h[j]).sum::<f64>() / m as f64).collect(),
                AggregationMode::Max => (0..hs)
                    .map(|j| sh.iter().map(|h| h[j]).fold(f64::NEG_INFINITY, f64::max))
                    .collect(),
                AggregationMode::DenseLayer => {
                    let concat: Vec<f64> = sh.iter().flatten().copied().collect();
                    (0..hs)
                        .map(|j| (affine(w, "layer0.aggregate.w_h", &concat, j) + w.at("layer0.aggregate.b_h", j, 0)).tanh())
                        .collect()
                }
            };
            next.extend(agg);
        }
        c = c_d;
        h_full = next;
        out.push(h_full.clone());
    }
    out
}

/// Logits of `model` on `s`.
pub fn logits(model: &Model, s: &SequenceSample) -> Vec<f64> {
    let cfg = model.config();
    let w = Weights::of(model);
    let mut seq = bottom_layer(model, &w, s);
    for l in 1..=cfg.upper_layers {
        let p = format!("layer{l}.dense");
        let units = w.rows(&format!("{p}.b")) / 4;
        let (mut h, mut c) = (vec![0.0; units], vec![0.0; units]);
        let mut out = Vec::new();
        for x in &seq {
            let (h2, c2) = gates(&w, &p, &h, x, &c);
            h = h2;
            c = c2;
            out.push(h.clone());
        }
        seq = out;
    }
    let mut dec = seq.last().unwrap().clone();
    if w.has("head.static_delta.w") {
        dec = decompose(&w, "head.static_delta", &dec, &s.static_delta);
    }
    if w.has("head.embed.w") {
        let e = w.rows("head.embed.w");
        for j in 0..e {
            dec.push((affine(&w, "head.embed.w", &s.static_dense, j) + w.at("head.embed.b", j, 0)).tanh());
        }
    }
    (0..w.rows("head.out.w"))
        .map(|k| affine(&w, "head.out.w", &dec, k) + w.at("head.out.b", k, 0))
        .collect()
}
