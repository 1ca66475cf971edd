//! Named-tensor view shared by every trainable structure.
//!
//! Optimizers, gradient checks and checkpoints only see parameters through
//! [`ParamSet`], so a structure and its gradient accumulator (a zeroed clone
//! of the same type) always enumerate tensors in the same order.

use crate::numeric::Matrix;

pub trait ParamSet {
    /// Every tensor with its hierarchical name, in canonical order.
    fn tensors(&self) -> Vec<(String, &Matrix)>;

    fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)>;

    fn zeros_like(&self) -> Self
    where
        Self: Clone + Sized,
    {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    fn add_assign(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let src = other.tensors();
        for ((_, dst), (_, s)) in self.tensors_mut().into_iter().zip(src) {
            dst.add_assign(s);
        }
    }

    fn scale(&mut self, s: f64) {
        for (_, t) in self.tensors_mut() {
            t.scale(s);
        }
    }

    fn global_norm(&self) -> f64 {
        self.tensors().iter().map(|(_, t)| t.sum_sq()).sum::<f64>().sqrt()
    }

    fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }
}

/// Flat list of named tensors; the in-memory form of a checkpoint body.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorList {
    entries: Vec<(String, Matrix)>,
}

impl TensorList {
    pub fn new(entries: Vec<(String, Matrix)>) -> Self {
        TensorList { entries }
    }

    pub fn from_set<P: ParamSet + ?Sized>(set: &P) -> Self {
        TensorList {
            entries: set
                .tensors()
                .into_iter()
                .map(|(n, t)| (n, t.clone()))
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn entries(&self) -> &[(String, Matrix)] {
        &self.entries
    }
}

impl ParamSet for TensorList {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        self.entries.iter().map(|(n, t)| (n.clone(), t)).collect()
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        self.entries.iter_mut().map(|(n, t)| (n.clone(), t)).collect()
    }
}
