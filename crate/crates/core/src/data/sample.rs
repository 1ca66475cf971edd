use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One training example: per-step dense, delta and sparse features, the
/// sequence-level static features, and the class label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSample {
    /// `T x d_dense`.
    pub dense: Vec<Vec<f64>>,
    /// `T x d_delta`.
    pub delta: Vec<Vec<f64>>,
    /// `T x m`; true where the sparse feature is present.
    pub mask: Vec<Vec<bool>>,
    /// `T x m`; 0 where the mask is off.
    pub value: Vec<Vec<f64>>,
    pub static_dense: Vec<f64>,
    pub static_delta: Vec<f64>,
    pub label: usize,
    /// Index of the first raw record of the source window (or the generator
    /// draw index for synthetic data).
    pub origin: u64,
}

impl SequenceSample {
    pub fn len(&self) -> usize {
        self.dense.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dense.is_empty()
    }

    pub fn d_dense(&self) -> usize {
        self.dense.first().map_or(0, Vec::len)
    }

    pub fn d_delta(&self) -> usize {
        self.delta.first().map_or(0, Vec::len)
    }

    pub fn n_sparse(&self) -> usize {
        self.mask.first().map_or(0, Vec::len)
    }

    /// Sparse values with each masked-off entry replaced by the last value
    /// observed for that feature (0 before the first observation).
    pub fn forward_filled(&self) -> Vec<Vec<f64>> {
        let m = self.n_sparse();
        let mut last = vec![0.0; m];
        self.mask
            .iter()
            .zip(&self.value)
            .map(|(mask, value)| {
                for k in 0..m {
                    if mask[k] {
                        last[k] = value[k];
                    }
                }
                last.clone()
            })
            .collect()
    }

    /// Keep only the sparse features `keep` as sparse streams; the others
    /// are appended to the dense block as forward-filled columns.
    pub fn with_sparse_subset(&self, keep: &[usize]) -> Result<SequenceSample> {
        let m = self.n_sparse();
        if let Some(&k) = keep.iter().find(|&&k| k >= m) {
            return Err(Error::invalid(format!("sparse feature {k} out of range for {m}")));
        }
        let moved: Vec<usize> = (0..m).filter(|k| !keep.contains(k)).collect();
        let filled = self.forward_filled();
        let mut out = self.clone();
        for t in 0..self.len() {
            out.dense[t].extend(moved.iter().map(|&k| filled[t][k]));
            out.mask[t] = keep.iter().map(|&k| self.mask[t][k]).collect();
            out.value[t] = keep.iter().map(|&k| self.value[t][k]).collect();
        }
        Ok(out)
    }

    /// Check internal consistency: equal step counts, rectangular blocks,
    /// non-negative deltas and zero values under a zero mask.
    pub fn validate(&self) -> Result<()> {
        let t = self.len();
        if t == 0 {
            return Err(Error::invalid("empty sequence"));
        }
        if self.delta.len() != t || self.mask.len() != t || self.value.len() != t {
            return Err(Error::invalid("feature blocks disagree on sequence length"));
        }
        let (dd, dl, m) = (self.d_dense(), self.d_delta(), self.n_sparse());
        for s in 0..t {
            if self.dense[s].len() != dd
                || self.delta[s].len() != dl
                || self.mask[s].len() != m
                || self.value[s].len() != m
            {
                return Err(Error::invalid(format!("ragged feature block at step {s}")));
            }
            if self.delta[s].iter().any(|&d| !(d >= 0.0)) {
                return Err(Error::invalid(format!("negative delta at step {s}")));
            }
            for k in 0..m {
                if !self.mask[s][k] && self.value[s][k] != 0.0 {
                    return Err(Error::invalid(format!(
                        "masked sparse value is non-zero at step {s}, feature {k}"
                    )));
                }
            }
        }
        if self.static_delta.iter().any(|&d| !(d >= 0.0)) {
            return Err(Error::invalid("negative static delta"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SequenceSample {
        SequenceSample {
            dense: vec![vec![1.0], vec![2.0], vec![3.0]],
            delta: vec![vec![0.0], vec![1.0], vec![2.0]],
            mask: vec![vec![true, true], vec![false, true], vec![true, false]],
            value: vec![vec![0.5, -1.0], vec![0.0, 2.0], vec![0.25, 0.0]],
            static_dense: vec![],
            static_delta: vec![3.0],
            label: 1,
            origin: 0,
        }
    }

    #[test]
    fn forward_fill() {
        assert_eq!(
            sample().forward_filled(),
            vec![vec![0.5, -1.0], vec![0.5, 2.0], vec![0.25, 2.0]]
        );
    }

    #[test]
    fn sparse_subset_moves_the_rest_to_dense() {
        let s = sample().with_sparse_subset(&[1]).unwrap();
        s.validate().unwrap();
        assert_eq!(s.dense, vec![vec![1.0, 0.5], vec![2.0, 0.5], vec![3.0, 0.25]]);
        assert_eq!(s.value, vec![vec![-1.0], vec![2.0], vec![0.0]]);
        assert_eq!(sample().with_sparse_subset(&[0, 1]).unwrap(), sample());
        assert!(sample().with_sparse_subset(&[2]).is_err());
    }
}
