//! Chronological train/validation/test split with overlap removal.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fractions of windows assigned to train, validation and test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.7,
            val: 0.15,
            test: 0.15,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "split fractions {parts:?} must lie in [0, 1] and sum to 1"
            )));
        }
        Ok(())
    }
}

/// Positions (into the window list) of each split.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// Validation/test windows removed because they share records with an
    /// earlier split.
    pub dropped: usize,
}

/// Split windows, sorted by start record, chronologically. A validation
/// window sharing a record with any training window is dropped; a test
/// window sharing a record with any kept training or validation window is
/// dropped, so the three splits are disjoint at the record level.
pub fn split(starts: &[usize], width: usize, fractions: &SplitFractions) -> Result<SplitIndices> {
    fractions.validate()?;
    if starts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("window starts must be strictly increasing"));
    }
    let n = starts.len();
    let n_train = (n as f64 * fractions.train).floor() as usize;
    let n_val = ((n as f64 * fractions.val).floor() as usize).min(n - n_train);
    let mut out = SplitIndices {
        train: (0..n_train).collect(),
        ..Default::default()
    };
    // Records before `horizon` are owned by an earlier split.
    let mut horizon = out.train.last().map_or(0, |&i| starts[i] + width);
    for i in n_train..n_train + n_val {
        if starts[i] < horizon {
            out.dropped += 1;
        } else {
            out.val.push(i);
        }
    }
    if let Some(&i) = out.val.last() {
        horizon = starts[i] + width;
    }
    for i in n_train + n_val..n {
        if starts[i] < horizon {
            out.dropped += 1;
        } else {
            out.test.push(i);
        }
    }
    Ok(out)
}
