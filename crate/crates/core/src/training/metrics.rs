use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SequenceSample;
use crate::error::{Error, Result};
use crate::model::Model;

/// `counts[true][predicted]`.
pub fn confusion_matrix(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<Vec<Vec<usize>>> {
    if preds.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    let mut counts = vec![vec![0; num_classes]; num_classes];
    for (&p, &l) in preds.iter().zip(labels) {
        if p >= num_classes || l >= num_classes {
            return Err(Error::invalid(format!("class index out of range ({p}, {l})")));
        }
        counts[l][p] += 1;
    }
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Precision, recall and F1 of each class; a ratio with a zero
/// denominator is 0.
pub fn class_scores(confusion: &[Vec<usize>]) -> Vec<ClassScores> {
    let k = confusion.len();
    (0..k)
        .map(|c| {
            let tp = confusion[c][c] as f64;
            let predicted: usize = (0..k).map(|r| confusion[r][c]).sum();
            let support: usize = confusion[c].iter().sum();
            let ratio = |a: f64, b: usize| if b == 0 { 0.0 } else { a / b as f64 };
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassScores {
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect()
}

/// Unweighted mean of the per-class F1 scores.
pub fn macro_f1(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<f64> {
    let cm = confusion_matrix(preds, labels, num_classes)?;
    Ok(class_scores(&cm).iter().map(|s| s.f1).sum::<f64>() / num_classes as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub macro_f1: f64,
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    pub per_class: Vec<ClassScores>,
}

impl Metrics {
    pub fn from_predictions(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<Metrics> {
        let confusion = confusion_matrix(preds, labels, num_classes)?;
        let per_class = class_scores(&confusion);
        let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
        Ok(Metrics {
            macro_f1: per_class.iter().map(|s| s.f1).sum::<f64>() / num_classes as f64,
            accuracy: correct as f64 / preds.len() as f64,
            confusion,
            per_class,
        })
    }
}

pub fn predict_all(model: &Model, samples: &[SequenceSample]) -> Result<Vec<usize>> {
    samples.par_iter().map(|s| model.predict(s)).collect()
}

/// Classification metrics of `model` on `samples`.
pub fn evaluate(model: &Model, samples: &[SequenceSample]) -> Result<Metrics> {
    let preds = predict_all(model, samples)?;
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    Metrics::from_predictions(&preds, &labels, model.config().num_classes)
}

/// Metrics of always predicting the most frequent training label.
pub fn majority_baseline(train: &[SequenceSample], eval: &[SequenceSample], num_classes: usize) -> Result<Metrics> {
    let counts = crate::data::dataset::label_counts(train, num_classes);
    let majority = (0..num_classes).max_by_key(|&c| (counts[c], std::cmp::Reverse(c))).unwrap_or(0);
    let labels: Vec<usize> = eval.iter().map(|s| s.label).collect();
    Metrics::from_predictions(&vec![majority; labels.len()], &labels, num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [0, 1, 2, 2, 1];
        assert_eq!(macro_f1(&y, &y, 3).unwrap(), 1.0);
    }

    #[test]
    fn two_class_half() {
        // Class 0: TP=1, FP=1, FN=1, TN=1.
        let labels = [0, 0, 1, 1];
        let preds = [0, 1, 0, 1];
        let cm = confusion_matrix(&preds, &labels, 2).unwrap();
        assert_eq!(class_scores(&cm)[0].f1, 0.5);
    }

    #[test]
    fn majority_constant_predictor() {
        let labels: Vec<usize> = (0..100).map(|i| if i < 70 { 0 } else if i < 90 { 1 } else { 2 }).collect();
        let m = Metrics::from_predictions(&vec![0; 100], &labels, 3).unwrap();
        assert!((m.accuracy - 0.70).abs() < 1e-15);
        let support: Vec<usize> = m.confusion.iter().map(|r| r.iter().sum()).collect();
        assert_eq!(support, vec![70, 20, 10]);
        // Absent predictions give class F1 = 0.
        assert_eq!(m.per_class[1].f1, 0.0);
    }

    #[test]
    fn errors() {
        assert!(macro_f1(&[], &[], 3).is_err());
        assert!(macro_f1(&[0], &[0, 1], 3).is_err());
        assert!(macro_f1(&[3], &[0], 3).is_err());
    }
}
