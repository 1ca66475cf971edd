//! Mini-batch ADAM training with validation macro-F1 early stopping.

pub mod metrics;
pub mod trainer;

pub use metrics::{class_scores, confusion_matrix, evaluate, macro_f1, majority_baseline, ClassScores, Metrics};
pub use trainer::{epoch_batches, train, EarlyStopping, EpochReport, TrainConfig, TrainOutcome};
