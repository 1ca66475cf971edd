//! Dataset construction: the power log pipeline and the synthetic
//! generator.

pub mod build;
pub mod dataset;
pub mod power;
pub mod sample;
pub mod sequence;
pub mod split;
pub mod synth;

pub use build::{build_power_dataset, SequenceSpec};
pub use dataset::{DatasetSplits, Dims, Manifest, Source};
pub use power::{parse_power_csv, PowerLog, RawRecord};
pub use sample::SequenceSample;
pub use sequence::{Sampling, SequenceAverage};
pub use split::SplitFractions;
pub use synth::{generate as generate_synthetic, SynthSpec};
