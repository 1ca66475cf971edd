//! Dataset construction, single training runs and paired comparison sweeps.

use stlstm::cells::AggregationMode;
use stlstm::data::power::feature_index;
use stlstm::data::{build_power_dataset, generate_synthetic, parse_power_csv, DatasetSplits, PowerLog, SequenceSample};
use stlstm::model::{CellKind, Model};
use stlstm::training::{evaluate, train, EpochReport, Metrics, TrainOutcome};

use crate::config::{ExperimentConfig, ModelSection, SourceKind, SweepAxis};
use crate::error::{CliError, CliResult};

/// Parsed power log, loaded once per process when needed.
#[derive(Default)]
pub struct DataCache {
    log: Option<PowerLog>,
}

impl DataCache {
    fn power_log(&mut self, cfg: &ExperimentConfig) -> CliResult<&PowerLog> {
        if self.log.is_none() {
            let path = cfg
                .data
                .csv
                .as_ref()
                .ok_or_else(|| CliError::Config("data.csv is required for the power source".into()))?;
            self.log = Some(parse_power_csv(path)?);
        }
        Ok(self.log.as_ref().unwrap())
    }

    pub fn build(&mut self, cfg: &ExperimentConfig) -> CliResult<DatasetSplits> {
        Ok(match cfg.data.source {
            SourceKind::Synthetic => generate_synthetic(&cfg.data.synthetic)?,
            SourceKind::Power => build_power_dataset(self.power_log(cfg)?, &cfg.data.sequence)?,
        })
    }
}

/// Configuration with every sparse feature kept at `ratio`.
pub fn with_sparsity(cfg: &ExperimentConfig, ratio: f64) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.data.synthetic.sparsity = ratio;
    c.data.sequence.sparse_ratios = vec![ratio; c.data.sequence.sparse_features.len()];
    c
}

pub fn with_seed(cfg: &ExperimentConfig, seed: u64) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.seed = seed;
    c.sync_seeds();
    c
}

/// The sparsity a configuration generates data at.
pub fn base_sparsity(cfg: &ExperimentConfig) -> f64 {
    match cfg.data.source {
        SourceKind::Synthetic => cfg.data.synthetic.sparsity,
        SourceKind::Power => cfg.data.sequence.sparse_ratios.first().copied().unwrap_or(1.0),
    }
}

/// Keep the sparse features `keep` sparse and move the others into the
/// dense block.
pub fn restrict_sparse(ds: &DatasetSplits, keep: &[usize]) -> CliResult<DatasetSplits> {
    let map = |v: &[SequenceSample]| -> CliResult<Vec<SequenceSample>> {
        v.iter()
            .map(|s| s.with_sparse_subset(keep).map_err(CliError::from))
            .collect()
    };
    let mut out = DatasetSplits {
        train: map(&ds.train)?,
        val: map(&ds.val)?,
        test: map(&ds.test)?,
        manifest: ds.manifest.clone(),
    };
    let m = &mut out.manifest;
    let moved: Vec<usize> = (0..m.dims.n_sparse).filter(|k| !keep.contains(k)).collect();
    m.dims.d_dense += moved.len();
    m.dims.n_sparse = keep.len();
    let names = m.sparse_features.clone();
    m.dense_features.extend(moved.iter().map(|&k| names[k].clone()));
    m.sparse_features = keep.iter().map(|&k| names[k].clone()).collect();
    Ok(out)
}

/// A finished training run.
pub struct RunResult {
    pub outcome: TrainOutcome,
    pub test: Metrics,
}

/// Train `section`'s model on `ds` and score the best weights on the test
/// split.
pub fn run(
    ds: &DatasetSplits,
    section: &ModelSection,
    cfg: &ExperimentConfig,
    on_epoch: impl FnMut(&EpochReport) -> stlstm::Result<()>,
) -> CliResult<RunResult> {
    let model = Model::new(section.resolve(&ds.manifest.dims, cfg.seed))?;
    let outcome = train(model, &ds.train, &ds.val, &cfg.train, on_epoch)?;
    let test = if ds.test.is_empty() {
        evaluate(&outcome.best, &ds.val)?
    } else {
        evaluate(&outcome.best, &ds.test)?
    };
    Ok(RunResult { outcome, test })
}

fn quiet(_: &EpochReport) -> stlstm::Result<()> {
    Ok(())
}

/// One comparison: a variant against its reference on matched data and
/// seeds. F1 is test macro-F1 of the best-validation weights.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: String,
    pub sparsity: f64,
    pub seed: u64,
    pub reference: String,
    pub f1_reference: f64,
    pub f1_variant: f64,
    pub rel_change: f64,
}

pub const SWEEP_HEADER: &str = "axis,value,sparsity,seed,reference,f1_reference,f1_variant,rel_change";

impl SweepRow {
    fn new(axis: SweepAxis, value: &str, sparsity: f64, seed: u64, reference: &str, f_ref: f64, f_var: f64) -> Self {
        SweepRow {
            axis,
            value: value.to_string(),
            sparsity,
            seed,
            reference: reference.to_string(),
            f1_reference: f_ref,
            f1_variant: f_var,
            rel_change: (f_var - f_ref) / f_ref,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.axis.as_str(),
            self.value,
            self.sparsity,
            self.seed,
            self.reference,
            self.f1_reference,
            self.f1_variant,
            self.rel_change
        )
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.to_csv());
        s.push('\n');
    }
    s
}

pub fn default_values(axis: SweepAxis, cfg: &ExperimentConfig) -> Vec<String> {
    let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
    match axis {
        SweepAxis::Sparsity => v(&["0.03", "0.07", "0.11", "0.15"]),
        SweepAxis::Aggregation => AggregationMode::ALL.iter().map(|m| m.as_str().to_string()).collect(),
        SweepAxis::Statics => v(&["none", "static_dense", "static_delta", "both"]),
        SweepAxis::SparseSubset => match cfg.data.source {
            SourceKind::Synthetic => {
                let m = cfg.data.synthetic.n_sparse;
                let mut out: Vec<String> = (0..m).map(|k| k.to_string()).collect();
                if m > 1 {
                    out.push((0..m).map(|k| k.to_string()).collect::<Vec<_>>().join("+"));
                }
                out
            }
            SourceKind::Power => stlstm::data::power::FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        },
    }
}

fn tlstm(section: &ModelSection) -> ModelSection {
    ModelSection {
        cell: CellKind::Tlstm,
        ..section.clone()
    }
}

fn stlstm(section: &ModelSection) -> ModelSection {
    ModelSection {
        cell: CellKind::Stlstm,
        ..section.clone()
    }
}

fn f1_of(ds: &DatasetSplits, section: &ModelSection, cfg: &ExperimentConfig) -> CliResult<f64> {
    Ok(run(ds, section, cfg, quiet)?.test.macro_f1)
}

/// Run a comparison sweep along `axis`. Rows come out in a fixed order:
/// sparsity, then value, then seed.
pub fn sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    cache: &mut DataCache,
    mut progress: impl FnMut(&SweepRow),
) -> CliResult<Vec<SweepRow>> {
    let values = if cfg.sweep.values.is_empty() {
        default_values(axis, cfg)
    } else {
        cfg.sweep.values.clone()
    };
    let sparsities = if cfg.sweep.sparsities.is_empty() {
        vec![base_sparsity(cfg)]
    } else {
        cfg.sweep.sparsities.clone()
    };
    let seeds: Vec<u64> = (0..cfg.sweep.repeats as u64).map(|r| cfg.seed + r).collect();
    let mut rows = Vec::new();
    let mut emit = |row: SweepRow, rows: &mut Vec<SweepRow>| {
        progress(&row);
        rows.push(row);
    };

    match axis {
        SweepAxis::Sparsity => {
            for value in &values {
                let ratio: f64 = value
                    .parse()
                    .map_err(|_| CliError::Config(format!("sparsity value `{value}` is not a number")))?;
                for &seed in &seeds {
                    let c = with_seed(&with_sparsity(cfg, ratio), seed);
                    c.validate()?;
                    let ds = cache.build(&c)?;
                    let a = f1_of(&ds, &tlstm(&cfg.model), &c)?;
                    let b = f1_of(&ds, &stlstm(&cfg.model), &c)?;
                    emit(SweepRow::new(axis, value, ratio, seed, "tlstm", a, b), &mut rows);
                }
            }
        }
        SweepAxis::SparseSubset => {
            for &ratio in &sparsities {
                for value in &values {
                    for &seed in &seeds {
                        let mut c = with_seed(&with_sparsity(cfg, ratio), seed);
                        let ds = match c.data.source {
                            SourceKind::Power => {
                                let names: Vec<String> = value.split('+').map(|s| s.trim().to_string()).collect();
                                if let Some(bad) = names.iter().find(|n| feature_index(n).is_none()) {
                                    return Err(CliError::Config(format!("unknown feature `{bad}`")));
                                }
                                c.data.sequence.sparse_ratios = vec![ratio; names.len()];
                                c.data.sequence.sparse_features = names;
                                c.validate()?;
                                cache.build(&c)?
                            }
                            SourceKind::Synthetic => {
                                let keep = value
                                    .split('+')
                                    .map(|s| s.trim().parse::<usize>())
                                    .collect::<Result<Vec<_>, _>>()
                                    .map_err(|_| CliError::Config(format!("bad sparse subset `{value}`")))?;
                                c.validate()?;
                                restrict_sparse(&cache.build(&c)?, &keep)?
                            }
                        };
                        let a = f1_of(&ds, &tlstm(&cfg.model), &c)?;
                        let b = f1_of(&ds, &stlstm(&cfg.model), &c)?;
                        emit(SweepRow::new(axis, value, ratio, seed, "tlstm", a, b), &mut rows);
                    }
                }
            }
        }
        SweepAxis::Aggregation => {
            let modes = values
                .iter()
                .map(|v| v.parse::<AggregationMode>().map_err(|e| CliError::Config(e.to_string())))
                .collect::<CliResult<Vec<_>>>()?;
            for &ratio in &sparsities {
                for &seed in &seeds {
                    let c = with_seed(&with_sparsity(cfg, ratio), seed);
                    c.validate()?;
                    let ds = cache.build(&c)?;
                    let a = f1_of(&ds, &tlstm(&cfg.model), &c)?;
                    for (value, &mode) in values.iter().zip(&modes) {
                        let section = ModelSection {
                            aggregation: mode,
                            ..stlstm(&cfg.model)
                        };
                        let b = f1_of(&ds, &section, &c)?;
                        emit(SweepRow::new(axis, value, ratio, seed, "tlstm", a, b), &mut rows);
                    }
                }
            }
        }
        SweepAxis::Statics => {
            let settings = values
                .iter()
                .map(|v| match v.as_str() {
                    "none" => Ok((false, false)),
                    "static_dense" => Ok((true, false)),
                    "static_delta" => Ok((false, true)),
                    "both" => Ok((true, true)),
                    other => Err(CliError::Config(format!("unknown statics setting `{other}`"))),
                })
                .collect::<CliResult<Vec<_>>>()?;
            for &ratio in &sparsities {
                for &seed in &seeds {
                    let c = with_seed(&with_sparsity(cfg, ratio), seed);
                    c.validate()?;
                    let ds = cache.build(&c)?;
                    let none = ModelSection {
                        static_dense: false,
                        static_delta: false,
                        ..stlstm(&cfg.model)
                    };
                    let a = f1_of(&ds, &none, &c)?;
                    for (value, &(sd, sl)) in values.iter().zip(&settings) {
                        let b = if (sd, sl) == (false, false) {
                            a
                        } else {
                            let section = ModelSection {
                                static_dense: sd,
                                static_delta: sl,
                                ..none.clone()
                            };
                            f1_of(&ds, &section, &c)?
                        };
                        emit(SweepRow::new(axis, value, ratio, seed, "stlstm_no_statics", a, b), &mut rows);
                    }
                }
            }
        }
    }
    Ok(rows)
}
