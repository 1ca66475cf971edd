//! The subcommands. Each reads a resolved configuration, writes its outputs
//! under the configured directory and returns a short human summary.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use stlstm::data::{generate_synthetic, DatasetSplits, SynthSpec};
use stlstm::gradcheck::{check_model, GradCheckOptions};
use stlstm::io::{read_checkpoint, read_dataset, to_json, write_dataset, write_json};
use stlstm::model::{CellKind, Model, ModelConfig};
use stlstm::training::{evaluate, majority_baseline, EpochReport, Metrics};

use crate::config::{ExperimentConfig, SweepAxis};
use crate::error::{CliError, CliResult};
use crate::experiment::{run, sweep_csv, sweep, DataCache};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Core(stlstm::Error::io(path, e))
}

fn split_path(dir: &Path, split: &str) -> PathBuf {
    dir.join(format!("{split}.safetensors"))
}

pub fn write_splits(dir: &Path, ds: &DatasetSplits) -> CliResult<()> {
    for (name, samples) in [("train", &ds.train), ("val", &ds.val), ("test", &ds.test)] {
        write_dataset(split_path(dir, name), name, samples, &ds.manifest)?;
    }
    write_json(dir.join("manifest.json"), &ds.manifest)?;
    Ok(())
}

pub fn read_splits(dir: &Path) -> CliResult<DatasetSplits> {
    let train = read_dataset(split_path(dir, "train"))?;
    let val = read_dataset(split_path(dir, "val"))?;
    let test = read_dataset(split_path(dir, "test"))?;
    if val.manifest != train.manifest || test.manifest != train.manifest {
        return Err(stlstm::Error::Data(format!("split files in {} disagree", dir.display())).into());
    }
    Ok(DatasetSplits {
        train: train.samples,
        val: val.samples,
        test: test.samples,
        manifest: train.manifest,
    })
}

fn dataset(cfg: &ExperimentConfig, data: Option<&Path>) -> CliResult<DatasetSplits> {
    match data {
        Some(dir) => read_splits(dir),
        None => DataCache::default().build(cfg),
    }
}

pub fn prepare(cfg: &ExperimentConfig) -> CliResult<String> {
    let ds = DataCache::default().build(cfg)?;
    cfg.dump()?;
    let dir = cfg.out.join("data");
    write_splits(&dir, &ds)?;
    let counts = ds.manifest.label_counts();
    Ok(format!(
        "wrote {} train / {} val / {} test samples to {}; label counts {:?}, majority fraction {:.4}",
        ds.train.len(),
        ds.val.len(),
        ds.test.len(),
        dir.display(),
        counts,
        ds.manifest.majority_fraction()
    ))
}

#[derive(Serialize)]
struct TrainSummary {
    cell: CellKind,
    best_epoch: usize,
    best_val_macro_f1: f64,
    epochs_run: usize,
    stopped_early: bool,
    val_majority_macro_f1: f64,
    test: Metrics,
}

#[derive(Serialize)]
struct Timing {
    epoch: usize,
    seconds: f64,
}

pub fn train(cfg: &ExperimentConfig, data: Option<&Path>) -> CliResult<String> {
    let ds = dataset(cfg, data)?;
    // The dumped config keeps an unset checkpoint unset so that rerunning
    // it with another --out writes there.
    cfg.dump()?;
    let mut cfg = cfg.clone();
    if cfg.train.checkpoint.is_none() {
        cfg.train.checkpoint = Some(cfg.out.join("checkpoint.safetensors"));
    }
    let epochs_path = cfg.out.join("epochs.jsonl");
    let timing_path = cfg.out.join("timing.jsonl");
    let mut epochs = File::create(&epochs_path).map_err(io_err(&epochs_path))?;
    let mut timing = File::create(&timing_path).map_err(io_err(&timing_path))?;
    let result = run(&ds, &cfg.model, &cfg, |r: &EpochReport| {
        let line = serde_json::to_string(r).map_err(|e| stlstm::Error::Format(e.to_string()))?;
        writeln!(epochs, "{line}").map_err(|e| stlstm::Error::io(&epochs_path, e))?;
        let t = serde_json::to_string(&Timing {
            epoch: r.epoch,
            seconds: r.wall_time,
        })
        .map_err(|e| stlstm::Error::Format(e.to_string()))?;
        writeln!(timing, "{t}").map_err(|e| stlstm::Error::io(&timing_path, e))?;
        eprintln!(
            "epoch {:>3}  loss {:.5}  val macro-F1 {:.4}  ({:.1}s)",
            r.epoch, r.train_loss, r.val_macro_f1, r.wall_time
        );
        Ok(())
    })?;
    let o = &result.outcome;
    let summary = TrainSummary {
        cell: cfg.model.cell,
        best_epoch: o.best_epoch,
        best_val_macro_f1: o.best_val_f1,
        epochs_run: o.reports.len(),
        stopped_early: o.stopped_early,
        val_majority_macro_f1: majority_baseline(&ds.train, &ds.val, ds.manifest.dims.num_classes)?.macro_f1,
        test: result.test,
    };
    write_json(cfg.out.join("summary.json"), &summary)?;
    Ok(format!(
        "best val macro-F1 {:.4} at epoch {} of {}; test macro-F1 {:.4}",
        summary.best_val_macro_f1, summary.best_epoch, summary.epochs_run, summary.test.macro_f1
    ))
}

pub fn eval(cfg: &ExperimentConfig, checkpoint: Option<&Path>, split: &str, data: Option<&Path>) -> CliResult<String> {
    let path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.out.join("checkpoint.safetensors"));
    let (model, _) = read_checkpoint(&path)?;
    let ds = dataset(cfg, data)?;
    let samples = ds
        .get(split)
        .ok_or_else(|| CliError::Config(format!("unknown split `{split}`")))?;
    if samples.is_empty() {
        return Err(stlstm::Error::Data(format!("split `{split}` is empty")).into());
    }
    let metrics = evaluate(&model, samples)?;
    write_json(cfg.out.join(format!("eval_{split}.json")), &metrics)?;
    Ok(to_json(&metrics)?)
}

/// Tiny model configurations checked by `gradcheck`.
pub fn gradcheck_configs(cfg: &ExperimentConfig) -> Vec<ModelConfig> {
    let g = &cfg.gradcheck;
    let cells = match g.cell {
        Some(c) => vec![c],
        None => vec![CellKind::Lstm, CellKind::Tlstm, CellKind::Stlstm],
    };
    cells
        .into_iter()
        .map(|cell| ModelConfig {
            cell,
            upper_layers: 1,
            hidden_dense: g.hidden_dense,
            hidden_sparse: g.hidden_sparse,
            d_dense: g.d_dense,
            d_delta: g.d_delta,
            n_sparse: g.n_sparse,
            d_static_dense: g.d_static_dense,
            embedding_dim: g.embedding_dim,
            d_static_delta: g.d_static_delta,
            aggregation: cfg.model.aggregation,
            candidate_activation: cfg.model.candidate_activation,
            share_sparse_weights: cfg.model.share_sparse_weights,
            output_gate_aggregate: cfg.model.output_gate_aggregate,
            seed: cfg.seed,
            ..Default::default()
        })
        .collect()
}

fn gradcheck_samples(cfg: &ExperimentConfig) -> CliResult<Vec<stlstm::data::SequenceSample>> {
    let g = &cfg.gradcheck;
    if g.d_delta > 2 || g.d_static_delta > 1 {
        return Err(CliError::Config("gradcheck supports at most 2 delta and 1 static delta features".into()));
    }
    let spec = SynthSpec {
        n_train: g.samples,
        n_val: 0,
        n_test: 0,
        t_min: g.min_len,
        t_max: g.max_len,
        d_dense: g.d_dense,
        n_sparse: g.n_sparse,
        sparsity: 0.5,
        n_groups: g.d_static_dense.max(1),
        event_delta: g.d_delta == 2,
        calibration_draws: 30,
        seed: cfg.seed,
        ..Default::default()
    };
    let mut samples = generate_synthetic(&spec)?.train;
    for s in &mut samples {
        if g.d_delta == 0 {
            s.delta.iter_mut().for_each(Vec::clear);
        }
        if g.d_static_dense == 0 {
            s.static_dense.clear();
        }
        if g.d_static_delta == 0 {
            s.static_delta.clear();
        }
    }
    Ok(samples)
}

pub fn gradcheck(cfg: &ExperimentConfig) -> CliResult<String> {
    let g = &cfg.gradcheck;
    let samples = gradcheck_samples(cfg)?;
    let opts = GradCheckOptions {
        step: g.step,
        tolerance: g.tolerance,
        ..Default::default()
    };
    let mut out = String::new();
    let mut failed = Vec::new();
    for mc in gradcheck_configs(cfg) {
        let model = Model::new(mc)?;
        let report = check_model(&model, &samples, opts, g.corrupt.as_deref())?;
        let cell = model.config().cell.as_str();
        for t in &report.tensors {
            out.push_str(&format!(
                "{cell:<6} {:<28} {:>5} entries  max rel err {:.3e}  {}\n",
                t.name,
                t.entries,
                t.max_rel_error,
                if t.passed { "ok" } else { "FAIL" }
            ));
            if !t.passed {
                failed.push(format!("{cell}/{}", t.name));
            }
        }
    }
    std::fs::create_dir_all(&cfg.out).map_err(io_err(&cfg.out))?;
    let path = cfg.out.join("gradcheck.txt");
    std::fs::write(&path, &out).map_err(io_err(&path))?;
    if failed.is_empty() {
        Ok(out)
    } else {
        print!("{out}");
        Err(CliError::Verification(format!("gradient mismatch in {}", failed.join(", "))))
    }
}

pub fn sweep_cmd(cfg: &ExperimentConfig, axis: Option<SweepAxis>) -> CliResult<String> {
    let axis = axis
        .or(cfg.sweep.axis)
        .ok_or_else(|| CliError::Config("no sweep axis given (--axis or sweep.axis)".into()))?;
    let mut cfg = cfg.clone();
    cfg.sweep.axis = Some(axis);
    cfg.dump()?;
    let rows = sweep(&cfg, axis, &mut DataCache::default(), |r| eprintln!("{}", r.to_csv()))?;
    let csv = sweep_csv(&rows);
    let path = cfg.out.join(format!("sweep_{}.csv", axis.as_str()));
    std::fs::write(&path, &csv).map_err(io_err(&path))?;
    Ok(csv)
}
