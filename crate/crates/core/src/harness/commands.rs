//! One function per CLI subcommand. Each takes a validated config and an
//! output directory and returns a summary of what it wrote.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::pipeline::{prepare, PreparedData};
use super::report::{
    bench, evaluate, write_csv_row, write_predictions, BenchReport, ForecastReport,
};
use super::train::{fit, EpochLog, TrainOptions, TrainOutcome};
use crate::data::Split;
use crate::error::{Error, Result};
use crate::model::{load_checkpoint, save_checkpoint, Checkpoint, TimeCma};
use crate::prompt::{read_jsonl, template_hash, write_jsonl, TEMPLATE_VERSION};
use crate::store::{checksum, store_file_name, stub_embed, LastTokenStore, StoreHeader};

pub const PROMPT_DIR: &str = "prompts";
pub const STORE_DIR: &str = "stores";
pub const MANIFEST: &str = "manifest.json";
pub const CHECKPOINT: &str = "checkpoint.tcmk";
pub const TRAIN_LOG: &str = "train_log.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSplit {
    pub split: Split,
    pub file: String,
    pub windows: usize,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptManifest {
    pub template_version: String,
    pub template_hash: String,
    pub config_hash: String,
    pub dataset: String,
    pub design: String,
    pub lookback: usize,
    pub horizon: usize,
    pub num_variables: usize,
    pub splits: Vec<ManifestSplit>,
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn prompt_file_name(data: &PreparedData, cfg: &ExperimentConfig, split: Split) -> Result<String> {
    Ok(format!(
        "{}_{split}_T{}_{}.jsonl",
        data.name,
        cfg.lookback,
        cfg.design()?
    ))
}

/// Renders every prompt of every split to JSON lines plus a manifest.
pub fn gen_prompts(cfg: &ExperimentConfig, out: &Path) -> Result<PromptManifest> {
    cfg.validate()?;
    let data = prepare(cfg)?;
    let dir = out.join(PROMPT_DIR);
    create_dir(&dir)?;
    let mut splits = Vec::new();
    for split in Split::ALL {
        let windows = data.windows(cfg, split);
        let records = data.prompts(cfg, split)?;
        let file = prompt_file_name(&data, cfg, split)?;
        write_jsonl(&records, dir.join(&file))?;
        splits.push(ManifestSplit {
            split,
            file,
            windows: windows.len(),
            records: records.len(),
        });
    }
    let manifest = PromptManifest {
        template_version: TEMPLATE_VERSION.into(),
        template_hash: template_hash(),
        config_hash: cfg.hash(),
        dataset: data.name.clone(),
        design: cfg.design()?.to_string(),
        lookback: cfg.lookback,
        horizon: cfg.horizon,
        num_variables: data.dataset.num_variables(),
        splits,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn read_manifest(out: &Path) -> Result<PromptManifest> {
    let path = out.join(PROMPT_DIR).join(MANIFEST);
    if !path.is_file() {
        return Err(Error::Usage(format!(
            "{} not found; run gen-prompts first",
            path.display()
        )));
    }
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Embeds the generated prompts with the stub and writes one store per split.
pub fn embed_stub(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let manifest = read_manifest(out)?;
    let design = cfg.design()?;
    if manifest.lookback != cfg.lookback
        || manifest.design != design.as_str()
        || manifest.template_hash != template_hash()
    {
        return Err(Error::Validation(format!(
            "prompt manifest (T={}, {}, templates {}) does not match the config (T={}, {design}, templates {})",
            manifest.lookback,
            manifest.design,
            &manifest.template_hash[..12.min(manifest.template_hash.len())],
            cfg.lookback,
            &template_hash()[..12]
        )));
    }
    let n = manifest.num_variables;
    let e = cfg.embed_dim;
    let dir = out.join(STORE_DIR);
    create_dir(&dir)?;
    let mut paths = Vec::new();
    for entry in &manifest.splits {
        let records = read_jsonl(out.join(PROMPT_DIR).join(&entry.file))?;
        if records.len() != entry.windows * n || records.len() != entry.records {
            return Err(Error::Validation(format!(
                "{} holds {} prompts, manifest expects {} windows × {n} variables",
                entry.file,
                records.len(),
                entry.windows
            )));
        }
        let mut values = Vec::with_capacity(records.len() * e);
        for (i, r) in records.iter().enumerate() {
            if r.window_id != i / n || r.variable_id != i % n {
                return Err(Error::Validation(format!(
                    "{} line {} is ({}, {}), expected ({}, {})",
                    entry.file,
                    i + 1,
                    r.window_id,
                    r.variable_id,
                    i / n,
                    i % n
                )));
            }
            values.extend(stub_embed(r, e)?);
        }
        let store = LastTokenStore::new(entry.windows, n, e, values)?;
        let path = dir.join(store_file_name(
            &manifest.dataset,
            entry.split,
            cfg.lookback,
            design,
        ));
        store.write(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Trains from scratch, keeping the parameters of the best validation epoch.
pub fn train(cfg: &ExperimentConfig, out: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    let data = prepare(cfg)?;
    let train_set = data.split_set(cfg, Split::Train)?;
    let val_set = data.split_set(cfg, Split::Val)?;
    let model_cfg = cfg.model_config(data.dataset.num_variables());
    let (model, mut params) = TimeCma::init(model_cfg.clone(), cfg.seed)?;

    create_dir(out)?;
    fs::write(out.join("config.toml"), cfg.to_toml_string()?)?;
    let mut log_file = std::io::BufWriter::new(fs::File::create(out.join(TRAIN_LOG))?);
    let opts = TrainOptions {
        optimizer: cfg.optimizer(),
        epochs: cfg.epochs,
        patience: cfg.patience,
        batch_size: cfg.batch_size,
        seed: cfg.seed,
    };
    let mut write_err = None;
    let outcome = fit(
        &model,
        &mut params,
        &train_set,
        &val_set,
        &opts,
        |row: &EpochLog| {
            let res = serde_json::to_writer(&mut log_file, row)
                .map_err(Error::from)
                .and_then(|_| log_file.write_all(b"\n").map_err(Error::from))
                .and_then(|_| log_file.flush().map_err(Error::from));
            if let Err(e) = res {
                write_err.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = write_err {
        return Err(e);
    }

    let ckpt = Checkpoint {
        config: model_cfg,
        seed: cfg.seed,
        extra: serde_json::json!({
            "config_hash": cfg.hash(),
            "dataset": data.name,
            "best_epoch": outcome.best_epoch,
            "best_val_loss": outcome.best_val_loss,
            "epochs_run": outcome.log.len(),
            "steps": outcome.steps,
        }),
        params: outcome.best_params.clone(),
    };
    save_checkpoint(out.join(CHECKPOINT), &ckpt)?;
    Ok(outcome)
}

pub fn read_train_log(path: impl AsRef<Path>) -> Result<Vec<EpochLog>> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

fn load_model(checkpoint: &Path) -> Result<(TimeCma, Checkpoint)> {
    let ckpt = load_checkpoint(checkpoint)?;
    let (model, fresh) = TimeCma::init(ckpt.config.clone(), ckpt.seed)?;
    fresh.check_layout(&ckpt.params)?;
    Ok((model, ckpt))
}

fn write_report(
    out: &Path,
    stem: &str,
    report: &ForecastReport,
    data: &PreparedData,
    cfg: &ExperimentConfig,
    predictions: &[Vec<f32>],
) -> Result<()> {
    create_dir(out)?;
    write_csv_row(out.join(format!("{stem}.csv")), report)?;
    write_json(&out.join(format!("{stem}.json")), report)?;
    write_predictions(
        out.join(format!("{stem}_predictions.csv")),
        &data.windows(cfg, Split::Test),
        predictions,
    )
}

fn run_eval(
    cfg: &ExperimentConfig,
    model: &TimeCma,
    ckpt: &Checkpoint,
    out: Option<&Path>,
    stem: &str,
) -> Result<ForecastReport> {
    let data = prepare(cfg)?;
    let test = data.split_set(cfg, Split::Test)?;
    if test.is_empty() {
        return Err(Error::Usage(format!("{} has no test windows", data.name)));
    }
    let before = super::report::param_hash(&ckpt.params);
    let (report, predictions) = evaluate(model, &ckpt.params, &test, &data.name, &cfg.hash())?;
    debug_assert_eq!(before, report.param_hash);
    if let Some(out) = out {
        write_report(out, stem, &report, &data, cfg, &predictions)?;
    }
    Ok(report)
}

/// MSE/MAE on the test split, one window at a time.
pub fn eval(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    out: Option<&Path>,
) -> Result<ForecastReport> {
    cfg.validate()?;
    let (model, ckpt) = load_model(checkpoint)?;
    let expected = cfg.model_config(ckpt.config.num_variables);
    if expected != ckpt.config {
        return Err(Error::Config(format!(
            "checkpoint was trained with {:?}, config describes {:?}",
            ckpt.config, expected
        )));
    }
    run_eval(cfg, &model, &ckpt, out, "eval")
}

/// Evaluates a checkpoint on another dataset without updating it. `T`, `M`
/// and `E` must match; the variable count may differ because every
/// learned map is shared across variables.
pub fn zeroshot(
    source_checkpoint: &Path,
    target: &ExperimentConfig,
    out: Option<&Path>,
) -> Result<ForecastReport> {
    target.validate()?;
    let (model, ckpt) = load_model(source_checkpoint)?;
    let src = &ckpt.config;
    for (what, s, t) in [
        ("lookback", src.lookback, target.lookback),
        ("horizon", src.horizon, target.horizon),
        ("embed_dim", src.embed_dim, target.embed_dim),
    ] {
        if s != t {
            return Err(Error::Config(format!(
                "source model has {what} {s} but the target config has {t}; remap the target explicitly"
            )));
        }
    }
    run_eval(target, &model, &ckpt, out, "zeroshot")
}

/// Parameter count, single-window inference speed and peak memory.
pub fn bench_cmd(
    cfg: &ExperimentConfig,
    checkpoint: &Path,
    out: Option<&Path>,
) -> Result<BenchReport> {
    cfg.validate()?;
    let (model, ckpt) = load_model(checkpoint)?;
    let data = prepare(cfg)?;
    let test = data.split_set(cfg, Split::Test)?;
    let report = bench(&model, &ckpt.params, &test, &data.name, 100, 3)?;
    if let Some(out) = out {
        create_dir(out)?;
        write_csv_row(out.join("bench.csv"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreSummary {
    pub path: String,
    pub version: u16,
    pub num_windows: usize,
    pub num_variables: usize,
    pub embed_dim: usize,
    pub dtype: String,
    pub file_len: usize,
    pub checksum: String,
    pub mean_norm: f64,
}

/// Opens a store, verifying size and checksum.
pub fn inspect_store(path: &Path) -> Result<StoreSummary> {
    let store = LastTokenStore::open(path)?;
    let h: StoreHeader = *store.header();
    let e = h.embed_dim.max(1);
    let vectors = store.values().len() / e;
    let total_norm: f64 = store
        .values()
        .chunks(e)
        .map(|v| v.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt())
        .sum();
    let payload: Vec<u8> = store
        .values()
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    Ok(StoreSummary {
        path: path.display().to_string(),
        version: h.version,
        num_windows: h.num_windows,
        num_variables: h.num_variables,
        embed_dim: h.embed_dim,
        dtype: "f32".into(),
        file_len: h.file_len(),
        checksum: format!("{:016x}", checksum(&payload)),
        mean_norm: if vectors == 0 {
            0.0
        } else {
            total_norm / vectors as f64
        },
    })
}
