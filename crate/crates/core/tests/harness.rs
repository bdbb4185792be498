mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use timecma::data::Split;
use timecma::harness::commands::{read_manifest, CHECKPOINT, PROMPT_DIR, TRAIN_LOG};
use timecma::harness::report::Metrics;
use timecma::harness::{
    embed_stub, eval, gen_prompts, inspect_store, prepare, read_train_log, train, zeroshot,
    ExperimentConfig,
};
use timecma::model::load_checkpoint;
use timecma::prompt::read_jsonl;

fn small(dataset: &str, out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        dataset: dataset.into(),
        synthetic_len: 400,
        lookback: 16,
        horizon: 4,
        hidden_dim: 16,
        embed_dim: 16,
        heads: 4,
        ffn_ratio: 2,
        epochs: 4,
        patience: 0,
        batch_size: 8,
        max_windows: 40,
        out_dir: out.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml_string().unwrap()).unwrap();
    path
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_timecma"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn gen_prompts_writes_one_record_per_window_and_variable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("synthetic:ar1", dir.path());
    let manifest = gen_prompts(&cfg, dir.path()).unwrap();
    assert_eq!(manifest.num_variables, 7);
    assert_eq!(manifest.splits.len(), 3);
    for entry in &manifest.splits {
        let recs = read_jsonl(dir.path().join(PROMPT_DIR).join(&entry.file)).unwrap();
        assert_eq!(recs.len(), entry.windows * 7);
        assert!(entry.windows > 0);
    }
    assert_eq!(read_manifest(dir.path()).unwrap(), manifest);
}

#[test]
fn rerunning_gen_prompts_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("synthetic:ili", dir.path());
    let m = gen_prompts(&cfg, dir.path()).unwrap();
    let read = |f: &str| std::fs::read(dir.path().join(PROMPT_DIR).join(f)).unwrap();
    let first: Vec<Vec<u8>> = m.splits.iter().map(|s| read(&s.file)).collect();
    gen_prompts(&cfg, dir.path()).unwrap();
    let second: Vec<Vec<u8>> = m.splits.iter().map(|s| read(&s.file)).collect();
    assert_eq!(first, second);
}

#[test]
fn series_of_one_window_gives_empty_val_and_test_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        synthetic_len: 20,
        max_windows: 0,
        ..small("synthetic:ar1", dir.path())
    };
    let m = gen_prompts(&cfg, dir.path()).unwrap();
    let sizes: Vec<usize> = m.splits.iter().map(|s| s.windows).collect();
    assert_eq!(sizes, vec![1, 0, 0]);
    let test_file = dir.path().join(PROMPT_DIR).join(&m.splits[2].file);
    assert_eq!(std::fs::read(test_file).unwrap(), b"");
}

#[test]
fn stub_stores_match_in_memory_embeddings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("synthetic:ar1", dir.path());
    gen_prompts(&cfg, dir.path()).unwrap();
    let paths = embed_stub(&cfg, dir.path()).unwrap();
    assert_eq!(paths.len(), 3);

    let data = prepare(&cfg).unwrap();
    let stored_cfg = ExperimentConfig {
        embedder: format!("store:{}", paths[0].parent().unwrap().display()),
        ..cfg.clone()
    };
    for split in Split::ALL {
        let a = data.split_set(&cfg, split).unwrap();
        let b = data.split_set(&stored_cfg, split).unwrap();
        assert_eq!(a.prompts, b.prompts);
    }
    let summary = inspect_store(&paths[0]).unwrap();
    assert_eq!(
        (
            summary.num_variables,
            summary.embed_dim,
            summary.num_windows
        ),
        (7, 16, 40)
    );
}

#[test]
fn embed_stub_rejects_a_mismatched_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("synthetic:ar1", dir.path());
    assert!(embed_stub(&cfg, dir.path()).is_err());
    gen_prompts(&cfg, dir.path()).unwrap();
    let other = ExperimentConfig {
        lookback: 12,
        ..cfg
    };
    assert!(embed_stub(&other, dir.path()).is_err());
}

#[test]
fn injected_oracle_scores_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("synthetic:ili", dir.path());
    let data = prepare(&cfg).unwrap();
    let windows = data.windows(&cfg, Split::Test);
    let m = Metrics::score(&windows, |_, w| Ok(w.target.clone())).unwrap();
    assert_eq!((m.mse, m.mae), (0.0, 0.0));
    let shifted = Metrics::score(&windows, |_, w| {
        Ok(w.target.iter().map(|v| v + 2.0).collect())
    })
    .unwrap();
    assert!((shifted.mse - 4.0).abs() < 1e-5 && (shifted.mae - 2.0).abs() < 1e-5);
    assert!(Metrics::score(&windows, |_, _| Ok(vec![0.0])).is_err());
}

#[test]
fn best_epoch_is_the_argmin_of_the_logged_validation_loss() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        epochs: 6,
        lr: 3e-3,
        ..small("synthetic:ar1", dir.path())
    };
    let outcome = train(&cfg, dir.path()).unwrap();
    let log = read_train_log(dir.path().join(TRAIN_LOG)).unwrap();
    assert_eq!(log, outcome.log);
    let argmin = log
        .iter()
        .fold(None::<(usize, f64)>, |best, r| match best {
            Some((_, v)) if v <= r.val_loss => best,
            _ => Some((r.epoch, r.val_loss)),
        })
        .unwrap();
    assert_eq!((outcome.best_epoch, outcome.best_val_loss), argmin);
    let ckpt = load_checkpoint(dir.path().join(CHECKPOINT)).unwrap();
    assert_eq!(ckpt.extra["best_epoch"], outcome.best_epoch);
    assert_eq!(ckpt.extra["config_hash"], cfg.hash());
}

#[test]
fn patience_stops_training_early() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        epochs: 40,
        patience: 1,
        lr: 0.5,
        ..small("synthetic:ar1", dir.path())
    };
    let outcome = train(&cfg, dir.path()).unwrap();
    assert!(outcome.log.len() < 40);
    assert_eq!(outcome.log.len(), outcome.best_epoch + 1);
}

#[test]
fn zeroshot_on_the_source_dataset_equals_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small("synthetic:etth1", dir.path());
    train(&cfg, dir.path()).unwrap();
    let ckpt = dir.path().join(CHECKPOINT);
    let a = eval(&cfg, &ckpt, Some(dir.path())).unwrap();
    let b = zeroshot(&ckpt, &cfg, None).unwrap();
    assert!(a.same_results(&b), "{a:?} vs {b:?}");
    assert!(dir.path().join("eval.csv").is_file());
    assert!(dir.path().join("eval_predictions.csv").is_file());

    let target = small("synthetic:etth2", dir.path());
    let before = std::fs::read(&ckpt).unwrap();
    let c = zeroshot(&ckpt, &target, None).unwrap();
    assert_eq!(c.param_hash, a.param_hash);
    assert_eq!(std::fs::read(&ckpt).unwrap(), before);
    assert_ne!(c.mse, a.mse);

    let bad = ExperimentConfig {
        horizon: 8,
        ..target
    };
    let err = zeroshot(&ckpt, &bad, None).unwrap_err().to_string();
    assert!(err.contains("horizon"), "{err}");
    let mismatched = ExperimentConfig {
        hidden_dim: 32,
        ..cfg
    };
    assert!(eval(&mismatched, &ckpt, None).is_err());
}

#[test]
fn cli_runs_the_full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = ExperimentConfig {
        epochs: 2,
        ..small("synthetic:ili", &out)
    };
    let config = write_config(dir.path(), &cfg);
    let config = config.to_str().unwrap();
    for sub in ["gen-prompts", "embed-stub", "train", "eval", "bench"] {
        let o = cli(&[sub, "--config", config]);
        assert!(
            o.status.success(),
            "{sub}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let bench = std::fs::read_to_string(out.join("bench.csv")).unwrap();
    assert!(bench.starts_with("dataset,param_count"));
    let o = cli(&[
        "zeroshot",
        "--config",
        config,
        "--checkpoint",
        out.join(CHECKPOINT).to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let evaluated: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["mse"], evaluated["mse"]);

    let store = std::fs::read_dir(out.join("stores"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let o = cli(&["inspect-store", store.to_str().unwrap()]);
    assert!(o.status.success());
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["embed_dim"], 16);
}

#[test]
fn cli_reports_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "lookback = 16\nno_such_field = 1\n").unwrap();
    let o = cli(&["train", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_field"));

    std::fs::write(&path, "dataset = \"missing.csv\"\nfrequency = \"1h\"\n").unwrap();
    let o = cli(&["gen-prompts", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exist"));
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        epochs: 1,
        ..small("synthetic:ar1", &dir.path().join("a"))
    };
    let config = write_config(dir.path(), &cfg);
    let run = |seed: &str, out: &str| {
        let out = dir.path().join(out);
        let o = cli(&[
            "train",
            "--config",
            config.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join(TRAIN_LOG)).unwrap()
    };
    assert_eq!(run("1", "x"), run("1", "y"));
    assert_ne!(run("1", "x"), run("2", "z"));
}
