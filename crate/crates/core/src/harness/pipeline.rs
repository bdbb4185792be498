use std::path::Path;

use super::config::{Embedder, ExperimentConfig};
use crate::data::synthetic::{ar1, ett_like, ili_like};
use crate::data::{
    chronological_split, load_csv, make_windows, CsvSchema, SeriesDataset, Split, SplitRanges,
    Standardizer, TimeSeriesWindow,
};
use crate::error::{Error, Result};
use crate::prompt::{render_all, PromptRecord};
use crate::store::{store_file_name, stub_embed, LastTokenStore};

/// Dataset after standardization, with its split boundaries.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub name: String,
    pub dataset: SeriesDataset,
    pub scaler: Standardizer,
    pub ranges: SplitRanges,
}

/// Windows of one split with the `N × E` prompt matrix of each.
#[derive(Debug, Clone)]
pub struct SplitSet {
    pub split: Split,
    pub windows: Vec<TimeSeriesWindow>,
    /// `prompts[i]` is row-major `N × E` for `windows[i]`.
    pub prompts: Vec<Vec<f32>>,
}

impl SplitSet {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }
}

/// Loads the configured series, unstandardized.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<SeriesDataset> {
    let mut ds = match cfg.dataset.as_str() {
        "synthetic:ili" => ili_like(cfg.seed)?,
        "synthetic:etth1" => ett_like(cfg.seed, 1, cfg.synthetic_len)?,
        "synthetic:etth2" => ett_like(cfg.seed, 2, cfg.synthetic_len)?,
        "synthetic:ar1" => ar1(cfg.seed, cfg.synthetic_len, 7, 0.9)?,
        s if s.starts_with("synthetic:") => {
            return Err(Error::Config(format!("unknown generator '{s}'")))
        }
        path => {
            let frequency = cfg
                .frequency()?
                .ok_or_else(|| Error::Config("CSV datasets need a 'frequency'".into()))?;
            let name = cfg.name.clone().unwrap_or_else(|| {
                Path::new(path)
                    .file_stem()
                    .map(|s| s.to_string_lossy().to_lowercase())
                    .unwrap_or_else(|| "data".into())
            });
            let schema = CsvSchema {
                name,
                frequency,
                split_ratio: cfg
                    .split_ratio()?
                    .unwrap_or(crate::data::SplitRatio::SEVEN_ONE_TWO),
                drop_missing: cfg.drop_missing,
            };
            load_csv(path, &schema)?
        }
    };
    if let Some(ratio) = cfg.split_ratio()? {
        ds.split_ratio = ratio;
    }
    if let Some(name) = &cfg.name {
        ds.name = name.clone();
    }
    Ok(ds)
}

/// Splits, fits the standardizer on training rows and rescales every row.
pub fn prepare(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let raw = load_dataset(cfg)?;
    let ranges = chronological_split(raw.len(), raw.split_ratio, cfg.lookback, cfg.horizon)?;
    let n = raw.num_variables();
    let scaler = if cfg.standardize {
        Standardizer::fit(raw.rows(ranges.train.clone()), n)
    } else {
        Standardizer::identity(n)
    };
    let dataset = raw.standardized(&scaler)?;
    Ok(PreparedData {
        name: dataset.name.clone(),
        dataset,
        scaler,
        ranges,
    })
}

impl PreparedData {
    pub fn windows(&self, cfg: &ExperimentConfig, split: Split) -> Vec<TimeSeriesWindow> {
        let mut w = make_windows(
            &self.dataset,
            self.ranges.window_span(split),
            cfg.lookback,
            cfg.horizon,
            cfg.stride,
        );
        if cfg.max_windows > 0 {
            w.truncate(cfg.max_windows);
        }
        w
    }

    pub fn prompts(&self, cfg: &ExperimentConfig, split: Split) -> Result<Vec<PromptRecord>> {
        Ok(render_all(
            &self.windows(cfg, split),
            cfg.design()?,
            cfg.value_format(),
        ))
    }

    pub fn store_path(
        &self,
        cfg: &ExperimentConfig,
        dir: &Path,
        split: Split,
    ) -> Result<std::path::PathBuf> {
        Ok(dir.join(store_file_name(
            &self.name,
            split,
            cfg.lookback,
            cfg.design()?,
        )))
    }

    /// Windows of `split` paired with their prompt embeddings.
    pub fn split_set(&self, cfg: &ExperimentConfig, split: Split) -> Result<SplitSet> {
        let windows = self.windows(cfg, split);
        let n = self.dataset.num_variables();
        let e = cfg.embed_dim;
        let prompts = match cfg.embedder()? {
            Embedder::Stub => {
                let records = render_all(&windows, cfg.design()?, cfg.value_format());
                let flat = records
                    .iter()
                    .map(|r| stub_embed(r, e))
                    .collect::<Result<Vec<_>>>()?
                    .concat();
                flat.chunks(n * e).map(<[f32]>::to_vec).collect()
            }
            Embedder::Store(dir) => {
                let path = self.store_path(cfg, &dir, split)?;
                let store = LastTokenStore::open(&path)?;
                let h = store.header();
                if h.embed_dim != e || h.num_variables != n || h.num_windows < windows.len() {
                    return Err(Error::Validation(format!(
                        "store {} holds {} windows × {} variables × {} dims, expected {} × {n} × {e}",
                        path.display(),
                        h.num_windows,
                        h.num_variables,
                        h.embed_dim,
                        windows.len()
                    )));
                }
                (0..windows.len())
                    .map(|w| store.window_matrix(w).map(<[f32]>::to_vec))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(SplitSet {
            split,
            windows,
            prompts,
        })
    }
}
