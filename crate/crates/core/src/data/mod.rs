//! Series loading, chronological splits, sliding windows and normalization.

mod csv_load;
mod revin;
mod scaling;
mod split;
pub mod synthetic;
mod window;

use std::fmt;
use std::str::FromStr;

use chrono::{Duration, Months, NaiveDateTime};
use serde::{Deserialize, Serialize};

pub use csv_load::{load_csv, write_csv, CsvSchema};
pub use revin::{revin_denormalize, revin_normalize, InstanceStats, REVIN_EPS};
pub use scaling::Standardizer;
pub use split::{chronological_split, Split, SplitRanges};
pub use window::{make_windows, window_count, TimeSeriesWindow};

use crate::error::{Error, Result};

/// Sampling interval of a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Frequency {
    #[serde(rename = "10min")]
    TenMinutes,
    #[serde(rename = "15min")]
    FifteenMinutes,
    #[serde(rename = "1h")]
    Hourly,
    #[serde(rename = "1w")]
    Weekly,
    #[serde(rename = "1m")]
    Monthly,
}

impl Frequency {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::TenMinutes => "10min",
            Self::FifteenMinutes => "15min",
            Self::Hourly => "1h",
            Self::Weekly => "1w",
            Self::Monthly => "1m",
        }
    }

    /// Interval as it appears in prompt text.
    pub fn phrase(self) -> &'static str {
        match self {
            Self::TenMinutes => "10 minutes",
            Self::FifteenMinutes => "15 minutes",
            Self::Hourly => "hour",
            Self::Weekly => "week",
            Self::Monthly => "month",
        }
    }

    pub fn is_sub_daily(self) -> bool {
        matches!(self, Self::TenMinutes | Self::FifteenMinutes | Self::Hourly)
    }

    /// The timestamp one step after `t`.
    pub fn advance(self, t: NaiveDateTime) -> NaiveDateTime {
        match self {
            Self::TenMinutes => t + Duration::minutes(10),
            Self::FifteenMinutes => t + Duration::minutes(15),
            Self::Hourly => t + Duration::hours(1),
            Self::Weekly => t + Duration::days(7),
            Self::Monthly => t
                .checked_add_months(Months::new(1))
                .unwrap_or(NaiveDateTime::MAX),
        }
    }
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Frequency {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "10min" => Ok(Self::TenMinutes),
            "15min" => Ok(Self::FifteenMinutes),
            "1h" => Ok(Self::Hourly),
            "1w" => Ok(Self::Weekly),
            "1m" => Ok(Self::Monthly),
            other => Err(Error::Config(format!(
                "unknown frequency '{other}' (expected 10min, 15min, 1h, 1w or 1m)"
            ))),
        }
    }
}

/// Train/val/test proportions in tenths, e.g. `7:1:2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatio {
    pub train: u32,
    pub val: u32,
    pub test: u32,
}

impl SplitRatio {
    pub const SIX_TWO_TWO: Self = Self {
        train: 6,
        val: 2,
        test: 2,
    };
    pub const SEVEN_ONE_TWO: Self = Self {
        train: 7,
        val: 1,
        test: 2,
    };

    pub fn new(train: u32, val: u32, test: u32) -> Result<Self> {
        let r = Self { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train == 0 || self.val == 0 || self.test == 0 {
            return Err(Error::Validation(format!(
                "split ratio {self} has a zero part"
            )));
        }
        if self.train + self.val + self.test != 10 {
            return Err(Error::Validation(format!(
                "split ratio {self} does not sum to 10"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for SplitRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.train, self.val, self.test)
    }
}

impl FromStr for SplitRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<u32> = s
            .split(':')
            .map(|p| p.trim().parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("bad split ratio '{s}'")))?;
        match parts.as_slice() {
            [a, b, c] => Self::new(*a, *b, *c),
            _ => Err(Error::Config(format!("bad split ratio '{s}'"))),
        }
    }
}

/// An `L × N` multivariate series with uniform timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesDataset {
    pub name: String,
    pub columns: Vec<String>,
    /// Row-major `L × N`.
    pub values: Vec<f32>,
    pub timestamps: Vec<NaiveDateTime>,
    pub frequency: Frequency,
    pub split_ratio: SplitRatio,
}

impl SeriesDataset {
    /// Builds a dataset and checks shape and timestamp invariants.
    pub fn new(
        name: impl Into<String>,
        columns: Vec<String>,
        values: Vec<f32>,
        timestamps: Vec<NaiveDateTime>,
        frequency: Frequency,
        split_ratio: SplitRatio,
    ) -> Result<Self> {
        let ds = Self {
            name: name.into(),
            columns,
            values,
            timestamps,
            frequency,
            split_ratio,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn num_variables(&self) -> usize {
        self.columns.len()
    }

    pub fn value(&self, row: usize, var: usize) -> f32 {
        self.values[row * self.num_variables() + var]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        let n = self.num_variables();
        &self.values[row * n..(row + 1) * n]
    }

    /// Rows `range` as a row-major block.
    pub fn rows(&self, range: std::ops::Range<usize>) -> &[f32] {
        let n = self.num_variables();
        &self.values[range.start * n..range.end * n]
    }

    pub fn validate(&self) -> Result<()> {
        self.split_ratio.validate()?;
        if self.values.len() != self.len() * self.num_variables() {
            return Err(Error::Validation(format!(
                "{} values for {} rows × {} variables",
                self.values.len(),
                self.len(),
                self.num_variables()
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            let n = self.num_variables().max(1);
            return Err(Error::Validation(format!(
                "missing or non-finite value at row {}, column {}",
                i / n,
                i % n
            )));
        }
        for (i, pair) in self.timestamps.windows(2).enumerate() {
            if self.frequency.advance(pair[0]) != pair[1] {
                return Err(Error::Validation(format!(
                    "timestamps at rows {i} and {} ({} → {}) are not one {} apart",
                    i + 1,
                    pair[0],
                    pair[1],
                    self.frequency.phrase()
                )));
            }
        }
        Ok(())
    }

    /// Rescales every value with a fitted standardizer.
    pub fn standardized(&self, scaler: &Standardizer) -> Result<Self> {
        let mut out = self.clone();
        scaler.transform(&mut out.values)?;
        Ok(out)
    }
}
