//! Deterministic text prompts, one per (window, variable).
//!
//! Five designs share a common opening sentence that carries the lookback's
//! time span, frequency and values; they differ in the suffix. Designs
//! `P3`..`P5` end on a numeral so that the final token of the prompt, whose
//! embedding is the one a causal language model summarizes the prompt into,
//! is a value rather than a word.
//!
//! The template strings are versioned: any change to them must bump
//! [`TEMPLATE_VERSION`], because stored embeddings are keyed on rendered bytes.

use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::TimeSeriesWindow;
use crate::error::{Error, Result};

pub const TEMPLATE_VERSION: &str = "prompts/v1";

const OPENING: &str = "From {start} to {end}, the values were {values} every {freq}.";
const SUFFIX_P1: &str = "";
const SUFFIX_P2: &str = " Forecast the values of the next time steps from this history.";
const SUFFIX_P3: &str = " The average value is {mean}";
const SUFFIX_P4: &str = " The history covers {count} steps and ends on day {day} of {year}";
const SUFFIX_P5: &str = " The total trend value is {trend}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum PromptDesign {
    /// Time span, frequency and raw values.
    P1,
    /// `P1` plus a forecasting instruction.
    P2,
    /// `P1` plus the window mean.
    P3,
    /// `P1` plus historical time information.
    P4,
    /// `P1` plus the total trend value.
    #[default]
    P5,
}

impl PromptDesign {
    pub const ALL: [PromptDesign; 5] = [Self::P1, Self::P2, Self::P3, Self::P4, Self::P5];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::P1 => "P1",
            Self::P2 => "P2",
            Self::P3 => "P3",
            Self::P4 => "P4",
            Self::P5 => "P5",
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Self::P1 => SUFFIX_P1,
            Self::P2 => SUFFIX_P2,
            Self::P3 => SUFFIX_P3,
            Self::P4 => SUFFIX_P4,
            Self::P5 => SUFFIX_P5,
        }
    }

    pub fn ends_on_numeral(self) -> bool {
        matches!(self, Self::P3 | Self::P4 | Self::P5)
    }
}

impl fmt::Display for PromptDesign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptDesign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown prompt design '{s}' (expected P1..P5)")))
    }
}

/// Which values a prompt carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueScale {
    /// Instance-normalized with the window's lookback statistics.
    Normalized,
    /// Values as loaded.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueFormat {
    pub decimals: usize,
    pub scale: ValueScale,
}

impl Default for ValueFormat {
    fn default() -> Self {
        Self {
            decimals: 2,
            scale: ValueScale::Normalized,
        }
    }
}

impl ValueFormat {
    pub fn format(&self, v: f32) -> String {
        let s = format!("{:.*}", self.decimals, v);
        // "-0.00" and "0.00" denote the same rendered value.
        if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
            s[1..].to_string()
        } else {
            s
        }
    }
}

/// A rendered prompt and the statistics of the values it carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub window_id: usize,
    pub variable_id: usize,
    pub design: PromptDesign,
    pub text: String,
    pub trend_value: f32,
    pub value_count: usize,
    pub mean: f32,
    pub std: f32,
    pub last_value: f32,
}

/// Total trend: the sum of consecutive differences.
pub fn trend(values: &[f32]) -> Result<f32> {
    if values.len() < 2 {
        return Err(Error::Usage(format!(
            "trend needs at least 2 values, got {}",
            values.len()
        )));
    }
    let total: f64 = values.windows(2).map(|w| w[1] as f64 - w[0] as f64).sum();
    Ok(total as f32)
}

/// SHA-256 over the template version and every template string.
pub fn template_hash() -> String {
    let mut h = Sha256::new();
    for part in [
        TEMPLATE_VERSION,
        OPENING,
        SUFFIX_P1,
        SUFFIX_P2,
        SUFFIX_P3,
        SUFFIX_P4,
        SUFFIX_P5,
    ] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    slots.iter().fold(template.to_string(), |acc, (k, v)| {
        acc.replace(&format!("{{{k}}}"), v)
    })
}

/// Renders the prompt for one variable of one window.
pub fn render(
    window: &TimeSeriesWindow,
    variable_id: usize,
    design: PromptDesign,
    fmt: ValueFormat,
) -> PromptRecord {
    let values = match fmt.scale {
        ValueScale::Normalized => window.normalized_variable_lookback(variable_id),
        ValueScale::Raw => window.variable_lookback(variable_id),
    };
    let ts_format = if window.frequency.is_sub_daily() {
        "%Y-%m-%d %H:%M:%S"
    } else {
        "%Y-%m-%d"
    };
    let start = window.first_timestamp.format(ts_format).to_string();
    let end = window.last_timestamp.format(ts_format).to_string();
    let rendered: Vec<String> = values.iter().map(|&v| fmt.format(v)).collect();

    let n = values.len().max(1) as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let std = (values
        .iter()
        .map(|&v| (v as f64 - mean).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let trend_value = trend(&values).unwrap_or(0.0);

    let mean_s = fmt.format(mean as f32);
    let trend_s = fmt.format(trend_value);
    let count_s = values.len().to_string();
    let day_s = window.last_timestamp.ordinal().to_string();
    let year_s = window.last_timestamp.year().to_string();
    let slots = [
        ("start", start.as_str()),
        ("end", end.as_str()),
        ("values", &rendered.join(", ")),
        ("freq", window.frequency.phrase()),
        ("mean", &mean_s),
        ("trend", &trend_s),
        ("count", &count_s),
        ("day", &day_s),
        ("year", &year_s),
    ];
    let mut text = fill(OPENING, &slots);
    text.push_str(&fill(design.suffix(), &slots));

    PromptRecord {
        window_id: window.window_id,
        variable_id,
        design,
        text,
        trend_value,
        value_count: values.len(),
        mean: mean as f32,
        std: std as f32,
        last_value: values.last().copied().unwrap_or(0.0),
    }
}

/// Every (window, variable) prompt, window-major then variable-major.
pub fn render_all(
    windows: &[TimeSeriesWindow],
    design: PromptDesign,
    fmt: ValueFormat,
) -> Vec<PromptRecord> {
    windows
        .iter()
        .flat_map(|w| (0..w.num_variables).map(move |v| render(w, v, design, fmt)))
        .collect()
}

/// Writes one JSON object per line.
pub fn write_jsonl(records: &[PromptRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<PromptRecord>> {
    let reader = BufReader::new(std::fs::File::open(path)?);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}
