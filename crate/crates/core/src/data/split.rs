use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SplitRatio;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split '{other}'"))),
        }
    }
}

/// Row ranges owned by each split. A window belongs to a split when its
/// whole forecast target lies inside that split's range; its lookback may
/// reach back into earlier rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
    pub lookback: usize,
    pub horizon: usize,
}

impl SplitRanges {
    pub fn target_range(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => self.train.clone(),
            Split::Val => self.val.clone(),
            Split::Test => self.test.clone(),
        }
    }

    /// Rows that windows of `split` may touch: the split's own rows plus up
    /// to `lookback` rows before them.
    pub fn window_span(&self, split: Split) -> Range<usize> {
        let r = self.target_range(split);
        if r.is_empty() {
            return r.start..r.start;
        }
        r.start.saturating_sub(self.lookback)..r.end
    }
}

/// Chronological boundaries at `floor(L · cumulative_ratio)`.
///
/// The training range is widened to hold at least one full window, so a
/// series of exactly `lookback + horizon` rows yields one training window
/// and empty validation and test splits.
pub fn chronological_split(
    len: usize,
    ratio: SplitRatio,
    lookback: usize,
    horizon: usize,
) -> Result<SplitRanges> {
    ratio.validate()?;
    if lookback == 0 || horizon == 0 {
        return Err(Error::Validation(
            "lookback and horizon must be positive".into(),
        ));
    }
    let window = lookback + horizon;
    if len < window {
        return Err(Error::Validation(format!(
            "series of {len} rows is shorter than one window ({lookback} + {horizon})"
        )));
    }
    let cut = |parts: u32| len * parts as usize / 10;
    let b1 = cut(ratio.train).max(window).min(len);
    let b2 = cut(ratio.train + ratio.val).max(b1).min(len);
    Ok(SplitRanges {
        train: 0..b1,
        val: b1..b2,
        test: b2..len,
        lookback,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_rows_six_two_two() {
        let s = chronological_split(100, SplitRatio::SIX_TWO_TWO, 5, 3).unwrap();
        assert_eq!((s.train.end, s.val.end, s.test.end), (60, 80, 100));
    }

    #[test]
    fn ili_train_boundary() {
        let s = chronological_split(966, SplitRatio::SEVEN_ONE_TWO, 36, 24).unwrap();
        // floor(966 · 0.7)
        assert_eq!(s.train.end, 676);
        assert_eq!(s.val.end, 772);
    }

    #[test]
    fn degenerate_series_is_one_training_window() {
        let s = chronological_split(8, SplitRatio::SIX_TWO_TWO, 5, 3).unwrap();
        assert_eq!(s.train, 0..8);
        assert!(s.val.is_empty() && s.test.is_empty());
    }

    #[test]
    fn too_short_is_an_error() {
        assert!(chronological_split(7, SplitRatio::SIX_TWO_TWO, 5, 3).is_err());
    }
}
