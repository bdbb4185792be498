//! Seeded synthetic series shaped like common forecasting benchmarks.
//!
//! These stand in for the public CSVs when they are not on disk. Column
//! names, lengths, sampling frequencies and split ratios follow the real
//! files; the values are generated.

use chrono::{NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Frequency, SeriesDataset, SplitRatio};
use crate::error::Result;

fn timeline(start: NaiveDateTime, len: usize, freq: Frequency) -> Vec<NaiveDateTime> {
    std::iter::successors(Some(start), |&t| Some(freq.advance(t)))
        .take(len)
        .collect()
}

fn date(y: i32, m: u32, d: u32) -> NaiveDateTime {
    NaiveDate::from_ymd_opt(y, m, d)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid literal date")
}

pub const ILI_LEN: usize = 966;
pub const ILI_COLUMNS: [&str; 7] = [
    "% WEIGHTED ILI",
    "%UNWEIGHTED ILI",
    "AGE 0-4",
    "AGE 5-24",
    "ILITOTAL",
    "NUM. OF PROVIDERS",
    "OT",
];

/// Weekly influenza-like-illness surrogate: 966 rows, 7 variables, 7:1:2.
///
/// A latent activity level with one winter epidemic per year (random peak
/// week, height and width) drives the percentage columns; the count columns
/// additionally scale with a slowly growing provider network.
pub fn ili_like(seed: u64) -> Result<SeriesDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0f64, 1.0).expect("unit normal");
    let len = ILI_LEN;
    let years = len / 52 + 2;
    let seasons: Vec<(f64, f64, f64)> = (0..years)
        .map(|y| {
            let peak = 52.0 * y as f64 + 6.0 + rng.gen_range(-4.0..4.0);
            let height = rng.gen_range(2.0..6.0) * (1.0 + 0.03 * y as f64);
            let width = rng.gen_range(3.5..7.0);
            (peak, height, width)
        })
        .collect();

    let mut ar = 0.0f64;
    let mut values = Vec::with_capacity(len * 7);
    for t in 0..len {
        let tf = t as f64;
        // The series starts in week 40 of the first season.
        let week = tf + 40.0;
        let epidemic: f64 = seasons
            .iter()
            .map(|&(p, h, w)| h * (-0.5 * ((week - p) / w).powi(2)).exp())
            .sum();
        ar = 0.8 * ar + 0.08 * noise.sample(&mut rng);
        let activity = 1.0 + 0.002 * tf + epidemic + ar;
        let providers = 1800.0 + 1.6 * tf + 40.0 * noise.sample(&mut rng);
        let weighted = activity.max(0.3);
        let unweighted = weighted * (0.95 + 0.02 * noise.sample(&mut rng));
        let age_0_4 = providers * weighted * 0.9 * (1.0 + 0.03 * noise.sample(&mut rng));
        let age_5_24 = providers * weighted * 1.1 * (1.0 + 0.03 * noise.sample(&mut rng));
        let total = age_0_4 + age_5_24 + providers * weighted * 0.8;
        let ot = weighted * (1.0 + 0.01 * noise.sample(&mut rng));
        values.extend(
            [
                weighted, unweighted, age_0_4, age_5_24, total, providers, ot,
            ]
            .into_iter()
            .map(|v| v as f32),
        );
    }
    SeriesDataset::new(
        "ili",
        ILI_COLUMNS.iter().map(|s| s.to_string()).collect(),
        values,
        timeline(date(2002, 1, 1), len, Frequency::Weekly),
        Frequency::Weekly,
        SplitRatio::SEVEN_ONE_TWO,
    )
}

pub const ETT_COLUMNS: [&str; 7] = ["HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL", "OT"];

/// Hourly transformer-load surrogate with daily and weekly cycles, 7
/// variables, 6:2:2. `variant` picks an independent station (different
/// mixing weights, levels and noise), e.g. `1` and `2` for a related pair.
pub fn ett_like(seed: u64, variant: u64, len: usize) -> Result<SeriesDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ variant.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let noise = Normal::new(0.0f64, 1.0).expect("unit normal");
    let loads: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.gen_range(2.0..12.0),
                rng.gen_range(0.5..3.0),
                rng.gen_range(0.2..1.5),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let noise_scale = 0.15 + 0.1 * variant as f64;
    let mut walk = 0.0f64;
    let mut values = Vec::with_capacity(len * 7);
    for t in 0..len {
        let tf = t as f64;
        let day = (std::f64::consts::TAU * tf / 24.0).sin();
        let week = (std::f64::consts::TAU * tf / 168.0).sin();
        walk = 0.995 * walk + 0.05 * noise.sample(&mut rng);
        let mut row = [0.0f64; 7];
        for (j, &(level, amp_d, amp_w, phase)) in loads.iter().enumerate() {
            let d = (std::f64::consts::TAU * tf / 24.0 + phase).sin();
            row[j] = level + amp_d * d + amp_w * week + walk + noise_scale * noise.sample(&mut rng);
        }
        // Oil temperature lags the aggregate load.
        let load_sum: f64 = row[..6].iter().sum::<f64>() / 6.0;
        row[6] = 10.0 + 0.6 * load_sum + 1.5 * day + 2.0 * walk + 0.1 * noise.sample(&mut rng);
        values.extend(row.iter().map(|&v| v as f32));
    }
    SeriesDataset::new(
        format!("etth{variant}"),
        ETT_COLUMNS.iter().map(|s| s.to_string()).collect(),
        values,
        timeline(date(2016, 7, 1), len, Frequency::Hourly),
        Frequency::Hourly,
        SplitRatio::SIX_TWO_TWO,
    )
}

/// Independent AR(1) processes `x_t = φ·x_{t−1} + ε_t`, hourly, 7:1:2.
pub fn ar1(seed: u64, len: usize, num_variables: usize, phi: f64) -> Result<SeriesDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0f64, 1.0).expect("unit normal");
    let mut state = vec![0.0f64; num_variables];
    let mut values = Vec::with_capacity(len * num_variables);
    for _ in 0..len {
        for s in state.iter_mut() {
            *s = phi * *s + noise.sample(&mut rng);
            values.push(*s as f32);
        }
    }
    SeriesDataset::new(
        "ar1",
        (0..num_variables).map(|j| format!("x{j}")).collect(),
        values,
        timeline(date(2020, 1, 1), len, Frequency::Hourly),
        Frequency::Hourly,
        SplitRatio::SEVEN_ONE_TWO,
    )
}
