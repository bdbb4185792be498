mod common;

use chrono::{NaiveDate, NaiveDateTime};
use common::{rng, walk_dataset};
use rand::Rng;
use regex::Regex;
use timecma::data::{make_windows, Frequency, SeriesDataset, SplitRatio, TimeSeriesWindow};
use timecma::prompt::{
    read_jsonl, render, render_all, template_hash, trend, write_jsonl, PromptDesign, ValueFormat,
    ValueScale,
};

const RAW: ValueFormat = ValueFormat {
    decimals: 2,
    scale: ValueScale::Raw,
};

fn stamps(start: NaiveDateTime, freq: Frequency, n: usize) -> Vec<NaiveDateTime> {
    (0..n)
        .scan(start, |t, _| {
            let cur = *t;
            *t = freq.advance(*t);
            Some(cur)
        })
        .collect()
}

/// Two variables, `1, 2, 4, 7` and a constant, weekly from 2002-01-01.
fn toy_window() -> TimeSeriesWindow {
    let t0 = NaiveDate::from_ymd_opt(2002, 1, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let values = vec![1., 10., 2., 10., 4., 10., 7., 10., 0., 0.];
    let ds = SeriesDataset::new(
        "toy",
        vec!["a".into(), "b".into()],
        values,
        stamps(t0, Frequency::Weekly, 5),
        Frequency::Weekly,
        SplitRatio::SEVEN_ONE_TWO,
    )
    .unwrap();
    make_windows(&ds, 0..5, 4, 1, 1).remove(0)
}

#[test]
fn designs_render_the_frozen_templates() {
    let w = toy_window();
    let opening =
        "From 2002-01-01 to 2002-01-22, the values were 1.00, 2.00, 4.00, 7.00 every week.";
    let expected = [
        opening.to_string(),
        format!("{opening} Forecast the values of the next time steps from this history."),
        format!("{opening} The average value is 3.50"),
        format!("{opening} The history covers 4 steps and ends on day 22 of 2002"),
        format!("{opening} The total trend value is 6.00"),
    ];
    for (design, text) in PromptDesign::ALL.into_iter().zip(expected) {
        assert_eq!(render(&w, 0, design, RAW).text, text);
    }
}

#[test]
fn normalized_values_use_the_window_statistics() {
    // mean 3.5, population std √5.25
    let rec = render(&toy_window(), 0, PromptDesign::P5, ValueFormat::default());
    assert_eq!(
        rec.text,
        "From 2002-01-01 to 2002-01-22, the values were -1.09, -0.65, 0.22, 1.53 every week. \
         The total trend value is 2.62"
    );
    let z_last = 3.5 / 5.25f64.sqrt();
    let z_first = -2.5 / 5.25f64.sqrt();
    assert!((rec.trend_value as f64 - (z_last - z_first)).abs() < 1e-5);
    assert!((rec.last_value as f64 - z_last).abs() < 1e-5);
    assert_eq!(rec.value_count, 4);
}

#[test]
fn constant_variable_renders_zeros_without_negative_sign() {
    let rec = render(&toy_window(), 1, PromptDesign::P5, ValueFormat::default());
    assert!(rec.text.contains("0.00, 0.00, 0.00, 0.00 every week"));
    assert!(rec.text.ends_with("trend value is 0.00"));
    assert!(!rec.text.contains("-0.00"));
}

#[test]
fn sub_daily_frequencies_carry_the_time_of_day() {
    let t0 = NaiveDate::from_ymd_opt(2016, 7, 1)
        .unwrap()
        .and_hms_opt(0, 0, 0)
        .unwrap();
    let ds = SeriesDataset::new(
        "h",
        vec!["OT".into()],
        vec![1.0, 2.0, 3.0, 4.0],
        stamps(t0, Frequency::FifteenMinutes, 4),
        Frequency::FifteenMinutes,
        SplitRatio::SIX_TWO_TWO,
    )
    .unwrap();
    let w = &make_windows(&ds, 0..4, 3, 1, 1)[0];
    let text = render(w, 0, PromptDesign::P1, RAW).text;
    assert_eq!(
        text,
        "From 2016-07-01 00:00:00 to 2016-07-01 00:30:00, the values were 1.00, 2.00, 3.00 every 15 minutes."
    );
}

#[test]
fn trend_telescopes_to_last_minus_first() {
    let mut r = rng(1);
    for _ in 0..1000 {
        let len = r.gen_range(2..200);
        let v: Vec<f32> = (0..len).map(|_| r.gen_range(-3.0f32..3.0)).collect();
        let t = trend(&v).unwrap() as f64;
        assert!((t - (v[len - 1] as f64 - v[0] as f64)).abs() < 1e-6);
    }
    assert_eq!(trend(&[1.0, 3.0, 2.0, 5.0]).unwrap(), 4.0);
    assert!(trend(&[1.0]).is_err());
}

#[test]
fn numeric_designs_end_on_a_numeral() {
    let numeral = Regex::new(r"(^|\s)-?\d+(\.\d+)?$").unwrap();
    let mut r = rng(2);
    for _ in 0..50 {
        let (n, t) = (r.gen_range(1..5), r.gen_range(2..40));
        let ds = walk_dataset(r.gen(), t + 10, n);
        let windows = make_windows(&ds, 0..ds.len(), t, 1, 3);
        let fmt = ValueFormat {
            decimals: r.gen_range(0..4),
            scale: if r.gen() {
                ValueScale::Raw
            } else {
                ValueScale::Normalized
            },
        };
        for design in PromptDesign::ALL {
            for rec in render_all(&windows, design, fmt) {
                assert_eq!(
                    numeral.is_match(&rec.text),
                    design.ends_on_numeral(),
                    "{design}: {}",
                    rec.text
                );
            }
        }
    }
}

#[test]
fn rendering_is_byte_deterministic() {
    let ds = walk_dataset(3, 80, 4);
    let windows = make_windows(&ds, 0..80, 24, 6, 1);
    let a = render_all(&windows, PromptDesign::P5, ValueFormat::default());
    let b = render_all(
        &make_windows(&ds.clone(), 0..80, 24, 6, 1),
        PromptDesign::P5,
        ValueFormat::default(),
    );
    assert_eq!(a, b);
    assert_eq!(template_hash(), template_hash());
    assert_eq!(template_hash().len(), 64);
}

#[test]
fn records_come_window_major_then_variable() {
    let ds = walk_dataset(4, 20, 7);
    let windows = make_windows(&ds, 0..10, 3, 2, 1);
    assert_eq!(windows.len(), 6);
    let recs = render_all(&windows, PromptDesign::P3, ValueFormat::default());
    assert_eq!(recs.len(), 42);
    for (i, rec) in recs.iter().enumerate() {
        assert_eq!((rec.window_id, rec.variable_id), (i / 7, i % 7));
        assert_eq!(rec.design, PromptDesign::P3);
    }
    assert!(render_all(&[], PromptDesign::P5, ValueFormat::default()).is_empty());
}

#[test]
fn jsonl_round_trips_with_the_documented_fields() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.jsonl");
    let ds = walk_dataset(5, 30, 3);
    let recs = render_all(
        &make_windows(&ds, 0..30, 8, 4, 2),
        PromptDesign::P5,
        ValueFormat::default(),
    );
    write_jsonl(&recs, &path).unwrap();
    assert_eq!(read_jsonl(&path).unwrap(), recs);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), recs.len());
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    for key in ["window_id", "variable_id", "design", "text"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    assert_eq!(first["design"], "P5");

    write_jsonl(&[], &path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), b"");
}
