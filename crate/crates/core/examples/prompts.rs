//! Renders all five prompt designs for the first window of the synthetic
//! illness series and writes the test split as JSON lines.

use timecma::data::synthetic::ili_like;
use timecma::data::{chronological_split, make_windows, Split};
use timecma::prompt::{
    render, render_all, template_hash, write_jsonl, PromptDesign, ValueFormat, TEMPLATE_VERSION,
};

fn main() -> timecma::Result<()> {
    let ds = ili_like(2024)?;
    let (t, m) = (36, 24);
    let ranges = chronological_split(ds.len(), ds.split_ratio, t, m)?;
    let windows = make_windows(&ds, ranges.window_span(Split::Test), t, m, 1);
    println!("templates {TEMPLATE_VERSION} ({})", &template_hash()[..16]);
    println!(
        "variable {:?}, window 0 of {}\n",
        ds.columns[6],
        windows.len()
    );
    for design in PromptDesign::ALL {
        let rec = render(&windows[0], 6, design, ValueFormat::default());
        println!("{design}: {}\n", rec.text);
    }
    let path = std::env::temp_dir().join("ili_test_T36_P5.jsonl");
    let records = render_all(&windows, PromptDesign::P5, ValueFormat::default());
    write_jsonl(&records, &path)?;
    println!("wrote {} records to {}", records.len(), path.display());
    Ok(())
}
