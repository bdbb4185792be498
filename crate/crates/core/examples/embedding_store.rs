//! Embeds prompts with the deterministic stub, writes a store, and reads
//! single vectors back by offset without loading the whole file.

use timecma::data::synthetic::ett_like;
use timecma::data::{make_windows, Split};
use timecma::prompt::{render_all, PromptDesign, ValueFormat};
use timecma::store::{read_vector_at, store_file_name, stub_embed, EmbedKey, LastTokenStore};

fn main() -> timecma::Result<()> {
    let ds = ett_like(1, 1, 600)?;
    let windows = make_windows(&ds, 0..200, 96, 24, 8);
    let records = render_all(&windows, PromptDesign::P5, ValueFormat::default());
    let e = 64;
    let values: Vec<f32> = records
        .iter()
        .map(|r| stub_embed(r, e))
        .collect::<timecma::Result<Vec<_>>>()?
        .concat();
    let store = LastTokenStore::new(windows.len(), ds.num_variables(), e, values)?;

    let path =
        std::env::temp_dir().join(store_file_name("etth1", Split::Train, 96, PromptDesign::P5));
    store.write(&path)?;
    let h = store.header();
    println!(
        "{}: {} windows x {} variables x {} dims, {} bytes",
        path.display(),
        h.num_windows,
        h.num_variables,
        h.embed_dim,
        h.file_len()
    );

    let key = EmbedKey::new(windows.len() - 1, 3);
    let v = read_vector_at(&path, key)?;
    println!("offset of {key:?}: {}", h.offset(key)?);
    println!(
        "last four slots (trend, mean, std, last value): {:?}",
        &v[e - 4..]
    );
    assert_eq!(v, store.read_vector(key)?);

    let mut bytes = std::fs::read(&path)?;
    bytes[100] ^= 0xff;
    match LastTokenStore::from_bytes(&bytes) {
        Err(err) => println!("corrupted copy rejected: {err}"),
        Ok(_) => unreachable!("checksum must catch a flipped byte"),
    }
    Ok(())
}
