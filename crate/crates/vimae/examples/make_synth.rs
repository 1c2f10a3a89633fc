//! Generate the synthetic oriented-bar dataset and export it as IDX files.
//!
//! ```bash
//! cargo run --release --example make_synth
//! ```

use std::path::Path;

use vimae::data::{load_idx, synth_generate, write_idx};
use vimae::seeded::{derive, Stream};

fn main() -> vimae::Result<()> {
    let out = Path::new("out/make_synth");
    std::fs::create_dir_all(out)?;

    let train = synth_generate(4, 500, 16, derive(1, Stream::SynthTrain))?;
    let test = synth_generate(4, 100, 16, derive(1, Stream::SynthTest))?;
    println!(
        "train: {} images of {}x{}, {} classes",
        train.len(),
        train.image_height,
        train.image_width,
        train.num_classes
    );

    write_idx(&train, &out.join("train.images.idx"), &out.join("train.labels.idx"))?;
    write_idx(&test, &out.join("test.images.idx"), &out.join("test.labels.idx"))?;

    // round-trip check: reload and compare intensities up to 8-bit quantization
    let back = load_idx(&out.join("train.images.idx"), &out.join("train.labels.idx"))?;
    let a = train.images.data();
    let b = back.images.data();
    let max_gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    println!("reloaded {} images, max quantization gap {max_gap:.6}", back.len());
    println!("files under {}", out.display());
    Ok(())
}
