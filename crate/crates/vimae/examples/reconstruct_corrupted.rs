//! Reconstruct half-masked test images with a trained VIMAE: the top row
//! of the output image shows the corrupted inputs, the bottom row the
//! model's reconstructions.
//!
//! ```bash
//! cargo run --release --example reconstruct_corrupted
//! ```

use std::path::Path;

use vimae::data::{synth_generate, Corruption};
use vimae::evaluation::reconstruct_grid;
use vimae::models::Architecture;
use vimae::seeded::{derive, rng, Stream};
use vimae::training::{train, AdamHyper, TrainConfig};
use vimae::{ObjectiveConfig, Prior};

fn main() -> vimae::Result<()> {
    let out = Path::new("out/reconstruct_corrupted");
    let train_ds = synth_generate(4, 500, 16, derive(1, Stream::SynthTrain))?;
    let test_ds = synth_generate(4, 100, 16, derive(1, Stream::SynthTest))?;

    let cfg = TrainConfig {
        objective: ObjectiveConfig::vimae(10.0, Prior::logistic_unit_var(8)),
        arch: Architecture::new(train_ds.pixel_count(), 8).with_hidden(vec![128, 128]),
        epochs: 15,
        batch_size: 100,
        seed: 1,
        adam: AdamHyper::default(),
        checkpoint_path: out.join("model.ckpt"),
        metrics_path: out.join("metrics.csv"),
        log_timestamps: false,
    };
    let (model, _) = train(&cfg, &train_ds)?;

    let batch = test_ds.head(10);
    let path = out.join("reconstruction.pgm");
    reconstruct_grid(
        &model,
        &batch,
        test_ds.image_height,
        test_ds.image_width,
        Corruption::Mask { p: 0.5 },
        &mut rng(1, Stream::Corruption { cell: 0 }),
        &path,
    )?;
    println!("inputs (top) and reconstructions (bottom): {}", path.display());
    Ok(())
}
