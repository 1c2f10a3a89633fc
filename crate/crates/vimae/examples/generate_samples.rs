//! Train a small VIMAE and decode prior samples into an 8x8 image grid.
//!
//! ```bash
//! cargo run --release --example generate_samples
//! ```

use std::path::Path;

use vimae::data::synth_generate;
use vimae::evaluation::generate_grid;
use vimae::models::Architecture;
use vimae::seeded::{derive, Stream};
use vimae::training::{train, AdamHyper, TrainConfig};
use vimae::{ObjectiveConfig, Prior};

fn main() -> vimae::Result<()> {
    let out = Path::new("out/generate_samples");
    let dataset = synth_generate(4, 500, 16, derive(1, Stream::SynthTrain))?;
    let prior = Prior::logistic_unit_var(8);

    let cfg = TrainConfig {
        objective: ObjectiveConfig::vimae(10.0, prior),
        arch: Architecture::new(dataset.pixel_count(), 8).with_hidden(vec![128, 128]),
        epochs: 15,
        batch_size: 100,
        seed: 1,
        adam: AdamHyper::default(),
        checkpoint_path: out.join("model.ckpt"),
        metrics_path: out.join("metrics.csv"),
        log_timestamps: false,
    };
    let (model, _) = train(&cfg, &dataset)?;

    let path = out.join("generated.pgm");
    generate_grid(&model, &prior, 64, dataset.image_height, dataset.image_width, 7, &path)?;
    println!("wrote 64 samples as an 8x8 grid: {}", path.display());
    Ok(())
}
