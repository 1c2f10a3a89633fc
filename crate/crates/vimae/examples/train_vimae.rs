//! Train a VIMAE with the logistic prior and the inverse multiquadratics
//! MMD regularizer (λ = 10) on the synthetic dataset.
//!
//! ```bash
//! cargo run --release --example train_vimae
//! ```

use std::path::Path;

use vimae::data::synth_generate;
use vimae::models::Architecture;
use vimae::seeded::{derive, Stream};
use vimae::training::{train, AdamHyper, TrainConfig};
use vimae::{ObjectiveConfig, Prior};

fn main() -> vimae::Result<()> {
    let out = Path::new("out/train_vimae");
    let dataset = synth_generate(4, 500, 16, derive(1, Stream::SynthTrain))?;

    let latent_dim = 8;
    let cfg = TrainConfig {
        objective: ObjectiveConfig::vimae(10.0, Prior::logistic_unit_var(latent_dim)),
        arch: Architecture::new(dataset.pixel_count(), latent_dim).with_hidden(vec![128, 128]),
        epochs: 20,
        batch_size: 100,
        seed: 1,
        adam: AdamHyper::default(),
        checkpoint_path: out.join("model.ckpt"),
        metrics_path: out.join("metrics.csv"),
        log_timestamps: false,
    };

    let (_, metrics) = train(&cfg, &dataset)?;
    for row in &metrics {
        println!(
            "epoch {:>2}: total {:>8.3}  distortion {:>8.3}  mmd {:>9.6}",
            row.epoch, row.total, row.distortion, row.divergence
        );
    }
    println!("checkpoint: {}", cfg.checkpoint_path.display());
    Ok(())
}
