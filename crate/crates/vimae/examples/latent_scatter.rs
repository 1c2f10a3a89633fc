//! Train a 2-d-latent VIMAE and export the encoded test set as CSV
//! (z_0, z_1, label), ready for scatter plotting against the prior.
//!
//! ```bash
//! cargo run --release --example latent_scatter
//! ```

use std::path::Path;

use vimae::data::synth_generate;
use vimae::evaluation::export_latents;
use vimae::models::Architecture;
use vimae::seeded::{derive, Stream};
use vimae::training::{train, AdamHyper, TrainConfig};
use vimae::{ObjectiveConfig, Prior};

fn main() -> vimae::Result<()> {
    let out = Path::new("out/latent_scatter");
    let train_ds = synth_generate(4, 500, 16, derive(1, Stream::SynthTrain))?;
    let test_ds = synth_generate(4, 100, 16, derive(1, Stream::SynthTest))?;

    let prior = Prior::logistic_unit_var(2);
    let cfg = TrainConfig {
        objective: ObjectiveConfig::vimae(10.0, prior),
        arch: Architecture::new(train_ds.pixel_count(), 2).with_hidden(vec![128, 128]),
        epochs: 20,
        batch_size: 100,
        seed: 1,
        adam: AdamHyper::default(),
        checkpoint_path: out.join("model.ckpt"),
        metrics_path: out.join("metrics.csv"),
        log_timestamps: false,
    };
    let (model, _) = train(&cfg, &train_ds)?;

    let path = out.join("latents.csv");
    export_latents(&model, &test_ds, &path)?;
    println!("encoded {} test points to {}", test_ds.len(), path.display());
    println!("columns: z_0,z_1,label — compare the cloud against the unit-variance logistic");
    Ok(())
}
