//! Train VAE, β-VAE and both VIMAE variants on shared data, probe the
//! frozen latents across the corruption grid, and print an accuracy table.
//!
//! ```bash
//! cargo run --release --example compare_objectives
//! ```

use std::path::Path;

use vimae::data::synth_generate;
use vimae::evaluation::{evaluate_representation, standard_corruption_grid, ProbeKind};
use vimae::models::{Architecture, EncoderKind};
use vimae::seeded::{derive, Stream};
use vimae::training::{train, AdamHyper, TrainConfig};
use vimae::{ObjectiveConfig, Prior};

fn main() -> vimae::Result<()> {
    let out = Path::new("out/compare_objectives");
    let train_ds = synth_generate(4, 500, 16, derive(1, Stream::SynthTrain))?;
    let test_ds = synth_generate(4, 100, 16, derive(1, Stream::SynthTest))?;
    let latent = 8;

    let setups: Vec<(&str, ObjectiveConfig, EncoderKind)> = vec![
        ("vae", ObjectiveConfig::vae(Prior::standard_normal(latent)), EncoderKind::Gaussian),
        ("beta-vae", ObjectiveConfig::beta_vae(10.0, Prior::standard_normal(latent)), EncoderKind::Gaussian),
        ("vimae-n", ObjectiveConfig::vimae(10.0, Prior::standard_normal(latent)), EncoderKind::Deterministic),
        ("vimae-l", ObjectiveConfig::vimae(10.0, Prior::logistic_unit_var(latent)), EncoderKind::Deterministic),
    ];

    let grid = standard_corruption_grid();
    println!("{:<10} {:>7} {:>7} {:>7} {:>7} {:>7}  {:>9}", "model", "clean", "g0.2", "g0.4", "m0.2", "m0.5", "mmd");
    let mut csv = String::from("model,corruption,param,probe,accuracy\n");
    for (label, objective, encoder) in setups {
        let prior = objective.prior;
        let cfg = TrainConfig {
            objective,
            arch: Architecture::new(train_ds.pixel_count(), latent)
                .with_hidden(vec![128, 128])
                .with_encoder(encoder),
            epochs: 15,
            batch_size: 100,
            seed: 1,
            adam: AdamHyper::default(),
            checkpoint_path: out.join(label).join("model.ckpt"),
            metrics_path: out.join(label).join("metrics.csv"),
            log_timestamps: false,
        };
        let (model, _) = train(&cfg, &train_ds)?;
        let report = evaluate_representation(
            &model, label, &train_ds, &test_ds, &grid, 1000, ProbeKind::Linear, &prior, 1,
        )?;
        let acc: Vec<f64> = report.rows.iter().map(|r| r.accuracy).collect();
        println!(
            "{:<10} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3}  {:>9.5}",
            label, acc[0], acc[1], acc[2], acc[3], acc[4], report.latent_mmd
        );
        for r in &report.rows {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                r.model,
                r.corruption.kind_name(),
                r.corruption.param(),
                r.probe_kind.name(),
                r.accuracy
            ));
        }
    }
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("compare.csv"), csv)?;
    println!("table: {}", out.join("compare.csv").display());
    Ok(())
}
