//! Nonparametric latent-prior fit monitoring: apply the prior CDF to
//! encoded latents and estimate the entropy of the transformed samples.
//! Zero means a perfect fit; the bound dim·ln(bins) means collapse.
//!
//! Compares an untrained encoder against VAE- and VIMAE-trained ones.
//!
//! ```bash
//! cargo run --release --example prior_fit_diagnostic
//! ```

use std::path::Path;

use vimae::data::synth_generate;
use vimae::distributions::cdf_entropy_diagnostic;
use vimae::models::{Architecture, EncoderKind, Model};
use vimae::seeded::{derive, Stream};
use vimae::training::{train, AdamHyper, TrainConfig};
use vimae::{ObjectiveConfig, Prior, Tape};

fn diagnostic(model: &Model, images: &vimae::Tensor, prior: &Prior) -> vimae::Result<f64> {
    let tape = Tape::new();
    let latents = model.encode_mean(&tape, images)?;
    cdf_entropy_diagnostic(prior, &latents, 64)
}

fn main() -> vimae::Result<()> {
    let out = Path::new("out/prior_fit_diagnostic");
    let train_ds = synth_generate(4, 500, 16, derive(1, Stream::SynthTrain))?;
    let test_ds = synth_generate(4, 250, 16, derive(1, Stream::SynthTest))?;
    let latent = 2;
    let bins_bound = latent as f64 * 64f64.ln();

    let arch = |enc: EncoderKind| {
        Architecture::new(train_ds.pixel_count(), latent).with_hidden(vec![128, 128]).with_encoder(enc)
    };
    let run = |label: &str, objective: ObjectiveConfig, enc: EncoderKind| -> vimae::Result<f64> {
        let cfg = TrainConfig {
            objective,
            arch: arch(enc),
            epochs: 15,
            batch_size: 100,
            seed: 1,
            adam: AdamHyper::default(),
            checkpoint_path: out.join(label).join("model.ckpt"),
            metrics_path: out.join(label).join("metrics.csv"),
            log_timestamps: false,
        };
        let (model, _) = train(&cfg, &train_ds)?;
        diagnostic(&model, &test_ds.images, &cfg.objective.prior)
    };

    let normal = Prior::standard_normal(latent);
    let logistic = Prior::logistic_unit_var(latent);

    let untrained = Model::init(arch(EncoderKind::Deterministic), 1)?;
    println!("KL estimate via the CDF-entropy diagnostic (0 = perfect fit, {bins_bound:.2} = collapse)");
    println!("untrained encoder vs logistic prior: {:.4}", diagnostic(&untrained, &test_ds.images, &logistic)?);
    println!("vae (normal prior):                  {:.4}", run("vae", ObjectiveConfig::vae(normal), EncoderKind::Gaussian)?);
    println!("vimae-l (logistic prior):            {:.4}", run("vimae-l", ObjectiveConfig::vimae(10.0, logistic), EncoderKind::Deterministic)?);
    Ok(())
}
