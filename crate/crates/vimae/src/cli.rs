//! Batch-workflow CLI: train, eval, generate, reconstruct, export-latents,
//! decompose-rate, make-synth, and a four-model compare mode, all driven by
//! a flat JSON configuration with per-key command-line overrides.
//!
//! Every subcommand is a pure function of (config, referenced files, seed):
//! reruns reproduce all outputs byte for byte (wall-clock timestamps in the
//! metrics log are disabled by default via `no_timestamp`).

use std::path::{Path, PathBuf};

use clap::{Arg, ArgMatches, Command};
use serde::{Deserialize, Serialize};

use crate::data::{self, Corruption, Dataset};
use crate::distributions::Prior;
use crate::divergence::{CrossCoefficient, Kernel, MmdConfig};
use crate::error::{Error, Result};
use crate::evaluation::{
    self, standard_corruption_grid, EvalRow, ProbeKind,
};
use crate::models::{Activation, Architecture, EncoderKind};
use crate::objectives::{self, Family, ObjectiveConfig};
use crate::seeded::{self, Stream};
use crate::training::{self, AdamHyper, TrainConfig};

// ── Run configuration ────────────────────────────────────────────────

/// One flat configuration document. Unknown keys are rejected; every field
/// has a default except the dataset source and the output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset source: "synthetic" or "idx".
    pub dataset: String,
    /// Directory receiving checkpoints, metrics, images and CSV reports.
    pub output_dir: String,

    #[serde(default)]
    pub idx_train_images: Option<String>,
    #[serde(default)]
    pub idx_train_labels: Option<String>,
    #[serde(default)]
    pub idx_test_images: Option<String>,
    #[serde(default)]
    pub idx_test_labels: Option<String>,

    #[serde(default = "d_synth_classes")]
    pub synth_classes: usize,
    #[serde(default = "d_synth_train_per_class")]
    pub synth_train_per_class: usize,
    #[serde(default = "d_synth_test_per_class")]
    pub synth_test_per_class: usize,
    #[serde(default = "d_synth_image_size")]
    pub synth_image_size: usize,

    #[serde(default = "d_family")]
    pub family: String,
    #[serde(default = "d_prior")]
    pub prior: String,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default = "d_lambda")]
    pub lambda: f64,
    #[serde(default = "d_mmd_cross")]
    pub mmd_cross: String,
    #[serde(default = "d_kernel")]
    pub kernel: String,
    #[serde(default)]
    pub kernel_param: Option<f64>,

    #[serde(default = "d_hidden")]
    pub hidden_sizes: Vec<usize>,
    #[serde(default = "d_latent")]
    pub latent_dim: usize,
    #[serde(default)]
    pub encoder: Option<String>,
    #[serde(default = "d_activation")]
    pub activation: String,

    #[serde(default = "d_epochs")]
    pub epochs: u32,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub resume: bool,
    #[serde(default = "d_true")]
    pub no_timestamp: bool,

    #[serde(default)]
    pub checkpoint: Option<String>,
    #[serde(default = "d_num_labeled")]
    pub num_labeled: usize,
    #[serde(default = "d_probe")]
    pub probe: String,

    #[serde(default = "d_gen_count")]
    pub gen_count: usize,
    #[serde(default = "d_recon_count")]
    pub recon_count: usize,
    #[serde(default = "d_recon_corruption")]
    pub recon_corruption: String,
    #[serde(default = "d_recon_param")]
    pub recon_param: f64,

    #[serde(default = "d_decompose_points")]
    pub decompose_points: usize,
    #[serde(default = "d_decompose_mc")]
    pub decompose_mc_samples: usize,
}

fn d_synth_classes() -> usize { 4 }
fn d_synth_train_per_class() -> usize { 500 }
fn d_synth_test_per_class() -> usize { 100 }
fn d_synth_image_size() -> usize { 16 }
fn d_family() -> String { "vimae".into() }
fn d_prior() -> String { "logistic".into() }
fn d_beta() -> f64 { 1.0 }
fn d_lambda() -> f64 { 10.0 }
fn d_mmd_cross() -> String { "standard".into() }
fn d_kernel() -> String { "imq".into() }
fn d_hidden() -> Vec<usize> { vec![256, 256, 256] }
fn d_latent() -> usize { 8 }
fn d_activation() -> String { "relu".into() }
fn d_epochs() -> u32 { 30 }
fn d_batch() -> usize { 100 }
fn d_seed() -> u64 { 1 }
fn d_lr() -> f64 { 1e-3 }
fn d_true() -> bool { true }
fn d_num_labeled() -> usize { 1000 }
fn d_probe() -> String { "linear".into() }
fn d_gen_count() -> usize { 64 }
fn d_recon_count() -> usize { 8 }
fn d_recon_corruption() -> String { "mask".into() }
fn d_recon_param() -> f64 { 0.5 }
fn d_decompose_points() -> usize { 8 }
fn d_decompose_mc() -> usize { 20_000 }

/// (json key, default shown in --help, help text)
const KEYS: &[(&str, &str, &str)] = &[
    ("dataset", "(required)", "dataset source: synthetic | idx"),
    ("output_dir", "(required)", "directory for all outputs"),
    ("idx_train_images", "unset", "IDX training image file"),
    ("idx_train_labels", "unset", "IDX training label file"),
    ("idx_test_images", "unset", "IDX test image file"),
    ("idx_test_labels", "unset", "IDX test label file"),
    ("synth_classes", "4", "synthetic: number of classes"),
    ("synth_train_per_class", "500", "synthetic: training images per class"),
    ("synth_test_per_class", "100", "synthetic: test images per class"),
    ("synth_image_size", "16", "synthetic: image side length"),
    ("family", "vimae", "objective family: vae | beta-vae | info-vae | vimae"),
    ("prior", "logistic", "latent prior: normal | logistic"),
    ("beta", "1", "rate weight for beta-vae"),
    ("alpha", "0", "rate weight for info-vae"),
    ("lambda", "10", "marginal-divergence weight (info-vae, vimae)"),
    ("mmd_cross", "standard", "MMD cross-term coefficient: standard (-2/n^2) | paper (-1/n^2)"),
    ("kernel", "imq", "MMD kernel: imq | rbf"),
    ("kernel_param", "2*latent_dim", "kernel constant C (imq) or bandwidth (rbf)"),
    ("hidden_sizes", "[256,256,256]", "hidden layer widths"),
    ("latent_dim", "8", "latent dimension"),
    ("encoder", "by family", "encoder head: deterministic | gaussian"),
    ("activation", "relu", "hidden activation: relu | tanh"),
    ("epochs", "30", "training epochs"),
    ("batch_size", "100", "training batch size (>= 2)"),
    ("seed", "1", "base seed for every random stream"),
    ("learning_rate", "0.001", "Adam learning rate"),
    ("resume", "false", "continue from the existing checkpoint"),
    ("no_timestamp", "true", "write 0 in the metrics seconds column"),
    ("checkpoint", "<output_dir>/model.ckpt", "checkpoint path"),
    ("num_labeled", "1000", "labeled points for the probe"),
    ("probe", "linear", "probe kind: linear | knn"),
    ("gen_count", "64", "generated samples in the image grid"),
    ("recon_count", "8", "test images in the reconstruction grid"),
    ("recon_corruption", "mask", "reconstruction input noise: none | gaussian | mask"),
    ("recon_param", "0.5", "sigma (gaussian) or p (mask) for reconstruction"),
    ("decompose_points", "8", "points for the rate decomposition (<= 64)"),
    ("decompose_mc_samples", "20000", "MC samples for the rate decomposition"),
];

impl RunConfig {
    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.output_dir)
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        match &self.checkpoint {
            Some(p) => PathBuf::from(p),
            None => self.out_dir().join("model.ckpt"),
        }
    }

    pub fn family_enum(&self) -> Result<Family> {
        match self.family.as_str() {
            "vae" => Ok(Family::Vae),
            "beta-vae" => Ok(Family::BetaVae),
            "info-vae" => Ok(Family::InfoVae),
            "vimae" => Ok(Family::Vimae),
            other => Err(Error::Config(format!(
                "unknown family {other:?} (expected vae | beta-vae | info-vae | vimae)"
            ))),
        }
    }

    pub fn prior_enum(&self) -> Result<Prior> {
        match self.prior.as_str() {
            "normal" => Ok(Prior::standard_normal(self.latent_dim)),
            "logistic" => Ok(Prior::logistic_unit_var(self.latent_dim)),
            other => Err(Error::Config(format!(
                "unknown prior {other:?} (expected normal | logistic)"
            ))),
        }
    }

    fn mmd_config(&self) -> Result<MmdConfig> {
        let kernel = match self.kernel.as_str() {
            "imq" => Kernel::inverse_multiquadratic(
                self.kernel_param.unwrap_or(2.0 * self.latent_dim as f64),
            ),
            "rbf" => Kernel::rbf(self.kernel_param.unwrap_or(1.0)),
            other => Err(Error::Config(format!("unknown kernel {other:?} (expected imq | rbf)")))?,
        };
        let cross = match self.mmd_cross.as_str() {
            "standard" => CrossCoefficient::Standard,
            "paper" => CrossCoefficient::Paper,
            other => Err(Error::Config(format!(
                "unknown mmd_cross {other:?} (expected standard | paper)"
            )))?,
        };
        Ok(MmdConfig { kernel, cross_coefficient: cross })
    }

    pub fn objective(&self) -> Result<ObjectiveConfig> {
        let prior = self.prior_enum()?;
        let cfg = match self.family_enum()? {
            Family::Vae => ObjectiveConfig::vae(prior),
            Family::BetaVae => ObjectiveConfig::beta_vae(self.beta, prior),
            Family::InfoVae => {
                ObjectiveConfig::info_vae(self.alpha, self.lambda, prior).with_mmd(self.mmd_config()?)
            }
            Family::Vimae => ObjectiveConfig::vimae(self.lambda, prior).with_mmd(self.mmd_config()?),
        };
        Ok(cfg)
    }

    pub fn architecture(&self, input_dim: usize) -> Result<Architecture> {
        let encoder = match self.encoder.as_deref() {
            Some("deterministic") => EncoderKind::Deterministic,
            Some("gaussian") => EncoderKind::Gaussian,
            Some(other) => Err(Error::Config(format!(
                "unknown encoder {other:?} (expected deterministic | gaussian)"
            )))?,
            // VIMAE defaults to a deterministic encoder; the ELBO-based
            // objectives need the Gaussian head.
            None => match self.family_enum()? {
                Family::Vimae => EncoderKind::Deterministic,
                _ => EncoderKind::Gaussian,
            },
        };
        let activation = match self.activation.as_str() {
            "relu" => Activation::Relu,
            "tanh" => Activation::Tanh,
            other => Err(Error::Config(format!(
                "unknown activation {other:?} (expected relu | tanh)"
            )))?,
        };
        Ok(Architecture {
            input_dim,
            hidden_sizes: self.hidden_sizes.clone(),
            latent_dim: self.latent_dim,
            encoder_kind: encoder,
            activation,
        })
    }

    pub fn probe_kind(&self) -> Result<ProbeKind> {
        match self.probe.as_str() {
            "linear" => Ok(ProbeKind::Linear),
            "knn" => Ok(ProbeKind::Knn),
            other => Err(Error::Config(format!("unknown probe {other:?} (expected linear | knn)"))),
        }
    }

    pub fn recon_corruption_enum(&self) -> Result<Corruption> {
        let c = match self.recon_corruption.as_str() {
            "none" => Corruption::None,
            "gaussian" => Corruption::Gaussian { sigma: self.recon_param },
            "mask" => Corruption::Mask { p: self.recon_param },
            other => Err(Error::Config(format!(
                "unknown recon_corruption {other:?} (expected none | gaussian | mask)"
            )))?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn load_train(&self) -> Result<Dataset> {
        self.load_split(true)
    }

    pub fn load_test(&self) -> Result<Dataset> {
        self.load_split(false)
    }

    fn load_split(&self, train: bool) -> Result<Dataset> {
        match self.dataset.as_str() {
            "synthetic" => {
                let stream = if train { Stream::SynthTrain } else { Stream::SynthTest };
                let per = if train { self.synth_train_per_class } else { self.synth_test_per_class };
                data::synth_generate(
                    self.synth_classes,
                    per,
                    self.synth_image_size,
                    seeded::derive(self.seed, stream),
                )
            }
            "idx" => {
                let (images, labels, what) = if train {
                    (&self.idx_train_images, &self.idx_train_labels, "train")
                } else {
                    (&self.idx_test_images, &self.idx_test_labels, "test")
                };
                let images = images.as_ref().ok_or_else(|| {
                    Error::Config(format!("dataset \"idx\" requires idx_{what}_images"))
                })?;
                let labels = labels.as_ref().ok_or_else(|| {
                    Error::Config(format!("dataset \"idx\" requires idx_{what}_labels"))
                })?;
                data::load_idx(Path::new(images), Path::new(labels))
            }
            other => Err(Error::Config(format!(
                "unknown dataset {other:?} (expected synthetic | idx)"
            ))),
        }
    }

    pub fn train_config(&self, input_dim: usize) -> Result<TrainConfig> {
        Ok(TrainConfig {
            objective: self.objective()?,
            arch: self.architecture(input_dim)?,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            adam: AdamHyper { lr: self.learning_rate, ..AdamHyper::default() },
            checkpoint_path: self.checkpoint_path(),
            metrics_path: self.out_dir().join("metrics.csv"),
            log_timestamps: !self.no_timestamp,
        })
    }
}

// ── Command construction and dispatch ────────────────────────────────

const SUBCOMMANDS: &[(&str, &str)] = &[
    ("train", "Train a model and write a checkpoint plus a metrics CSV"),
    ("eval", "Probe a trained model across the corruption grid"),
    ("generate", "Decode prior samples into a tiled PGM image"),
    ("reconstruct", "Reconstruct (optionally corrupted) test images into a PGM grid"),
    ("export-latents", "Encode a dataset and write latents to CSV"),
    ("decompose-rate", "Split the encoder rate into mutual information and marginal KL"),
    ("make-synth", "Generate the synthetic dataset and export it as IDX files"),
    ("compare", "Train and evaluate vae / beta-vae / vimae-n / vimae-l on shared data"),
];

fn build_command() -> Command {
    let mut cmd = Command::new("vimae")
        .about("Variational InfoMax autoencoders: training, probing, generation")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .disable_version_flag(true);
    for &(name, about) in SUBCOMMANDS {
        let mut sub = Command::new(name).about(about).arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .help("JSON run configuration (keys below override it)"),
        );
        for &(key, default, help) in KEYS {
            sub = sub.arg(
                Arg::new(key)
                    .long(key.replace('_', "-"))
                    .value_name("VALUE")
                    .help(format!("{help} [default: {default}]")),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn parse_override(raw: &str) -> serde_json::Value {
    match serde_json::from_str(raw) {
        Ok(v) => v,
        Err(_) => serde_json::Value::String(raw.to_string()),
    }
}

fn build_config(matches: &ArgMatches) -> Result<RunConfig> {
    let mut root = match matches.get_one::<String>("config") {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read config {path}: {e}")))?;
            serde_json::from_str::<serde_json::Value>(&text)
                .map_err(|e| Error::Config(format!("config {path}: {e}")))?
        }
        None => serde_json::Value::Object(serde_json::Map::new()),
    };
    let obj = root
        .as_object_mut()
        .ok_or_else(|| Error::Config("config root must be a JSON object".to_string()))?;
    for &(key, _, _) in KEYS {
        if let Some(raw) = matches.get_one::<String>(key) {
            obj.insert(key.to_string(), parse_override(raw));
        }
    }
    serde_json::from_value(root).map_err(|e| Error::Config(e.to_string()))
}

/// Entry point: parse arguments, run the subcommand. Exit codes: 0 success,
/// 1 usage or configuration error, 2 runtime error.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match build_command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let cfg = match build_config(sub) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let run = match name {
        "train" => cmd_train(&cfg).map(|_| ()),
        "eval" => cmd_eval(&cfg),
        "generate" => cmd_generate(&cfg),
        "reconstruct" => cmd_reconstruct(&cfg),
        "export-latents" => cmd_export_latents(&cfg),
        "decompose-rate" => cmd_decompose_rate(&cfg),
        "make-synth" => cmd_make_synth(&cfg),
        "compare" => cmd_compare(&cfg),
        other => unreachable!("unknown subcommand {other}"),
    };
    match run {
        Ok(()) => 0,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

// ── Subcommands ──────────────────────────────────────────────────────

fn cmd_train(cfg: &RunConfig) -> Result<Vec<training::EpochMetrics>> {
    let dataset = cfg.load_train()?;
    let tc = cfg.train_config(dataset.pixel_count())?;
    std::fs::create_dir_all(cfg.out_dir())?;
    let (_, metrics) =
        if cfg.resume { training::resume(&tc, &dataset) } else { training::train(&tc, &dataset) }?;
    if let Some(last) = metrics.last() {
        println!(
            "epoch {}: total {:.4} distortion {:.4} divergence {:.6}",
            last.epoch, last.total, last.distortion, last.divergence
        );
    }
    println!("checkpoint: {}", tc.checkpoint_path.display());
    println!("metrics:    {}", tc.metrics_path.display());
    Ok(metrics)
}

fn load_model(cfg: &RunConfig) -> Result<training::Checkpoint> {
    training::load_checkpoint(&cfg.checkpoint_path())
}

fn cmd_eval(cfg: &RunConfig) -> Result<()> {
    let ckpt = load_model(cfg)?;
    let train = cfg.load_train()?;
    let test = cfg.load_test()?;
    let report = evaluation::evaluate_representation(
        &ckpt.model,
        &cfg.family,
        &train,
        &test,
        &standard_corruption_grid(),
        cfg.num_labeled.min(train.len()),
        cfg.probe_kind()?,
        &ckpt.objective.prior,
        cfg.seed,
    )?;
    let path = cfg.out_dir().join("eval.csv");
    report.write_csv(&path)?;
    for row in &report.rows {
        println!(
            "{} {}({}) {}: {:.4}",
            row.model,
            row.corruption.kind_name(),
            row.corruption.param(),
            row.probe_kind.name(),
            row.accuracy
        );
    }
    println!("latent MMD to prior: {:.6}", report.latent_mmd);
    println!("mean test distortion: {:.4}", report.mean_distortion);
    println!("report: {}", path.display());
    Ok(())
}

fn cmd_generate(cfg: &RunConfig) -> Result<()> {
    let ckpt = load_model(cfg)?;
    let test = cfg.load_test()?;
    let path = cfg.out_dir().join("generated.pgm");
    evaluation::generate_grid(
        &ckpt.model,
        &ckpt.objective.prior,
        cfg.gen_count,
        test.image_height,
        test.image_width,
        cfg.seed,
        &path,
    )?;
    println!("generated: {}", path.display());
    Ok(())
}

fn cmd_reconstruct(cfg: &RunConfig) -> Result<()> {
    let ckpt = load_model(cfg)?;
    let test = cfg.load_test()?;
    let n = cfg.recon_count.min(test.len());
    if n == 0 {
        return Err(Error::contract("reconstruct", "test dataset is empty"));
    }
    let x = test.head(n);
    let mut rng = seeded::rng(cfg.seed, Stream::Corruption { cell: 0 });
    let path = cfg.out_dir().join("reconstruction.pgm");
    evaluation::reconstruct_grid(
        &ckpt.model,
        &x,
        test.image_height,
        test.image_width,
        cfg.recon_corruption_enum()?,
        &mut rng,
        &path,
    )?;
    println!("reconstruction: {}", path.display());
    Ok(())
}

fn cmd_export_latents(cfg: &RunConfig) -> Result<()> {
    let ckpt = load_model(cfg)?;
    let test = cfg.load_test()?;
    let path = cfg.out_dir().join("latents.csv");
    evaluation::export_latents(&ckpt.model, &test, &path)?;
    println!("latents: {}", path.display());
    Ok(())
}

fn cmd_decompose_rate(cfg: &RunConfig) -> Result<()> {
    let ckpt = load_model(cfg)?;
    let test = cfg.load_test()?;
    let x = test.head(cfg.decompose_points);
    let mut rng = seeded::rng(cfg.seed, Stream::PriorDraw);
    let dec = objectives::rate_decomposition(
        &ckpt.model,
        &x,
        &ckpt.objective.prior,
        cfg.decompose_mc_samples,
        &mut rng,
    )?;
    println!("rate:        {:.6}", dec.rate);
    println!("mutual info: {:.6} (se {:.6})", dec.mutual_info, dec.mutual_info_se);
    println!("marginal KL: {:.6} (se {:.6})", dec.marginal_kl, dec.marginal_kl_se);
    println!(
        "identity residual: {:.6} (3*se {:.6})",
        (dec.rate - dec.mutual_info - dec.marginal_kl).abs(),
        3.0 * dec.combined_se()
    );
    let path = cfg.out_dir().join("decompose.csv");
    std::fs::create_dir_all(cfg.out_dir())?;
    std::fs::write(
        &path,
        format!(
            "rate,mutual_info,marginal_kl,mutual_info_se,marginal_kl_se\n{},{},{},{},{}\n",
            dec.rate, dec.mutual_info, dec.marginal_kl, dec.mutual_info_se, dec.marginal_kl_se
        ),
    )?;
    println!("decomposition: {}", path.display());
    Ok(())
}

fn cmd_make_synth(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out)?;
    let train = data::synth_generate(
        cfg.synth_classes,
        cfg.synth_train_per_class,
        cfg.synth_image_size,
        seeded::derive(cfg.seed, Stream::SynthTrain),
    )?;
    let test = data::synth_generate(
        cfg.synth_classes,
        cfg.synth_test_per_class,
        cfg.synth_image_size,
        seeded::derive(cfg.seed, Stream::SynthTest),
    )?;
    data::write_idx(&train, &out.join("train.images.idx"), &out.join("train.labels.idx"))?;
    data::write_idx(&test, &out.join("test.images.idx"), &out.join("test.labels.idx"))?;
    println!("wrote {} train / {} test images under {}", train.len(), test.len(), out.display());
    Ok(())
}

// ── Compare mode ─────────────────────────────────────────────────────

/// The four canonical settings: VAE (β = 1), β-VAE (β = 10), and both
/// VIMAE variants at λ = 10 with normal and logistic priors.
fn compare_presets(base: &RunConfig) -> Vec<(String, RunConfig)> {
    let mut presets = Vec::new();
    let mut push = |label: &str, f: &dyn Fn(&mut RunConfig)| {
        let mut cfg = base.clone();
        cfg.encoder = None;
        f(&mut cfg);
        cfg.output_dir = base.out_dir().join(label).display().to_string();
        cfg.checkpoint = None;
        presets.push((label.to_string(), cfg));
    };
    push("vae", &|c| {
        c.family = "vae".into();
        c.prior = "normal".into();
        c.beta = 1.0;
    });
    push("beta-vae", &|c| {
        c.family = "beta-vae".into();
        c.prior = "normal".into();
        c.beta = 10.0;
    });
    push("vimae-n", &|c| {
        c.family = "vimae".into();
        c.prior = "normal".into();
    });
    push("vimae-l", &|c| {
        c.family = "vimae".into();
        c.prior = "logistic".into();
    });
    presets
}

fn worker_count() -> usize {
    std::env::var("VIMAE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

fn run_one_comparison(label: &str, cfg: &RunConfig) -> Result<Vec<EvalRow>> {
    cmd_train(cfg)?;
    let ckpt = load_model(cfg)?;
    let train = cfg.load_train()?;
    let test = cfg.load_test()?;
    let report = evaluation::evaluate_representation(
        &ckpt.model,
        label,
        &train,
        &test,
        &standard_corruption_grid(),
        cfg.num_labeled.min(train.len()),
        cfg.probe_kind()?,
        &ckpt.objective.prior,
        cfg.seed,
    )?;
    report.write_csv(&cfg.out_dir().join("eval.csv"))?;
    Ok(report.rows)
}

fn cmd_compare(cfg: &RunConfig) -> Result<()> {
    let presets = compare_presets(cfg);
    let workers = worker_count().min(presets.len());
    let mut results: Vec<Option<Result<Vec<EvalRow>>>> = Vec::new();
    results.resize_with(presets.len(), || None);

    let mut next = 0;
    while next < presets.len() {
        let batch_end = (next + workers).min(presets.len());
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for (label, preset) in &presets[next..batch_end] {
                handles.push(scope.spawn(move || run_one_comparison(label, preset)));
            }
            for (offset, h) in handles.into_iter().enumerate() {
                results[next + offset] =
                    Some(h.join().unwrap_or_else(|_| {
                        Err(Error::Config("comparison worker panicked".to_string()))
                    }));
            }
        });
        next = batch_end;
    }

    let mut rows = Vec::new();
    for ((label, _), result) in presets.iter().zip(results) {
        let r = result.expect("slot filled")?;
        println!("{label}: done");
        rows.extend(r);
    }
    let path = cfg.out_dir().join("compare.csv");
    std::fs::create_dir_all(cfg.out_dir())?;
    let mut text = String::from("model,corruption,param,probe,accuracy\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            r.model,
            r.corruption.kind_name(),
            r.corruption.param(),
            r.probe_kind.name(),
            r.accuracy
        ));
    }
    std::fs::write(&path, text)?;
    println!("comparison table: {}", path.display());
    Ok(())
}
