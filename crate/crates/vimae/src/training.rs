//! Adam optimization loop, metrics logging, and bit-exact checkpointing.
//!
//! A training run is a pure function of (config, dataset, seed): batch
//! order, reparameterization noise and prior draws are all derived per
//! epoch from the base seed, so resuming from a checkpoint reproduces an
//! uninterrupted run bitwise.

use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{batch_indices, Dataset};
use crate::error::{Error, Result};
use crate::models::{Architecture, Model};
use crate::objectives::{self, ObjectiveConfig};
use crate::tensor::{Tape, Tensor};

const CHECKPOINT_MAGIC: &[u8; 4] = b"VIMC";
const CHECKPOINT_VERSION: u32 = 1;

// ── Adam ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

pub struct AdamState {
    pub hyper: AdamHyper,
    pub step_count: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    /// Fresh state with zero moments mirroring the parameter shapes.
    pub fn new(params: &[Tensor], hyper: AdamHyper) -> AdamState {
        let m = params.iter().map(|p| vec![0.0; p.numel()]).collect::<Vec<_>>();
        let v = m.clone();
        AdamState { hyper, step_count: 0, m, v }
    }

    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    fn from_parts(hyper: AdamHyper, step_count: u64, m: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> Self {
        AdamState { hyper, step_count, m, v }
    }
}

/// One bias-corrected Adam update, applied in the fixed parameter order.
/// A non-finite gradient aborts with a diagnostic naming the parameter.
pub fn adam_step(
    state: &mut AdamState,
    params: &[(String, Tensor)],
    grads: &[Vec<f64>],
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Consistency(format!(
            "adam_step got {} params, {} grads, {} moment blocks",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((name, p), g) in params.iter().zip(grads) {
        if g.len() != p.numel() {
            return Err(Error::Consistency(format!("gradient shape mismatch for {name}")));
        }
        if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
            let _ = bad;
            return Err(Error::NonFinite { what: "gradient", name: name.clone() });
        }
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let h = state.hyper;
    let lr_t = h.lr * (1.0 - h.beta2.powi(t)).sqrt() / (1.0 - h.beta1.powi(t));
    for (idx, ((_, p), g)) in params.iter().zip(grads).enumerate() {
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        p.update_data(|data| {
            for i in 0..data.len() {
                m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
                v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
                data[i] -= lr_t * m[i] / (v[i].sqrt() + h.eps);
            }
        });
    }
    Ok(())
}

// ── Train loop ───────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub objective: ObjectiveConfig,
    pub arch: Architecture,
    pub epochs: u32,
    pub batch_size: usize,
    pub seed: u64,
    pub adam: AdamHyper,
    pub checkpoint_path: PathBuf,
    pub metrics_path: PathBuf,
    /// Wall-clock seconds per epoch in the metrics log; off by default so
    /// reruns are byte-identical.
    pub log_timestamps: bool,
}

impl TrainConfig {
    fn validate(&self, dataset: &Dataset) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::contract("train", "epochs must be at least 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::contract(
                "train",
                "batch size must be at least 2 (MMD estimator precondition)",
            ));
        }
        if dataset.is_empty() {
            return Err(Error::contract("train", "dataset is empty"));
        }
        if dataset.pixel_count() != self.arch.input_dim {
            return Err(Error::dimension(
                "train",
                format!(
                    "dataset has {} pixels per image, architecture expects {}",
                    dataset.pixel_count(),
                    self.arch.input_dim
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: u32,
    pub total: f64,
    pub distortion: f64,
    pub divergence: f64,
    pub seconds: f64,
}

/// Train from a fresh initialization.
pub fn train(cfg: &TrainConfig, dataset: &Dataset) -> Result<(Model, Vec<EpochMetrics>)> {
    cfg.validate(dataset)?;
    let model = Model::init(cfg.arch.clone(), cfg.seed)?;
    let mut adam = AdamState::new(&model.parameters(), cfg.adam);
    let mut metrics_file = open_metrics(&cfg.metrics_path, false)?;
    let metrics = run_epochs(cfg, dataset, &model, &mut adam, 0, &mut metrics_file)?;
    Ok((model, metrics))
}

/// Continue a checkpointed run up to `cfg.epochs` total epochs. New metric
/// rows are appended to the existing log.
pub fn resume(cfg: &TrainConfig, dataset: &Dataset) -> Result<(Model, Vec<EpochMetrics>)> {
    cfg.validate(dataset)?;
    let ckpt = load_checkpoint(&cfg.checkpoint_path)?;
    if ckpt.model.arch != cfg.arch {
        return Err(Error::Consistency(
            "checkpoint architecture differs from the configured one".to_string(),
        ));
    }
    let Checkpoint { model, mut adam, epochs_completed, .. } = ckpt;
    let mut metrics_file = open_metrics(&cfg.metrics_path, true)?;
    let metrics =
        run_epochs(cfg, dataset, &model, &mut adam, epochs_completed, &mut metrics_file)?;
    Ok((model, metrics))
}

fn open_metrics(path: &Path, append: bool) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let exists = path.exists();
    let mut file = if append && exists {
        BufWriter::new(OpenOptions::new().append(true).open(path)?)
    } else {
        BufWriter::new(File::create(path)?)
    };
    if !(append && exists) {
        writeln!(file, "epoch,total,distortion,divergence,seconds")?;
    }
    Ok(file)
}

fn run_epochs(
    cfg: &TrainConfig,
    dataset: &Dataset,
    model: &Model,
    adam: &mut AdamState,
    start_epoch: u32,
    metrics_file: &mut BufWriter<File>,
) -> Result<Vec<EpochMetrics>> {
    let named = model.named_parameters();
    let mut metrics = Vec::new();
    for epoch in start_epoch..cfg.epochs {
        let started = Instant::now();
        let batches = batch_indices(dataset.len(), cfg.batch_size, cfg.seed, epoch)?;
        let mut noise_rng =
            crate::seeded::rng(cfg.seed, crate::seeded::Stream::Noise { epoch });
        let mut sum_total = 0.0;
        let mut sum_distortion = 0.0;
        let mut sum_divergence = 0.0;
        for batch in &batches {
            let x = dataset.gather(batch);
            let tape = Tape::new();
            let report = objectives::evaluate(&tape, model, &x, &cfg.objective, &mut noise_rng)?;
            let total = report.total.item();
            if !total.is_finite() {
                // the checkpoint from the previous epoch is left in place
                return Err(Error::NonFinite { what: "loss", name: format!("epoch {epoch}") });
            }
            model.zero_grads();
            tape.backward(&report.total)?;
            let grads: Vec<Vec<f64>> =
                named.iter().map(|(_, p)| p.grad_or_zeros()).collect();
            adam_step(adam, &named, &grads)?;
            sum_total += total;
            sum_distortion += report.distortion;
            sum_divergence += report.rate_or_divergence;
        }
        let nb = batches.len() as f64;
        let row = EpochMetrics {
            epoch: epoch + 1,
            total: sum_total / nb,
            distortion: sum_distortion / nb,
            divergence: sum_divergence / nb,
            seconds: if cfg.log_timestamps { started.elapsed().as_secs_f64() } else { 0.0 },
        };
        writeln!(
            metrics_file,
            "{},{},{},{},{}",
            row.epoch, row.total, row.distortion, row.divergence, row.seconds
        )?;
        metrics_file.flush()?;
        save_checkpoint(model, adam, &cfg.objective, epoch + 1, &cfg.checkpoint_path)?;
        metrics.push(row);
    }
    Ok(metrics)
}

// ── Checkpointing ────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    arch: Architecture,
    objective: ObjectiveConfig,
    adam: AdamHyper,
    step_count: u64,
    epochs_completed: u32,
}

pub struct Checkpoint {
    pub model: Model,
    pub adam: AdamState,
    pub objective: ObjectiveConfig,
    pub epochs_completed: u32,
}

/// Binary layout: magic "VIMC", u32 LE version, u32 LE metadata length, a
/// JSON metadata block, then raw little-endian f64 blocks in parameter
/// order (all parameters, then first moments, then second moments).
pub fn save_checkpoint(
    model: &Model,
    adam: &AdamState,
    objective: &ObjectiveConfig,
    epochs_completed: u32,
    path: &Path,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let meta = CheckpointMeta {
        arch: model.arch.clone(),
        objective: objective.clone(),
        adam: adam.hyper,
        step_count: adam.step_count,
        epochs_completed,
    };
    let meta_bytes =
        serde_json::to_vec(&meta).map_err(|e| Error::Config(format!("metadata: {e}")))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(meta_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&meta_bytes)?;
    let write_block = |w: &mut BufWriter<File>, data: &[f64]| -> Result<()> {
        for v in data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    };
    for p in model.parameters() {
        let d = p.data_ref();
        write_block(&mut w, &d)?;
    }
    let (m, v) = adam.moments();
    for block in m.iter().chain(v.iter()) {
        write_block(&mut w, block)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let spath = path.display().to_string();
    let mut r = BufReader::new(File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("checkpoint not found: {spath}"),
        )),
        _ => Error::Io(e),
    })?);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| Error::Length {
        path: spath.clone(),
        detail: "file shorter than the magic".to_string(),
    })?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Format {
            path: spath,
            detail: format!("bad magic {magic:?}, expected {CHECKPOINT_MAGIC:?}"),
        });
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(|_| Error::Length {
        path: spath.clone(),
        detail: "file truncated at the version field".to_string(),
    })?;
    let version = u32::from_le_bytes(u32buf);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version { found: version, expected: CHECKPOINT_VERSION });
    }
    r.read_exact(&mut u32buf).map_err(|_| Error::Length {
        path: spath.clone(),
        detail: "file truncated at the metadata length".to_string(),
    })?;
    let meta_len = u32::from_le_bytes(u32buf) as usize;
    let mut meta_bytes = vec![0u8; meta_len];
    r.read_exact(&mut meta_bytes).map_err(|_| Error::Length {
        path: spath.clone(),
        detail: "file truncated inside the metadata block".to_string(),
    })?;
    let meta: CheckpointMeta = serde_json::from_slice(&meta_bytes)
        .map_err(|e| Error::Format { path: spath.clone(), detail: format!("metadata: {e}") })?;

    let probe = Model::init(meta.arch.clone(), 0)?;
    let shapes: Vec<usize> = probe.parameters().iter().map(|p| p.numel()).collect();
    let mut read_block = |len: usize| -> Result<Vec<f64>> {
        let mut bytes = vec![0u8; len * 8];
        r.read_exact(&mut bytes).map_err(|_| Error::Length {
            path: spath.clone(),
            detail: "file truncated inside a parameter block".to_string(),
        })?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let mut param_blocks = Vec::with_capacity(shapes.len());
    for &len in &shapes {
        param_blocks.push(read_block(len)?);
    }
    let mut m = Vec::with_capacity(shapes.len());
    for &len in &shapes {
        m.push(read_block(len)?);
    }
    let mut v = Vec::with_capacity(shapes.len());
    for &len in &shapes {
        v.push(read_block(len)?);
    }

    let model = Model::from_flat_params(meta.arch, &param_blocks)?;
    let adam = AdamState::from_parts(meta.adam, meta.step_count, m, v);
    Ok(Checkpoint { model, adam, objective: meta.objective, epochs_completed: meta.epochs_completed })
}
