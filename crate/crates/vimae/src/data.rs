//! Dataset ingestion (IDX), synthetic labeled data, corruption transforms,
//! and seeded batching.
//!
//! Intensities are kept continuous in [0,1]; corruption is applied at
//! evaluation time only and always clamps back into [0,1].

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::distributions::standard_normal_draw;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// A labeled image collection with intensities in [0,1].
#[derive(Debug)]
pub struct Dataset {
    /// N×D intensities, one flattened image per row.
    pub images: Tensor,
    pub labels: Vec<u8>,
    pub image_height: usize,
    pub image_width: usize,
    pub num_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixel_count(&self) -> usize {
        self.image_height * self.image_width
    }

    /// Rows of `images` selected by index, as a new batch tensor.
    pub fn gather(&self, indices: &[usize]) -> Tensor {
        let d = self.pixel_count();
        let data = self.images.data_ref();
        let mut out = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            out.extend_from_slice(&data[i * d..(i + 1) * d]);
        }
        drop(data);
        Tensor::new(out, &[indices.len(), d]).expect("consistent gather")
    }

    pub fn gather_labels(&self, indices: &[usize]) -> Vec<u8> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }

    /// First `n` rows (convenience for diagnostics on small subsets).
    pub fn head(&self, n: usize) -> Tensor {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.gather(&idx)
    }
}

// ── IDX container ────────────────────────────────────────────────────

fn read_u32_be(r: &mut impl Read, path: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|_| Error::Length {
        path: path.to_string(),
        detail: "file truncated inside the header".to_string(),
    })?;
    Ok(u32::from_be_bytes(buf))
}

fn read_payload(r: &mut impl Read, len: usize, path: &str, what: &str) -> Result<Vec<u8>> {
    let mut data = vec![0u8; len];
    r.read_exact(&mut data).map_err(|_| Error::Length {
        path: path.to_string(),
        detail: format!("payload shorter than the declared {what} ({len} bytes)"),
    })?;
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Length {
            path: path.to_string(),
            detail: format!("payload longer than the declared {what} ({len} bytes)"),
        });
    }
    Ok(data)
}

/// Load a big-endian IDX image/label pair. Pixels are scaled by 1/255.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let ipath = images_path.display().to_string();
    let mut ir = BufReader::new(File::open(images_path)?);
    let magic = read_u32_be(&mut ir, &ipath)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format {
            path: ipath,
            detail: format!("image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}"),
        });
    }
    let count = read_u32_be(&mut ir, &ipath)? as usize;
    let rows = read_u32_be(&mut ir, &ipath)? as usize;
    let cols = read_u32_be(&mut ir, &ipath)? as usize;
    let pixels = read_payload(&mut ir, count * rows * cols, &ipath, "image payload")?;

    let lpath = labels_path.display().to_string();
    let mut lr = BufReader::new(File::open(labels_path)?);
    let magic = read_u32_be(&mut lr, &lpath)?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format {
            path: lpath,
            detail: format!("label magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}"),
        });
    }
    let label_count = read_u32_be(&mut lr, &lpath)? as usize;
    if label_count != count {
        return Err(Error::Consistency(format!(
            "{count} images but {label_count} labels"
        )));
    }
    let labels = read_payload(&mut lr, label_count, &lpath, "label payload")?;

    let images: Vec<f64> = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let num_classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    Ok(Dataset {
        images: Tensor::new(images, &[count, rows * cols])?,
        labels,
        image_height: rows,
        image_width: cols,
        num_classes,
    })
}

/// Export a dataset to the IDX pair format (8-bit quantization).
pub fn write_idx(dataset: &Dataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let mut iw = BufWriter::new(File::create(images_path)?);
    iw.write_all(&IMAGE_MAGIC.to_be_bytes())?;
    iw.write_all(&(dataset.len() as u32).to_be_bytes())?;
    iw.write_all(&(dataset.image_height as u32).to_be_bytes())?;
    iw.write_all(&(dataset.image_width as u32).to_be_bytes())?;
    let data = dataset.images.data_ref();
    let bytes: Vec<u8> = data.iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect();
    iw.write_all(&bytes)?;
    iw.flush()?;

    let mut lw = BufWriter::new(File::create(labels_path)?);
    lw.write_all(&LABEL_MAGIC.to_be_bytes())?;
    lw.write_all(&(dataset.len() as u32).to_be_bytes())?;
    lw.write_all(&dataset.labels)?;
    lw.flush()?;
    Ok(())
}

// ── Synthetic corpus ─────────────────────────────────────────────────

/// Deterministic synthetic dataset: each class is an oriented soft bar
/// (anisotropic Gaussian) at a class-specific angle, with per-sample jitter
/// in position, pose and contrast. Classes are balanced and separable by
/// construction.
pub fn synth_generate(
    num_classes: usize,
    per_class: usize,
    image_size: usize,
    seed: u64,
) -> Result<Dataset> {
    if num_classes == 0 || per_class == 0 || image_size == 0 {
        return Err(Error::contract("synth_generate", "all counts must be positive"));
    }
    if num_classes > 64 {
        return Err(Error::contract("synth_generate", "at most 64 classes are distinguishable"));
    }
    let mut rng = crate::seeded::rng_raw(seed);
    let n = num_classes * per_class;
    let d = image_size * image_size;
    let mut images = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let size = image_size as f64;

    for class in 0..num_classes {
        // bar orientations spaced over a half turn (a bar is symmetric)
        let base_angle = std::f64::consts::PI * class as f64 / num_classes as f64;
        for _ in 0..per_class {
            let angle = base_angle + rng.gen_range(-0.09..0.09);
            let cx = size / 2.0 + rng.gen_range(-size / 8.0..size / 8.0);
            let cy = size / 2.0 + rng.gen_range(-size / 8.0..size / 8.0);
            let sigma_long = 0.30 * size * rng.gen_range(0.85..1.15);
            let sigma_short = 0.07 * size * rng.gen_range(0.8..1.2);
            let amplitude = rng.gen_range(0.8..1.0);
            let (sin_a, cos_a) = angle.sin_cos();
            for py in 0..image_size {
                for px in 0..image_size {
                    let dx = px as f64 + 0.5 - cx;
                    let dy = py as f64 + 0.5 - cy;
                    let u = cos_a * dx + sin_a * dy;
                    let v = -sin_a * dx + cos_a * dy;
                    let val = amplitude
                        * (-(u * u / (2.0 * sigma_long * sigma_long)
                            + v * v / (2.0 * sigma_short * sigma_short)))
                            .exp();
                    images.push(val.clamp(0.0, 1.0));
                }
            }
            labels.push(class as u8);
        }
    }
    Ok(Dataset {
        images: Tensor::new(images, &[n, d])?,
        labels,
        image_height: image_size,
        image_width: image_size,
        num_classes,
    })
}

// ── Corruption ───────────────────────────────────────────────────────

/// Input noise ν applied at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Corruption {
    None,
    /// Additive per-pixel N(0, σ²), clamped back to [0,1].
    Gaussian { sigma: f64 },
    /// Each pixel independently forced to 0 with probability p.
    Mask { p: f64 },
}

impl Corruption {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Corruption::None => Ok(()),
            Corruption::Gaussian { sigma } if sigma >= 0.0 => Ok(()),
            Corruption::Mask { p } if (0.0..=1.0).contains(&p) => Ok(()),
            _ => Err(Error::contract("corruption", format!("invalid parameters: {self:?}"))),
        }
    }

    /// Column labels used in evaluation reports.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Corruption::None => "none",
            Corruption::Gaussian { .. } => "gaussian",
            Corruption::Mask { .. } => "mask",
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            Corruption::None => 0.0,
            Corruption::Gaussian { sigma } => sigma,
            Corruption::Mask { p } => p,
        }
    }
}

/// Apply a corruption to a batch of intensities.
pub fn corrupt(x: &Tensor, c: Corruption, rng: &mut ChaCha8Rng) -> Result<Tensor> {
    c.validate()?;
    match c {
        Corruption::None => Tensor::new(x.data(), &x.shape()),
        Corruption::Gaussian { sigma } => {
            let data = x.data_ref();
            let out: Vec<f64> = data
                .iter()
                .map(|&v| (v + sigma * standard_normal_draw(rng)).clamp(0.0, 1.0))
                .collect();
            drop(data);
            Tensor::new(out, &x.shape())
        }
        Corruption::Mask { p } => {
            let data = x.data_ref();
            let out: Vec<f64> =
                data.iter().map(|&v| if rng.gen::<f64>() < p { 0.0 } else { v }).collect();
            drop(data);
            Tensor::new(out, &x.shape())
        }
    }
}

// ── Batching ─────────────────────────────────────────────────────────

/// Index batches for one epoch: a Fisher–Yates shuffle keyed by
/// (seed, epoch), cut into `⌊n/batch_size⌋` full batches. The final partial
/// batch is dropped so downstream estimators always see a constant n.
pub fn batch_indices(n: usize, batch_size: usize, seed: u64, epoch: u32) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::contract("batch_iter", "batch size must be at least 1"));
    }
    if batch_size > n {
        return Err(Error::contract(
            "batch_iter",
            format!("batch size {batch_size} exceeds the dataset size {n}"),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = crate::seeded::rng(seed, crate::seeded::Stream::Shuffle { epoch });
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    Ok(order.chunks_exact(batch_size).map(|c| c.to_vec()).collect())
}
