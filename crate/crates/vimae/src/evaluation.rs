//! Representation-quality probes on frozen latents, latent-prior fit
//! diagnostics, reconstruction/generation image grids, and latent export.
//!
//! Probes are trained on clean-encoded training latents and evaluated on
//! corrupted-encoded test latents: what is measured is the robustness of
//! the representation, not of the probe. Gaussian encoders contribute the
//! posterior mean as the frozen latent.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{corrupt, Corruption, Dataset};
use crate::distributions::Prior;
use crate::divergence::{mmd_unbiased, MmdConfig};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::objectives::bernoulli_nll;
use crate::pgm::write_pgm;
use crate::seeded::{rng, Stream};
use crate::tensor::{Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    Linear,
    Knn,
}

impl ProbeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProbeKind::Linear => "linear",
            ProbeKind::Knn => "knn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    pub accuracy: f64,
    pub corruption: Corruption,
    pub num_labeled: usize,
    pub probe_kind: ProbeKind,
}

/// The Table-1-style corruption grid: clean, Gaussian σ ∈ {0.2, 0.4},
/// mask p ∈ {0.2, 0.5}.
pub fn standard_corruption_grid() -> Vec<Corruption> {
    vec![
        Corruption::None,
        Corruption::Gaussian { sigma: 0.2 },
        Corruption::Gaussian { sigma: 0.4 },
        Corruption::Mask { p: 0.2 },
        Corruption::Mask { p: 0.5 },
    ]
}

// ── Probes ───────────────────────────────────────────────────────────

const LINEAR_ITERS: usize = 500;
const LINEAR_LR: f64 = 0.5;
const LINEAR_WEIGHT_DECAY: f64 = 1e-4;
const KNN_K: usize = 5;

/// Train a probe on frozen latents and return held-out accuracy.
///
/// Linear: multinomial logistic regression, full-batch gradient descent,
/// internally standardized features, L2 weight decay 1e-4, 500 iterations,
/// seed-deterministic. KNN: k = 5 majority vote, ties broken toward the
/// neighbor with the lower index.
pub fn probe_train_eval(
    latents_train: &Tensor,
    labels_train: &[u8],
    latents_test: &Tensor,
    labels_test: &[u8],
    kind: ProbeKind,
    seed: u64,
) -> Result<ProbeResult> {
    let (n_train, d) = latents_train.dims2()?;
    let (n_test, d2) = latents_test.dims2()?;
    if d != d2 {
        return Err(Error::dimension(
            "probe_train_eval",
            format!("latent widths differ: {d} vs {d2}"),
        ));
    }
    if n_train != labels_train.len() || n_test != labels_test.len() {
        return Err(Error::Consistency("latent/label counts differ".into()));
    }
    let num_classes = labels_train.iter().copied().max().unwrap_or(0) as usize + 1;
    if labels_train.iter().all(|&l| l == labels_train[0]) {
        return Err(Error::contract(
            "probe_train_eval",
            "training labels contain a single class",
        ));
    }

    let accuracy = match kind {
        ProbeKind::Linear => linear_probe_accuracy(
            &latents_train.data(),
            labels_train,
            &latents_test.data(),
            labels_test,
            d,
            num_classes,
            seed,
        ),
        ProbeKind::Knn => knn_accuracy(
            &latents_train.data(),
            labels_train,
            &latents_test.data(),
            labels_test,
            d,
            num_classes,
        ),
    };
    Ok(ProbeResult { accuracy, corruption: Corruption::None, num_labeled: n_train, probe_kind: kind })
}

#[allow(clippy::too_many_arguments)]
fn linear_probe_accuracy(
    train: &[f64],
    labels_train: &[u8],
    test: &[f64],
    labels_test: &[u8],
    d: usize,
    k: usize,
    seed: u64,
) -> f64 {
    let n = labels_train.len();
    // standardize with training statistics
    let mut mean = vec![0.0; d];
    for row in train.chunks_exact(d) {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut std = vec![0.0; d];
    for row in train.chunks_exact(d) {
        for (s, (&v, &m)) in std.iter_mut().zip(row.iter().zip(&mean)) {
            *s += (v - m) * (v - m);
        }
    }
    std.iter_mut().for_each(|s| *s = (*s / n as f64).sqrt().max(1e-8));
    let normalize = |x: &[f64]| -> Vec<f64> {
        x.chunks_exact(d)
            .flat_map(|row| row.iter().zip(mean.iter().zip(&std)).map(|(&v, (&m, &s))| (v - m) / s))
            .collect()
    };
    let xn = normalize(train);
    let tn = normalize(test);

    // weights k×d plus bias k, tiny symmetric-breaking init
    let mut init_rng = rng(seed, Stream::Probe);
    let mut w: Vec<f64> = (0..k * d).map(|_| init_rng.gen_range(-1e-3..1e-3)).collect();
    let mut b = vec![0.0; k];
    let mut logits = vec![0.0; k];
    let mut probs = vec![0.0; k];
    let mut gw = vec![0.0; k * d];
    let mut gb = vec![0.0; k];
    for _ in 0..LINEAR_ITERS {
        gw.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
        for (row, &label) in xn.chunks_exact(d).zip(labels_train) {
            softmax_forward(row, &w, &b, d, k, &mut logits, &mut probs);
            for c in 0..k {
                let delta = probs[c] - if c == label as usize { 1.0 } else { 0.0 };
                gb[c] += delta;
                for t in 0..d {
                    gw[c * d + t] += delta * row[t];
                }
            }
        }
        let inv_n = 1.0 / n as f64;
        for i in 0..k * d {
            w[i] -= LINEAR_LR * (gw[i] * inv_n + LINEAR_WEIGHT_DECAY * w[i]);
        }
        for c in 0..k {
            b[c] -= LINEAR_LR * gb[c] * inv_n;
        }
    }

    let mut correct = 0usize;
    for (row, &label) in tn.chunks_exact(d).zip(labels_test) {
        softmax_forward(row, &w, &b, d, k, &mut logits, &mut probs);
        let pred = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(c, _)| c)
            .unwrap_or(0);
        if pred == label as usize {
            correct += 1;
        }
    }
    correct as f64 / labels_test.len() as f64
}

fn softmax_forward(
    row: &[f64],
    w: &[f64],
    b: &[f64],
    d: usize,
    k: usize,
    logits: &mut [f64],
    probs: &mut [f64],
) {
    for c in 0..k {
        let wrow = &w[c * d..(c + 1) * d];
        logits[c] = b[c] + wrow.iter().zip(row).map(|(&wv, &xv)| wv * xv).sum::<f64>();
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for c in 0..k {
        probs[c] = (logits[c] - max).exp();
        sum += probs[c];
    }
    probs.iter_mut().for_each(|p| *p /= sum);
}

fn knn_accuracy(
    train: &[f64],
    labels_train: &[u8],
    test: &[f64],
    labels_test: &[u8],
    d: usize,
    num_classes: usize,
    ) -> f64 {
    let k = KNN_K.min(labels_train.len());
    let mut correct = 0usize;
    for (q, &label) in test.chunks_exact(d).zip(labels_test) {
        let mut dists: Vec<(f64, usize)> = train
            .chunks_exact(d)
            .enumerate()
            .map(|(j, row)| {
                let s: f64 = q.iter().zip(row).map(|(&a, &b)| (a - b) * (a - b)).sum();
                (s, j)
            })
            .collect();
        // deterministic order: by distance, then lower index wins
        dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; num_classes];
        for &(_, j) in dists.iter().take(k) {
            votes[labels_train[j] as usize] += 1;
        }
        let best = *votes.iter().max().unwrap();
        // vote ties resolve to the tied class seen earliest in rank order
        let pred = dists
            .iter()
            .take(k)
            .map(|&(_, j)| labels_train[j] as usize)
            .find(|&c| votes[c] == best)
            .unwrap();
        if pred == label as usize {
            correct += 1;
        }
    }
    correct as f64 / labels_test.len() as f64
}

// ── Representation evaluation over the corruption grid ──────────────

#[derive(Debug, Clone)]
pub struct EvalRow {
    pub model: String,
    pub corruption: Corruption,
    pub probe_kind: ProbeKind,
    pub accuracy: f64,
    pub num_labeled: usize,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    /// MMD between prior samples and clean-encoded test latents.
    pub latent_mmd: f64,
    /// Mean reconstruction cross-entropy on clean test data.
    pub mean_distortion: f64,
}

impl EvalReport {
    /// CSV with columns model,corruption,param,probe,accuracy.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "model,corruption,param,probe,accuracy")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.model,
                r.corruption.kind_name(),
                r.corruption.param(),
                r.probe_kind.name(),
                r.accuracy
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn accuracy_for(&self, corruption: Corruption) -> Option<f64> {
        self.rows.iter().find(|r| r.corruption == corruption).map(|r| r.accuracy)
    }
}

fn encode_all(model: &Model, images: &Tensor) -> Result<Tensor> {
    let tape = Tape::new();
    model.encode_mean(&tape, images)
}

/// Probe the frozen representation across a corruption grid.
///
/// For each cell: corrupt the test images, encode them, and evaluate a
/// probe trained on `num_labeled` clean-encoded training latents. Also
/// reports the MMD between prior samples and the clean test latents, and
/// the clean-test distortion.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_representation(
    model: &Model,
    model_label: &str,
    train: &Dataset,
    test: &Dataset,
    grid: &[Corruption],
    num_labeled: usize,
    probe_kind: ProbeKind,
    prior: &Prior,
    seed: u64,
) -> Result<EvalReport> {
    if num_labeled < 2 {
        return Err(Error::contract("evaluate_representation", "need at least two labeled points"));
    }
    if num_labeled > train.len() {
        return Err(Error::contract(
            "evaluate_representation",
            format!("num_labeled {num_labeled} exceeds the training split of {}", train.len()),
        ));
    }

    // labeled subset: seeded shuffle, first num_labeled points
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut sel_rng = rng(seed, Stream::Probe);
    for i in (1..order.len()).rev() {
        let j = sel_rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let chosen = &order[..num_labeled];
    let probe_images = train.gather(chosen);
    let probe_labels = train.gather_labels(chosen);
    let probe_latents = encode_all(model, &probe_images)?;

    let mut rows = Vec::new();
    for (cell, &corruption) in grid.iter().enumerate() {
        let mut cell_rng = rng(seed, Stream::Corruption { cell: cell as u32 });
        let corrupted = corrupt(&test.images, corruption, &mut cell_rng)?;
        let test_latents = encode_all(model, &corrupted)?;
        let result = probe_train_eval(
            &probe_latents,
            &probe_labels,
            &test_latents,
            &test.labels,
            probe_kind,
            seed,
        )?;
        rows.push(EvalRow {
            model: model_label.to_string(),
            corruption,
            probe_kind,
            accuracy: result.accuracy,
            num_labeled,
        });
    }

    // latent-prior fit on clean test latents
    let clean_latents = encode_all(model, &test.images)?;
    let mut prior_rng = rng(seed, Stream::PriorDraw);
    let prior_samples = prior.sample(test.len(), &mut prior_rng)?;
    let tape = Tape::new();
    let mmd_cfg = MmdConfig::for_latent_dim(prior.dim);
    let latent_mmd = mmd_unbiased(&tape, &mmd_cfg, &prior_samples, &clean_latents)?.item();

    // clean-test distortion through the deterministic latent path
    let logits = model.decode(&tape, &clean_latents)?;
    let mean_distortion = tape.mean(&bernoulli_nll(&tape, &test.images, &logits)?, None)?.item();

    Ok(EvalReport { rows, latent_mmd, mean_distortion })
}

// ── Image artifacts ──────────────────────────────────────────────────

fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Tile a batch of corrupted inputs (row 1) above their reconstructions
/// (row 2) into one grayscale image of (2·height) × (n·width) pixels.
pub fn reconstruct_grid(
    model: &Model,
    x: &Tensor,
    height: usize,
    width: usize,
    corruption: Corruption,
    rng: &mut ChaCha8Rng,
    path: &Path,
) -> Result<()> {
    let (n, d) = x.dims2()?;
    if n == 0 {
        return Err(Error::contract("reconstruct_grid", "batch must be nonempty"));
    }
    if d != height * width {
        return Err(Error::dimension(
            "reconstruct_grid",
            format!("{height}x{width} tiles need {} pixels per row, got {d}", height * width),
        ));
    }
    let corrupted = corrupt(x, corruption, rng)?;
    let tape = Tape::new();
    let latents = model.encode_mean(&tape, &corrupted)?;
    let recon = tape.sigmoid(&model.decode(&tape, &latents)?);

    let cd = corrupted.data_ref();
    let rd = recon.data_ref();
    let grid_w = n * width;
    let mut pixels = vec![0u8; 2 * height * grid_w];
    for (tile, source) in [(0usize, &cd), (1usize, &rd)] {
        for i in 0..n {
            let img = &source[i * d..(i + 1) * d];
            for row in 0..height {
                for col in 0..width {
                    let y = tile * height + row;
                    let xpix = i * width + col;
                    pixels[y * grid_w + xpix] = quantize(img[row * width + col]);
                }
            }
        }
    }
    write_pgm(path, grid_w, 2 * height, &pixels)
}

/// Sample n latents from the prior, decode, and tile into a near-square
/// grid (trailing cells black).
pub fn generate_grid(
    model: &Model,
    prior: &Prior,
    n: usize,
    height: usize,
    width: usize,
    seed: u64,
    path: &Path,
) -> Result<()> {
    if n == 0 {
        return Err(Error::contract("generate_grid", "need at least one sample"));
    }
    if height * width != model.arch.input_dim {
        return Err(Error::dimension(
            "generate_grid",
            format!("{height}x{width} tiles need {} pixels, model emits {}", height * width, model.arch.input_dim),
        ));
    }
    let mut sample_rng = rng(seed, Stream::PriorDraw);
    let z = prior.sample(n, &mut sample_rng)?;
    let tape = Tape::new();
    let means = tape.sigmoid(&model.decode(&tape, &z)?);
    let md = means.data_ref();

    let rows = (n as f64).sqrt().floor() as usize;
    let rows = rows.max(1);
    let cols = n.div_ceil(rows);
    let grid_w = cols * width;
    let grid_h = rows * height;
    let mut pixels = vec![0u8; grid_w * grid_h];
    let d = height * width;
    for i in 0..n {
        let img = &md[i * d..(i + 1) * d];
        let tile_r = i / cols;
        let tile_c = i % cols;
        for row in 0..height {
            for col in 0..width {
                let y = tile_r * height + row;
                let x = tile_c * width + col;
                pixels[y * grid_w + x] = quantize(img[row * width + col]);
            }
        }
    }
    write_pgm(path, grid_w, grid_h, &pixels)
}

/// CSV of encoded latents, one row per dataset point: z_0,...,z_{d-1},label.
/// Values are written in Rust's shortest round-trip form, so re-parsing
/// reproduces them exactly.
pub fn export_latents(model: &Model, dataset: &Dataset, path: &Path) -> Result<()> {
    let latents = encode_all(model, &dataset.images)?;
    let (n, d) = latents.dims2()?;
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<String> = (0..d).map(|i| format!("z_{i}")).collect();
    writeln!(w, "{},label", header.join(","))?;
    let data = latents.data_ref();
    for i in 0..n {
        let row: Vec<String> = data[i * d..(i + 1) * d].iter().map(|v| v.to_string()).collect();
        writeln!(w, "{},{}", row.join(","), dataset.labels[i])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_generate;
    use crate::models::{Architecture, EncoderKind};
    use crate::pgm::read_pgm;
    use crate::seeded::rng_raw;
    use crate::distributions::sample_standard_normal;

    fn two_cluster_latents(per: usize, seed: u64) -> (Tensor, Vec<u8>) {
        let mut r = rng_raw(seed);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for class in 0..2u8 {
            let center = if class == 0 { -3.0 } else { 3.0 };
            for _ in 0..per {
                let e = sample_standard_normal(&[1, 2], &mut r).data();
                data.extend([center + e[0], center + e[1]]);
                labels.push(class);
            }
        }
        (Tensor::new(data, &[2 * per, 2]).unwrap(), labels)
    }

    #[test]
    fn linear_probe_separates_distant_clusters() {
        let (train, train_l) = two_cluster_latents(200, 1);
        let (test, test_l) = two_cluster_latents(200, 2);
        let r = probe_train_eval(&train, &train_l, &test, &test_l, ProbeKind::Linear, 7).unwrap();
        assert!(r.accuracy >= 0.99, "accuracy {}", r.accuracy);
    }

    #[test]
    fn permuted_labels_give_chance_accuracy() {
        let (train, mut train_l) = two_cluster_latents(200, 3);
        let (test, test_l) = two_cluster_latents(200, 4);
        // decouple labels from geometry with a seeded shuffle
        let mut r = rng_raw(5);
        for i in (1..train_l.len()).rev() {
            let j = r.gen_range(0..=i);
            train_l.swap(i, j);
        }
        let res = probe_train_eval(&train, &train_l, &test, &test_l, ProbeKind::Linear, 7).unwrap();
        assert!((res.accuracy - 0.5).abs() <= 0.1, "accuracy {}", res.accuracy);
    }

    #[test]
    fn knn_on_training_set_is_perfect_at_k_one() {
        // distinct points: the nearest neighbor of each training point is
        // itself, and with KNN_K = 5 on two tight clusters the vote is
        // unanimous anyway
        let (train, train_l) = two_cluster_latents(50, 8);
        let r = probe_train_eval(&train, &train_l, &train, &train_l, ProbeKind::Knn, 7).unwrap();
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn single_class_labels_rejected() {
        let (train, _) = two_cluster_latents(10, 9);
        let labels = vec![1u8; 20];
        assert!(matches!(
            probe_train_eval(&train, &labels, &train, &labels, ProbeKind::Linear, 0),
            Err(Error::Contract { .. })
        ));
    }

    #[test]
    fn probe_is_seed_deterministic() {
        let (train, train_l) = two_cluster_latents(100, 10);
        let (test, test_l) = two_cluster_latents(100, 11);
        let a = probe_train_eval(&train, &train_l, &test, &test_l, ProbeKind::Linear, 3).unwrap();
        let b = probe_train_eval(&train, &train_l, &test, &test_l, ProbeKind::Linear, 3).unwrap();
        assert_eq!(a.accuracy.to_bits(), b.accuracy.to_bits());
    }

    fn frozen_model(seed: u64) -> Model {
        let arch = Architecture::new(64, 4)
            .with_hidden(vec![32])
            .with_encoder(EncoderKind::Deterministic);
        Model::init(arch, seed).unwrap()
    }

    #[test]
    fn grid_report_has_one_row_per_cell() {
        let train = synth_generate(4, 30, 8, 13).unwrap();
        let test = synth_generate(4, 10, 8, 14).unwrap();
        let model = frozen_model(5);
        let grid = standard_corruption_grid();
        let report = evaluate_representation(
            &model,
            "untrained",
            &train,
            &test,
            &grid,
            80,
            ProbeKind::Linear,
            &Prior::logistic_unit_var(4),
            9,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 5);
        assert!(report.rows.iter().all(|r| (0.0..=1.0).contains(&r.accuracy)));
        assert!(report.latent_mmd.is_finite());
        assert!(report.mean_distortion > 0.0);
    }

    #[test]
    fn identity_corruption_reproduces_plain_probe() {
        let train = synth_generate(4, 30, 8, 15).unwrap();
        let test = synth_generate(4, 10, 8, 16).unwrap();
        let model = frozen_model(6);
        let seed = 21;
        let report = evaluate_representation(
            &model,
            "m",
            &train,
            &test,
            &[Corruption::None],
            60,
            ProbeKind::Linear,
            &Prior::logistic_unit_var(4),
            seed,
        )
        .unwrap();

        // the same probe computed by hand on clean latents
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut sel = rng(seed, Stream::Probe);
        for i in (1..order.len()).rev() {
            let j = sel.gen_range(0..=i);
            order.swap(i, j);
        }
        let chosen = &order[..60];
        let tape = Tape::new();
        let pl = model.encode_mean(&tape, &train.gather(chosen)).unwrap();
        let tl = model.encode_mean(&tape, &test.images).unwrap();
        let manual = probe_train_eval(
            &pl,
            &train.gather_labels(chosen),
            &tl,
            &test.labels,
            ProbeKind::Linear,
            seed,
        )
        .unwrap();
        assert_eq!(report.rows[0].accuracy.to_bits(), manual.accuracy.to_bits());
    }

    #[test]
    fn eval_csv_has_expected_columns() {
        let train = synth_generate(2, 20, 8, 17).unwrap();
        let test = synth_generate(2, 10, 8, 18).unwrap();
        let model = frozen_model(7);
        let report = evaluate_representation(
            &model,
            "demo",
            &train,
            &test,
            &[Corruption::None, Corruption::Mask { p: 0.5 }],
            40,
            ProbeKind::Knn,
            &Prior::logistic_unit_var(4),
            3,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eval.csv");
        report.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "model,corruption,param,probe,accuracy");
        assert!(lines.next().unwrap().starts_with("demo,none,0,knn,"));
        assert!(lines.next().unwrap().starts_with("demo,mask,0.5,knn,"));
    }

    #[test]
    fn reconstruct_grid_dimensions_and_identity_row() {
        let ds = synth_generate(2, 10, 8, 19).unwrap();
        let model = frozen_model(8);
        let x = ds.head(6);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("recon.pgm");
        reconstruct_grid(&model, &x, 8, 8, Corruption::None, &mut rng_raw(0), &path).unwrap();
        let (w, h, pixels) = read_pgm(&path).unwrap();
        assert_eq!((w, h), (6 * 8, 2 * 8));
        // identity corruption: row 1 equals the quantized inputs exactly
        let xd = x.data();
        for i in 0..6 {
            for row in 0..8 {
                for col in 0..8 {
                    let expected = quantize(xd[i * 64 + row * 8 + col]);
                    assert_eq!(pixels[row * w + i * 8 + col], expected);
                }
            }
        }
    }

    #[test]
    fn generate_grid_is_square_and_deterministic() {
        let model = frozen_model(9);
        let prior = Prior::logistic_unit_var(4);
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("gen1.pgm");
        let p2 = dir.path().join("gen2.pgm");
        generate_grid(&model, &prior, 64, 8, 8, 33, &p1).unwrap();
        generate_grid(&model, &prior, 64, 8, 8, 33, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let (w, h, _) = read_pgm(&p1).unwrap();
        assert_eq!((w, h), (64, 64)); // 8×8 tiles of 8×8 images
    }

    #[test]
    fn untrained_zero_decoder_generates_mid_gray() {
        let model = frozen_model(10);
        let last = model.decoder.last().unwrap();
        last.weight.update_data(|w| w.iter_mut().for_each(|v| *v = 0.0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gray.pgm");
        generate_grid(&model, &Prior::standard_normal(4), 4, 8, 8, 1, &path).unwrap();
        let (_, _, pixels) = read_pgm(&path).unwrap();
        assert!(pixels.iter().all(|&b| b == 128), "sigmoid(0) quantizes to 128");
    }

    #[test]
    fn latent_export_round_trips_exactly() {
        let ds = synth_generate(3, 5, 8, 20).unwrap();
        let model = frozen_model(11);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("latents.csv");
        export_latents(&model, &ds, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "z_0,z_1,z_2,z_3,label");
        let tape = Tape::new();
        let expected = model.encode_mean(&tape, &ds.images).unwrap().data();
        let mut count = 0;
        for (i, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 5);
            for (j, f) in fields[..4].iter().enumerate() {
                let parsed: f64 = f.parse().unwrap();
                assert_eq!(parsed.to_bits(), expected[i * 4 + j].to_bits());
            }
            assert_eq!(fields[4].parse::<u8>().unwrap(), ds.labels[i]);
            count += 1;
        }
        assert_eq!(count, ds.len());
    }
}
