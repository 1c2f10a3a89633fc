//! Training objectives: the rate-regularized family (VAE, β-VAE), the
//! InfoVAE reduction, and the MMD-regularized VIMAE objective, plus the
//! rate-decomposition diagnostic splitting the encoder rate into mutual
//! information and marginal mismatch.
//!
//! Conventions: distortion is the Bernoulli cross-entropy summed over
//! pixels and averaged over the batch (hyperparameters β and λ assume this
//! scale); one reparameterization sample per data point; the constant data
//! entropy term is omitted from every total.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{gaussian_row_log_pdf, kl_diag_gaussian, Prior, PriorKind};
use crate::divergence::{mmd_unbiased, MmdConfig};
use crate::error::{Error, Result};
use crate::models::{EncoderKind, Model};
use crate::tensor::{Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Vae,
    BetaVae,
    InfoVae,
    Vimae,
}

/// Objective family plus hyperparameters. Constructed through the family
/// helpers so the cross-family identities (VAE is β-VAE at β = 1, β-VAE is
/// InfoVAE at α = λ = β) hold by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub family: Family,
    pub beta: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub mmd: Option<MmdConfig>,
    pub prior: Prior,
}

impl ObjectiveConfig {
    pub fn vae(prior: Prior) -> ObjectiveConfig {
        ObjectiveConfig { family: Family::Vae, beta: 1.0, alpha: 0.0, lambda: 0.0, mmd: None, prior }
    }

    pub fn beta_vae(beta: f64, prior: Prior) -> ObjectiveConfig {
        ObjectiveConfig { family: Family::BetaVae, beta, alpha: 0.0, lambda: 0.0, mmd: None, prior }
    }

    pub fn info_vae(alpha: f64, lambda: f64, prior: Prior) -> ObjectiveConfig {
        ObjectiveConfig {
            family: Family::InfoVae,
            beta: 0.0,
            alpha,
            lambda,
            mmd: Some(MmdConfig::for_latent_dim(prior.dim)),
            prior,
        }
    }

    pub fn vimae(lambda: f64, prior: Prior) -> ObjectiveConfig {
        ObjectiveConfig {
            family: Family::Vimae,
            beta: 0.0,
            alpha: 0.0,
            lambda,
            mmd: Some(MmdConfig::for_latent_dim(prior.dim)),
            prior,
        }
    }

    pub fn with_mmd(mut self, mmd: MmdConfig) -> ObjectiveConfig {
        self.mmd = Some(mmd);
        self
    }

    fn mmd_config(&self) -> Result<MmdConfig> {
        self.mmd.ok_or_else(|| {
            Error::contract("objective", "this objective requires an MMD configuration")
        })
    }
}

/// One loss evaluation: the taped total (backpropagatable) plus a numeric
/// breakdown. `terms` holds the weighted contributions and sums to `total`.
pub struct LossReport {
    pub total: Tensor,
    /// −E log p(x|z): reconstruction cross-entropy per image.
    pub distortion: f64,
    /// Unweighted analytic rate (VAE/β-VAE/InfoVAE) or MMD value (VIMAE).
    pub rate_or_divergence: f64,
    pub terms: BTreeMap<&'static str, f64>,
}

impl LossReport {
    /// Sum of the weighted contributions; reproduces `total` to < 1e−9.
    pub fn recombined(&self) -> f64 {
        self.terms.values().sum()
    }
}

/// Per-image Bernoulli cross-entropy from logits, summed over pixels:
/// x·softplus(−t) + (1−x)·softplus(t), row-summed. Valid for intensities in
/// [0,1]; gradients flow through the logits only.
pub fn bernoulli_nll(tape: &Tape, x: &Tensor, logits: &Tensor) -> Result<Tensor> {
    if x.shape() != logits.shape() {
        return Err(Error::dimension(
            "bernoulli_nll",
            format!("targets {:?} vs logits {:?}", x.shape(), logits.shape()),
        ));
    }
    let one_minus_x = {
        let xd = x.data_ref();
        Tensor::new(xd.iter().map(|v| 1.0 - v).collect(), &x.shape())?
    };
    let neg_logits = tape.scale(logits, -1.0);
    let pos_term = tape.mul(x, &tape.softplus(&neg_logits))?;
    let neg_term = tape.mul(&one_minus_x, &tape.softplus(logits))?;
    tape.sum(&tape.add(&pos_term, &neg_term)?, Some(1))
}

fn require_gaussian(model: &Model, op: &'static str) -> Result<()> {
    if model.arch.encoder_kind != EncoderKind::Gaussian {
        return Err(Error::contract(op, "this objective requires a Gaussian encoder"));
    }
    Ok(())
}

/// ELBO-style loss: mean over the batch of BCE(x, decode(z)) + β·KL, with z
/// one reparameterized sample per point. Minimizing it maximizes the
/// (β-weighted) evidence lower bound.
pub fn loss_rate_regularized(
    tape: &Tape,
    model: &Model,
    x: &Tensor,
    cfg: &ObjectiveConfig,
    rng: &mut ChaCha8Rng,
) -> Result<LossReport> {
    if !matches!(cfg.family, Family::Vae | Family::BetaVae) {
        return Err(Error::contract(
            "loss_rate_regularized",
            format!("family {:?} does not use the rate-regularized loss", cfg.family),
        ));
    }
    require_gaussian(model, "loss_rate_regularized")?;
    if cfg.prior.kind != PriorKind::StandardNormal {
        return Err(Error::Unsupported(
            "the analytic rate term requires the standard normal prior".into(),
        ));
    }
    let enc = model.encode(tape, x, rng)?;
    let posterior = enc.posterior.as_ref().expect("gaussian encoder");
    let logits = model.decode(tape, &enc.z)?;
    let distortion = tape.mean(&bernoulli_nll(tape, x, &logits)?, None)?;
    let rate = tape.mean(&kl_diag_gaussian(tape, posterior, &cfg.prior)?, None)?;
    let weighted_rate = tape.scale(&rate, cfg.beta);
    let total = tape.add(&distortion, &weighted_rate)?;

    let mut terms = BTreeMap::new();
    terms.insert("distortion", distortion.item());
    terms.insert("rate", weighted_rate.item());
    Ok(LossReport {
        distortion: distortion.item(),
        rate_or_divergence: rate.item(),
        terms,
        total,
    })
}

/// InfoVAE loss in its standard reduction:
/// distortion + α·rate + (λ−α)·MMD(q(z) ‖ p(z)),
/// with the marginal divergence estimated from one prior batch per call.
/// α = λ recovers the rate-regularized loss; α = 0, λ > 0 is the
/// information-preference configuration.
pub fn loss_infovae(
    tape: &Tape,
    model: &Model,
    x: &Tensor,
    cfg: &ObjectiveConfig,
    rng: &mut ChaCha8Rng,
) -> Result<LossReport> {
    if cfg.family != Family::InfoVae {
        return Err(Error::contract("loss_infovae", format!("family {:?}", cfg.family)));
    }
    require_gaussian(model, "loss_infovae")?;
    if cfg.prior.kind != PriorKind::StandardNormal {
        return Err(Error::Unsupported(
            "the analytic rate term requires the standard normal prior".into(),
        ));
    }
    let n = x.dims2()?.0;
    let enc = model.encode(tape, x, rng)?;
    let posterior = enc.posterior.as_ref().expect("gaussian encoder");
    let logits = model.decode(tape, &enc.z)?;
    let distortion = tape.mean(&bernoulli_nll(tape, x, &logits)?, None)?;
    let rate = tape.mean(&kl_diag_gaussian(tape, posterior, &cfg.prior)?, None)?;
    let weighted_rate = tape.scale(&rate, cfg.alpha);

    let marginal_weight = cfg.lambda - cfg.alpha;
    let mut total = tape.add(&distortion, &weighted_rate)?;
    let mut mmd_contribution = 0.0;
    if marginal_weight != 0.0 {
        let prior_batch = cfg.prior.sample(n, rng)?;
        let mmd = mmd_unbiased(tape, &cfg.mmd_config()?, &prior_batch, &enc.z)?;
        let weighted_mmd = tape.scale(&mmd, marginal_weight);
        mmd_contribution = weighted_mmd.item();
        total = tape.add(&total, &weighted_mmd)?;
    }

    let mut terms = BTreeMap::new();
    terms.insert("distortion", distortion.item());
    terms.insert("rate", weighted_rate.item());
    terms.insert("mmd", mmd_contribution);
    Ok(LossReport {
        distortion: distortion.item(),
        rate_or_divergence: rate.item(),
        terms,
        total,
    })
}

/// VIMAE loss: mean BCE(x, decode(encode(x))) + λ·MMD(prior batch, encoded
/// batch). The prior batch must match the data batch size.
pub fn loss_vimae(
    tape: &Tape,
    model: &Model,
    x: &Tensor,
    cfg: &ObjectiveConfig,
    prior_samples: &Tensor,
    rng: &mut ChaCha8Rng,
) -> Result<LossReport> {
    if cfg.family != Family::Vimae {
        return Err(Error::contract("loss_vimae", format!("family {:?}", cfg.family)));
    }
    let n = x.dims2()?.0;
    let (np, _) = prior_samples.dims2()?;
    if np != n {
        return Err(Error::contract(
            "loss_vimae",
            format!("prior batch has {np} rows but the data batch has {n}"),
        ));
    }
    let enc = model.encode(tape, x, rng)?;
    let logits = model.decode(tape, &enc.z)?;
    let distortion = tape.mean(&bernoulli_nll(tape, x, &logits)?, None)?;

    let mut total = distortion.clone();
    let mut divergence = 0.0;
    let mut mmd_contribution = 0.0;
    if cfg.lambda != 0.0 {
        let mmd = mmd_unbiased(tape, &cfg.mmd_config()?, prior_samples, &enc.z)?;
        divergence = mmd.item();
        let weighted = tape.scale(&mmd, cfg.lambda);
        mmd_contribution = weighted.item();
        total = tape.add(&distortion, &weighted)?;
    }

    let mut terms = BTreeMap::new();
    terms.insert("distortion", distortion.item());
    terms.insert("mmd", mmd_contribution);
    Ok(LossReport {
        distortion: distortion.item(),
        rate_or_divergence: divergence,
        terms,
        total,
    })
}

/// Family dispatch used by the training loop. For VIMAE, a fresh prior
/// batch matching the data batch size is drawn from `rng` per call.
pub fn evaluate(
    tape: &Tape,
    model: &Model,
    x: &Tensor,
    cfg: &ObjectiveConfig,
    rng: &mut ChaCha8Rng,
) -> Result<LossReport> {
    match cfg.family {
        Family::Vae | Family::BetaVae => loss_rate_regularized(tape, model, x, cfg, rng),
        Family::InfoVae => loss_infovae(tape, model, x, cfg, rng),
        Family::Vimae => {
            let n = x.dims2()?.0;
            let prior_batch = cfg.prior.sample(n, rng)?;
            loss_vimae(tape, model, x, cfg, &prior_batch, rng)
        }
    }
}

// ── Rate decomposition ───────────────────────────────────────────────

/// Limit above which the exact-mixture computation is refused (quadratic
/// cost in the number of points).
pub const RATE_DECOMPOSITION_MAX_POINTS: usize = 64;

#[derive(Debug, Clone)]
pub struct RateDecomposition {
    /// Mean analytic per-point KL(q(z|x) ‖ p(z)).
    pub rate: f64,
    /// Monte Carlo estimate of I_q(X, Z) under the exact mixture q(z).
    pub mutual_info: f64,
    /// Monte Carlo estimate of KL(q(z) ‖ p(z)).
    pub marginal_kl: f64,
    pub mutual_info_se: f64,
    pub marginal_kl_se: f64,
}

impl RateDecomposition {
    /// Standard error of the identity residual rate − (i_q + marginal KL).
    pub fn combined_se(&self) -> f64 {
        (self.mutual_info_se.powi(2) + self.marginal_kl_se.powi(2)).sqrt()
    }
}

/// Split the encoder rate over a small dataset into mutual information and
/// marginal mismatch: E[KL(q(z|x)‖p(z))] = I_q(X,Z) + KL(q(z)‖p(z)).
///
/// The aggregated posterior q(z) is evaluated exactly as the N-component
/// mixture of the per-point posteriors, so N is capped at
/// [`RATE_DECOMPOSITION_MAX_POINTS`]. Requires a Gaussian encoder and the
/// standard normal prior (the rate term is the analytic KL).
pub fn rate_decomposition(
    model: &Model,
    x: &Tensor,
    prior: &Prior,
    mc_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RateDecomposition> {
    require_gaussian(model, "rate_decomposition")?;
    if prior.kind != PriorKind::StandardNormal {
        return Err(Error::Unsupported(
            "rate_decomposition uses the analytic rate, defined for the standard normal prior"
                .into(),
        ));
    }
    if mc_samples == 0 {
        return Err(Error::contract("rate_decomposition", "need at least one MC sample"));
    }
    let (n, _) = x.dims2()?;
    if n == 0 {
        return Err(Error::contract("rate_decomposition", "need at least one data point"));
    }
    if n > RATE_DECOMPOSITION_MAX_POINTS {
        return Err(Error::contract(
            "rate_decomposition",
            format!("{n} points exceed the exact-mixture cap of {RATE_DECOMPOSITION_MAX_POINTS}"),
        ));
    }

    // posterior parameters for every point
    let tape = Tape::new();
    let enc = model.encode(&tape, x, rng)?;
    let post = enc.posterior.expect("gaussian encoder");
    let d = post.dim();
    let mu = post.mu.data();
    let logvar = post.logvar.data();
    let comp = |i: usize| (&mu[i * d..(i + 1) * d], &logvar[i * d..(i + 1) * d]);

    // analytic rate
    let mut rate = 0.0;
    for i in 0..n {
        let (m, lv) = comp(i);
        let mut kl = 0.0;
        for t in 0..d {
            kl += m[t] * m[t] + lv[t].exp() - 1.0 - lv[t];
        }
        rate += 0.5 * kl;
    }
    rate /= n as f64;

    // log q(z) under the exact mixture
    let log_mixture = |z: &[f64]| -> f64 {
        let mut logs = Vec::with_capacity(n);
        for j in 0..n {
            let (m, lv) = comp(j);
            logs.push(gaussian_row_log_pdf(z, m, lv));
        }
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum_exp: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        max + sum_exp.ln() - (n as f64).ln()
    };

    let draw = |m: &[f64], lv: &[f64], z: &mut [f64], rng: &mut ChaCha8Rng| {
        for t in 0..d {
            z[t] = m[t] + (0.5 * lv[t]).exp() * crate::distributions::standard_normal_draw(rng);
        }
    };

    // I_q: per-point expectation of log q(z|x_i) − log q(z)
    let mut z = vec![0.0; d];
    let mut iq_vals = Vec::with_capacity(n * mc_samples);
    for i in 0..n {
        let (m, lv) = comp(i);
        for _ in 0..mc_samples {
            draw(m, lv, &mut z, rng);
            iq_vals.push(gaussian_row_log_pdf(&z, m, lv) - log_mixture(&z));
        }
    }
    let (mutual_info, mutual_info_se) = mean_and_se(&iq_vals);

    // marginal KL: expectation over z ~ q(z) of log q(z) − log p(z)
    let mut mkl_vals = Vec::with_capacity(mc_samples);
    use rand::Rng;
    for _ in 0..mc_samples {
        let j = rng.gen_range(0..n);
        let (m, lv) = comp(j);
        draw(m, lv, &mut z, rng);
        let log_p: f64 = z.iter().map(|&v| prior.log_pdf_1d(v)).sum();
        mkl_vals.push(log_mixture(&z) - log_p);
    }
    let (marginal_kl, marginal_kl_se) = mean_and_se(&mkl_vals);

    Ok(RateDecomposition { rate, mutual_info, marginal_kl, mutual_info_se, marginal_kl_se })
}

fn mean_and_se(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
