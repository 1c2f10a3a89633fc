//! Latent priors, Gaussian posterior machinery, and the CDF-entropy
//! latent-fit diagnostic.
//!
//! Two priors are supported, both with unit per-dimension variance and
//! i.i.d. dimensions: the standard normal, and a zero-mean logistic with
//! scale `s = √3/π` (so that `s²π²/3 = 1`).

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{stable_sigmoid, stable_softplus, Tape, Tensor};

/// Bounds applied to encoder log-variances.
pub const LOGVAR_CLAMP: (f64, f64) = (-10.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PriorKind {
    StandardNormal,
    LogisticUnitVar,
}

/// The latent reference distribution p(z).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Prior {
    pub kind: PriorKind,
    pub dim: usize,
}

/// Scale of the unit-variance logistic.
pub fn logistic_scale() -> f64 {
    3.0_f64.sqrt() / PI
}

impl Prior {
    pub fn standard_normal(dim: usize) -> Prior {
        Prior { kind: PriorKind::StandardNormal, dim }
    }

    pub fn logistic_unit_var(dim: usize) -> Prior {
        Prior { kind: PriorKind::LogisticUnitVar, dim }
    }

    /// `n` i.i.d. draws, one row each.
    ///
    /// Normal via Box–Muller (cosine branch only, one uniform pair per
    /// variate); logistic via the inverse CDF `z = s·ln(u/(1−u))` with
    /// `u ~ U(0,1)` on the open interval.
    pub fn sample(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Tensor> {
        if n == 0 {
            return Err(Error::contract("sample_prior", "need at least one sample"));
        }
        let mut data = Vec::with_capacity(n * self.dim);
        match self.kind {
            PriorKind::StandardNormal => {
                for _ in 0..n * self.dim {
                    data.push(standard_normal_draw(rng));
                }
            }
            PriorKind::LogisticUnitVar => {
                let s = logistic_scale();
                for _ in 0..n * self.dim {
                    let u = open_unit_uniform(rng);
                    data.push(s * (u / (1.0 - u)).ln());
                }
            }
        }
        Tensor::new(data, &[n, self.dim])
    }

    /// Per-row log density, summed over dimensions.
    pub fn log_pdf(&self, z: &Tensor) -> Result<Tensor> {
        let (n, d) = z.dims2()?;
        if d != self.dim {
            return Err(Error::dimension(
                "log_pdf",
                format!("prior has dim {}, samples have width {d}", self.dim),
            ));
        }
        let zd = z.data_ref();
        let mut out = Vec::with_capacity(n);
        for row in zd.chunks_exact(d) {
            out.push(row.iter().map(|&v| self.log_pdf_1d(v)).sum());
        }
        drop(zd);
        Tensor::new(out, &[n])
    }

    /// Log density of a single coordinate.
    pub fn log_pdf_1d(&self, z: f64) -> f64 {
        match self.kind {
            PriorKind::StandardNormal => -0.5 * ((2.0 * PI).ln() + z * z),
            PriorKind::LogisticUnitVar => {
                let s = logistic_scale();
                let t = z / s;
                -t - s.ln() - 2.0 * stable_softplus(-t)
            }
        }
    }

    /// Per-dimension CDF, elementwise over an n×dim tensor.
    pub fn cdf(&self, z: &Tensor) -> Result<Tensor> {
        let (n, d) = z.dims2()?;
        if d != self.dim {
            return Err(Error::dimension(
                "prior_cdf",
                format!("prior has dim {}, samples have width {d}", self.dim),
            ));
        }
        let zd = z.data_ref();
        let out: Vec<f64> = zd.iter().map(|&v| self.cdf_1d(v)).collect();
        drop(zd);
        Tensor::new(out, &[n, d])
    }

    pub fn cdf_1d(&self, z: f64) -> f64 {
        match self.kind {
            PriorKind::StandardNormal => 0.5 * (1.0 + statrs::function::erf::erf(z / 2.0_f64.sqrt())),
            PriorKind::LogisticUnitVar => stable_sigmoid(z / logistic_scale()),
        }
    }
}

fn open_unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.gen(); // [0, 1)
        if u > 0.0 {
            return u;
        }
    }
}

/// One standard-normal variate via Box–Muller.
pub fn standard_normal_draw(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = open_unit_uniform(rng);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Standard-normal tensor of the given shape (constant, not taped).
pub fn sample_standard_normal(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let numel: usize = shape.iter().product();
    let data: Vec<f64> = (0..numel).map(|_| standard_normal_draw(rng)).collect();
    Tensor::new(data, shape).expect("consistent shape")
}

// ── Gaussian posterior ───────────────────────────────────────────────

/// Diagonal Gaussian q(z|x) = N(mu, diag(exp(logvar))). The log-variance is
/// clamped to [-10, 10] at construction.
pub struct GaussianPosterior {
    pub mu: Tensor,
    pub logvar: Tensor,
}

impl GaussianPosterior {
    pub fn new(tape: &Tape, mu: Tensor, logvar_raw: &Tensor) -> Result<GaussianPosterior> {
        let (n, d) = mu.dims2()?;
        let (n2, d2) = logvar_raw.dims2()?;
        if (n, d) != (n2, d2) {
            return Err(Error::dimension(
                "gaussian_posterior",
                format!("mu shape {:?} vs logvar shape {:?}", mu.shape(), logvar_raw.shape()),
            ));
        }
        let logvar = tape.clamp(logvar_raw, LOGVAR_CLAMP.0, LOGVAR_CLAMP.1)?;
        Ok(GaussianPosterior { mu, logvar })
    }

    pub fn batch(&self) -> usize {
        self.mu.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.mu.shape()[1]
    }
}

/// z = mu + exp(0.5·logvar) ∘ eps, differentiable w.r.t. mu and logvar.
pub fn reparameterize(tape: &Tape, post: &GaussianPosterior, eps: &Tensor) -> Result<Tensor> {
    if eps.shape() != post.mu.shape() {
        return Err(Error::dimension(
            "reparameterize",
            format!("eps shape {:?} vs mu shape {:?}", eps.shape(), post.mu.shape()),
        ));
    }
    let std = tape.exp(&tape.scale(&post.logvar, 0.5));
    tape.add(&post.mu, &tape.mul(&std, eps)?)
}

/// Per-sample KL(q(z|x) ‖ p(z)) against the standard normal:
/// ½·Σ_d (μ² + σ² − 1 − ln σ²). Defined only for the standard-normal prior;
/// use [`mc_rate`] for other priors.
pub fn kl_diag_gaussian(tape: &Tape, post: &GaussianPosterior, prior: &Prior) -> Result<Tensor> {
    if prior.kind != PriorKind::StandardNormal {
        return Err(Error::Unsupported(
            "analytic diagonal-Gaussian KL is defined only against the standard normal prior \
             (use the Monte Carlo rate for the logistic prior)"
                .to_string(),
        ));
    }
    if post.dim() != prior.dim {
        return Err(Error::dimension(
            "kl_diag_gaussian",
            format!("posterior dim {} vs prior dim {}", post.dim(), prior.dim),
        ));
    }
    let mu_sq = tape.mul(&post.mu, &post.mu)?;
    let var = tape.exp(&post.logvar);
    let sum_terms = tape.sub(&tape.add(&mu_sq, &var)?, &post.logvar)?;
    let shifted = tape.add_scalar(&sum_terms, -1.0);
    let row_sum = tape.sum(&shifted, Some(1))?;
    Ok(tape.scale(&row_sum, 0.5))
}

/// Log density of diagonal Gaussians, one row at a time.
pub fn gaussian_row_log_pdf(z: &[f64], mu: &[f64], logvar: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((&zv, &m), &lv) in z.iter().zip(mu).zip(logvar) {
        let diff = zv - m;
        acc += -0.5 * ((2.0 * PI).ln() + lv + diff * diff * (-lv).exp());
    }
    acc
}

/// Monte Carlo estimate of the per-point rate E_{z~q}[log q(z|x) − log p(z)],
/// one value per batch row. Works for any prior.
pub fn mc_rate(
    post: &GaussianPosterior,
    prior: &Prior,
    samples_per_point: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if samples_per_point == 0 {
        return Err(Error::contract("mc_rate", "need at least one sample per point"));
    }
    let (n, d) = post.mu.dims2()?;
    let mu = post.mu.data_ref();
    let logvar = post.logvar.data_ref();
    let mut rates = Vec::with_capacity(n);
    let mut z = vec![0.0; d];
    for i in 0..n {
        let m = &mu[i * d..(i + 1) * d];
        let lv = &logvar[i * d..(i + 1) * d];
        let mut acc = 0.0;
        for _ in 0..samples_per_point {
            for t in 0..d {
                z[t] = m[t] + (0.5 * lv[t]).exp() * standard_normal_draw(rng);
            }
            let log_q = gaussian_row_log_pdf(&z, m, lv);
            let log_p: f64 = z.iter().map(|&v| prior.log_pdf_1d(v)).sum();
            acc += log_q - log_p;
        }
        rates.push(acc / samples_per_point as f64);
    }
    Ok(rates)
}

// ── CDF-entropy diagnostic ───────────────────────────────────────────

/// Nonparametric estimate of KL(q(z) ‖ p(z)) from samples, via the
/// probability integral transform: apply the prior CDF per dimension,
/// histogram the result on [0,1], and return the negated differential
/// entropy estimate summed over dimensions.
///
/// Zero (up to binning bias) when the samples really come from the prior;
/// at most `dim·ln(bins)` (point mass). A monitoring quantity only.
pub fn cdf_entropy_diagnostic(prior: &Prior, z_samples: &Tensor, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::contract("cdf_entropy_diagnostic", "need at least two bins"));
    }
    let (n, d) = z_samples.dims2()?;
    if d != prior.dim {
        return Err(Error::dimension(
            "cdf_entropy_diagnostic",
            format!("prior has dim {}, samples have width {d}", prior.dim),
        ));
    }
    let u = prior.cdf(z_samples)?;
    let ud = u.data_ref();
    let mut total = 0.0;
    let mut counts = vec![0usize; bins];
    for dim in 0..d {
        counts.iter_mut().for_each(|c| *c = 0);
        for row in 0..n {
            let v = ud[row * d + dim];
            let b = ((v * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        // negated histogram entropy: Σ_b p_b · ln(p_b · bins)
        for &c in &counts {
            if c > 0 {
                let p = c as f64 / n as f64;
                total += p * (p * bins as f64).ln();
            }
        }
    }
    Ok(total)
}
