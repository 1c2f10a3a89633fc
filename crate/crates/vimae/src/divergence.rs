//! Kernels, Gram matrices, and the unbiased MMD estimator used as the
//! latent-prior regularizer.
//!
//! The default kernel is the inverse multiquadratics k(x,y) = C/(C+‖x−y‖²)
//! with C = 2·dim(Z); its heavy tails suit leptokurtic priors such as the
//! unit-variance logistic. An RBF kernel is kept as a comparison baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    InvMultiquadratic,
    Rbf,
}

/// A positive-definite kernel with k(x,x) = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    /// C for the inverse multiquadratics, bandwidth σ for the RBF.
    pub c_or_bandwidth: f64,
}

impl Kernel {
    pub fn inverse_multiquadratic(c: f64) -> Kernel {
        Kernel { kind: KernelKind::InvMultiquadratic, c_or_bandwidth: c }
    }

    /// Inverse multiquadratics with C = 2·dim(Z).
    pub fn imq_for_latent_dim(latent_dim: usize) -> Kernel {
        Kernel::inverse_multiquadratic(2.0 * latent_dim as f64)
    }

    pub fn rbf(bandwidth: f64) -> Kernel {
        Kernel { kind: KernelKind::Rbf, c_or_bandwidth: bandwidth }
    }

    /// k(x, y) for two equal-length vectors.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::dimension(
                "kernel_eval",
                format!("vector lengths differ: {} vs {}", x.len(), y.len()),
            ));
        }
        Ok(self.eval_sqdist(sq_dist(x, y)))
    }

    #[inline]
    fn eval_sqdist(&self, d: f64) -> f64 {
        match self.kind {
            KernelKind::InvMultiquadratic => {
                let c = self.c_or_bandwidth;
                c / (c + d)
            }
            KernelKind::Rbf => {
                let s = self.c_or_bandwidth;
                (-d / (2.0 * s * s)).exp()
            }
        }
    }

    /// dk/dd at squared distance d.
    #[inline]
    fn deriv_sqdist(&self, d: f64) -> f64 {
        match self.kind {
            KernelKind::InvMultiquadratic => {
                let c = self.c_or_bandwidth;
                let denom = c + d;
                -c / (denom * denom)
            }
            KernelKind::Rbf => {
                let s = self.c_or_bandwidth;
                -self.eval_sqdist(d) / (2.0 * s * s)
            }
        }
    }
}

#[inline]
fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let diff = a - b;
        acc += diff * diff;
    }
    acc
}

/// How the cross term of the unbiased estimator is weighted.
///
/// `Standard` is the usual −2/n² u-statistic weighting, which vanishes on
/// identical sample sets. `Paper` keeps a −1/n² weighting for fidelity
/// experiments; it does not vanish on identical sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossCoefficient {
    Standard,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmdConfig {
    pub kernel: Kernel,
    pub cross_coefficient: CrossCoefficient,
}

impl MmdConfig {
    /// Default configuration: inverse multiquadratics with C = 2·dim(Z),
    /// standard cross coefficient.
    pub fn for_latent_dim(latent_dim: usize) -> MmdConfig {
        MmdConfig {
            kernel: Kernel::imq_for_latent_dim(latent_dim),
            cross_coefficient: CrossCoefficient::Standard,
        }
    }

    pub fn with_cross_coefficient(mut self, c: CrossCoefficient) -> MmdConfig {
        self.cross_coefficient = c;
        self
    }
}

/// Gram matrix G[i][j] = k(A_i, B_j), differentiable w.r.t. both inputs.
pub fn gram(tape: &Tape, kernel: Kernel, a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, da) = a.dims2()?;
    let (m, db) = b.dims2()?;
    if da != db {
        return Err(Error::dimension(
            "gram",
            format!("row widths differ: {:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    let d = da;
    let out = {
        let ad = a.data_ref();
        let bd = b.data_ref();
        let mut g = vec![0.0; n * m];
        for i in 0..n {
            let arow = &ad[i * d..(i + 1) * d];
            for j in 0..m {
                let brow = &bd[j * d..(j + 1) * d];
                g[i * m + j] = kernel.eval_sqdist(sq_dist(arow, brow));
            }
        }
        Tensor::new(g, &[n, m])?
    };
    let (ac, bc) = (a.clone(), b.clone());
    tape.record(&[a, b], &out, move |d_out, store| {
        let ad = ac.data_ref();
        let bd = bc.data_ref();
        let a_tracked = ac.tracked();
        let b_tracked = bc.tracked();
        let mut ga = vec![0.0; n * d];
        let mut gb = vec![0.0; m * d];
        for i in 0..n {
            let arow = &ad[i * d..(i + 1) * d];
            for j in 0..m {
                let brow = &bd[j * d..(j + 1) * d];
                let w = d_out[i * m + j] * kernel.deriv_sqdist(sq_dist(arow, brow)) * 2.0;
                if w == 0.0 {
                    continue;
                }
                for t in 0..d {
                    let diff = arow[t] - brow[t];
                    ga[i * d + t] += w * diff;
                    gb[j * d + t] -= w * diff;
                }
            }
        }
        if a_tracked {
            store.add(&ac, &ga);
        }
        if b_tracked {
            store.add(&bc, &gb);
        }
    });
    Ok(out)
}

/// Unbiased MMD² estimate between equal-size sample sets:
/// diagonal-excluded within-set averages plus the weighted cross term.
///
/// The cross sum is evaluated symmetrically, k(Z_l, Z0_j) + k(Z0_l, Z_j)
/// halved, so that swapping the arguments gives a bitwise-identical result
/// under the `Standard` coefficient. Differentiable w.r.t. both inputs;
/// in training `z0` is the encoded batch.
pub fn mmd_unbiased(tape: &Tape, cfg: &MmdConfig, z: &Tensor, z0: &Tensor) -> Result<Tensor> {
    let (n, d) = z.dims2()?;
    let (n0, d0) = z0.dims2()?;
    if d != d0 {
        return Err(Error::dimension(
            "mmd_unbiased",
            format!("row widths differ: {:?} vs {:?}", z.shape(), z0.shape()),
        ));
    }
    if n != n0 {
        return Err(Error::contract(
            "mmd_unbiased",
            format!("sample counts must match, got {n} and {n0}"),
        ));
    }
    if n < 2 {
        return Err(Error::contract(
            "mmd_unbiased",
            "the unbiased estimator needs at least two samples per set",
        ));
    }
    let nf = n as f64;
    let within_norm = 1.0 / (nf * (nf - 1.0));

    // within-set terms: (sum(G) − trace(G)) / (n(n−1)); the diagonal is
    // exactly 1 per entry for both kernels, so the trace is exactly n.
    let g_zz = gram(tape, cfg.kernel, z, z)?;
    let within_z = tape.scale(&tape.add_scalar(&tape.sum(&g_zz, None)?, -nf), within_norm);
    let g_00 = gram(tape, cfg.kernel, z0, z0)?;
    let within_0 = tape.scale(&tape.add_scalar(&tape.sum(&g_00, None)?, -nf), within_norm);

    // symmetrized cross sum: Σ_ij (k(Z_i, Z0_j) + k(Z0_i, Z_j)) / 2
    let g_cross = gram(tape, cfg.kernel, z, z0)?;
    let g_cross_rev = gram(tape, cfg.kernel, z0, z)?;
    let paired = tape.add(&g_cross, &g_cross_rev)?;
    let cross_sum = tape.scale(&tape.sum(&paired, None)?, 0.5);
    let coeff = match cfg.cross_coefficient {
        CrossCoefficient::Standard => -2.0 / (nf * nf),
        CrossCoefficient::Paper => -1.0 / (nf * nf),
    };
    let cross = tape.scale(&cross_sum, coeff);

    tape.add(&tape.add(&within_z, &within_0)?, &cross)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded::rng_raw;
    use rand::Rng;

    fn random_matrix(n: usize, d: usize, seed: u64) -> Tensor {
        let mut rng = rng_raw(seed);
        let data: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        Tensor::new(data, &[n, d]).unwrap()
    }

    #[test]
    fn kernel_self_similarity_is_one() {
        let k = Kernel::imq_for_latent_dim(4);
        let x = vec![0.3, -1.2, 5.0, 0.0];
        assert_eq!(k.eval(&x, &x).unwrap(), 1.0);
        let r = Kernel::rbf(1.0);
        assert_eq!(r.eval(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn imq_known_value() {
        // C = 16 (latent dim 8), squared distance 16 → 16/32 = 0.5
        let k = Kernel::imq_for_latent_dim(8);
        assert_eq!(k.c_or_bandwidth, 16.0);
        let x = vec![0.0; 8];
        let mut y = vec![0.0; 8];
        y[0] = 4.0;
        assert_eq!(k.eval(&x, &y).unwrap(), 0.5);
    }

    #[test]
    fn kernel_symmetry_on_random_pairs() {
        let k = Kernel::imq_for_latent_dim(3);
        let mut rng = rng_raw(17);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            assert_eq!(
                k.eval(&x, &y).unwrap().to_bits(),
                k.eval(&y, &x).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn kernel_dimension_mismatch() {
        let k = Kernel::imq_for_latent_dim(2);
        assert!(k.eval(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn gram_single_identical_rows() {
        let tape = Tape::new();
        let a = Tensor::new(vec![1.0, 2.0], &[1, 2]).unwrap();
        let g = gram(&tape, Kernel::imq_for_latent_dim(2), &a, &a).unwrap();
        assert_eq!(g.data(), vec![1.0]);
    }

    #[test]
    fn gram_is_symmetric_on_self() {
        let tape = Tape::new();
        let a = random_matrix(6, 3, 23);
        let g = gram(&tape, Kernel::imq_for_latent_dim(3), &a, &a).unwrap();
        let gd = g.data();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(gd[i * 6 + j].to_bits(), gd[j * 6 + i].to_bits());
            }
        }
    }

    #[test]
    fn gram_matches_per_pair_loop() {
        let tape = Tape::new();
        let k = Kernel::imq_for_latent_dim(8);
        let a = random_matrix(8, 8, 31);
        let b = random_matrix(8, 8, 32);
        let g = gram(&tape, k, &a, &b).unwrap().data();
        let ad = a.data();
        let bd = b.data();
        for i in 0..8 {
            for j in 0..8 {
                let expected = k.eval(&ad[i * 8..(i + 1) * 8], &bd[j * 8..(j + 1) * 8]).unwrap();
                assert!((g[i * 8 + j] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mmd_identical_pair_exact_values() {
        // Z = Z0 = {a, a}: every kernel value is 1.
        let tape = Tape::new();
        let a = Tensor::new(vec![0.4, -1.1, 0.4, -1.1], &[2, 2]).unwrap();
        let cfg = MmdConfig::for_latent_dim(2);
        assert_eq!(mmd_unbiased(&tape, &cfg, &a, &a).unwrap().item(), 0.0);

        let cfg_paper = cfg.with_cross_coefficient(CrossCoefficient::Paper);
        assert_eq!(mmd_unbiased(&tape, &cfg_paper, &a, &a).unwrap().item(), 1.0);
    }

    #[test]
    fn mmd_matches_brute_force_loop() {
        let cfg = MmdConfig::for_latent_dim(8);
        for seed in 0..5 {
            let z = random_matrix(16, 8, 100 + seed);
            let z0 = random_matrix(16, 8, 200 + seed);
            let tape = Tape::new();
            let fast = mmd_unbiased(&tape, &cfg, &z, &z0).unwrap().item();
            let slow = brute_force_mmd(&cfg, &z, &z0, -2.0);
            assert!((fast - slow).abs() < 1e-12, "fast {fast} vs slow {slow}");
        }
    }

    /// O(n²) scalar-loop reference, independent of the gram/tape path.
    pub(crate) fn brute_force_mmd(cfg: &MmdConfig, z: &Tensor, z0: &Tensor, cross_num: f64) -> f64 {
        let (n, d) = z.dims2().unwrap();
        let zd = z.data();
        let z0d = z0.data();
        let row = |m: &[f64], i: usize| m[i * d..(i + 1) * d].to_vec();
        let mut within_z = 0.0;
        let mut within_0 = 0.0;
        let mut cross = 0.0;
        for l in 0..n {
            for j in 0..n {
                if l != j {
                    within_z += cfg.kernel.eval(&row(&zd, l), &row(&zd, j)).unwrap();
                    within_0 += cfg.kernel.eval(&row(&z0d, l), &row(&z0d, j)).unwrap();
                }
                cross += cfg.kernel.eval(&row(&zd, l), &row(&z0d, j)).unwrap();
            }
        }
        let nf = n as f64;
        within_z / (nf * (nf - 1.0)) + within_0 / (nf * (nf - 1.0))
            + cross_num / (nf * nf) * cross
    }

    #[test]
    fn mmd_symmetry_is_bitwise_exact() {
        let cfg = MmdConfig::for_latent_dim(4);
        for seed in 0..5 {
            let z = random_matrix(12, 4, 300 + seed);
            let z0 = random_matrix(12, 4, 400 + seed);
            let tape = Tape::new();
            let ab = mmd_unbiased(&tape, &cfg, &z, &z0).unwrap().item();
            let ba = mmd_unbiased(&tape, &cfg, &z0, &z).unwrap().item();
            assert_eq!(ab.to_bits(), ba.to_bits());
        }
    }

    #[test]
    fn mmd_rejects_small_or_mismatched_sets() {
        let tape = Tape::new();
        let cfg = MmdConfig::for_latent_dim(2);
        let one = Tensor::new(vec![0.0, 0.0], &[1, 2]).unwrap();
        assert!(mmd_unbiased(&tape, &cfg, &one, &one).is_err());
        let a = random_matrix(4, 2, 1);
        let b = random_matrix(5, 2, 2);
        assert!(mmd_unbiased(&tape, &cfg, &a, &b).is_err());
    }

    #[test]
    fn mmd_null_mean_within_three_se() {
        // both sets standard normal in 8 dims: estimator mean ≈ 0
        let cfg = MmdConfig::for_latent_dim(8);
        let prior = crate::distributions::Prior::standard_normal(8);
        let mut vals = Vec::new();
        for seed in 0..50 {
            let mut rng = rng_raw(9000 + seed);
            let z = prior.sample(256, &mut rng).unwrap();
            let z0 = prior.sample(256, &mut rng).unwrap();
            let tape = Tape::new();
            vals.push(mmd_unbiased(&tape, &cfg, &z, &z0).unwrap().item());
        }
        let mean: f64 = vals.iter().sum::<f64>() / vals.len() as f64;
        let var: f64 =
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64;
        let se = (var / vals.len() as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "null mean {mean} exceeds 3·SE {se}");
    }

    #[test]
    fn mmd_power_against_shifted_distribution() {
        let cfg = MmdConfig::for_latent_dim(8);
        let prior = crate::distributions::Prior::standard_normal(8);
        // null spread for the threshold
        let mut null_vals = Vec::new();
        for seed in 0..50 {
            let mut rng = rng_raw(5000 + seed);
            let z = prior.sample(256, &mut rng).unwrap();
            let z0 = prior.sample(256, &mut rng).unwrap();
            let tape = Tape::new();
            null_vals.push(mmd_unbiased(&tape, &cfg, &z, &z0).unwrap().item());
        }
        let mean: f64 = null_vals.iter().sum::<f64>() / null_vals.len() as f64;
        let std = (null_vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
            / (null_vals.len() - 1) as f64)
            .sqrt();

        for seed in 0..50 {
            let mut rng = rng_raw(7000 + seed);
            let z = prior.sample(256, &mut rng).unwrap();
            let mut shifted = prior.sample(256, &mut rng).unwrap().data();
            for v in shifted.iter_mut() {
                *v += 2.0;
            }
            let z0 = Tensor::new(shifted, &[256, 8]).unwrap();
            let tape = Tape::new();
            let stat = mmd_unbiased(&tape, &cfg, &z, &z0).unwrap().item();
            assert!(stat > 10.0 * std, "seed {seed}: statistic {stat} below 10·null std {std}");
        }
    }

    #[test]
    fn mmd_gradient_flows_to_encoded_batch() {
        let tape = Tape::new();
        let cfg = MmdConfig::for_latent_dim(3);
        let z = random_matrix(6, 3, 77);
        let z0 = Tensor::param(random_matrix(6, 3, 78).data(), &[6, 3]).unwrap();
        let m = mmd_unbiased(&tape, &cfg, &z, &z0).unwrap();
        tape.backward(&m).unwrap();
        let g = z0.grad().unwrap();
        assert!(g.iter().any(|v| v.abs() > 1e-12));
        assert!(g.iter().all(|v| v.is_finite()));
    }
}
