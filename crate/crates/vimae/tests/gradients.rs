//! Finite-difference gradient checks for the autodiff core, the kernel
//! machinery, and full model losses.

mod common;

use common::gradcheck;
use rand::Rng;
use vimae::divergence::{gram, mmd_unbiased};
use vimae::models::{Architecture, EncoderKind, Model};
use vimae::objectives::{self, ObjectiveConfig};
use vimae::seeded::rng_raw;
use vimae::{Kernel, MmdConfig, Prior, Tape, Tensor};

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn random_param(shape: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor {
    let mut rng = rng_raw(seed);
    let n: usize = shape.iter().product();
    Tensor::param((0..n).map(|_| rng.gen_range(lo..hi)).collect(), shape).unwrap()
}

#[test]
fn composition_of_elementwise_and_reductions() {
    // mean(tanh(A·B + bias) ∘ sigmoid(clamp(C, -1, 1))) + sum over rows of
    // softplus(exp(0.5·log(A∘A + 1)))
    let a = random_param(&[3, 4], 1, -2.0, 2.0);
    let b = random_param(&[4, 2], 2, -2.0, 2.0);
    let bias = random_param(&[2], 3, -2.0, 2.0);
    let c = random_param(&[3, 2], 4, -2.0, 2.0);
    let params = [a.clone(), b.clone(), c.clone(), bias.clone()];
    let build = move || {
        let t = Tape::new();
        let h1 = t.tanh(&t.add(&t.matmul(&a, &b).unwrap(), &bias).unwrap());
        let h2 = t.sigmoid(&t.clamp(&c, -1.0, 1.0).unwrap());
        let left = t.mean(&t.mul(&h1, &h2).unwrap(), None).unwrap();
        let sq = t.add_scalar(&t.mul(&a, &a).unwrap(), 1.0);
        let right = t.sum(&t.softplus(&t.exp(&t.scale(&t.log(&sq), 0.5))), None).unwrap();
        let loss = t.add(&left, &t.scale(&right, 0.01)).unwrap();
        (t, loss)
    };
    let err = gradcheck(&params, &build, H);
    assert!(err < TOL, "max relative error {err}");
}

#[test]
fn reductions_along_axes_and_slices() {
    let a = random_param(&[4, 6], 5, -2.0, 2.0);
    let params = [a.clone()];
    let build = move || {
        let t = Tape::new();
        let left_cols = t.slice_cols(&a, 0, 3).unwrap();
        let right_cols = t.slice_cols(&a, 3, 6).unwrap();
        let col_means = t.mean(&left_cols, Some(0)).unwrap();
        let row_sums = t.sum(&right_cols, Some(1)).unwrap();
        let l1 = t.sum(&t.mul(&col_means, &col_means).unwrap(), None).unwrap();
        let l2 = t.mean(&t.relu(&row_sums), None).unwrap();
        let loss = t.add(&l1, &l2).unwrap();
        (t, loss)
    };
    let err = gradcheck(&params, &build, H);
    assert!(err < TOL, "max relative error {err}");
}

#[test]
fn gram_matrix_gradients_both_sides() {
    for kernel in [Kernel::imq_for_latent_dim(3), Kernel::rbf(1.3)] {
        let a = random_param(&[4, 3], 7, -2.0, 2.0);
        let b = random_param(&[5, 3], 8, -2.0, 2.0);
        let params = [a.clone(), b.clone()];
        let build = move || {
            let t = Tape::new();
            let g = gram(&t, kernel, &a, &b).unwrap();
            let loss = t.mean(&t.mul(&g, &g).unwrap(), None).unwrap();
            (t, loss)
        };
        let err = gradcheck(&params, &build, H);
        assert!(err < TOL, "{kernel:?}: max relative error {err}");
    }
}

#[test]
fn mmd_gradient_with_respect_to_encoded_batch() {
    let cfg = MmdConfig::for_latent_dim(3);
    let prior = Prior::logistic_unit_var(3);
    let z = prior.sample(6, &mut rng_raw(9)).unwrap();
    let z0 = random_param(&[6, 3], 10, -2.0, 2.0);
    let params = [z0.clone()];
    let build = move || {
        let t = Tape::new();
        let m = mmd_unbiased(&t, &cfg, &z, &z0).unwrap();
        (t, m)
    };
    let err = gradcheck(&params, &build, H);
    assert!(err < TOL, "max relative error {err}");
}

#[test]
fn three_layer_mlp_reconstruction_loss() {
    // the spec-sized tiny instance: input 16, hidden [8], latent 2, batch 4
    let arch = Architecture::new(16, 2).with_hidden(vec![8]).with_encoder(EncoderKind::Gaussian);
    let model = Model::init(arch, 11).unwrap();
    let mut rng = rng_raw(12);
    let x = Tensor::new((0..4 * 16).map(|_| rng.gen_range(0.0..1.0)).collect(), &[4, 16]).unwrap();
    let objective = ObjectiveConfig::vae(Prior::standard_normal(2));
    let params = model.parameters();
    let build = move || {
        let t = Tape::new();
        let mut noise = rng_raw(13);
        let report = objectives::evaluate(&t, &model, &x, &objective, &mut noise).unwrap();
        (t, report.total)
    };
    let err = gradcheck(&params, &build, H);
    assert!(err < TOL, "max relative error {err}");
}

#[test]
fn vimae_loss_gradients_all_parameters() {
    let arch = Architecture::new(12, 3).with_hidden(vec![6, 5]);
    let model = Model::init(arch, 21).unwrap();
    let mut rng = rng_raw(22);
    let x = Tensor::new((0..3 * 12).map(|_| rng.gen_range(0.0..1.0)).collect(), &[3, 12]).unwrap();
    let objective = ObjectiveConfig::vimae(10.0, Prior::logistic_unit_var(3));
    let params = model.parameters();
    let build = move || {
        let t = Tape::new();
        let mut noise = rng_raw(23);
        let report = objectives::evaluate(&t, &model, &x, &objective, &mut noise).unwrap();
        (t, report.total)
    };
    let err = gradcheck(&params, &build, H);
    assert!(err < TOL, "max relative error {err}");
}
