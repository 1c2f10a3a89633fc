//! Shared test oracles, independent of the library's backward pass.

use vimae::tensor::{Tape, Tensor};

/// Central-finite-difference gradient check.
///
/// `build` must reconstruct the same loss graph from the current parameter
/// values on every call (any internal randomness fixed by seed). Returns
/// the maximum relative error over every element of every parameter, with
/// the denominator floored at 1e-3 so near-zero gradients are compared
/// absolutely.
pub fn gradcheck(params: &[Tensor], build: &dyn Fn() -> (Tape, Tensor), h: f64) -> f64 {
    for p in params {
        p.zero_grad();
    }
    let (tape, loss) = build();
    tape.backward(&loss).expect("backward on scalar loss");
    let analytic: Vec<Vec<f64>> = params.iter().map(|p| p.grad_or_zeros()).collect();

    let mut max_rel = 0.0f64;
    for (pi, p) in params.iter().enumerate() {
        for i in 0..p.numel() {
            p.update_data(|d| d[i] += h);
            let f_plus = build().1.item();
            p.update_data(|d| d[i] -= 2.0 * h);
            let f_minus = build().1.item();
            p.update_data(|d| d[i] += h);
            let fd = (f_plus - f_minus) / (2.0 * h);
            let a = analytic[pi][i];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-3);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    max_rel
}

/// O(n²) scalar-loop MMD reference (within-set averages excluding the
/// diagonal, plus the weighted cross term), written directly against the
/// kernel evaluations.
pub fn brute_force_mmd(
    kernel: vimae::Kernel,
    z: &Tensor,
    z0: &Tensor,
    cross_numerator: f64,
) -> f64 {
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
                within_z += kernel.eval(&row(&zd, l), &row(&zd, j)).unwrap();
                within_0 += kernel.eval(&row(&z0d, l), &row(&z0d, j)).unwrap();
            }
            cross += kernel.eval(&row(&zd, l), &row(&z0d, j)).unwrap();
        }
    }
    let nf = n as f64;
    within_z / (nf * (nf - 1.0)) + within_0 / (nf * (nf - 1.0)) + cross_numerator / (nf * nf) * cross
}

/// Random small autoencoder instance with a family-dependent loss, for
/// gradient checks. Returns the parameters and a rebuildable loss closure.
pub mod instances {
    use super::*;
    use rand::Rng;
    use vimae::models::{Activation, Architecture, EncoderKind, Model};
    use vimae::objectives::{self, ObjectiveConfig};
    use vimae::seeded::rng_raw;
    use vimae::{Family, Prior};

    pub struct LossInstance {
        pub model: Model,
        pub build: Box<dyn Fn(&Model) -> (Tape, Tensor)>,
    }

    pub fn random_loss_instance(index: u64) -> LossInstance {
        let mut setup = rng_raw(0xA11CE + index);
        let input_dim = setup.gen_range(4..10);
        let hidden: Vec<usize> = (0..setup.gen_range(1..3usize))
            .map(|_| setup.gen_range(3..9usize))
            .collect();
        let latent = setup.gen_range(2..4);
        let batch = setup.gen_range(2..5);
        let activation = if setup.gen::<bool>() { Activation::Relu } else { Activation::Tanh };
        let family = match index % 4 {
            0 => Family::Vae,
            1 => Family::BetaVae,
            2 => Family::InfoVae,
            _ => Family::Vimae,
        };
        let encoder = match family {
            Family::Vimae if setup.gen::<bool>() => EncoderKind::Gaussian,
            Family::Vimae => EncoderKind::Deterministic,
            _ => EncoderKind::Gaussian,
        };
        let objective = match family {
            Family::Vae => ObjectiveConfig::vae(Prior::standard_normal(latent)),
            Family::BetaVae => ObjectiveConfig::beta_vae(4.0, Prior::standard_normal(latent)),
            Family::InfoVae => ObjectiveConfig::info_vae(0.5, 7.0, Prior::standard_normal(latent)),
            Family::Vimae => ObjectiveConfig::vimae(5.0, Prior::logistic_unit_var(latent)),
        };
        let arch = Architecture::new(input_dim, latent)
            .with_hidden(hidden)
            .with_encoder(encoder)
            .with_activation(activation);
        let model = Model::init(arch, 0xBEEF + index).unwrap();
        // Fully random parameters (biases included): the default zero biases
        // can park ReLU preactivations bitwise on the kink, where a central
        // difference measures a one-sided slope.
        for p in model.parameters() {
            p.update_data(|d| d.iter_mut().for_each(|v| *v = setup.gen_range(-0.5..0.5)));
        }
        let x_data: Vec<f64> =
            (0..batch * input_dim).map(|_| setup.gen_range(0.0..1.0)).collect();
        let x = Tensor::new(x_data, &[batch, input_dim]).unwrap();
        let noise_seed = 0xD1CE + index;

        let build = Box::new(move |model: &Model| {
            let tape = Tape::new();
            let mut rng = rng_raw(noise_seed);
            let report = objectives::evaluate(&tape, model, &x, &objective, &mut rng).unwrap();
            (tape, report.total)
        });
        LossInstance { model, build }
    }
}
