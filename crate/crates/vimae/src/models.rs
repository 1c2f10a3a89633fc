//! MLP encoder q(z|x) and decoder p(x|z).
//!
//! The encoder is either deterministic (final linear output is z) or
//! Gaussian-headed (final layer of width 2·dim(Z) split into μ ‖ logvar,
//! reparameterized to a sample). The decoder emits Bernoulli logits.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{reparameterize, sample_standard_normal, GaussianPosterior};
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncoderKind {
    Deterministic,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub latent_dim: usize,
    pub encoder_kind: EncoderKind,
    pub activation: Activation,
}

impl Architecture {
    /// Three hidden layers of 256 units, ReLU, deterministic encoder.
    pub fn new(input_dim: usize, latent_dim: usize) -> Architecture {
        Architecture {
            input_dim,
            hidden_sizes: vec![256, 256, 256],
            latent_dim,
            encoder_kind: EncoderKind::Deterministic,
            activation: Activation::Relu,
        }
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Architecture {
        self.hidden_sizes = hidden;
        self
    }

    pub fn with_encoder(mut self, kind: EncoderKind) -> Architecture {
        self.encoder_kind = kind;
        self
    }

    pub fn with_activation(mut self, act: Activation) -> Architecture {
        self.activation = act;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.latent_dim == 0 || self.hidden_sizes.contains(&0) {
            return Err(Error::contract("architecture", "all layer sizes must be positive"));
        }
        Ok(())
    }

    /// Width of the encoder's final linear layer: 2·latent for a Gaussian
    /// head (μ ‖ logvar), latent otherwise.
    pub fn encoder_out_width(&self) -> usize {
        match self.encoder_kind {
            EncoderKind::Deterministic => self.latent_dim,
            EncoderKind::Gaussian => 2 * self.latent_dim,
        }
    }

    /// (fan_in, fan_out) per encoder layer in forward order.
    fn encoder_layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim;
        for &h in &self.hidden_sizes {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.encoder_out_width()));
        dims
    }

    /// (fan_in, fan_out) per decoder layer in forward order (mirror of the
    /// encoder's hidden stack, ending in input_dim logits).
    fn decoder_layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.latent_dim;
        for &h in self.hidden_sizes.iter().rev() {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.input_dim));
        dims
    }

    /// Total parameter count: Σ layers (fan_in·fan_out + fan_out).
    pub fn param_count(&self) -> usize {
        self.encoder_layer_dims()
            .iter()
            .chain(self.decoder_layer_dims().iter())
            .map(|&(fi, fo)| fi * fo + fo)
            .sum()
    }
}

/// One affine layer: weight is fan_in×fan_out, bias length fan_out.
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
}

pub struct Model {
    pub arch: Architecture,
    pub encoder: Vec<Layer>,
    pub decoder: Vec<Layer>,
}

/// Result of one encoder pass.
pub struct Encoded {
    /// Latent codes: the final linear output (deterministic) or a
    /// reparameterized sample (Gaussian).
    pub z: Tensor,
    pub posterior: Option<GaussianPosterior>,
}

impl Model {
    /// Glorot-uniform weights in ±√(6/(fan_in+fan_out)), zero biases,
    /// deterministic per seed.
    pub fn init(arch: Architecture, seed: u64) -> Result<Model> {
        arch.validate()?;
        let mut rng = crate::seeded::rng(seed, crate::seeded::Stream::Init);
        let make = |dims: &[(usize, usize)], rng: &mut ChaCha8Rng| -> Result<Vec<Layer>> {
            dims.iter()
                .map(|&(fan_in, fan_out)| {
                    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let w: Vec<f64> =
                        (0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
                    Ok(Layer {
                        weight: Tensor::param(w, &[fan_in, fan_out])?,
                        bias: Tensor::param(vec![0.0; fan_out], &[fan_out])?,
                    })
                })
                .collect()
        };
        let encoder = make(&arch.encoder_layer_dims(), &mut rng)?;
        let decoder = make(&arch.decoder_layer_dims(), &mut rng)?;
        Ok(Model { arch, encoder, decoder })
    }

    /// Rebuild a model from flat parameter blocks in [`Model::parameters`]
    /// order (checkpoint loading).
    pub fn from_flat_params(arch: Architecture, blocks: &[Vec<f64>]) -> Result<Model> {
        arch.validate()?;
        let enc_dims = arch.encoder_layer_dims();
        let dec_dims = arch.decoder_layer_dims();
        let expected = 2 * (enc_dims.len() + dec_dims.len());
        if blocks.len() != expected {
            return Err(Error::Consistency(format!(
                "expected {expected} parameter blocks, got {}",
                blocks.len()
            )));
        }
        let mut it = blocks.iter();
        let mut take = |fan_in: usize, fan_out: usize| -> Result<Layer> {
            let w = it.next().expect("block count checked");
            let b = it.next().expect("block count checked");
            Ok(Layer {
                weight: Tensor::param(w.clone(), &[fan_in, fan_out])?,
                bias: Tensor::param(b.clone(), &[fan_out])?,
            })
        };
        let mut encoder = Vec::new();
        for (fi, fo) in enc_dims {
            encoder.push(take(fi, fo)?);
        }
        let mut decoder = Vec::new();
        for (fi, fo) in dec_dims {
            decoder.push(take(fi, fo)?);
        }
        Ok(Model { arch, encoder, decoder })
    }

    /// All parameters in fixed order: encoder layers then decoder layers,
    /// weight before bias.
    pub fn parameters(&self) -> Vec<Tensor> {
        self.encoder
            .iter()
            .chain(self.decoder.iter())
            .flat_map(|l| [l.weight.clone(), l.bias.clone()])
            .collect()
    }

    /// Parameters with stable diagnostic names.
    pub fn named_parameters(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for (i, l) in self.encoder.iter().enumerate() {
            out.push((format!("encoder.layer{i}.weight"), l.weight.clone()));
            out.push((format!("encoder.layer{i}.bias"), l.bias.clone()));
        }
        for (i, l) in self.decoder.iter().enumerate() {
            out.push((format!("decoder.layer{i}.weight"), l.weight.clone()));
            out.push((format!("decoder.layer{i}.bias"), l.bias.clone()));
        }
        out
    }

    pub fn zero_grads(&self) {
        for p in self.parameters() {
            p.zero_grad();
        }
    }

    fn activate(&self, tape: &Tape, t: &Tensor) -> Tensor {
        match self.arch.activation {
            Activation::Relu => tape.relu(t),
            Activation::Tanh => tape.tanh(t),
        }
    }

    fn affine(&self, tape: &Tape, x: &Tensor, layer: &Layer) -> Result<Tensor> {
        tape.add(&tape.matmul(x, &layer.weight)?, &layer.bias)
    }

    /// Encode a batch of inputs in [0,1]. The generator is used only by the
    /// Gaussian head (reparameterization noise); a deterministic encoder
    /// ignores it.
    pub fn encode(&self, tape: &Tape, x: &Tensor, rng: &mut ChaCha8Rng) -> Result<Encoded> {
        let (n, width) = x.dims2()?;
        if width != self.arch.input_dim {
            return Err(Error::dimension(
                "encode",
                format!("input width {width} vs architecture input_dim {}", self.arch.input_dim),
            ));
        }
        let mut h = x.clone();
        let last = self.encoder.len() - 1;
        for layer in &self.encoder[..last] {
            h = self.activate(tape, &self.affine(tape, &h, layer)?);
        }
        let out = self.affine(tape, &h, &self.encoder[last])?;
        match self.arch.encoder_kind {
            EncoderKind::Deterministic => Ok(Encoded { z: out, posterior: None }),
            EncoderKind::Gaussian => {
                let d = self.arch.latent_dim;
                let mu = tape.slice_cols(&out, 0, d)?;
                let logvar_raw = tape.slice_cols(&out, d, 2 * d)?;
                let posterior = GaussianPosterior::new(tape, mu, &logvar_raw)?;
                let eps = sample_standard_normal(&[n, d], rng);
                let z = reparameterize(tape, &posterior, &eps)?;
                Ok(Encoded { z, posterior: Some(posterior) })
            }
        }
    }

    /// Posterior mean (Gaussian) or the deterministic code: the latent used
    /// for probes, exports, and scatter plots.
    pub fn encode_mean(&self, tape: &Tape, x: &Tensor) -> Result<Tensor> {
        let mut rng = crate::seeded::rng_raw(0); // unused by the mean path
        let enc = self.encode(tape, x, &mut rng)?;
        Ok(match enc.posterior {
            Some(post) => post.mu,
            None => enc.z,
        })
    }

    /// Decode latent codes to Bernoulli logits over pixels.
    pub fn decode(&self, tape: &Tape, z: &Tensor) -> Result<Tensor> {
        let (_, width) = z.dims2()?;
        if width != self.arch.latent_dim {
            return Err(Error::dimension(
                "decode",
                format!("latent width {width} vs architecture latent_dim {}", self.arch.latent_dim),
            ));
        }
        let mut h = z.clone();
        let last = self.decoder.len() - 1;
        for layer in &self.decoder[..last] {
            h = self.activate(tape, &self.affine(tape, &h, layer)?);
        }
        self.affine(tape, &h, &self.decoder[last])
    }
}
