//! A small variational autoencoder over action vectors, used as a
//! trainable, sampleable prior `p(a|x)`.
//!
//! Encoder: one hidden layer, a linear mean head and a rectified variance
//! head with a floor, `q(z|a) = N(μ(a), diag Σ(a))`. Decoder: one hidden
//! layer and a sigmoid output, `p(a|z) = N(μ(z), σ² I)` with fixed `σ²`.
//! Training ascends a single-sample reparameterized ELBO estimate with
//! plain gradient steps; gradients are derived by hand.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Lower bound added to the rectified variance head so that the KL term
/// stays finite for collapsed encoders.
pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative at pre-activation `x` (ReLU uses 0 at the kink).
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VaeArch {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    /// Fixed decoder variance `σ²`.
    pub decoder_variance: f64,
    /// Hidden-layer nonlinearity of both encoder and decoder.
    pub activation: Activation,
}

impl Default for VaeArch {
    fn default() -> Self {
        VaeArch {
            input_dim: 1,
            hidden_dim: 16,
            latent_dim: 2,
            decoder_variance: 0.01,
            activation: Activation::Relu,
        }
    }
}

impl VaeArch {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("hidden_dim", self.hidden_dim),
            ("latent_dim", self.latent_dim),
        ] {
            if v == 0 {
                return Err(Error::param(name, "must be at least 1"));
            }
        }
        if !(self.decoder_variance > 0.0) || !self.decoder_variance.is_finite() {
            return Err(Error::param("decoder_variance", "must be positive"));
        }
        Ok(())
    }
}

/// Fully connected layer, `y = W x + b` with `W` stored row-major
/// (`outputs × inputs`).
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub outputs: usize,
    pub inputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(outputs: usize, inputs: usize) -> Self {
        Dense {
            outputs,
            inputs,
            weight: vec![0.0; outputs * inputs],
            bias: vec![0.0; outputs],
        }
    }

    fn glorot<R: Rng + ?Sized>(outputs: usize, inputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let mut layer = Dense::zeros(outputs, inputs);
        for w in &mut layer.weight {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.weight
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// Accumulates `dW += g xᵀ`, `db += g` and returns `Wᵀ g`.
    fn backward(&self, x: &[f64], g: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut back = vec![0.0; self.inputs];
        for (o, &go) in g.iter().enumerate() {
            grad.bias[o] += go;
            let row = o * self.inputs;
            for (i, &xi) in x.iter().enumerate() {
                grad.weight[row + i] += go * xi;
                back[i] += self.weight[row + i] * go;
            }
        }
        back
    }

    fn add_scaled(&mut self, scale: f64, other: &Dense) {
        for (w, g) in self.weight.iter_mut().zip(&other.weight) {
            *w += scale * g;
        }
        for (b, g) in self.bias.iter_mut().zip(&other.bias) {
            *b += scale * g;
        }
    }
}

/// All weights of the autoencoder. Also used to hold gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct VaeParams {
    pub enc_hidden: Dense,
    pub enc_mu: Dense,
    pub enc_var: Dense,
    pub dec_hidden: Dense,
    pub dec_out: Dense,
}

/// A named, shaped view of one parameter array.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NamedArray<'a> {
    pub name: &'static str,
    pub shape: [usize; 2],
    pub values: &'a [f64],
}

pub const ARRAY_NAMES: [&str; 10] = [
    "encoder.hidden.weight",
    "encoder.hidden.bias",
    "encoder.mu.weight",
    "encoder.mu.bias",
    "encoder.var.weight",
    "encoder.var.bias",
    "decoder.hidden.weight",
    "decoder.hidden.bias",
    "decoder.out.weight",
    "decoder.out.bias",
];

impl VaeParams {
    pub fn zeros(arch: &VaeArch) -> Self {
        VaeParams {
            enc_hidden: Dense::zeros(arch.hidden_dim, arch.input_dim),
            enc_mu: Dense::zeros(arch.latent_dim, arch.hidden_dim),
            enc_var: Dense::zeros(arch.latent_dim, arch.hidden_dim),
            dec_hidden: Dense::zeros(arch.hidden_dim, arch.latent_dim),
            dec_out: Dense::zeros(arch.input_dim, arch.hidden_dim),
        }
    }

    fn layers(&self) -> [&Dense; 5] {
        [
            &self.enc_hidden,
            &self.enc_mu,
            &self.enc_var,
            &self.dec_hidden,
            &self.dec_out,
        ]
    }

    fn layers_mut(&mut self) -> [&mut Dense; 5] {
        [
            &mut self.enc_hidden,
            &mut self.enc_mu,
            &mut self.enc_var,
            &mut self.dec_hidden,
            &mut self.dec_out,
        ]
    }

    /// Every parameter array in a fixed order, biases shaped `[n, 1]`.
    pub fn arrays(&self) -> Vec<NamedArray<'_>> {
        let mut out = Vec::with_capacity(ARRAY_NAMES.len());
        for (i, layer) in self.layers().into_iter().enumerate() {
            out.push(NamedArray {
                name: ARRAY_NAMES[2 * i],
                shape: [layer.outputs, layer.inputs],
                values: &layer.weight,
            });
            out.push(NamedArray {
                name: ARRAY_NAMES[2 * i + 1],
                shape: [layer.outputs, 1],
                values: &layer.bias,
            });
        }
        out
    }

    /// Mutable access to the array with the given name.
    pub fn array_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        let idx = ARRAY_NAMES.iter().position(|&n| n == name)?;
        let layer = self.layers_mut().into_iter().nth(idx / 2)?;
        Some(if idx % 2 == 0 {
            &mut layer.weight
        } else {
            &mut layer.bias
        })
    }

    /// Total number of scalar parameters.
    pub fn len(&self) -> usize {
        self.layers()
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn add_scaled(&mut self, scale: f64, other: &VaeParams) {
        for (a, b) in self.layers_mut().into_iter().zip(other.layers()) {
            a.add_scaled(scale, b);
        }
    }

    fn scale(&mut self, s: f64) {
        for layer in self.layers_mut() {
            layer.weight.iter_mut().for_each(|v| *v *= s);
            layer.bias.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Batch means of the ELBO terms. The reconstruction term omits the
/// Gaussian log-normalizer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElboReport {
    pub reconstruction: f64,
    pub kl: f64,
    pub elbo: f64,
}

/// `KL(N(μ, diag var) ‖ N(0, I)) = ½ Σ (μ² + var − ln var − 1)`.
pub fn kl_to_standard_normal(mu: &[f64], var: &[f64]) -> Result<f64> {
    if mu.len() != var.len() {
        return Err(Error::Shape(format!(
            "mean has {} entries, variance {}",
            mu.len(),
            var.len()
        )));
    }
    if var.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::param("var", "variances must be positive"));
    }
    Ok(0.5
        * mu.iter()
            .zip(var)
            .map(|(&m, &v)| m * m + v - v.ln() - 1.0)
            .sum::<f64>())
}

/// Intermediate values of one forward pass, kept for backpropagation.
struct Pass {
    pre_h: Vec<f64>,
    h: Vec<f64>,
    mu: Vec<f64>,
    pre_var: Vec<f64>,
    var: Vec<f64>,
    z: Vec<f64>,
    pre_g: Vec<f64>,
    g: Vec<f64>,
    out: Vec<f64>,
    reconstruction: f64,
    kl: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VaePrior {
    pub arch: VaeArch,
    pub params: VaeParams,
    pub step_size: f64,
    pub train_steps: u64,
}

impl VaePrior {
    /// Glorot-uniform weights, zero biases except the variance head, whose
    /// bias starts at 1 so the encoder begins near the unit-variance prior.
    pub fn new<R: Rng + ?Sized>(arch: VaeArch, step_size: f64, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        check_step(step_size)?;
        let mut enc_var = Dense::glorot(arch.latent_dim, arch.hidden_dim, rng);
        enc_var.bias.iter_mut().for_each(|b| *b = 1.0);
        let params = VaeParams {
            enc_hidden: Dense::glorot(arch.hidden_dim, arch.input_dim, rng),
            enc_mu: Dense::glorot(arch.latent_dim, arch.hidden_dim, rng),
            enc_var,
            dec_hidden: Dense::glorot(arch.hidden_dim, arch.latent_dim, rng),
            dec_out: Dense::glorot(arch.input_dim, arch.hidden_dim, rng),
        };
        Ok(VaePrior {
            arch,
            params,
            step_size,
            train_steps: 0,
        })
    }

    /// All weights and biases zero.
    pub fn zeros(arch: VaeArch, step_size: f64) -> Result<Self> {
        arch.validate()?;
        check_step(step_size)?;
        Ok(VaePrior {
            params: VaeParams::zeros(&arch),
            arch,
            step_size,
            train_steps: 0,
        })
    }

    /// Encoder mean and variance for one action.
    pub fn encode(&self, action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let act = self.arch.activation;
        let h: Vec<f64> = self
            .params
            .enc_hidden
            .forward(action)
            .into_iter()
            .map(|v| act.apply(v))
            .collect();
        let mu = self.params.enc_mu.forward(&h);
        let var = self
            .params
            .enc_var
            .forward(&h)
            .into_iter()
            .map(|v| v.max(0.0) + VARIANCE_FLOOR)
            .collect();
        (mu, var)
    }

    /// Decoder mean for one latent vector, in `(0,1)^d`.
    pub fn decode(&self, z: &[f64]) -> Vec<f64> {
        let act = self.arch.activation;
        let g: Vec<f64> = self
            .params
            .dec_hidden
            .forward(z)
            .into_iter()
            .map(|v| act.apply(v))
            .collect();
        self.params
            .dec_out
            .forward(&g)
            .into_iter()
            .map(sigmoid)
            .collect()
    }

    /// Decodes `z ~ N(0, I)`.
    pub fn sample_action<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.arch.latent_dim)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        self.decode(&z)
    }

    /// Single-sample ELBO estimate averaged over the batch.
    pub fn elbo<R: Rng + ?Sized>(&self, batch: &[Vec<f64>], rng: &mut R) -> Result<ElboReport> {
        let noise = self.draw_noise(batch.len(), rng);
        self.elbo_with_noise(batch, &noise)
    }

    /// ELBO estimate with explicit reparameterization noise, one `ξ` per
    /// datum.
    pub fn elbo_with_noise(&self, batch: &[Vec<f64>], noise: &[Vec<f64>]) -> Result<ElboReport> {
        self.check_batch(batch, noise)?;
        let mut rec = 0.0;
        let mut kl = 0.0;
        for (a, xi) in batch.iter().zip(noise) {
            let pass = self.forward(a, xi);
            rec += pass.reconstruction;
            kl += pass.kl;
        }
        Ok(report(rec, kl, batch.len()))
    }

    /// ELBO estimate and its exact gradient with respect to every
    /// parameter, for fixed noise.
    pub fn gradient(
        &self,
        batch: &[Vec<f64>],
        noise: &[Vec<f64>],
    ) -> Result<(ElboReport, VaeParams)> {
        self.check_batch(batch, noise)?;
        let act = self.arch.activation;
        let inv_var = 1.0 / self.arch.decoder_variance;
        let mut grad = VaeParams::zeros(&self.arch);
        let mut rec = 0.0;
        let mut kl = 0.0;

        for (a, xi) in batch.iter().zip(noise) {
            let p = self.forward(a, xi);
            rec += p.reconstruction;
            kl += p.kl;

            // Decoder.
            let d_pre_out: Vec<f64> = a
                .iter()
                .zip(&p.out)
                .map(|(&ai, &o)| (ai - o) * inv_var * o * (1.0 - o))
                .collect();
            let d_g = self
                .params
                .dec_out
                .backward(&p.g, &d_pre_out, &mut grad.dec_out);
            let d_pre_g: Vec<f64> = d_g
                .iter()
                .zip(&p.pre_g)
                .map(|(&d, &x)| d * act.derivative(x))
                .collect();
            let d_z = self
                .params
                .dec_hidden
                .backward(&p.z, &d_pre_g, &mut grad.dec_hidden);

            // Reparameterization z = μ + sqrt(var) ξ, plus the −KL term.
            let d_mu: Vec<f64> = d_z.iter().zip(&p.mu).map(|(&dz, &m)| dz - m).collect();
            let d_pre_var: Vec<f64> = (0..self.arch.latent_dim)
                .map(|i| {
                    if p.pre_var[i] > 0.0 {
                        let v = p.var[i];
                        d_z[i] * xi[i] / (2.0 * v.sqrt()) - 0.5 * (1.0 - 1.0 / v)
                    } else {
                        0.0
                    }
                })
                .collect();

            // Encoder.
            let mut d_h = self.params.enc_mu.backward(&p.h, &d_mu, &mut grad.enc_mu);
            let d_h_var = self
                .params
                .enc_var
                .backward(&p.h, &d_pre_var, &mut grad.enc_var);
            for (d, dv) in d_h.iter_mut().zip(d_h_var) {
                *d += dv;
            }
            let d_pre_h: Vec<f64> = d_h
                .iter()
                .zip(&p.pre_h)
                .map(|(&d, &x)| d * act.derivative(x))
                .collect();
            self.params
                .enc_hidden
                .backward(a, &d_pre_h, &mut grad.enc_hidden);
        }

        grad.scale(1.0 / batch.len() as f64);
        Ok((report(rec, kl, batch.len()), grad))
    }

    /// One gradient-ascent step on a fresh single-sample ELBO estimate.
    /// Returns the estimate before the update.
    pub fn train_step<R: Rng + ?Sized>(
        &mut self,
        batch: &[Vec<f64>],
        rng: &mut R,
    ) -> Result<ElboReport> {
        let noise = self.draw_noise(batch.len(), rng);
        let (rep, grad) = self.gradient(batch, &noise)?;
        self.params.add_scaled(self.step_size, &grad);
        self.train_steps += 1;
        Ok(rep)
    }

    /// Replaces one parameter array, checking its shape.
    pub fn set_array(&mut self, name: &str, shape: [usize; 2], values: &[f64]) -> Result<()> {
        let expected = self
            .params
            .arrays()
            .into_iter()
            .find(|a| a.name == name)
            .map(|a| a.shape)
            .ok_or_else(|| Error::UnknownArray(name.into()))?;
        if expected != shape || values.len() != shape[0] * shape[1] {
            return Err(Error::Shape(format!(
                "`{name}` expects shape {}x{}, got {}x{} with {} values",
                expected[0],
                expected[1],
                shape[0],
                shape[1],
                values.len()
            )));
        }
        if let Some(dst) = self.params.array_mut(name) {
            dst.copy_from_slice(values);
        }
        Ok(())
    }

    fn draw_noise<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                (0..self.arch.latent_dim)
                    .map(|_| rng.sample(StandardNormal))
                    .collect()
            })
            .collect()
    }

    fn check_batch(&self, batch: &[Vec<f64>], noise: &[Vec<f64>]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        if noise.len() != batch.len() {
            return Err(Error::Shape(format!(
                "{} noise vectors for {} data",
                noise.len(),
                batch.len()
            )));
        }
        if batch.iter().any(|a| a.len() != self.arch.input_dim) {
            return Err(Error::Shape(format!(
                "actions must have dimension {}",
                self.arch.input_dim
            )));
        }
        if noise.iter().any(|xi| xi.len() != self.arch.latent_dim) {
            return Err(Error::Shape(format!(
                "noise vectors must have dimension {}",
                self.arch.latent_dim
            )));
        }
        Ok(())
    }

    fn forward(&self, a: &[f64], xi: &[f64]) -> Pass {
        let act = self.arch.activation;
        let pre_h = self.params.enc_hidden.forward(a);
        let h: Vec<f64> = pre_h.iter().map(|&v| act.apply(v)).collect();
        let mu = self.params.enc_mu.forward(&h);
        let pre_var = self.params.enc_var.forward(&h);
        let var: Vec<f64> = pre_var
            .iter()
            .map(|&v| v.max(0.0) + VARIANCE_FLOOR)
            .collect();
        let z: Vec<f64> = mu
            .iter()
            .zip(&var)
            .zip(xi)
            .map(|((&m, &v), &e)| m + v.sqrt() * e)
            .collect();
        let pre_g = self.params.dec_hidden.forward(&z);
        let g: Vec<f64> = pre_g.iter().map(|&v| act.apply(v)).collect();
        let out: Vec<f64> = self
            .params
            .dec_out
            .forward(&g)
            .into_iter()
            .map(sigmoid)
            .collect();
        let sq: f64 = a.iter().zip(&out).map(|(x, o)| (x - o) * (x - o)).sum();
        let reconstruction = -sq / (2.0 * self.arch.decoder_variance);
        let kl = 0.5
            * mu.iter()
                .zip(&var)
                .map(|(&m, &v)| m * m + v - v.ln() - 1.0)
                .sum::<f64>();
        Pass {
            pre_h,
            h,
            mu,
            pre_var,
            var,
            z,
            pre_g,
            g,
            out,
            reconstruction,
            kl,
        }
    }
}

fn check_step(step_size: f64) -> Result<()> {
    if !(step_size >= 0.0) || !step_size.is_finite() {
        return Err(Error::param("step_size", "must be finite and nonnegative"));
    }
    Ok(())
}

fn report(rec: f64, kl: f64, n: usize) -> ElboReport {
    let reconstruction = rec / n as f64;
    let kl = kl / n as f64;
    ElboReport {
        reconstruction,
        kl,
        elbo: reconstruction - kl,
    }
}
