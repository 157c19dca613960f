//! Seeded generators with pseudo-random weights.
//!
//! These stand in for trained networks in tests, examples and desk-scale
//! experiments. Weights are drawn in `f32` so that a saved model reloads
//! bit-identically.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::{Activation, BatchNorm, Conv, GeneratorModel, Layer, Padding, Shape};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticArch {
    /// dense → bn → relu → dense → activation → reshape
    Mlp,
    /// dense → bn → relu → reshape(h/4, w/4) → [upsample → conv3 → bn → relu]
    /// → upsample → conv3 → activation
    Conv,
    /// dense → bn → relu → reshape(h/4, w/4) → conv_t(4, s2) → bn → relu
    /// → conv_t(4, s2) → activation
    Dcgan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub latent_dim: usize,
    pub output: Shape,
    pub arch: SyntheticArch,
    /// Hidden width of the MLP, or feature channels of the conv stacks.
    pub hidden: usize,
    pub output_activation: Activation,
    /// Standard deviation of the pre-activation output logits.
    pub output_gain: f32,
}

impl SyntheticSpec {
    pub fn new(latent_dim: usize, output: Shape, arch: SyntheticArch) -> Self {
        SyntheticSpec {
            latent_dim,
            output,
            arch,
            hidden: match arch {
                SyntheticArch::Mlp => 64,
                _ => 8,
            },
            output_activation: Activation::Sigmoid,
            output_gain: 1.5,
        }
    }

    pub fn build(&self, seed: u64) -> Result<GeneratorModel<f32>> {
        if self.latent_dim == 0 || self.output.is_empty() || self.hidden == 0 {
            return Err(Error::Config("synthetic generator dimensions must be positive".into()));
        }
        let mut b = Builder {
            rng: seed::rng(seed, &[0x5EED_6E4E]),
            layers: Vec::new(),
        };
        let Shape {
            height: h,
            width: w,
            channels: c,
        } = self.output;
        let k = self.latent_dim;
        match self.arch {
            SyntheticArch::Mlp => {
                b.dense(k, self.hidden, 2.0);
                b.batchnorm(self.hidden);
                b.act(Activation::Relu);
                b.dense(self.hidden, self.output.len(), 0.0);
                b.scale_last_to(self.output_gain);
                b.act(self.output_activation);
                b.layers.push(Layer::Reshape(self.output));
            }
            SyntheticArch::Conv | SyntheticArch::Dcgan => {
                if h % 4 != 0 || w % 4 != 0 {
                    return Err(Error::Config(format!(
                        "conv synthetic generators need height and width divisible by 4, got {}",
                        self.output
                    )));
                }
                let base = Shape::new(h / 4, w / 4, self.hidden);
                b.dense(k, base.len(), 2.0);
                b.batchnorm(base.len());
                b.act(Activation::Relu);
                b.layers.push(Layer::Reshape(base));
                if self.arch == SyntheticArch::Conv {
                    b.layers.push(Layer::Upsample2x);
                    b.conv(false, 3, 1, self.hidden, self.hidden, 2.0);
                    b.batchnorm(self.hidden);
                    b.act(Activation::Relu);
                    b.layers.push(Layer::Upsample2x);
                    b.conv(false, 3, 1, self.hidden, c, 0.0);
                } else {
                    b.conv(true, 4, 2, self.hidden, self.hidden, 2.0);
                    b.batchnorm(self.hidden);
                    b.act(Activation::Relu);
                    b.conv(true, 4, 2, self.hidden, c, 0.0);
                }
                b.scale_last_to(self.output_gain);
                b.act(self.output_activation);
            }
        }
        GeneratorModel::new(b.layers)
    }
}

/// The grayscale generator architecture used for 28×28 digit images: latent
/// 40 → MLP 1024 → MLP 6272 → 7×7×128 → upsample → conv 64 (5×5) →
/// upsample → conv 1 (5×5) → batch norm → tanh, with seeded weights.
pub fn digits_generator(seed: u64) -> Result<GeneratorModel<f32>> {
    let mut b = Builder {
        rng: seed::rng(seed, &[0x7AB1_E001]),
        layers: Vec::new(),
    };
    b.dense(40, 1024, 2.0);
    b.batchnorm(1024);
    b.act(Activation::Relu);
    b.dense(1024, 6272, 2.0);
    b.batchnorm(6272);
    b.act(Activation::Relu);
    b.layers.push(Layer::Reshape(Shape::new(7, 7, 128)));
    b.layers.push(Layer::Upsample2x);
    b.conv(false, 5, 1, 128, 64, 2.0);
    b.batchnorm(64);
    b.act(Activation::Relu);
    b.layers.push(Layer::Upsample2x);
    b.conv(false, 5, 1, 64, 1, 1.0);
    b.batchnorm(1);
    b.act(Activation::Tanh);
    GeneratorModel::new(b.layers)
}

struct Builder {
    rng: ChaCha8Rng,
    layers: Vec<Layer<f32>>,
}

impl Builder {
    fn normals(&mut self, n: usize, sd: f64) -> Vec<f32> {
        let dist = Normal::new(0.0, sd).expect("positive sd");
        (0..n).map(|_| dist.sample(&mut self.rng) as f32).collect()
    }

    /// Weights ~ N(0, gain/fan_in); gain 0 defers scaling to `scale_last_to`.
    fn dense(&mut self, input: usize, output: usize, gain: f64) {
        let sd = if gain > 0.0 { (gain / input as f64).sqrt() } else { (1.0 / input as f64).sqrt() };
        let weight = self.normals(input * output, sd);
        let bias = self.normals(output, 0.1);
        self.layers.push(Layer::Dense {
            input,
            output,
            weight,
            bias,
        });
    }

    fn conv(&mut self, transpose: bool, kernel: usize, stride: usize, cin: usize, cout: usize, gain: f64) {
        // Transposed convs with stride s spread each input over k²/s² taps.
        let fan_in = if transpose {
            (kernel * kernel * cin).div_ceil(stride * stride)
        } else {
            kernel * kernel * cin
        };
        let sd = (gain.max(1.0) / fan_in as f64).sqrt();
        let conv = Conv {
            kernel,
            stride,
            in_channels: cin,
            out_channels: cout,
            padding: Padding::Same,
            weights: self.normals(kernel * kernel * cin * cout, sd),
            bias: self.normals(cout, 0.1),
        };
        self.layers.push(if transpose {
            Layer::Conv2dTranspose(conv)
        } else {
            Layer::Conv2d(conv)
        });
    }

    fn batchnorm(&mut self, channels: usize) {
        let u = Uniform::new(0.5f32, 1.5).expect("valid range");
        let gamma = (0..channels).map(|_| 0.8 + 0.4 * self.rng.random::<f32>()).collect();
        let beta = self.normals(channels, 0.1);
        let mean = self.normals(channels, 0.1);
        let var = (0..channels).map(|_| u.sample(&mut self.rng)).collect();
        self.layers.push(Layer::BatchNorm(BatchNorm {
            gamma,
            beta,
            mean,
            var,
            eps: 1e-3,
        }));
    }

    fn act(&mut self, a: Activation) {
        self.layers.push(Layer::Activation(a));
    }

    /// Rescales the last weighted layer so its output has roughly standard
    /// deviation `gain` for unit-variance inputs.
    fn scale_last_to(&mut self, gain: f32) {
        match self.layers.last_mut() {
            Some(Layer::Dense { weight, .. }) => weight.iter_mut().for_each(|w| *w *= gain),
            Some(Layer::Conv2d(c)) | Some(Layer::Conv2dTranspose(c)) => {
                c.weights.iter_mut().for_each(|w| *w *= gain)
            }
            _ => {}
        }
    }
}
