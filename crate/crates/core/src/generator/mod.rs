//! Sequential feed-forward image generators.
//!
//! A [`GeneratorModel`] is an ordered stack of [`Layer`]s mapping a latent
//! vector of length `k` to an image of shape `(height, width, channels)`.
//! Models are immutable once built; [`GeneratorModel::forward`] and
//! [`GeneratorModel::vjp`] take `&self` and may be called concurrently.
//!
//! Batch norm always runs in inference mode using the stored running
//! statistics.

pub mod layers;
pub mod prgw;
pub mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use prgw::{load_generator, manifest, read_generator, save_generator, write_generator};
pub use synthetic::{digits_generator, SyntheticArch, SyntheticSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Shape {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        Shape {
            height,
            width,
            channels,
        }
    }

    /// A flat feature vector, as produced by a dense layer.
    pub const fn flat(len: usize) -> Self {
        Shape::new(1, 1, len)
    }

    pub const fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// Generator input `z`. Entries are finite.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentVector<T>(Vec<T>);

impl<T: Real> LatentVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!("latent entry {i} is not finite")));
        }
        Ok(LatentVector(values))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<T> AsRef<[T]> for LatentVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

/// An image in HWC row-major order, nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Real> ImageTensor<T> {
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::Dimension(format!(
                "image of shape {shape} needs {} values, got {}",
                shape.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Dimension(format!("image entry {i} is not finite")));
        }
        Ok(ImageTensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        ImageTensor {
            shape,
            data: vec![T::zero(); shape.len()],
        }
    }

    pub(crate) fn from_raw(shape: Shape, data: Vec<T>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        ImageTensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[(y * self.shape.width + x) * self.shape.channels + c]
    }

    pub fn cast<U: Real>(&self) -> ImageTensor<U> {
        ImageTensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::of(v.to())).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Elu,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Sigmoid => 2,
            Activation::Elu => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Relu,
            1 => Activation::Tanh,
            2 => Activation::Sigmoid,
            3 => Activation::Elu,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Elu => "elu",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Same,
    Valid,
}

impl Padding {
    pub fn code(self) -> u8 {
        match self {
            Padding::Same => 0,
            Padding::Valid => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Padding::Same),
            1 => Some(Padding::Valid),
            _ => None,
        }
    }
}

/// Convolution parameters shared by conv2d and conv2d_transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv<T> {
    pub kernel: usize,
    pub stride: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub padding: Padding,
    /// `[kh][kw][cin][cout]`, row-major.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub mean: Vec<T>,
    pub var: Vec<T>,
    pub eps: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    /// `weight` is `[input][output]` row-major.
    Dense {
        input: usize,
        output: usize,
        weight: Vec<T>,
        bias: Vec<T>,
    },
    Reshape(Shape),
    Upsample2x,
    Conv2d(Conv<T>),
    Conv2dTranspose(Conv<T>),
    BatchNorm(BatchNorm<T>),
    Activation(Activation),
}

impl<T: Real> Layer<T> {
    pub fn kind_code(&self) -> u8 {
        match self {
            Layer::Dense { .. } => 0,
            Layer::Reshape(_) => 1,
            Layer::Upsample2x => 2,
            Layer::Conv2d(_) => 3,
            Layer::Conv2dTranspose(_) => 4,
            Layer::BatchNorm(_) => 5,
            Layer::Activation(_) => 6,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Dense { .. } => "dense",
            Layer::Reshape(_) => "reshape",
            Layer::Upsample2x => "upsample2x_nearest",
            Layer::Conv2d(_) => "conv2d",
            Layer::Conv2dTranspose(_) => "conv2d_transpose",
            Layer::BatchNorm(_) => "batchnorm_inference",
            Layer::Activation(_) => "activation",
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Dense { weight, bias, .. } => weight.len() + bias.len(),
            Layer::Conv2d(c) | Layer::Conv2dTranspose(c) => c.weights.len() + c.bias.len(),
            Layer::BatchNorm(bn) => 4 * bn.gamma.len() + 1,
            _ => 0,
        }
    }

    /// Shape produced from `input`, checking that the layer accepts it and
    /// that its weight arrays have the declared sizes.
    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let invalid = |msg: String| Err(Error::ModelValidation(msg));
        match self {
            Layer::Dense {
                input: n_in,
                output,
                weight,
                bias,
            } => {
                if input.len() != *n_in {
                    return invalid(format!("dense expects {n_in} inputs, previous layer yields {input}"));
                }
                if weight.len() != n_in * output || bias.len() != *output {
                    return invalid(format!(
                        "dense {n_in}->{output}: weight len {} bias len {}",
                        weight.len(),
                        bias.len()
                    ));
                }
                Ok(Shape::flat(*output))
            }
            Layer::Reshape(target) => {
                if target.len() != input.len() {
                    return invalid(format!("reshape {input} -> {target} changes element count"));
                }
                Ok(*target)
            }
            Layer::Upsample2x => Ok(Shape::new(2 * input.height, 2 * input.width, input.channels)),
            Layer::Conv2d(conv) | Layer::Conv2dTranspose(conv) => {
                if conv.kernel < 1 || conv.stride < 1 {
                    return invalid(format!("conv kernel {} stride {}", conv.kernel, conv.stride));
                }
                if input.channels != conv.in_channels {
                    return invalid(format!(
                        "conv expects {} input channels, previous layer yields {input}",
                        conv.in_channels
                    ));
                }
                let expect = conv.kernel * conv.kernel * conv.in_channels * conv.out_channels;
                if conv.weights.len() != expect || conv.bias.len() != conv.out_channels {
                    return invalid(format!(
                        "conv kernel array has {} values (expected {expect}), bias {} (expected {})",
                        conv.weights.len(),
                        conv.bias.len(),
                        conv.out_channels
                    ));
                }
                let (h, w) = if matches!(self, Layer::Conv2d(_)) {
                    (
                        layers::conv_geometry(input.height, conv.kernel, conv.stride, conv.padding)?.0,
                        layers::conv_geometry(input.width, conv.kernel, conv.stride, conv.padding)?.0,
                    )
                } else {
                    (
                        layers::transpose_geometry(input.height, conv.kernel, conv.stride, conv.padding).0,
                        layers::transpose_geometry(input.width, conv.kernel, conv.stride, conv.padding).0,
                    )
                };
                Ok(Shape::new(h, w, conv.out_channels))
            }
            Layer::BatchNorm(bn) => {
                let c = bn.gamma.len();
                if input.channels != c {
                    return invalid(format!("batchnorm over {c} channels, previous layer yields {input}"));
                }
                if bn.beta.len() != c || bn.mean.len() != c || bn.var.len() != c {
                    return invalid("batchnorm parameter arrays differ in length".into());
                }
                if bn.var.iter().any(|&v| v < T::zero()) {
                    return invalid("batchnorm running variance is negative".into());
                }
                if bn.eps < T::zero() || bn.var.iter().any(|&v| v + bn.eps <= T::zero()) {
                    return invalid("batchnorm variance + epsilon must be positive".into());
                }
                Ok(input)
            }
            Layer::Activation(_) => Ok(input),
        }
    }

    fn weights_finite(&self) -> bool {
        let all = |v: &[T]| v.iter().all(|x| x.is_finite());
        match self {
            Layer::Dense { weight, bias, .. } => all(weight) && all(bias),
            Layer::Conv2d(c) | Layer::Conv2dTranspose(c) => all(&c.weights) && all(&c.bias),
            Layer::BatchNorm(bn) => {
                all(&bn.gamma) && all(&bn.beta) && all(&bn.mean) && all(&bn.var) && bn.eps.is_finite()
            }
            _ => true,
        }
    }

    fn cast<U: Real>(&self) -> Layer<U> {
        let c = |v: &[T]| v.iter().map(|x| U::of(x.to())).collect::<Vec<U>>();
        let conv = |cv: &Conv<T>| Conv {
            kernel: cv.kernel,
            stride: cv.stride,
            in_channels: cv.in_channels,
            out_channels: cv.out_channels,
            padding: cv.padding,
            weights: c(&cv.weights),
            bias: c(&cv.bias),
        };
        match self {
            Layer::Dense {
                input,
                output,
                weight,
                bias,
            } => Layer::Dense {
                input: *input,
                output: *output,
                weight: c(weight),
                bias: c(bias),
            },
            Layer::Reshape(s) => Layer::Reshape(*s),
            Layer::Upsample2x => Layer::Upsample2x,
            Layer::Conv2d(cv) => Layer::Conv2d(conv(cv)),
            Layer::Conv2dTranspose(cv) => Layer::Conv2dTranspose(conv(cv)),
            Layer::BatchNorm(bn) => Layer::BatchNorm(BatchNorm {
                gamma: c(&bn.gamma),
                beta: c(&bn.beta),
                mean: c(&bn.mean),
                var: c(&bn.var),
                eps: U::of(bn.eps.to()),
            }),
            Layer::Activation(a) => Layer::Activation(*a),
        }
    }

    fn forward(&self, x: &[T], input: Shape, output: Shape, out: &mut [T]) {
        match self {
            Layer::Dense { weight, bias, .. } => layers::dense_forward(x, weight, bias, out),
            Layer::Reshape(_) => out.copy_from_slice(x),
            Layer::Upsample2x => layers::upsample_forward(x, input, out),
            Layer::Conv2d(c) => layers::conv2d_forward(c, x, input, output, out),
            Layer::Conv2dTranspose(c) => layers::conv2d_transpose_forward(c, x, input, output, out),
            Layer::BatchNorm(bn) => layers::batchnorm_forward(bn, x, out),
            Layer::Activation(a) => layers::activation_forward(*a, x, out),
        }
    }

    fn backward(&self, x: &[T], y: &[T], gout: &[T], input: Shape, output: Shape, gin: &mut [T]) {
        match self {
            Layer::Dense { weight, .. } => layers::dense_backward(gout, weight, gin),
            Layer::Reshape(_) => gin.copy_from_slice(gout),
            Layer::Upsample2x => layers::upsample_backward(gout, input, gin),
            Layer::Conv2d(c) => layers::conv2d_backward(c, gout, input, output, gin),
            Layer::Conv2dTranspose(c) => layers::conv2d_transpose_backward(c, gout, input, output, gin),
            Layer::BatchNorm(bn) => layers::batchnorm_backward(bn, gout, gin),
            Layer::Activation(a) => layers::activation_backward(*a, x, y, gout, gin),
        }
    }
}

/// A validated sequential generator `G: R^k -> R^(h·w·c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorModel<T> {
    layers: Vec<Layer<T>>,
    /// `shapes[i]` is the input shape of layer `i`; the last entry is the output.
    shapes: Vec<Shape>,
}

/// Per-layer activations from one forward pass, kept for the backward pass.
pub struct Trace<T> {
    activations: Vec<Vec<T>>,
}

impl<T: Real> Trace<T> {
    pub fn output(&self) -> &[T] {
        self.activations.last().expect("trace holds at least the input")
    }
}

impl<T: Real> GeneratorModel<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::ModelValidation("generator has no layers".into()))?;
        let mut shape = match first {
            Layer::Dense { input, .. } => Shape::flat(*input),
            Layer::Reshape(s) => Shape::flat(s.len()),
            other => {
                return Err(Error::ModelValidation(format!(
                    "first layer must be dense or reshape, got {}",
                    other.kind_name()
                )))
            }
        };
        if shape.is_empty() {
            return Err(Error::ModelValidation("latent dimension is zero".into()));
        }
        let mut shapes = vec![shape];
        for (i, layer) in layers.iter().enumerate() {
            if !layer.weights_finite() {
                return Err(Error::ModelValidation(format!(
                    "layer {i} ({}) has non-finite weights",
                    layer.kind_name()
                )));
            }
            shape = layer
                .output_shape(shape)
                .map_err(|e| Error::ModelValidation(format!("layer {i} ({}): {}", layer.kind_name(), strip(e))))?;
            shapes.push(shape);
        }
        Ok(GeneratorModel { layers, shapes })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Latent dimension `k`.
    pub fn input_dim(&self) -> usize {
        self.shapes[0].len()
    }

    pub fn output_shape(&self) -> Shape {
        *self.shapes.last().expect("validated model")
    }

    /// Input shape of each layer followed by the model output shape.
    pub fn shapes(&self) -> &[Shape] {
        &self.shapes
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn cast<U: Real>(&self) -> GeneratorModel<U> {
        GeneratorModel {
            layers: self.layers.iter().map(Layer::cast).collect(),
            shapes: self.shapes.clone(),
        }
    }

    fn check_latent(&self, z: &[T]) -> Result<()> {
        if z.len() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "latent has length {}, generator expects {}",
                z.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Forward pass keeping every intermediate activation.
    pub fn forward_traced(&self, z: &[T]) -> Result<Trace<T>> {
        self.check_latent(z)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(z.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = vec![T::zero(); self.shapes[i + 1].len()];
            layer.forward(&activations[i], self.shapes[i], self.shapes[i + 1], &mut out);
            activations.push(out);
        }
        Ok(Trace { activations })
    }

    pub fn forward<Z: AsRef<[T]> + ?Sized>(&self, z: &Z) -> Result<ImageTensor<T>> {
        let mut trace = self.forward_traced(z.as_ref())?;
        let out = trace.activations.pop().expect("non-empty trace");
        Ok(ImageTensor::from_raw(self.output_shape(), out))
    }

    /// Pulls a cotangent on the output back to the latent space through a
    /// stored trace.
    pub fn backward(&self, trace: &Trace<T>, cotangent: &[T]) -> Result<Vec<T>> {
        if cotangent.len() != self.output_shape().len() {
            return Err(Error::Dimension(format!(
                "cotangent has {} values, generator output {} has {}",
                cotangent.len(),
                self.output_shape(),
                self.output_shape().len()
            )));
        }
        let mut grad = cotangent.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let mut gin = vec![T::zero(); self.shapes[i].len()];
            layer.backward(
                &trace.activations[i],
                &trace.activations[i + 1],
                &grad,
                self.shapes[i],
                self.shapes[i + 1],
                &mut gin,
            );
            grad = gin;
        }
        Ok(grad)
    }

    /// Vector-Jacobian product `J(z)ᵀ · cotangent`.
    pub fn vjp<Z: AsRef<[T]> + ?Sized>(&self, z: &Z, cotangent: &ImageTensor<T>) -> Result<Vec<T>> {
        if cotangent.shape() != self.output_shape() {
            return Err(Error::Dimension(format!(
                "cotangent shape {} differs from generator output {}",
                cotangent.shape(),
                self.output_shape()
            )));
        }
        let trace = self.forward_traced(z.as_ref())?;
        self.backward(&trace, cotangent.as_slice())
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::ModelValidation(m) => m,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> GeneratorModel<f64> {
        GeneratorModel::new(vec![
            Layer::Dense {
                input: 2,
                output: 4,
                weight: vec![1.0, 0.0, 2.0, 0.0, 0.0, 1.0, 0.0, -1.0],
                bias: vec![0.0; 4],
            },
            Layer::Activation(Activation::Tanh),
            Layer::Reshape(Shape::new(2, 2, 1)),
        ])
        .unwrap()
    }

    #[test]
    fn declared_shapes_are_propagated() {
        let m = tiny();
        assert_eq!(m.input_dim(), 2);
        assert_eq!(m.output_shape(), Shape::new(2, 2, 1));
    }

    #[test]
    fn identity_dense_is_identity() {
        let m = GeneratorModel::new(vec![Layer::Dense {
            input: 2,
            output: 2,
            weight: vec![1.0, 0.0, 0.0, 1.0],
            bias: vec![0.0, 0.0],
        }])
        .unwrap();
        let out = m.forward(&[0.3, -0.7]).unwrap();
        assert_eq!(out.as_slice(), &[0.3, -0.7]);
    }

    #[test]
    fn zero_weights_yield_bias() {
        let bias = vec![0.5, -1.0, 2.0, 0.25];
        let m = GeneratorModel::new(vec![
            Layer::Dense {
                input: 3,
                output: 4,
                weight: vec![0.0; 12],
                bias: bias.clone(),
            },
            Layer::Reshape(Shape::new(2, 2, 1)),
        ])
        .unwrap();
        let out = m.forward(&[9.0, -4.0, 1e3]).unwrap();
        assert_eq!(out.as_slice(), bias.as_slice());
    }

    #[test]
    fn linear_vjp_is_transpose() {
        // G(z) = W z with W = [[1,2],[3,4],[5,6]] stored [in][out].
        let m = GeneratorModel::new(vec![Layer::Dense {
            input: 2,
            output: 3,
            weight: vec![1.0, 3.0, 5.0, 2.0, 4.0, 6.0],
            bias: vec![0.0; 3],
        }])
        .unwrap();
        let v = ImageTensor::new(Shape::flat(3), vec![1.0, -1.0, 2.0]).unwrap();
        for z in [[0.0, 0.0], [5.0, -2.0]] {
            let g = m.vjp(&z, &v).unwrap();
            assert_eq!(g, vec![1.0 - 3.0 + 10.0, 2.0 - 4.0 + 12.0]);
        }
    }

    #[test]
    fn zero_cotangent_gives_zero_gradient() {
        let m = tiny();
        let g = m.vjp(&[0.4, 0.1], &ImageTensor::zeros(m.output_shape())).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_errors() {
        let m = tiny();
        assert!(matches!(m.forward(&[1.0]), Err(Error::Dimension(_))));
        let bad = ImageTensor::<f64>::zeros(Shape::new(4, 1, 1));
        assert!(matches!(m.vjp(&[1.0, 2.0], &bad), Err(Error::Dimension(_))));
    }

    #[test]
    fn rejects_wrong_kernel_length_and_bad_chains() {
        let conv = Conv {
            kernel: 3,
            stride: 1,
            in_channels: 1,
            out_channels: 2,
            padding: Padding::Same,
            weights: vec![0.0f64; 17],
            bias: vec![0.0; 2],
        };
        let r = GeneratorModel::new(vec![
            Layer::Reshape(Shape::new(2, 2, 1)),
            Layer::Conv2d(conv),
        ]);
        assert!(matches!(r, Err(Error::ModelValidation(_))));

        let r = GeneratorModel::<f64>::new(vec![
            Layer::Reshape(Shape::new(2, 2, 1)),
            Layer::Reshape(Shape::new(3, 1, 1)),
        ]);
        assert!(matches!(r, Err(Error::ModelValidation(_))));

        let r = GeneratorModel::new(vec![Layer::Dense {
            input: 1,
            output: 1,
            weight: vec![f64::NAN],
            bias: vec![0.0],
        }]);
        assert!(matches!(r, Err(Error::ModelValidation(_))));

        let r = GeneratorModel::new(vec![
            Layer::Reshape(Shape::new(1, 1, 1)),
            Layer::BatchNorm(BatchNorm {
                gamma: vec![1.0f64],
                beta: vec![0.0],
                mean: vec![0.0],
                var: vec![-1.0],
                eps: 1e-3,
            }),
        ]);
        assert!(matches!(r, Err(Error::ModelValidation(_))));
    }

    #[test]
    fn latent_rejects_non_finite() {
        assert!(LatentVector::new(vec![0.0, f64::INFINITY]).is_err());
        assert!(LatentVector::new(vec![0.0f32, 1.0]).is_ok());
    }
}
