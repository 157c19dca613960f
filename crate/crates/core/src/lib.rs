//! Compressive phase retrieval with a generative prior.
//!
//! An unknown image `x` is observed only through magnitudes `y = |A x| + noise`
//! of a complex linear operator `A`. When `x` lies in (or near) the range of a
//! pretrained generator `G`, it can be recovered by gradient descent on the
//! latent objective `‖y − |A·G(z)|‖²`, restarted from several random latent
//! draws with the lowest-residual chain kept.
//!
//! Layout:
//!
//! - [`generator`]: sequential feed-forward generators (dense, conv, batch
//!   norm, ...), the PRGW weight format, forward evaluation and exact
//!   vector-Jacobian products.
//! - [`measure`]: Gaussian, coded-diffraction and transmission-matrix
//!   operators with adjoints, plus noisy magnitude synthesis.
//! - [`solver`]: the latent objective, its gradient, the restart loop and
//!   range projection.
//! - [`metrics`]: PSNR, SSIM, per-pixel error and sign resolution.
//! - [`harness`]: configuration, image ingestion, sweeps, report bundles and
//!   the command-line entry point.

pub mod error;
pub mod generator;
pub mod harness;
pub mod measure;
pub mod metrics;
pub mod scalar;
pub mod seed;
pub mod solver;

pub use error::{Error, Result};
pub use generator::{
    Activation, GeneratorModel, ImageTensor, LatentVector, Layer, Padding, Shape,
};
pub use measure::{MeasurementOperator, MeasurementVector, NoiseMode};
pub use scalar::Real;
pub use solver::{LatentPrior, Precision, RestartResult, SolveOutcome, SolverConfig};
