//! Latent-space phase retrieval.
//!
//! The objective is `L(z) = ‖y − |A·G(z)|‖²`. With `u = A·G(z)` and
//! `r = |u| − y`, its gradient is
//!
//! ```text
//! ∇L(z) = 2 · J_G(z)ᵀ · Re(Aᴴ (r ⊙ u/|u|))
//! ```
//!
//! where `u_i/|u_i|` is taken as 0 when `u_i = 0`.
//!
//! [`solve`] runs `R` independent fixed-step descent chains from random latent
//! draws and keeps the chain with the smallest final residual. Restarts run on
//! the rayon pool; each owns its RNG stream, seeded from `(seed, restart)`.
//!
//! The default step `η = 0.001` assumes operators normalized so that
//! `E‖A x‖² = ‖x‖²` (the Gaussian and CDP constructors in
//! [`crate::measure`]). On such operators the synthetic generators of
//! [`crate::generator::synthetic`] have latent Hessians of order 1 to 10 and
//! descend slowly at `η = 0.001`; [`SolverConfig::synthetic`] uses the
//! recommended `η = 0.05` for them.

mod objective;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{GeneratorModel, ImageTensor, LatentVector};
use crate::measure::MeasurementOperator;
use crate::scalar::Real;
use crate::seed;

pub use objective::{grad_loss, loss, Objective, PhaseRetrieval, RangeProjection};

/// Loss above which a chain is declared diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentPrior {
    #[default]
    StandardNormal,
    /// Uniform on `(−1, 1)` per coordinate.
    Uniform,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub restarts: usize,
    pub iterations: usize,
    pub step_size: f64,
    pub latent_prior: LatentPrior,
    pub seed: u64,
    /// Element type used by the harness when it instantiates model and
    /// operator. Library callers pick the type directly.
    pub precision: Precision,
    /// Loss is recorded every this many iterations (and at the end).
    pub loss_trace_stride: usize,
    /// Backtracking (Armijo) line search instead of the fixed step.
    pub line_search: bool,
    /// Stop a chain once its loss drops below this value.
    pub tolerance: Option<f64>,
}

impl Default for SolverConfig {
    /// 10 restarts of 10 000 fixed steps of size 0.001.
    fn default() -> Self {
        SolverConfig {
            restarts: 10,
            iterations: 10_000,
            step_size: 0.001,
            latent_prior: LatentPrior::StandardNormal,
            seed: 0,
            precision: Precision::F32,
            loss_trace_stride: 100,
            line_search: false,
            tolerance: None,
        }
    }
}

impl SolverConfig {
    /// Defaults with the step size recommended for the built-in synthetic
    /// generators on normalized operators.
    pub fn synthetic() -> Self {
        SolverConfig {
            step_size: 0.05,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be >= 1".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step size must be positive, got {}", self.step_size)));
        }
        if self.loss_trace_stride == 0 {
            return Err(Error::Config("loss_trace_stride must be >= 1".into()));
        }
        if let Some(t) = self.tolerance {
            if !(t >= 0.0) {
                return Err(Error::Config(format!("tolerance must be >= 0, got {t}")));
            }
        }
        Ok(())
    }
}

/// Final state of one descent chain.
#[derive(Clone, Debug, PartialEq)]
pub struct RestartResult<T> {
    pub restart: usize,
    pub z_final: LatentVector<T>,
    pub x_hat: ImageTensor<T>,
    /// Objective value at `z_final`.
    pub residual: f64,
    /// `(iteration, loss)` samples.
    pub loss_trace: Vec<(usize, f64)>,
    pub iterations_run: usize,
    /// Set when the loss became non-finite or exceeded [`DIVERGENCE_LIMIT`].
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome<T> {
    pub best_index: usize,
    /// Every restart, in restart order.
    pub all: Vec<RestartResult<T>>,
}

impl<T> SolveOutcome<T> {
    pub fn best(&self) -> &RestartResult<T> {
        &self.all[self.best_index]
    }

    pub fn into_best(mut self) -> RestartResult<T> {
        self.all.swap_remove(self.best_index)
    }
}

pub fn sample_latent<T: Real>(prior: LatentPrior, k: usize, rng: &mut impl Rng) -> Vec<T> {
    (0..k)
        .map(|_| {
            let v: f64 = match prior {
                LatentPrior::StandardNormal => StandardNormal.sample(rng),
                LatentPrior::Uniform => rng.random_range(-1.0..1.0),
            };
            T::of(v)
        })
        .collect()
}

fn diverged(loss: f64) -> bool {
    !loss.is_finite() || loss > DIVERGENCE_LIMIT
}

fn sq_norm<T: Real>(g: &[T]) -> f64 {
    g.iter().map(|v| v.to() * v.to()).sum()
}

fn step<T: Real>(z: &[T], g: &[T], eta: f64) -> Vec<T> {
    let eta = T::of(eta);
    z.iter().zip(g).map(|(&zi, &gi)| zi - eta * gi).collect()
}

/// Runs one descent chain from `z0`.
pub fn descend<T: Real, O: Objective<T> + ?Sized>(
    objective: &O,
    z0: Vec<T>,
    config: &SolverConfig,
    restart: usize,
) -> Result<RestartResult<T>> {
    let mut z = z0;
    let mut trace = Vec::new();
    let mut eta = config.step_size;
    let mut run = 0;
    let mut is_diverged = false;
    for t in 0..config.iterations {
        let (value, grad) = objective.value_and_grad(&z)?;
        if diverged(value) || grad.iter().any(|g| !g.is_finite()) {
            is_diverged = true;
            break;
        }
        if t % config.loss_trace_stride == 0 {
            trace.push((t, value));
        }
        if config.tolerance.is_some_and(|tol| value < tol) {
            break;
        }
        if config.line_search {
            let g2 = sq_norm(&grad);
            if g2 == 0.0 {
                break;
            }
            eta *= 2.0;
            let mut accepted = None;
            for _ in 0..40 {
                let cand = step(&z, &grad, eta);
                let v = objective.value(&cand)?;
                if v.is_finite() && v <= value - 1e-4 * eta * g2 {
                    accepted = Some(cand);
                    break;
                }
                eta *= 0.5;
            }
            match accepted {
                Some(c) => z = c,
                None => break,
            }
        } else {
            z = step(&z, &grad, eta);
        }
        run = t + 1;
    }
    let residual = objective.value(&z)?;
    is_diverged |= diverged(residual) || z.iter().any(|v| !v.is_finite());
    if !is_diverged && trace.last().is_none_or(|&(it, _)| it != run) {
        trace.push((run, residual));
    }
    let x_hat = if is_diverged {
        ImageTensor::zeros(objective.model().output_shape())
    } else {
        objective.model().forward(&z)?
    };
    let z_final = if is_diverged {
        LatentVector::new(vec![T::zero(); z.len()])?
    } else {
        LatentVector::new(z)?
    };
    Ok(RestartResult {
        restart,
        z_final,
        x_hat,
        residual: if is_diverged { f64::INFINITY } else { residual },
        loss_trace: trace,
        iterations_run: run,
        diverged: is_diverged,
    })
}

/// Minimizes `objective` from `config.restarts` random starts.
pub fn minimize<T: Real, O: Objective<T>>(objective: &O, config: &SolverConfig) -> Result<SolveOutcome<T>> {
    config.validate()?;
    let k = objective.model().input_dim();
    let all = (0..config.restarts)
        .into_par_iter()
        .map(|j| {
            let mut rng = seed::rng(config.seed, &[0x2E57_A127, j as u64]);
            let z0 = sample_latent(config.latent_prior, k, &mut rng);
            descend(objective, z0, config, j)
        })
        .collect::<Result<Vec<_>>>()?;
    let best_index = all
        .iter()
        .filter(|r| !r.diverged)
        .min_by(|a, b| a.residual.total_cmp(&b.residual).then(a.restart.cmp(&b.restart)))
        .map(|r| r.restart)
        .ok_or(Error::SolveFailed {
            restarts: config.restarts,
        })?;
    Ok(SolveOutcome { best_index, all })
}

/// Recovers a latent code whose image best explains magnitude measurements `y`.
pub fn solve<T: Real>(
    model: &GeneratorModel<T>,
    op: &MeasurementOperator<T>,
    y: &[T],
    config: &SolverConfig,
) -> Result<SolveOutcome<T>> {
    minimize(&PhaseRetrieval::new(model, op, y)?, config)
}

/// Closest generator output to `target` in ℓ₂; `residual` is `‖G(z) − target‖²`.
pub fn project_to_range<T: Real>(
    model: &GeneratorModel<T>,
    target: &ImageTensor<T>,
    config: &SolverConfig,
) -> Result<RestartResult<T>> {
    Ok(minimize(&RangeProjection::new(model, target)?, config)?.into_best())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{Layer, Shape};
    use crate::measure::make_gaussian;

    fn linear_model() -> GeneratorModel<f64> {
        GeneratorModel::new(vec![Layer::Dense {
            input: 2,
            output: 4,
            weight: vec![1.0, 0.5, 0.0, -1.0, 0.0, 1.0, 2.0, 0.5],
            bias: vec![0.0; 4],
        }])
        .unwrap()
    }

    #[test]
    fn zero_iterations_return_initial_residual() {
        let model = linear_model();
        let op = make_gaussian::<f64>(3, 4, 1).unwrap();
        let y = vec![0.3, 0.1, 0.7];
        let cfg = SolverConfig {
            restarts: 1,
            iterations: 0,
            seed: 5,
            ..SolverConfig::default()
        };
        let out = solve(&model, &op, &y, &cfg).unwrap();
        let mut rng = seed::rng(5, &[0x2E57_A127, 0]);
        let z0: Vec<f64> = sample_latent(LatentPrior::StandardNormal, 2, &mut rng);
        assert_eq!(out.best().z_final.as_slice(), z0.as_slice());
        assert_eq!(out.best().residual, loss(&model, &op, &y, &z0).unwrap());
        assert_eq!(out.best().iterations_run, 0);
    }

    #[test]
    fn range_projection_of_zero_target_with_linear_generator() {
        let model = linear_model();
        let cfg = SolverConfig {
            restarts: 2,
            iterations: 2000,
            step_size: 0.05,
            ..SolverConfig::default()
        };
        let r = project_to_range(&model, &ImageTensor::zeros(Shape::flat(4)), &cfg).unwrap();
        assert!(r.z_final.as_slice().iter().all(|v| v.abs() < 1e-6), "{:?}", r.z_final);
    }

    #[test]
    fn all_diverged_is_solve_failed() {
        let model = linear_model();
        let op = make_gaussian::<f64>(3, 4, 1).unwrap();
        let cfg = SolverConfig {
            restarts: 3,
            iterations: 200,
            step_size: 1e6,
            ..SolverConfig::default()
        };
        let err = solve(&model, &op, &[1.0, 2.0, 3.0], &cfg).unwrap_err();
        assert!(matches!(err, Error::SolveFailed { restarts: 3 }));
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SolverConfig { restarts: 0, ..SolverConfig::default() },
            SolverConfig { step_size: 0.0, ..SolverConfig::default() },
            SolverConfig { loss_trace_stride: 0, ..SolverConfig::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn trace_respects_stride() {
        let model = linear_model();
        let op = make_gaussian::<f64>(3, 4, 1).unwrap();
        let cfg = SolverConfig {
            restarts: 1,
            iterations: 25,
            loss_trace_stride: 10,
            ..SolverConfig::default()
        };
        let out = solve(&model, &op, &[0.1, 0.2, 0.3], &cfg).unwrap();
        let its: Vec<usize> = out.best().loss_trace.iter().map(|p| p.0).collect();
        assert_eq!(its, vec![0, 10, 20, 25]);
    }
}
