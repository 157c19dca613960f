use num_complex::Complex;

use crate::error::{Error, Result};
use crate::generator::{GeneratorModel, ImageTensor};
use crate::measure::MeasurementOperator;
use crate::scalar::Real;

/// A differentiable function of the latent vector of a generator.
pub trait Objective<T: Real>: Sync {
    fn model(&self) -> &GeneratorModel<T>;
    fn value(&self, z: &[T]) -> Result<f64>;
    fn value_and_grad(&self, z: &[T]) -> Result<(f64, Vec<T>)>;
}

/// `‖y − |A·G(z)|‖²`.
pub struct PhaseRetrieval<'a, T: Real> {
    model: &'a GeneratorModel<T>,
    op: &'a MeasurementOperator<T>,
    y: &'a [T],
}

impl<'a, T: Real> PhaseRetrieval<'a, T> {
    pub fn new(model: &'a GeneratorModel<T>, op: &'a MeasurementOperator<T>, y: &'a [T]) -> Result<Self> {
        let n = model.output_shape().len();
        if op.cols() != n {
            return Err(Error::Dimension(format!(
                "generator output {} has {n} pixels but the {} operator acts on {}",
                model.output_shape(),
                op.family(),
                op.cols()
            )));
        }
        if y.len() != op.rows() {
            return Err(Error::Dimension(format!(
                "{} measurements for an operator with {} rows",
                y.len(),
                op.rows()
            )));
        }
        Ok(PhaseRetrieval { model, op, y })
    }

    fn residuals(&self, u: &[Complex<T>]) -> f64 {
        u.iter()
            .zip(self.y)
            .map(|(ui, &yi)| {
                let r = ui.norm().to() - yi.to();
                r * r
            })
            .sum()
    }
}

impl<T: Real> Objective<T> for PhaseRetrieval<'_, T> {
    fn model(&self) -> &GeneratorModel<T> {
        self.model
    }

    fn value(&self, z: &[T]) -> Result<f64> {
        let x = self.model.forward(z)?;
        Ok(self.residuals(&self.op.apply(x.as_slice())?))
    }

    fn value_and_grad(&self, z: &[T]) -> Result<(f64, Vec<T>)> {
        let trace = self.model.forward_traced(z)?;
        let u = self.op.apply(trace.output())?;
        let value = self.residuals(&u);
        let two = T::of(2.0);
        let weighted: Vec<Complex<T>> = u
            .iter()
            .zip(self.y)
            .map(|(&ui, &yi)| {
                let mag = ui.norm();
                if mag == T::zero() {
                    Complex::new(T::zero(), T::zero())
                } else {
                    ui * ((mag - yi) / mag)
                }
            })
            .collect();
        let gx: Vec<T> = self
            .op
            .apply_adjoint_real(&weighted)?
            .into_iter()
            .map(|g| g * two)
            .collect();
        Ok((value, self.model.backward(&trace, &gx)?))
    }
}

/// `‖G(z) − target‖²`.
pub struct RangeProjection<'a, T: Real> {
    model: &'a GeneratorModel<T>,
    target: &'a ImageTensor<T>,
}

impl<'a, T: Real> RangeProjection<'a, T> {
    pub fn new(model: &'a GeneratorModel<T>, target: &'a ImageTensor<T>) -> Result<Self> {
        if target.shape() != model.output_shape() {
            return Err(Error::Dimension(format!(
                "target shape {} differs from generator output {}",
                target.shape(),
                model.output_shape()
            )));
        }
        Ok(RangeProjection { model, target })
    }
}

impl<T: Real> Objective<T> for RangeProjection<'_, T> {
    fn model(&self) -> &GeneratorModel<T> {
        self.model
    }

    fn value(&self, z: &[T]) -> Result<f64> {
        let x = self.model.forward(z)?;
        Ok(x.as_slice()
            .iter()
            .zip(self.target.as_slice())
            .map(|(&a, &b)| (a.to() - b.to()).powi(2))
            .sum())
    }

    fn value_and_grad(&self, z: &[T]) -> Result<(f64, Vec<T>)> {
        let trace = self.model.forward_traced(z)?;
        let two = T::of(2.0);
        let diff: Vec<T> = trace
            .output()
            .iter()
            .zip(self.target.as_slice())
            .map(|(&a, &b)| a - b)
            .collect();
        let value = diff.iter().map(|d| d.to() * d.to()).sum();
        let cot: Vec<T> = diff.iter().map(|&d| d * two).collect();
        Ok((value, self.model.backward(&trace, &cot)?))
    }
}

/// `‖y − |A·G(z)|‖²`.
pub fn loss<T: Real>(model: &GeneratorModel<T>, op: &MeasurementOperator<T>, y: &[T], z: &[T]) -> Result<f64> {
    PhaseRetrieval::new(model, op, y)?.value(z)
}

/// Gradient of [`loss`] with respect to `z`.
pub fn grad_loss<T: Real>(model: &GeneratorModel<T>, op: &MeasurementOperator<T>, y: &[T], z: &[T]) -> Result<Vec<T>> {
    Ok(PhaseRetrieval::new(model, op, y)?.value_and_grad(z)?.1)
}
