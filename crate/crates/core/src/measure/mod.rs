//! Measurement operators and magnitude measurements `y = |A x| + n`.
//!
//! All operators act on real signals of length `n` (a flattened HWC image)
//! and produce `m` complex values; adjoints map back to complex `n`-vectors.
//! Operators are immutable and safe to share between threads.

pub mod cdp;
pub mod dense;
pub mod tm;

use num_complex::Complex;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{ImageTensor, Shape};
use crate::scalar::Real;
use crate::seed;

pub use cdp::CdpOperator;
pub use dense::DenseOperator;
pub use tm::{load_tm, qualifying_rows, TmDataset, TmOperator};

#[derive(Clone, Debug)]
pub enum MeasurementOperator<T: Real> {
    Gaussian(DenseOperator<T>),
    Cdp(CdpOperator<T>),
    TransmissionMatrix(TmOperator<T>),
}

/// Complex Gaussian operator, entries with per-component variance `1/(2m)`.
pub fn make_gaussian<T: Real>(m: usize, n: usize, seed: u64) -> Result<MeasurementOperator<T>> {
    Ok(MeasurementOperator::Gaussian(DenseOperator::gaussian(m, n, seed)?))
}

/// Single-channel coded diffraction operator on an `h × w` grid.
pub fn make_cdp<T: Real>(
    h: usize,
    w: usize,
    num_masks: usize,
    samples_per_mask: usize,
    seed: u64,
) -> Result<MeasurementOperator<T>> {
    make_cdp_grid(Shape::new(h, w, 1), num_masks, samples_per_mask, seed)
}

/// Coded diffraction operator over every channel plane of `grid`.
pub fn make_cdp_grid<T: Real>(
    grid: Shape,
    num_masks: usize,
    samples_per_mask: usize,
    seed: u64,
) -> Result<MeasurementOperator<T>> {
    Ok(MeasurementOperator::Cdp(CdpOperator::random(
        grid,
        num_masks,
        samples_per_mask,
        seed,
    )?))
}

impl<T: Real> MeasurementOperator<T> {
    /// Measurement count `m`.
    pub fn rows(&self) -> usize {
        match self {
            MeasurementOperator::Gaussian(d) => d.rows(),
            MeasurementOperator::Cdp(c) => c.rows(),
            MeasurementOperator::TransmissionMatrix(t) => t.dense.rows(),
        }
    }

    /// Signal length `n`.
    pub fn cols(&self) -> usize {
        match self {
            MeasurementOperator::Gaussian(d) => d.cols(),
            MeasurementOperator::Cdp(c) => c.cols(),
            MeasurementOperator::TransmissionMatrix(t) => t.dense.cols(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            MeasurementOperator::Gaussian(_) => "gaussian",
            MeasurementOperator::Cdp(_) => "cdp",
            MeasurementOperator::TransmissionMatrix(_) => "tm",
        }
    }

    fn check(&self, len: usize, expect: usize, what: &str) -> Result<()> {
        if len != expect {
            return Err(Error::Dimension(format!(
                "{} operator is {}x{}: {what} has length {len}, expected {expect}",
                self.family(),
                self.rows(),
                self.cols()
            )));
        }
        Ok(())
    }

    /// `A x` for a real signal.
    pub fn apply(&self, x: &[T]) -> Result<Vec<Complex<T>>> {
        self.check(x.len(), self.cols(), "signal")?;
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.rows()];
        match self {
            MeasurementOperator::Gaussian(d) => d.apply_real(x, &mut out),
            MeasurementOperator::TransmissionMatrix(t) => t.dense.apply_real(x, &mut out),
            MeasurementOperator::Cdp(c) => {
                let xc: Vec<_> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
                c.apply_complex(&xc, &mut out)
            }
        }
        Ok(out)
    }

    /// `A x` for a complex signal.
    pub fn apply_complex(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.check(x.len(), self.cols(), "signal")?;
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.rows()];
        match self {
            MeasurementOperator::Gaussian(d) => d.apply_complex(x, &mut out),
            MeasurementOperator::TransmissionMatrix(t) => t.dense.apply_complex(x, &mut out),
            MeasurementOperator::Cdp(c) => c.apply_complex(x, &mut out),
        }
        Ok(out)
    }

    /// `Aᴴ v`.
    pub fn apply_adjoint(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.check(v.len(), self.rows(), "measurement vector")?;
        let mut out = vec![Complex::new(T::zero(), T::zero()); self.cols()];
        match self {
            MeasurementOperator::Gaussian(d) => d.adjoint(v, &mut out),
            MeasurementOperator::TransmissionMatrix(t) => t.dense.adjoint(v, &mut out),
            MeasurementOperator::Cdp(c) => c.adjoint(v, &mut out),
        }
        Ok(out)
    }

    /// `Re(Aᴴ v)`, the part needed for gradients with respect to a real signal.
    pub fn apply_adjoint_real(&self, v: &[Complex<T>]) -> Result<Vec<T>> {
        self.check(v.len(), self.rows(), "measurement vector")?;
        match self {
            MeasurementOperator::Gaussian(d) => {
                let mut out = vec![T::zero(); self.cols()];
                d.adjoint_real(v, &mut out);
                Ok(out)
            }
            MeasurementOperator::TransmissionMatrix(t) => {
                let mut out = vec![T::zero(); self.cols()];
                t.dense.adjoint_real(v, &mut out);
                Ok(out)
            }
            MeasurementOperator::Cdp(_) => Ok(self.apply_adjoint(v)?.into_iter().map(|c| c.re).collect()),
        }
    }

    /// The operator `c · A`. For `|c| = 1` every magnitude measurement is
    /// unchanged.
    pub fn scaled(&self, c: Complex<T>) -> Self {
        match self {
            MeasurementOperator::Gaussian(d) => MeasurementOperator::Gaussian(d.scaled(c)),
            MeasurementOperator::Cdp(op) => MeasurementOperator::Cdp(op.scaled(c)),
            MeasurementOperator::TransmissionMatrix(t) => MeasurementOperator::TransmissionMatrix(TmOperator {
                dense: t.dense.scaled(c),
                row_indices: t.row_indices.clone(),
                residuals: t.residuals.clone(),
            }),
        }
    }

    /// Dense matrix of the operator, built column by column from `apply`.
    /// Intended for small operators (diagnostics and tests).
    pub fn to_dense(&self) -> DenseOperator<T> {
        let (m, n) = (self.rows(), self.cols());
        let mut entries = vec![Complex::new(T::zero(), T::zero()); m * n];
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            let col = self.apply(&e).expect("length matches");
            for (i, v) in col.into_iter().enumerate() {
                entries[i * n + j] = v;
            }
            e[j] = T::zero();
        }
        DenseOperator::new(m, n, entries).expect("non-empty operator")
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMode {
    /// `σ = (percent / 100) · RMS(|A x|)`.
    #[default]
    Relative,
    /// `σ = percent / 100`, for images scaled to `[0, 1]`.
    Absolute,
}

/// Magnitude measurements. Entries are stored as drawn; additive noise may
/// leave some slightly negative.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementVector<T> {
    pub y: Vec<T>,
    pub noise_percent: f64,
    pub noise_mode: NoiseMode,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Synthesizes `y = |A x| + n` with `n ~ N(0, σ²)` i.i.d.
pub fn measure_magnitude<T: Real>(
    op: &MeasurementOperator<T>,
    x: &ImageTensor<T>,
    noise_percent: f64,
    noise_mode: NoiseMode,
    seed: u64,
) -> Result<MeasurementVector<T>> {
    if !(noise_percent >= 0.0 && noise_percent.is_finite()) {
        return Err(Error::Config(format!("noise percent must be >= 0, got {noise_percent}")));
    }
    let clean: Vec<f64> = op.apply(x.as_slice())?.iter().map(|u| u.norm().to()).collect();
    let sigma = match noise_mode {
        NoiseMode::Absolute => noise_percent / 100.0,
        NoiseMode::Relative => {
            let rms = (clean.iter().map(|v| v * v).sum::<f64>() / clean.len() as f64).sqrt();
            noise_percent / 100.0 * rms
        }
    };
    let y = if sigma > 0.0 {
        let dist = Normal::new(0.0, sigma).expect("positive sigma");
        let mut rng = seed::rng(seed, &[0x0015_E000]);
        clean.iter().map(|&v| T::of(v + dist.sample(&mut rng))).collect()
    } else {
        clean.iter().map(|&v| T::of(v)).collect()
    };
    Ok(MeasurementVector {
        y,
        noise_percent,
        noise_mode,
        noise_sigma: sigma,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(a: &[Complex<f64>], b: &[Complex<f64>]) -> Complex<f64> {
        a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
    }

    #[test]
    fn zero_maps_to_zero() {
        let ops: Vec<MeasurementOperator<f64>> = vec![
            make_gaussian(5, 16, 1).unwrap(),
            make_cdp(4, 4, 2, 3, 1).unwrap(),
        ];
        for op in ops {
            assert!(op.apply(&[0.0; 16]).unwrap().iter().all(|c| c.norm() == 0.0));
            let v = vec![Complex::new(0.0, 0.0); op.rows()];
            assert!(op.apply_adjoint(&v).unwrap().iter().all(|c| c.norm() == 0.0));
        }
    }

    #[test]
    fn gaussian_basis_vector_picks_column() {
        let op = make_gaussian::<f64>(6, 5, 3).unwrap();
        let MeasurementOperator::Gaussian(d) = &op else { unreachable!() };
        let mut e = [0.0; 5];
        e[2] = 1.0;
        let col = op.apply(&e).unwrap();
        for i in 0..6 {
            assert_eq!(col[i], d.row(i)[2]);
        }
    }

    #[test]
    fn gaussian_adjoint_is_conjugate_transpose() {
        let op = make_gaussian::<f64>(3, 4, 8).unwrap();
        let MeasurementOperator::Gaussian(d) = &op else { unreachable!() };
        let v = [Complex::new(1.0, -2.0), Complex::new(0.5, 0.25), Complex::new(-1.0, 3.0)];
        let got = op.apply_adjoint(&v).unwrap();
        for j in 0..4 {
            let expect: Complex<f64> = (0..3).map(|i| d.row(i)[j].conj() * v[i]).sum();
            assert!((got[j] - expect).norm() < 1e-14);
        }
        let re = op.apply_adjoint_real(&v).unwrap();
        for j in 0..4 {
            assert!((re[j] - got[j].re).abs() < 1e-14);
        }
    }

    #[test]
    fn adjoint_identity_for_cdp_multichannel() {
        let op = make_cdp_grid::<f64>(Shape::new(3, 5, 2), 2, 11, 4).unwrap();
        let x: Vec<Complex<f64>> = (0..30).map(|i| Complex::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let v: Vec<Complex<f64>> = (0..22).map(|i| Complex::new((i as f64 * 1.7).cos(), (i as f64).sin())).collect();
        let lhs = dot(&op.apply_complex(&x).unwrap(), &v);
        let rhs = dot(&x, &op.apply_adjoint(&v).unwrap());
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn seeded_constructors_are_deterministic() {
        let a = make_gaussian::<f64>(7, 9, 42).unwrap().to_dense();
        let b = make_gaussian::<f64>(7, 9, 42).unwrap().to_dense();
        assert_eq!(a, b);
        let c = make_cdp::<f64>(4, 4, 2, 5, 42).unwrap().to_dense();
        let d = make_cdp::<f64>(4, 4, 2, 5, 42).unwrap().to_dense();
        assert_eq!(c, d);
    }

    #[test]
    fn constructor_errors() {
        assert!(matches!(make_gaussian::<f64>(0, 4, 0), Err(Error::Config(_))));
        assert!(matches!(make_gaussian::<f64>(4, 0, 0), Err(Error::Config(_))));
        assert!(matches!(make_cdp::<f64>(4, 4, 1, 17, 0), Err(Error::Config(_))));
        let op = make_gaussian::<f64>(3, 4, 0).unwrap();
        assert!(matches!(op.apply(&[0.0; 5]), Err(Error::Dimension(_))));
        assert!(matches!(op.apply_adjoint(&[Complex::new(0.0, 0.0); 4]), Err(Error::Dimension(_))));
    }

    #[test]
    fn noiseless_measurement_is_exact_magnitude() {
        let op = make_gaussian::<f64>(10, 4, 1).unwrap();
        let x = ImageTensor::new(Shape::new(2, 2, 1), vec![0.1, 0.5, 0.9, 0.3]).unwrap();
        let y = measure_magnitude(&op, &x, 0.0, NoiseMode::Relative, 5).unwrap();
        let ax = op.apply(x.as_slice()).unwrap();
        for (yi, u) in y.y.iter().zip(ax) {
            assert_eq!(*yi, u.norm());
        }
        assert!(matches!(
            measure_magnitude(&op, &x, -1.0, NoiseMode::Relative, 5),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn absolute_noise_uses_literal_sigma() {
        let op = make_gaussian::<f64>(10, 4, 1).unwrap();
        let x = ImageTensor::new(Shape::new(2, 2, 1), vec![0.1, 0.5, 0.9, 0.3]).unwrap();
        let y = measure_magnitude(&op, &x, 1.0, NoiseMode::Absolute, 5).unwrap();
        assert_eq!(y.noise_sigma, 0.01);
        assert_eq!(y, measure_magnitude(&op, &x, 1.0, NoiseMode::Absolute, 5).unwrap());
        assert_ne!(y.y, measure_magnitude(&op, &x, 1.0, NoiseMode::Absolute, 6).unwrap().y);
    }
}
