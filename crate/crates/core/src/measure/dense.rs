use num_complex::Complex;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

/// A dense complex `rows × cols` matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator<T> {
    rows: usize,
    cols: usize,
    entries: Vec<Complex<T>>,
}

impl<T: Real> DenseOperator<T> {
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex<T>>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Config(format!("operator must be non-empty, got {rows}x{cols}")));
        }
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} operator needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(DenseOperator { rows, cols, entries })
    }

    /// Complex Gaussian matrix with real and imaginary parts i.i.d.
    /// `N(0, 1/(2m))`, so `E‖A x‖² = ‖x‖²` for any fixed `x`.
    pub fn gaussian(m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::Config(format!("gaussian operator needs m, n >= 1, got m={m} n={n}")));
        }
        let dist = Normal::new(0.0, (0.5 / m as f64).sqrt()).expect("positive sd");
        let mut rng = seed::rng(seed, &[0x6A55_1A4E]);
        let entries = (0..m * n)
            .map(|_| {
                let re = dist.sample(&mut rng);
                let im = dist.sample(&mut rng);
                Complex::new(T::of(re), T::of(im))
            })
            .collect();
        DenseOperator::new(m, n, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[Complex<T>] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub(crate) fn apply_real(&self, x: &[T], out: &mut [Complex<T>]) {
        for (o, row) in out.iter_mut().zip(self.entries.chunks_exact(self.cols)) {
            let mut re = T::zero();
            let mut im = T::zero();
            for (a, &xv) in row.iter().zip(x) {
                re = re + a.re * xv;
                im = im + a.im * xv;
            }
            *o = Complex::new(re, im);
        }
    }

    pub(crate) fn apply_complex(&self, x: &[Complex<T>], out: &mut [Complex<T>]) {
        for (o, row) in out.iter_mut().zip(self.entries.chunks_exact(self.cols)) {
            *o = row.iter().zip(x).fold(Complex::new(T::zero(), T::zero()), |acc, (&a, &xv)| acc + a * xv);
        }
    }

    pub(crate) fn adjoint(&self, v: &[Complex<T>], out: &mut [Complex<T>]) {
        out.fill(Complex::new(T::zero(), T::zero()));
        for (row, &vi) in self.entries.chunks_exact(self.cols).zip(v) {
            for (o, a) in out.iter_mut().zip(row) {
                *o = *o + a.conj() * vi;
            }
        }
    }

    /// `Re(Aᴴ v)` without forming the imaginary part.
    pub(crate) fn adjoint_real(&self, v: &[Complex<T>], out: &mut [T]) {
        out.fill(T::zero());
        for (row, &vi) in self.entries.chunks_exact(self.cols).zip(v) {
            for (o, a) in out.iter_mut().zip(row) {
                *o = *o + a.re * vi.re + a.im * vi.im;
            }
        }
    }

    pub(crate) fn scaled(&self, c: Complex<T>) -> Self {
        DenseOperator {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|&a| a * c).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> DenseOperator<U> {
        DenseOperator {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .map(|a| Complex::new(U::of(a.re.to()), U::of(a.im.to())))
                .collect(),
        }
    }
}
