//! Coded diffraction patterns: `A = [J₁ F D₁; …; J_M F D_M]`.
//!
//! `D_i` is a diagonal of unit-modulus phases, `F` the unitary 2-D DFT
//! (scale `1/√(h·w)`) applied to each channel plane, and `J_i` selects a
//! subset of the Fourier coefficients. Indices refer to positions in the HWC
//! flattening of the transformed image.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex;
use rand::seq::index;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::generator::Shape;
use crate::scalar::Real;
use crate::seed;

#[derive(Clone)]
pub struct CdpOperator<T: Real> {
    grid: Shape,
    masks: Vec<Vec<Complex<T>>>,
    selections: Vec<Vec<usize>>,
    row_fwd: Arc<dyn Fft<T>>,
    col_fwd: Arc<dyn Fft<T>>,
    row_inv: Arc<dyn Fft<T>>,
    col_inv: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for CdpOperator<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CdpOperator")
            .field("grid", &self.grid)
            .field("masks", &self.masks.len())
            .field("m", &self.rows())
            .finish()
    }
}

impl<T: Real> CdpOperator<T> {
    /// Builds an operator from explicit masks and selections, checking the
    /// unit-modulus and index invariants.
    pub fn new(grid: Shape, masks: Vec<Vec<Complex<T>>>, selections: Vec<Vec<usize>>) -> Result<Self> {
        let n = grid.len();
        if n == 0 {
            return Err(Error::Config("CDP grid is empty".into()));
        }
        if masks.is_empty() || masks.len() != selections.len() {
            return Err(Error::Config(format!(
                "CDP needs one selection per mask, got {} masks and {} selections",
                masks.len(),
                selections.len()
            )));
        }
        let tol = if std::mem::size_of::<T>() == 8 { 1e-12 } else { 1e-6 };
        for (i, mask) in masks.iter().enumerate() {
            if mask.len() != n {
                return Err(Error::Dimension(format!("mask {i} has {} entries, grid {grid} needs {n}", mask.len())));
            }
            if mask.iter().any(|d| (d.norm().to() - 1.0).abs() > tol) {
                return Err(Error::Config(format!("mask {i} has entries off the unit circle")));
            }
        }
        for (i, sel) in selections.iter().enumerate() {
            let mut seen = vec![false; n];
            for &j in sel {
                if j >= n || std::mem::replace(&mut seen[j], true) {
                    return Err(Error::Config(format!("selection {i} has out-of-range or repeated index {j}")));
                }
            }
        }
        let mut planner = FftPlanner::new();
        Ok(CdpOperator {
            grid,
            masks,
            selections,
            row_fwd: planner.plan_fft_forward(grid.width),
            col_fwd: planner.plan_fft_forward(grid.height),
            row_inv: planner.plan_fft_inverse(grid.width),
            col_inv: planner.plan_fft_inverse(grid.height),
        })
    }

    /// Random masks with phases uniform on `[0, 2π)` and, per mask,
    /// `samples_per_mask` Fourier positions drawn without replacement.
    pub fn random(grid: Shape, num_masks: usize, samples_per_mask: usize, seed: u64) -> Result<Self> {
        let n = grid.len();
        if num_masks == 0 || samples_per_mask == 0 {
            return Err(Error::Config("CDP needs at least one mask and one sample per mask".into()));
        }
        if samples_per_mask > n {
            return Err(Error::Config(format!(
                "CDP cannot select {samples_per_mask} of {n} Fourier coefficients per mask"
            )));
        }
        let mut rng = seed::rng(seed, &[0xCD9_0000]);
        let mut masks = Vec::with_capacity(num_masks);
        let mut selections = Vec::with_capacity(num_masks);
        for _ in 0..num_masks {
            masks.push(
                (0..n)
                    .map(|_| {
                        let theta = rng.random::<f64>() * TAU;
                        Complex::new(T::of(theta.cos()), T::of(theta.sin()))
                    })
                    .collect(),
            );
            let mut sel = index::sample(&mut rng, n, samples_per_mask).into_vec();
            sel.sort_unstable();
            selections.push(sel);
        }
        CdpOperator::new(grid, masks, selections)
    }

    pub fn grid(&self) -> Shape {
        self.grid
    }

    pub fn masks(&self) -> &[Vec<Complex<T>>] {
        &self.masks
    }

    pub fn selections(&self) -> &[Vec<usize>] {
        &self.selections
    }

    pub fn rows(&self) -> usize {
        self.selections.iter().map(Vec::len).sum()
    }

    pub fn cols(&self) -> usize {
        self.grid.len()
    }

    /// In-place unitary 2-D DFT (or inverse) of every channel plane of an HWC buffer.
    fn fft2(&self, buf: &mut [Complex<T>], inverse: bool) {
        let Shape {
            height: h,
            width: w,
            channels: c,
        } = self.grid;
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        let scale = T::of(1.0 / ((h * w) as f64).sqrt());
        let zero = Complex::new(T::zero(), T::zero());
        let mut plane = vec![zero; h * w];
        let mut tposed = vec![zero; h * w];
        let mut scratch = vec![zero; row.get_inplace_scratch_len().max(col.get_inplace_scratch_len())];
        for ch in 0..c {
            for (p, v) in plane.iter_mut().zip(buf.iter().skip(ch).step_by(c)) {
                *p = *v;
            }
            row.process_with_scratch(&mut plane, &mut scratch);
            for y in 0..h {
                for x in 0..w {
                    tposed[x * h + y] = plane[y * w + x];
                }
            }
            col.process_with_scratch(&mut tposed, &mut scratch);
            for y in 0..h {
                for x in 0..w {
                    buf[(y * w + x) * c + ch] = tposed[x * h + y] * scale;
                }
            }
        }
    }

    pub(crate) fn apply_complex(&self, x: &[Complex<T>], out: &mut [Complex<T>]) {
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.cols()];
        let mut offset = 0;
        for (mask, sel) in self.masks.iter().zip(&self.selections) {
            for ((b, &d), &xv) in buf.iter_mut().zip(mask).zip(x) {
                *b = d * xv;
            }
            self.fft2(&mut buf, false);
            for (o, &j) in out[offset..offset + sel.len()].iter_mut().zip(sel) {
                *o = buf[j];
            }
            offset += sel.len();
        }
    }

    pub(crate) fn adjoint(&self, v: &[Complex<T>], out: &mut [Complex<T>]) {
        let zero = Complex::new(T::zero(), T::zero());
        out.fill(zero);
        let mut buf = vec![zero; self.cols()];
        let mut offset = 0;
        for (mask, sel) in self.masks.iter().zip(&self.selections) {
            buf.fill(zero);
            for (&j, &vi) in sel.iter().zip(&v[offset..offset + sel.len()]) {
                buf[j] = vi;
            }
            self.fft2(&mut buf, true);
            for ((o, &d), &b) in out.iter_mut().zip(mask).zip(&buf) {
                *o = *o + d.conj() * b;
            }
            offset += sel.len();
        }
    }

    pub(crate) fn scaled(&self, c: Complex<T>) -> Self {
        let mut op = self.clone();
        for mask in &mut op.masks {
            for d in mask.iter_mut() {
                *d = *d * c;
            }
        }
        op
    }
}
