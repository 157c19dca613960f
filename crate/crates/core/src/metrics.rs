//! Reconstruction quality: PSNR, SSIM, per-pixel error and sign resolution.
//!
//! All metrics are computed in `f64` regardless of the image element type.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::ImageTensor;
use crate::scalar::Real;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_FALLBACK_MAX: usize = 7;

fn check_shapes<T: Real>(a: &ImageTensor<T>, b: &ImageTensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "images differ in shape: {} vs {}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Mean squared error per pixel and channel.
pub fn per_pixel_error<T: Real>(x: &ImageTensor<T>, x_hat: &ImageTensor<T>) -> Result<f64> {
    check_shapes(x, x_hat)?;
    let n = x.as_slice().len();
    let sse: f64 = x
        .as_slice()
        .iter()
        .zip(x_hat.as_slice())
        .map(|(&a, &b)| (a.to() - b.to()).powi(2))
        .sum();
    Ok(sse / n as f64)
}

/// `10·log10(peak² / MSE)`; `+∞` when the images are identical.
pub fn psnr<T: Real>(x: &ImageTensor<T>, x_hat: &ImageTensor<T>, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::Config(format!("PSNR peak must be positive, got {peak}")));
    }
    let mse = per_pixel_error(x, x_hat)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SsimWindow {
    /// 11×11 Gaussian, σ = 1.5.
    Gaussian11,
    /// Uniform `size × size`, used when the image is smaller than 11 pixels
    /// on a side.
    Uniform(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimResult {
    pub value: f64,
    pub window: SsimWindow,
}

impl SsimResult {
    pub fn fallback(&self) -> bool {
        self.window != SsimWindow::Gaussian11
    }
}

fn window_weights(window: SsimWindow) -> (usize, Vec<f64>) {
    match window {
        SsimWindow::Gaussian11 => {
            let r = (SSIM_WINDOW / 2) as f64;
            let g: Vec<f64> = (0..SSIM_WINDOW)
                .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
                .collect();
            let mut w: Vec<f64> = g.iter().flat_map(|&a| g.iter().map(move |&b| a * b)).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            (SSIM_WINDOW, w)
        }
        SsimWindow::Uniform(n) => (n, vec![1.0 / (n * n) as f64; n * n]),
    }
}

/// Single-scale SSIM with `C1 = (0.01·peak)²`, `C2 = (0.03·peak)²`, averaged
/// over all window positions inside the image and over channels.
pub fn ssim_with_peak<T: Real>(x: &ImageTensor<T>, x_hat: &ImageTensor<T>, peak: f64) -> Result<SsimResult> {
    check_shapes(x, x_hat)?;
    let shape = x.shape();
    let side = shape.height.min(shape.width);
    if side == 0 {
        return Err(Error::Dimension("SSIM of an empty image".into()));
    }
    let window = if side >= SSIM_WINDOW {
        SsimWindow::Gaussian11
    } else {
        SsimWindow::Uniform(side.min(SSIM_FALLBACK_MAX))
    };
    let (size, weights) = window_weights(window);
    let c1 = (0.01 * peak).powi(2);
    let c2 = (0.03 * peak).powi(2);
    let (a, b) = (x.as_slice(), x_hat.as_slice());
    let c = shape.channels;
    let mut total = 0.0;
    for ch in 0..c {
        let mut acc = 0.0;
        let mut count = 0usize;
        for y0 in 0..=shape.height - size {
            for x0 in 0..=shape.width - size {
                let (mut mx, mut my, mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in 0..size {
                    for dx in 0..size {
                        let wgt = weights[dy * size + dx];
                        let idx = ((y0 + dy) * shape.width + x0 + dx) * c + ch;
                        let (p, q) = (a[idx].to(), b[idx].to());
                        mx += wgt * p;
                        my += wgt * q;
                        mxx += wgt * p * p;
                        myy += wgt * q * q;
                        mxy += wgt * p * q;
                    }
                }
                let vx = mxx - mx * mx;
                let vy = myy - my * my;
                let cxy = mxy - mx * my;
                acc += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        total += acc / count as f64;
    }
    Ok(SsimResult {
        value: total / c as f64,
        window,
    })
}

/// SSIM for images scaled to `[0, 1]`.
pub fn ssim<T: Real>(x: &ImageTensor<T>, x_hat: &ImageTensor<T>) -> Result<f64> {
    Ok(ssim_with_peak(x, x_hat, 1.0)?.value)
}

/// Picks `s ∈ {+1, −1}` minimizing `‖x_ref − s·x_hat‖`; ties go to `+1`.
pub fn resolve_sign<T: Real>(x_ref: &ImageTensor<T>, x_hat: &ImageTensor<T>) -> Result<(ImageTensor<T>, i8)> {
    check_shapes(x_ref, x_hat)?;
    let (mut plus, mut minus) = (0.0, 0.0);
    for (&r, &h) in x_ref.as_slice().iter().zip(x_hat.as_slice()) {
        plus += (r.to() - h.to()).powi(2);
        minus += (r.to() + h.to()).powi(2);
    }
    if minus < plus {
        let flipped = x_hat.as_slice().iter().map(|&v| -v).collect();
        Ok((ImageTensor::new(x_hat.shape(), flipped)?, -1))
    } else {
        Ok((x_hat.clone(), 1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScoreOptions {
    pub peak: f64,
    pub resolve_sign: bool,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            peak: 1.0,
            resolve_sign: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScoreReport {
    pub psnr_db: f64,
    pub ssim: f64,
    /// Mean squared error per pixel.
    pub per_pixel_mse: f64,
    pub sign_resolved: bool,
    pub ssim_window: SsimWindow,
}

pub fn score<T: Real>(x_ref: &ImageTensor<T>, x_hat: &ImageTensor<T>, opts: ScoreOptions) -> Result<ScoreReport> {
    let (img, sign_resolved) = if opts.resolve_sign {
        let (img, s) = resolve_sign(x_ref, x_hat)?;
        (img, s < 0)
    } else {
        check_shapes(x_ref, x_hat)?;
        (x_hat.clone(), false)
    };
    let s = ssim_with_peak(x_ref, &img, opts.peak)?;
    Ok(ScoreReport {
        psnr_db: psnr(x_ref, &img, opts.peak)?,
        ssim: s.value,
        per_pixel_mse: per_pixel_error(x_ref, &img)?,
        sign_resolved,
        ssim_window: s.window,
    })
}
