//! Reference implementations shared by the oracle suites.
#![allow(dead_code)]

use std::f64::consts::TAU;

use num_complex::Complex;
use prgen::generator::ImageTensor;
use prgen::seed;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C = Complex<f64>;

pub fn randn(n: usize, master: u64) -> Vec<f64> {
    let mut rng = seed::rng(master, &[7]);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn randc(n: usize, master: u64) -> Vec<C> {
    let re = randn(n, master);
    let im = randn(n, master ^ 0xFFFF);
    re.into_iter().zip(im).map(|(a, b)| C::new(a, b)).collect()
}

pub fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Dense matrix of `J_i F D_i` stacked over masks, built entry by entry.
pub fn brute_cdp(h: usize, w: usize, masks: &[Vec<C>], sels: &[Vec<usize>]) -> Vec<Vec<C>> {
    let n = h * w;
    let mut rows = Vec::new();
    for (mask, sel) in masks.iter().zip(sels) {
        for &j in sel {
            let (ky, kx) = (j / w, j % w);
            rows.push(
                (0..n)
                    .map(|p| {
                        let (y, x) = (p / w, p % w);
                        let phase = -TAU * ((ky * y) as f64 / h as f64 + (kx * x) as f64 / w as f64);
                        C::from_polar(1.0 / (n as f64).sqrt(), phase) * mask[p]
                    })
                    .collect(),
            );
        }
    }
    rows
}

/// 11×11 Gaussian window with σ = 1.5, normalized to unit sum.
pub fn gaussian_weights() -> Vec<Vec<f64>> {
    let g: Vec<f64> = (-5..=5).map(|i: i32| (-(i * i) as f64 / 4.5).exp()).collect();
    let s: f64 = g.iter().sum();
    g.iter().map(|a| g.iter().map(|b| a * b / (s * s)).collect()).collect()
}

/// Centered two-pass SSIM over every valid window position.
pub fn ssim_oracle(a: &ImageTensor<f64>, b: &ImageTensor<f64>, weights: &[Vec<f64>], peak: f64) -> f64 {
    let s = a.shape();
    let size = weights.len();
    let (c1, c2) = ((0.01 * peak) * (0.01 * peak), (0.03 * peak) * (0.03 * peak));
    let mut per_channel = Vec::new();
    for ch in 0..s.channels {
        let mut vals = Vec::new();
        for y0 in 0..=s.height - size {
            for x0 in 0..=s.width - size {
                let taps: Vec<(f64, f64, f64)> = (0..size)
                    .flat_map(|dy| (0..size).map(move |dx| (dy, dx)))
                    .map(|(dy, dx)| (weights[dy][dx], a.get(y0 + dy, x0 + dx, ch), b.get(y0 + dy, x0 + dx, ch)))
                    .collect();
                let mu_a: f64 = taps.iter().map(|t| t.0 * t.1).sum();
                let mu_b: f64 = taps.iter().map(|t| t.0 * t.2).sum();
                let var_a: f64 = taps.iter().map(|t| t.0 * (t.1 - mu_a).powi(2)).sum();
                let var_b: f64 = taps.iter().map(|t| t.0 * (t.2 - mu_b).powi(2)).sum();
                let cov: f64 = taps.iter().map(|t| t.0 * (t.1 - mu_a) * (t.2 - mu_b)).sum();
                vals.push(
                    (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
                        / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)),
                );
            }
        }
        per_channel.push(vals.iter().sum::<f64>() / vals.len() as f64);
    }
    per_channel.iter().sum::<f64>() / per_channel.len() as f64
}

pub fn uniform_image(shape: prgen::Shape, master: u64) -> ImageTensor<f64> {
    let mut rng = seed::rng(master, &[1]);
    ImageTensor::new(shape, (0..shape.len()).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
}
