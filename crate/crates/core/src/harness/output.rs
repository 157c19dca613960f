//! Bundle writers: 8-bit PNGs, raw planar dumps and JSON/CSV number formatting.

use std::path::Path;

use image::{GrayImage, RgbImage};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::generator::ImageTensor;
use crate::scalar::Real;
use crate::solver::SolveOutcome;

/// Non-finite values become the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn json_f64(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::String(csv_f64(v))
    }
}

/// Shortest round-trip decimal; non-finite values as `inf`, `-inf`, `nan`.
pub fn csv_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Tiles images (same shape) into a grid with 2-pixel gaps; missing tiles are black.
pub fn write_grid<T: Real>(rows: &[Vec<Option<&ImageTensor<T>>>], path: &Path) -> Result<()> {
    let shape = rows
        .iter()
        .flatten()
        .flatten()
        .map(|t| t.shape())
        .next()
        .ok_or_else(|| Error::Data("no images to tile".into()))?;
    let gap = 2;
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let width = cols * shape.width + cols.saturating_sub(1) * gap;
    let height = rows.len() * shape.height + rows.len().saturating_sub(1) * gap;
    let c = shape.channels;
    let mut pixels = vec![0u8; width * height * c];
    for (r, row) in rows.iter().enumerate() {
        for (col, tile) in row.iter().enumerate() {
            let Some(tile) = tile else { continue };
            let (oy, ox) = (r * (shape.height + gap), col * (shape.width + gap));
            for y in 0..shape.height {
                for x in 0..shape.width {
                    for ch in 0..c {
                        pixels[((oy + y) * width + ox + x) * c + ch] = to_u8(tile.get(y, x, ch).to());
                    }
                }
            }
        }
    }
    save_u8(pixels, width, height, c, path)
}

pub fn write_png<T: Real>(img: &ImageTensor<T>, path: &Path) -> Result<()> {
    write_grid(&[vec![Some(img)]], path)
}

fn save_u8(pixels: Vec<u8>, width: usize, height: usize, channels: usize, path: &Path) -> Result<()> {
    let (w, h) = (width as u32, height as u32);
    let res = match channels {
        1 => GrayImage::from_raw(w, h, pixels).expect("sized").save(path),
        3 => RgbImage::from_raw(w, h, pixels).expect("sized").save(path),
        c => return Err(Error::Config(format!("cannot write a {c}-channel PNG"))),
    };
    res.map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Channel-planar little-endian `f32` dump (`c` planes of `h × w`).
pub fn write_raw_planar<T: Real>(img: &ImageTensor<T>, path: &Path) -> Result<()> {
    let s = img.shape();
    let mut bytes = Vec::with_capacity(4 * s.len());
    for ch in 0..s.channels {
        for y in 0..s.height {
            for x in 0..s.width {
                bytes.extend_from_slice(&(img.get(y, x, ch).to() as f32).to_le_bytes());
            }
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json(value: &Value, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Per-restart residuals, best restart and loss traces.
pub fn outcome_json<T: Real>(outcome: &SolveOutcome<T>) -> Value {
    let restarts: Vec<Value> = outcome
        .all
        .iter()
        .map(|r| {
            json!({
                "restart": r.restart,
                "residual": json_f64(r.residual),
                "diverged": r.diverged,
                "iterations_run": r.iterations_run,
                "z_final": r.z_final.as_slice().iter().map(|v| json_f64(v.to())).collect::<Vec<_>>(),
                "loss_trace": r.loss_trace.iter().map(|&(it, l)| json!([it, json_f64(l)])).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "best_restart": outcome.best_index,
        "best_residual": json_f64(outcome.best().residual),
        "restarts": restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::Shape;

    #[test]
    fn non_finite_numbers_are_strings() {
        assert_eq!(csv_f64(f64::INFINITY), "inf");
        assert_eq!(json_f64(f64::INFINITY), Value::String("inf".into()));
        assert_eq!(csv_f64(0.1), "0.1");
        assert_eq!(json_f64(2.5), json!(2.5));
    }

    #[test]
    fn planar_dump_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.f32");
        let img = ImageTensor::new(Shape::new(1, 2, 2), vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        write_raw_planar(&img, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let vals: Vec<f32> = bytes.chunks(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        assert_eq!(vals, [1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn grid_png_dimensions() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.png");
        let img = ImageTensor::<f64>::zeros(Shape::new(4, 5, 1));
        write_grid(&[vec![Some(&img), None], vec![Some(&img), Some(&img)]], &p).unwrap();
        let back = image::open(&p).unwrap();
        assert_eq!((back.width(), back.height()), (12, 10));
    }
}
