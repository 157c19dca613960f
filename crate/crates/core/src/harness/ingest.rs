//! Image ingestion: decode, convert, scale to `[0, 1]`, fit to the generator
//! output shape.

use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::{ImageBuffer, Luma, Rgb};
use rand::seq::index;

use crate::error::{Error, Result};
use crate::generator::{ImageTensor, Shape};
use crate::seed;

const EXTENSIONS: &[&str] = &["png", "pgm", "ppm", "pnm", "pbm"];

/// How to pick and fit dataset images.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetSpec {
    pub dir: PathBuf,
    /// Explicit file names inside `dir`; when empty every image file is a
    /// candidate.
    pub files: Vec<String>,
    /// Maximum number of images; `None` keeps all candidates.
    pub count: Option<usize>,
    /// Sample `count` candidates with this seed instead of taking the first.
    pub sample_seed: Option<u64>,
    /// Center zero-pad images smaller than the target instead of resizing.
    pub zero_pad: bool,
}

#[derive(Clone, Debug)]
pub struct Ingested {
    /// `(file name, image)`, in lexicographic file-name order.
    pub images: Vec<(String, ImageTensor<f64>)>,
    /// Files that could not be used, with the reason.
    pub skipped: Vec<(String, String)>,
}

fn candidates(spec: &DatasetSpec) -> Result<Vec<String>> {
    let mut names: Vec<String> = if spec.files.is_empty() {
        let rd = std::fs::read_dir(&spec.dir).map_err(|e| Error::io(&spec.dir, e))?;
        rd.filter_map(|e| e.ok())
            .filter(|e| e.path().is_file())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| {
                Path::new(n)
                    .extension()
                    .and_then(|x| x.to_str())
                    .is_some_and(|x| EXTENSIONS.contains(&x.to_ascii_lowercase().as_str()))
            })
            .collect()
    } else {
        spec.files.clone()
    };
    names.sort();
    names.dedup();
    if let Some(count) = spec.count {
        if count < names.len() {
            names = match spec.sample_seed {
                Some(s) => {
                    let mut rng = seed::rng(s, &[0xDA7A_5E7]);
                    let mut picked: Vec<String> = index::sample(&mut rng, names.len(), count)
                        .into_iter()
                        .map(|i| names[i].clone())
                        .collect();
                    picked.sort();
                    picked
                }
                None => names.into_iter().take(count).collect(),
            };
        }
    }
    Ok(names)
}

/// Decodes one image file into a `[0, 1]` tensor fitted to `target`.
pub fn load_image(path: &Path, target: Shape, zero_pad: bool) -> Result<ImageTensor<f64>> {
    let img = image::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match target.channels {
        1 => img.to_luma32f().into_raw().into_iter().map(f64::from).collect(),
        3 => img.to_rgb32f().into_raw().into_iter().map(f64::from).collect(),
        c => {
            return Err(Error::Config(format!(
                "images can be ingested as 1 or 3 channels, generator produces {c}"
            )))
        }
    };
    let data = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let src = ImageTensor::new(Shape::new(h, w, target.channels), data)?;
    fit(&src, target, zero_pad)
}

/// Center-pads (when `zero_pad` and the image fits) or bilinearly resizes.
pub fn fit(src: &ImageTensor<f64>, target: Shape, zero_pad: bool) -> Result<ImageTensor<f64>> {
    let s = src.shape();
    if s.channels != target.channels {
        return Err(Error::Dimension(format!("cannot fit {s} into {target}")));
    }
    if s == target {
        return Ok(src.clone());
    }
    if zero_pad && s.height <= target.height && s.width <= target.width {
        let (oy, ox) = ((target.height - s.height) / 2, (target.width - s.width) / 2);
        let mut out = vec![0.0; target.len()];
        let c = s.channels;
        for y in 0..s.height {
            for x in 0..s.width {
                let dst = ((y + oy) * target.width + x + ox) * c;
                let from = (y * s.width + x) * c;
                out[dst..dst + c].copy_from_slice(&src.as_slice()[from..from + c]);
            }
        }
        return ImageTensor::new(target, out);
    }
    let raw: Vec<f32> = src.as_slice().iter().map(|&v| v as f32).collect();
    let (w, h) = (s.width as u32, s.height as u32);
    let (tw, th) = (target.width as u32, target.height as u32);
    let resized: Vec<f32> = if s.channels == 1 {
        let buf: ImageBuffer<Luma<f32>, _> = ImageBuffer::from_raw(w, h, raw).expect("sized buffer");
        imageops::resize(&buf, tw, th, FilterType::Triangle).into_raw()
    } else {
        let buf: ImageBuffer<Rgb<f32>, _> = ImageBuffer::from_raw(w, h, raw).expect("sized buffer");
        imageops::resize(&buf, tw, th, FilterType::Triangle).into_raw()
    };
    ImageTensor::new(target, resized.into_iter().map(|v| (v as f64).clamp(0.0, 1.0)).collect())
}

/// Loads the dataset, skipping unreadable files. Fails only when nothing is
/// usable.
pub fn ingest_images(spec: &DatasetSpec, target: Shape) -> Result<Ingested> {
    let mut images = Vec::new();
    let mut skipped = Vec::new();
    for name in candidates(spec)? {
        match load_image(&spec.dir.join(&name), target, spec.zero_pad) {
            Ok(img) => images.push((name, img)),
            Err(e) => {
                log::warn!("skipping {name}: {e}");
                skipped.push((name, e.to_string()));
            }
        }
    }
    if images.is_empty() {
        return Err(Error::Data(format!("no usable images in {}", spec.dir.display())));
    }
    Ok(Ingested { images, skipped })
}
