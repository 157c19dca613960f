//! PRGW generator weight files.
//!
//! Little-endian binary layout:
//!
//! ```text
//! "PRGW"  u8 version=1  u32 layer_count
//! per layer:
//!   u8 kind  u8 param  u32 fields...  f32 arrays...
//!
//! kind 0 dense            param 0           fields in, out             W[in][out], b[out]
//! kind 1 reshape          param 0           fields h, w, c
//! kind 2 upsample2x       param 0           -
//! kind 3 conv2d           param padding     fields kernel, stride,     K[kh][kw][cin][cout], b[cout]
//! kind 4 conv2d_transpose param padding            cin, cout           (same as conv2d)
//! kind 5 batchnorm        param 0           fields channels            gamma, beta, mean, var, then f32 eps
//! kind 6 activation       param activation  -
//! ```
//!
//! Padding codes: 0 same, 1 valid. Activation codes: 0 relu, 1 tanh,
//! 2 sigmoid, 3 elu.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::{Activation, BatchNorm, Conv, GeneratorModel, Layer, Padding, Shape};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"PRGW";
const VERSION: u8 = 1;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated file: need {n} bytes for {what} at offset {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| Error::Format(format!("{what}: array length overflows")))?;
        let b = self.take(bytes, what)?;
        Ok(b.chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

/// Parses a PRGW byte buffer into a validated `f32` model.
pub fn read_generator(bytes: &[u8]) -> Result<GeneratorModel<f32>> {
    let mut cur = Cursor { buf: bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(Error::Format("bad magic, expected \"PRGW\"".into()));
    }
    let version = cur.u8("version")?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported PRGW version {version}")));
    }
    let count = cur.u32("layer count")?;
    let mut layers = Vec::with_capacity(count.min(1024));
    for i in 0..count {
        let kind = cur.u8("layer kind")?;
        let param = cur.u8("layer param")?;
        let layer = match kind {
            0 => {
                let input = cur.u32("dense in")?;
                let output = cur.u32("dense out")?;
                let weight = cur.f32s(input.saturating_mul(output), "dense weights")?;
                let bias = cur.f32s(output, "dense bias")?;
                Layer::Dense {
                    input,
                    output,
                    weight,
                    bias,
                }
            }
            1 => Layer::Reshape(Shape::new(cur.u32("reshape h")?, cur.u32("reshape w")?, cur.u32("reshape c")?)),
            2 => Layer::Upsample2x,
            3 | 4 => {
                let padding = Padding::from_code(param)
                    .ok_or_else(|| Error::Format(format!("layer {i}: unknown padding code {param}")))?;
                let kernel = cur.u32("conv kernel")?;
                let stride = cur.u32("conv stride")?;
                let in_channels = cur.u32("conv cin")?;
                let out_channels = cur.u32("conv cout")?;
                let n = kernel
                    .saturating_mul(kernel)
                    .saturating_mul(in_channels)
                    .saturating_mul(out_channels);
                let conv = Conv {
                    kernel,
                    stride,
                    in_channels,
                    out_channels,
                    padding,
                    weights: cur.f32s(n, "conv kernels")?,
                    bias: cur.f32s(out_channels, "conv bias")?,
                };
                if kind == 3 {
                    Layer::Conv2d(conv)
                } else {
                    Layer::Conv2dTranspose(conv)
                }
            }
            5 => {
                let c = cur.u32("batchnorm channels")?;
                let gamma = cur.f32s(c, "batchnorm gamma")?;
                let beta = cur.f32s(c, "batchnorm beta")?;
                let mean = cur.f32s(c, "batchnorm mean")?;
                let var = cur.f32s(c, "batchnorm variance")?;
                let eps = cur.f32s(1, "batchnorm epsilon")?[0];
                Layer::BatchNorm(BatchNorm {
                    gamma,
                    beta,
                    mean,
                    var,
                    eps,
                })
            }
            6 => Layer::Activation(
                Activation::from_code(param)
                    .ok_or_else(|| Error::Format(format!("layer {i}: unknown activation code {param}")))?,
            ),
            other => return Err(Error::Format(format!("layer {i}: unknown kind code {other}"))),
        };
        layers.push(layer);
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after last layer",
            bytes.len() - cur.pos
        )));
    }
    GeneratorModel::new(layers)
}

pub fn load_generator(path: impl AsRef<Path>) -> Result<GeneratorModel<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_generator(&bytes)
}

/// Serializes a model; weights are rounded to `f32`.
pub fn write_generator<T: Real>(model: &GeneratorModel<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    put_u32(&mut out, model.layers().len());
    for layer in model.layers() {
        let param = match layer {
            Layer::Conv2d(c) | Layer::Conv2dTranspose(c) => c.padding.code(),
            Layer::Activation(a) => a.code(),
            _ => 0,
        };
        out.push(layer.kind_code());
        out.push(param);
        match layer {
            Layer::Dense {
                input,
                output,
                weight,
                bias,
            } => {
                put_u32(&mut out, *input);
                put_u32(&mut out, *output);
                put_f32s(&mut out, weight);
                put_f32s(&mut out, bias);
            }
            Layer::Reshape(s) => {
                put_u32(&mut out, s.height);
                put_u32(&mut out, s.width);
                put_u32(&mut out, s.channels);
            }
            Layer::Conv2d(c) | Layer::Conv2dTranspose(c) => {
                put_u32(&mut out, c.kernel);
                put_u32(&mut out, c.stride);
                put_u32(&mut out, c.in_channels);
                put_u32(&mut out, c.out_channels);
                put_f32s(&mut out, &c.weights);
                put_f32s(&mut out, &c.bias);
            }
            Layer::BatchNorm(bn) => {
                put_u32(&mut out, bn.gamma.len());
                put_f32s(&mut out, &bn.gamma);
                put_f32s(&mut out, &bn.beta);
                put_f32s(&mut out, &bn.mean);
                put_f32s(&mut out, &bn.var);
                put_f32s(&mut out, &[bn.eps]);
            }
            Layer::Upsample2x | Layer::Activation(_) => {}
        }
    }
    out
}

pub fn save_generator<T: Real>(model: &GeneratorModel<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = write_generator(model);
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| Error::io(path, e))
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f32s<T: Real>(out: &mut Vec<u8>, vs: &[T]) {
    for v in vs {
        out.extend_from_slice(&(v.to() as f32).to_le_bytes());
    }
}

/// Plain-text layer table.
pub fn manifest<T: Real>(model: &GeneratorModel<T>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "latent_dim {}  output {}  layers {}  params {}",
        model.input_dim(),
        model.output_shape(),
        model.layers().len(),
        model.param_count()
    );
    let _ = writeln!(s, "{:>3}  {:<20} {:<28} {:>12} {:>12} {:>10}", "#", "kind", "detail", "in", "out", "params");
    for (i, layer) in model.layers().iter().enumerate() {
        let detail = match layer {
            Layer::Dense { input, output, .. } => format!("{input} -> {output}"),
            Layer::Reshape(s) => format!("to {s}"),
            Layer::Upsample2x => "nearest x2".to_string(),
            Layer::Conv2d(c) | Layer::Conv2dTranspose(c) => format!(
                "k{} s{} {}->{} {:?}",
                c.kernel, c.stride, c.in_channels, c.out_channels, c.padding
            )
            .to_lowercase(),
            Layer::BatchNorm(bn) => format!("{} ch eps {}", bn.gamma.len(), bn.eps.to() as f32),
            Layer::Activation(a) => a.name().to_string(),
        };
        let _ = writeln!(
            s,
            "{:>3}  {:<20} {:<28} {:>12} {:>12} {:>10}",
            i,
            layer.kind_name(),
            detail,
            model.shapes()[i].to_string(),
            model.shapes()[i + 1].to_string(),
            layer.param_count()
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::synthetic::{SyntheticArch, SyntheticSpec};

    #[test]
    fn roundtrip_preserves_f32_models_exactly() {
        for arch in [SyntheticArch::Mlp, SyntheticArch::Conv, SyntheticArch::Dcgan] {
            let model = SyntheticSpec::new(6, Shape::new(8, 8, 1), arch).build(3).unwrap();
            let back = read_generator(&write_generator(&model)).unwrap();
            assert_eq!(back, model);
        }
    }

    #[test]
    fn header_errors() {
        assert!(matches!(read_generator(b"PRG"), Err(Error::Format(_))));
        assert!(matches!(read_generator(b"XXXX\x01\0\0\0\0"), Err(Error::Format(_))));
        assert!(matches!(read_generator(b"PRGW\x02\0\0\0\0"), Err(Error::Format(_))));
        let mut bytes = b"PRGW\x01".to_vec();
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&[9, 0]);
        assert!(matches!(read_generator(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let model = SyntheticSpec::new(2, Shape::new(4, 4, 1), SyntheticArch::Mlp).build(1).unwrap();
        let mut bytes = write_generator(&model);
        bytes.push(0);
        assert!(matches!(read_generator(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn manifest_lists_every_layer() {
        let model = SyntheticSpec::new(4, Shape::new(8, 8, 1), SyntheticArch::Conv).build(0).unwrap();
        let text = manifest(&model);
        assert_eq!(text.lines().count(), model.layers().len() + 2);
        assert!(text.contains("conv2d"));
        assert!(text.contains("8x8x1"));
    }
}
