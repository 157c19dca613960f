//! Build a seeded generator, save it as PRGW, reload it, and run a forward
//! pass and a vector-Jacobian product.
//!
//! cargo run --example forward_vjp

use prgen::generator::{load_generator, manifest, save_generator, ImageTensor, Shape, SyntheticArch, SyntheticSpec};
use prgen::LatentVector;

fn main() -> prgen::Result<()> {
    let spec = SyntheticSpec::new(8, Shape::new(16, 16, 1), SyntheticArch::Dcgan);
    let model = spec.build(42)?;
    let path = std::env::temp_dir().join("prgen_forward_vjp.prgw");
    save_generator(&model, &path)?;
    let model = load_generator(&path)?.cast::<f64>();
    print!("{}", manifest(&model));

    let z = LatentVector::new(vec![0.3, -1.2, 0.5, 0.0, 0.9, -0.4, 1.1, -0.7])?;
    let x = model.forward(&z)?;
    let mean = x.as_slice().iter().sum::<f64>() / x.as_slice().len() as f64;
    println!("G(z): shape {}, mean {mean:.4}", x.shape());

    // Gradient of the image mean with respect to z.
    let n = x.shape().len();
    let cotangent = ImageTensor::new(x.shape(), vec![1.0 / n as f64; n])?;
    let grad = model.vjp(&z, &cotangent)?;
    println!("d mean / dz = {grad:.4?}");
    Ok(())
}
