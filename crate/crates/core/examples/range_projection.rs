//! Project an image that is not a generator output onto the range, and
//! compare with an image that is.
//!
//! cargo run --release --example range_projection

use prgen::generator::{ImageTensor, Shape, SyntheticArch, SyntheticSpec};
use prgen::solver::project_to_range;
use prgen::SolverConfig;

fn main() -> prgen::Result<()> {
    let shape = Shape::new(16, 16, 1);
    let model = SyntheticSpec::new(10, shape, SyntheticArch::Conv).build(7)?.cast::<f64>();
    let cfg = SolverConfig { restarts: 5, iterations: 4000, tolerance: Some(1e-14), ..SolverConfig::synthetic() };

    let inside = model.forward(&vec![0.2; 10])?;
    let disk = ImageTensor::new(
        shape,
        (0..256)
            .map(|i| {
                let (y, x) = ((i / 16) as f64 - 7.5, (i % 16) as f64 - 7.5);
                if x * x + y * y < 25.0 { 1.0 } else { 0.0 }
            })
            .collect(),
    )?;
    for (name, target) in [("generator output", &inside), ("disk", &disk)] {
        let best = project_to_range(&model, target, &cfg)?;
        println!("{name:<16}: ||G(z) - x||^2 = {:.3e} (restart {})", best.residual, best.restart);
    }
    Ok(())
}
