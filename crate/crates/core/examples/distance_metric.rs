//! The metric as the local quadratic form of the squared W2 distance:
//! `W2^2(theta, theta + d) ≈ d^T G_W d` for small displacements.

use wimlab::families::{Gaussian, Uniform};
use wimlab::geometry::{distance_probe, wim, wim_from_distance, MatrixMethod};

fn main() -> wimlab::Result<()> {
    let cases: [(&str, &dyn wimlab::families::Family, [f64; 2]); 2] =
        [("gaussian", &Gaussian, [0.3, 1.2]), ("uniform", &Uniform, [-0.5, 1.5])];
    for (name, fam, theta) in cases {
        let g = wim(fam, &theta, MatrixMethod::Auto)?.entries;
        println!("{name}: G_W = {:?}", g.as_slice());
        for k in 0..8 {
            let a = std::f64::consts::PI * k as f64 / 4.0;
            let step = [1e-3 * a.cos(), 1e-3 * a.sin()];
            let p = distance_probe(fam, &theta, &step)?;
            let rel = (p.w2sq - p.predicted(&g)).abs() / 1e-6;
            println!(
                "  direction {k}: W2^2 = {:.6e}  quadratic form = {:.6e}  rel = {rel:.2e}",
                p.w2sq,
                p.predicted(&g)
            );
        }
        let est = wim_from_distance(fam, &theta, 1e-3)?;
        println!("  recovered from distances: {:?}", est.entries.as_slice());
    }
    Ok(())
}
