//! Rectifier push-forwards of a standard normal have an atom, so the Fisher
//! matrix is undefined, while the Wasserstein metric is `1 - F0(theta)` for
//! the shift and `F0(theta)` for the floor.

use wimlab::families::{Relu, ReluKind};
use wimlab::geometry::{fim, wim_from_distance};

fn main() -> wimlab::Result<()> {
    for kind in [ReluKind::Shift, ReluKind::Floor] {
        let relu = Relu::standard(kind);
        println!("{kind:?}: Fisher -> {}", fim(&relu, &[0.0]).unwrap_err());
        println!("{:>6} {:>12} {:>12} {:>10}", "theta", "numeric", "closed", "error");
        for k in 0..=12 {
            let th = -3.0 + 0.5 * k as f64;
            let g = wim_from_distance(&relu, &[th], 1e-3)?.entries[(0, 0)];
            let c = relu.reference_wim(th);
            println!("{th:>6.2} {g:>12.8} {c:>12.8} {:>10.2e}", (g - c).abs());
        }
    }
    Ok(())
}
