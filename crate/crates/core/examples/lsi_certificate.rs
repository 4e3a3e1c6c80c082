//! Hessian criterion for log-Sobolev constants in the Gaussian and
//! Laplacian families, and the entropy dissipation identity along the
//! Wasserstein gradient flow.

use wimlab::families::{Gaussian, Laplacian};
use wimlab::functional::{
    default_grid, gradient_flow, hessian_metric_ratio, laplacian_alpha_formula, laplacian_restricted_grid, lsi_ratio,
    relative_entropy, relative_fisher_info, riw_check,
};

fn main() -> wimlab::Result<()> {
    let ts = [0.0, 2.0];
    let alpha = 1.0 / (2.0 * ts[1] * ts[1]);
    let grid = default_grid(&ts);
    for a in [alpha, 1.2 * alpha] {
        let c = riw_check(&Gaussian, &grid, &ts, a)?;
        println!(
            "gaussian alpha {a:.4}: holds {} (min gap eigenvalue {:.3e} at {:?})",
            c.holds, c.min_gap_eig, c.argmin
        );
    }
    let inf = grid
        .iter()
        .filter_map(|t| lsi_ratio(&Gaussian, t, &ts).ok())
        .fold(f64::INFINITY, f64::min);
    println!("gaussian: infimum of I / 2H over the grid {inf:.4}");

    let ls = [0.0, 1.0];
    println!("laplacian: Hessian/metric ratio against the diagonal formula");
    for t in laplacian_restricted_grid(&ls, 1.0, 1.0, 3.0, 3) {
        println!(
            "  theta {t:?}: ratio {:.5}  formula {:.5}",
            hessian_metric_ratio(&Laplacian, &t, &ls)?,
            laplacian_alpha_formula(&t, &ls)
        );
    }

    let dt = 1e-3;
    let path = gradient_flow(&Laplacian, &[0.7, 1.5], &ls, dt, 400)?;
    for k in [100, 200, 300] {
        let dh = (relative_entropy(&Laplacian, &path[k + 1], &ls)? - relative_entropy(&Laplacian, &path[k - 1], &ls)?)
            / (2.0 * dt);
        println!(
            "flow step {k}: relative Fisher information {:.6}, -dH/dt {:.6}",
            relative_fisher_info(&Laplacian, &path[k], &ls)?,
            -dh
        );
    }
    Ok(())
}
