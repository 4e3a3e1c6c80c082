//! Wasserstein-Cramer-Rao bound for polynomial statistics. Linear
//! combinations of the Wasserstein scores attain it; higher-degree
//! statistics leave a positive gap.

use std::sync::Arc;

use wimlab::estimation::{cramer_rao, random_polynomials, Statistic};
use wimlab::families::{Exponential, Family, Gaussian};

fn main() -> wimlab::Result<()> {
    let g = Gaussian;
    let theta = [0.0, 1.0];
    for (label, stat) in [
        ("x", Statistic::polynomial(&[0.0, 1.0])),
        ("x^2", Statistic::polynomial(&[0.0, 0.0, 1.0])),
        ("x^3", Statistic::polynomial(&[0.0, 0.0, 0.0, 1.0])),
        ("x^4", Statistic::polynomial(&[0.0, 0.0, 0.0, 0.0, 1.0])),
    ] {
        let r = cramer_rao(&g, &theta, &stat)?;
        println!(
            "gaussian {label:<4} lhs {:>9.4} rhs {:>9.4} gap {:>9.4} efficient {}",
            r.lhs[(0, 0)],
            r.rhs[(0, 0)],
            r.gap[(0, 0)],
            r.efficient
        );
    }

    let fam: Arc<dyn Family> = Arc::new(Exponential);
    let th = [0.5, 2.0];
    let s = Statistic::score_combination(fam.clone(), &th, &[1.0, -0.7])?;
    let r = cramer_rao(fam.as_ref(), &th, &s)?;
    println!(
        "exponential score combination: gap {:.2e}, efficient {}",
        r.gap[(0, 0)],
        r.efficient
    );

    let mut worst = f64::INFINITY;
    for p in random_polynomials(100, 1, 5, 7) {
        let r = cramer_rao(fam.as_ref(), &th, &Statistic::polynomials(&p))?;
        worst = worst.min(r.min_eig_gap);
    }
    println!("exponential, 100 random polynomials: smallest gap eigenvalue {worst:.3e}");
    Ok(())
}
