//! Wasserstein natural gradient driven by Fisher scores. The rate is set by
//! `alpha = sup{a : G_F >= a G_W}`: `t^{-1}` when `2 alpha > 1` and
//! `t^{-2 alpha}` otherwise.

use wimlab::dynamics::{
    fit_rate, poincare_alpha, run_ensemble, EnsembleConfig, RateMeasure, ScoreKind, DEFAULT_T_START,
};
use wimlab::families::Gaussian;

fn main() -> wimlab::Result<()> {
    for (sigma, measure) in [(1.0, RateMeasure::Trace), (2.0, RateMeasure::SpectralNorm)] {
        let ts = vec![20.0, sigma];
        let alpha = poincare_alpha(&Gaussian, &ts)?;
        let cfg = EnsembleConfig {
            theta_star: ts.clone().into(),
            theta0: vec![21.0, sigma + 0.5].into(),
            kind: ScoreKind::Fisher,
            t_start: DEFAULT_T_START,
            t_max: 10_000,
            ensemble: 1000,
            seed: 3,
            grid: None,
        };
        let curve = run_ensemble(&Gaussian, &cfg)?;
        let fit = fit_rate(&curve, [1_000, 10_000], measure)?;
        let expected = (-2.0 * alpha).max(-1.0);
        println!(
            "sigma* = {sigma}: alpha = {alpha:.3}, fitted slope {:.3} ({measure:?}), expected {expected:.3}",
            fit.slope
        );
        if sigma == 1.0 {
            let (t, v) = curve.last().expect("non-empty grid");
            println!("  t V_t = {:?} (limit diag(1, 4/3))", (v * t as f64).as_slice());
        }
    }
    Ok(())
}
