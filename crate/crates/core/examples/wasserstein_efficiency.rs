//! Online Wasserstein natural gradient with Wasserstein scores on N(20, 1):
//! the covariance decays like `G_W^{-1} / t`.

use wimlab::dynamics::{fit_rate, run_ensemble, EnsembleConfig, RateMeasure, ScoreKind, DEFAULT_T_START};
use wimlab::families::Gaussian;

fn main() -> wimlab::Result<()> {
    let cfg = EnsembleConfig {
        theta_star: vec![20.0, 1.0].into(),
        theta0: vec![21.0, 1.5].into(),
        kind: ScoreKind::Wasserstein,
        t_start: DEFAULT_T_START,
        t_max: 10_000,
        ensemble: 1000,
        seed: 1,
        grid: None,
    };
    let curve = run_ensemble(&Gaussian, &cfg)?;
    for (t, v) in curve.times.iter().zip(&curve.v).step_by(6) {
        println!(
            "t = {t:>6}  trace V_t = {:.4e}  t * trace = {:.4}",
            v.trace(),
            *t as f64 * v.trace()
        );
    }
    let fit = fit_rate(&curve, [1_000, 10_000], RateMeasure::Trace)?;
    let (t, v) = curve.last().expect("non-empty grid");
    println!(
        "slope {:.4} (r^2 {:.5}), t V_t at t = {t}: {:?}",
        fit.slope,
        fit.r2,
        (v * t as f64).as_slice()
    );
    println!("escaped trajectories: {}", curve.escaped);
    Ok(())
}
