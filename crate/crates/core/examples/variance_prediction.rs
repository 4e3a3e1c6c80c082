//! Deterministic variance recursion against a Monte Carlo ensemble.

use wimlab::dynamics::{
    predict_variance_curve, run_ensemble, EnsembleConfig, PredictConfig, RecursionOrder, ScoreKind, DEFAULT_T_START,
};
use wimlab::families::Gaussian;

fn main() -> wimlab::Result<()> {
    let ts = vec![20.0, 2.0];
    let kind = ScoreKind::Fisher;
    let pred = predict_variance_curve(
        &Gaussian,
        &PredictConfig {
            theta_star: ts.clone().into(),
            kind,
            t_start: DEFAULT_T_START,
            t_max: 10_000,
            v_init: None,
            order: RecursionOrder::Full,
            grid: None,
        },
    )?;
    let mc = run_ensemble(
        &Gaussian,
        &EnsembleConfig {
            theta_star: ts.clone().into(),
            theta0: ts.into(),
            kind,
            t_start: DEFAULT_T_START,
            t_max: 10_000,
            ensemble: 500,
            seed: 11,
            grid: None,
        },
    )?;
    println!("{:>6} {:>12} {:>12} {:>8}", "t", "recursion", "monte carlo", "ratio");
    for ((t, p), m) in pred.times.iter().zip(&pred.v).zip(&mc.v).step_by(3) {
        println!(
            "{t:>6} {:>12.5e} {:>12.5e} {:>8.4}",
            p.trace(),
            m.trace(),
            m.trace() / p.trace()
        );
    }
    Ok(())
}
