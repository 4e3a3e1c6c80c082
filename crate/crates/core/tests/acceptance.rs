//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with the measured quantity; the test fails if any criterion fails.

use std::time::Instant;

use wimlab::dynamics::{
    fit_rate, predict_variance_curve, run_ensemble, sensitivity_fd, simulate_trajectory, EnsembleConfig, PredictConfig,
    RateMeasure, RecursionOrder, ScoreKind, VarianceCurve, DEFAULT_T_START,
};
use wimlab::estimation::{cramer_rao, random_polynomials, Statistic, EFFICIENCY_TOL};
use wimlab::families::{family, Exponential, Family, Gaussian, Laplacian, ProductFamily, Relu, ReluKind, Uniform};
use wimlab::functional::{
    default_grid, hessian_metric_ratio, laplacian_alpha_formula, laplacian_restricted_grid, lsi_ratio, riw_check,
};
use wimlab::geometry::{
    distance_probe, fim, poisson_residual, product_wim, product_wim_joint, score_mean, wim, wim_from_distance,
    MatrixMethod,
};
use wimlab::linalg::{from_rows, Mat};
use wimlab::WimError;

struct Ledger {
    results: Vec<(usize, bool)>,
}

impl Ledger {
    fn record(&mut self, n: usize, pass: bool, detail: String) {
        println!("criterion {n:>2}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        self.results.push((n, pass));
    }
}

fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    (a - b).abs().max()
}

fn grid25(center: [f64; 2], scale: [f64; 2]) -> Vec<[f64; 2]> {
    let mut g = Vec::new();
    for i in 0..5 {
        for j in 0..5 {
            g.push([
                center[0] + scale[0] * (i as f64 - 2.0),
                center[1] * (1.0 + scale[1] * j as f64),
            ]);
        }
    }
    g
}

fn closed_form_matrices(ledger: &mut Ledger) {
    let start = Instant::now();
    type Expected = fn(&[f64]) -> Mat;
    let cases: Vec<(&str, [f64; 2], [f64; 2], Expected)> = vec![
        ("gaussian", [0.0, 0.5], [1.0, 0.5], |_| Mat::identity(2, 2)),
        ("exponential", [0.0, 0.5], [1.0, 0.5], |t| {
            let l2 = t[1] * t[1];
            from_rows(&[&[1.0, 1.0 / l2], &[1.0 / l2, 2.0 / (l2 * l2)]])
        }),
        ("laplacian", [0.0, 0.5], [1.0, 0.5], |t| {
            from_rows(&[&[1.0, 0.0], &[0.0, 2.0 / t[1].powi(4)]])
        }),
        ("uniform", [-1.0, 2.0], [0.5, 0.5], |_| {
            from_rows(&[&[1.0 / 3.0, 1.0 / 6.0], &[1.0 / 6.0, 1.0 / 3.0]])
        }),
        ("semicircle", [0.0, 0.5], [1.0, 0.5], |_| {
            from_rows(&[&[1.0, 0.0], &[0.0, 0.25]])
        }),
        ("logistic", [0.0, 0.5], [1.0, 0.5], |_| {
            let pi2 = std::f64::consts::PI.powi(2);
            from_rows(&[&[1.0, 0.0], &[0.0, pi2 / 3.0]])
        }),
    ];
    let mut failing = Vec::new();
    let mut worst_all: f64 = 0.0;
    for (name, center, scale, expected) in cases {
        let fam = family(name).unwrap();
        let mut worst: f64 = 0.0;
        for p in grid25(center, scale) {
            // The uniform grid is over (a, b) with b > a.
            let theta = if name == "uniform" { [p[0], p[0] + p[1]] } else { p };
            let q = wim(fam.as_ref(), &theta, MatrixMethod::Quadrature).unwrap();
            worst = worst.max(max_abs_diff(&q.entries, &expected(&theta)));
        }
        worst_all = worst_all.max(worst);
        if worst >= 1e-6 {
            failing.push(format!("{name} ({worst:.3e})"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failing.is_empty() && secs < 10.0;
    let detail = if failing.is_empty() {
        format!("max deviation {worst_all:.2e}, {secs:.2} s")
    } else {
        format!(
            "quadrature disagrees with the listed closed form for {}; {secs:.2} s",
            failing.join(", ")
        )
    };
    ledger.record(1, pass, detail);
}

fn poisson(ledger: &mut Ledger) {
    let smooth = [
        "gaussian",
        "exponential",
        "laplacian",
        "uniform",
        "semicircle",
        "logistic",
    ];
    let mut worst_res: f64 = 0.0;
    let mut worst_mean: f64 = 0.0;
    let mut evaluated = 0;
    for name in smooth {
        let fam = family(name).unwrap();
        let theta = [0.3, 1.4];
        let theta = if name == "uniform" { [0.3, 1.7] } else { theta };
        let kinks = fam.kinks(&theta);
        let mut count = 0;
        let mut k = 0;
        while count < 200 {
            let u = 0.02 + 0.96 * (k as f64 + 0.5) / 240.0;
            k += 1;
            let x = fam.quantile(&theta, u);
            if kinks.iter().any(|c| (x - c).abs() < 1e-3) {
                continue;
            }
            for i in 0..2 {
                let r = poisson_residual(fam.as_ref(), &theta, i, x).unwrap();
                worst_res = worst_res.max(r.abs());
            }
            count += 1;
        }
        evaluated += count;
        for i in 0..2 {
            worst_mean = worst_mean.max(score_mean(fam.as_ref(), &theta, i, true).unwrap().abs());
        }
    }
    ledger.record(
        2,
        worst_res < 1e-6 && worst_mean < 1e-8,
        format!("max residual {worst_res:.2e} over {evaluated} points, max |E Phi| {worst_mean:.2e}"),
    );
}

fn separability(ledger: &mut Ledger) {
    let prod = ProductFamily::new(vec![family("gaussian").unwrap(), family("gaussian").unwrap()]).unwrap();
    let theta = [0.4, 1.3];
    let summed = product_wim(&prod, &theta, MatrixMethod::Quadrature).unwrap().entries;
    let joint = product_wim_joint(&prod, &theta).unwrap();
    let d = max_abs_diff(&summed, &joint);
    ledger.record(3, d < 1e-8, format!("joint vs summed factor metrics differ by {d:.2e}"));
}

fn distance(ledger: &mut Ledger) {
    let mut worst: f64 = 0.0;
    for (fam, theta) in [(&Gaussian as &dyn Family, [0.2, 1.1]), (&Uniform, [-0.4, 0.9])] {
        let g = wim(fam, &theta, MatrixMethod::Auto).unwrap().entries;
        for k in 0..8 {
            let a = std::f64::consts::PI * k as f64 / 8.0 + 0.1;
            let step = [1e-3 * a.cos(), 1e-3 * a.sin()];
            let p = distance_probe(fam, &theta, &step).unwrap();
            worst = worst.max((p.w2sq - p.predicted(&g)).abs() / 1e-6);
        }
    }
    ledger.record(4, worst < 1e-2, format!("max relative deviation {worst:.2e}"));
}

fn relu(ledger: &mut Ledger) {
    let mut worst: f64 = 0.0;
    let mut fisher_undefined = true;
    for kind in [ReluKind::Shift, ReluKind::Floor] {
        let r = Relu::standard(kind);
        for k in 0..=30 {
            let th = -3.0 + 0.2 * k as f64;
            let g = wim_from_distance(&r, &[th], 1e-3).unwrap().entries[(0, 0)];
            worst = worst.max((g - r.reference_wim(th)).abs());
        }
        fisher_undefined &= matches!(fim(&r, &[0.0]), Err(WimError::NotWellDefined { .. }));
    }
    ledger.record(
        5,
        worst < 1e-3 && fisher_undefined,
        format!("max abs error {worst:.2e}, Fisher not well-defined: {fisher_undefined}"),
    );
}

fn cramer_rao_corpus(ledger: &mut Ledger) {
    let start = Instant::now();
    let mut min_eig = f64::INFINITY;
    let mut misclassified = 0;
    let mut total = 0;
    let cases: [(&dyn Family, [[f64; 2]; 3]); 2] = [
        (&Gaussian, [[0.0, 1.0], [1.5, 0.5], [-2.0, 2.0]]),
        (&Exponential, [[0.0, 1.0], [1.0, 0.5], [-1.0, 2.0]]),
    ];
    for (seed, (fam, thetas)) in cases.into_iter().enumerate() {
        let corpus = random_polynomials(100, 1, 5, 17 + seed as u64);
        for (k, poly) in corpus.iter().enumerate() {
            let theta = thetas[k % 3];
            let r = cramer_rao(fam, &theta, &Statistic::polynomials(poly)).unwrap();
            min_eig = min_eig.min(r.min_eig_gap);
            // Degree after dropping vanishing leading coefficients.
            let degree = poly[0].iter().rposition(|c| *c != 0.0).unwrap_or(0);
            if r.efficient != (degree <= 2) {
                misclassified += 1;
            }
            total += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ledger.record(
        6,
        min_eig >= -1e-8 && misclassified == 0 && secs < 30.0,
        format!(
            "min gap eigenvalue {min_eig:.2e}, {misclassified}/{total} misclassified (tolerance {EFFICIENCY_TOL:.0e}), {secs:.1} s"
        ),
    );
}

/// Ensemble on N(20, sigma^2) started at `theta* + offset * (1, 0.5)`.
fn ensemble(kind: ScoreKind, sigma: f64, offset: f64) -> (VarianceCurve, f64) {
    let start = Instant::now();
    let cfg = EnsembleConfig {
        theta_star: vec![20.0, sigma].into(),
        theta0: vec![20.0 + offset, sigma + 0.5 * offset].into(),
        kind,
        t_start: DEFAULT_T_START,
        t_max: 10_000,
        ensemble: 1000,
        seed: 2024,
        grid: None,
    };
    let curve = run_ensemble(&Gaussian, &cfg).unwrap();
    (curve, start.elapsed().as_secs_f64())
}

fn escaped_ok(c: &VarianceCurve) -> bool {
    (c.escaped as f64) < 0.01 * c.ensemble_size as f64
}

fn efficiency(ledger: &mut Ledger, runs: &[(ScoreKind, f64, VarianceCurve, f64)]) {
    let find = |k: ScoreKind, s: f64| runs.iter().find(|r| r.0 == k && r.1 == s).unwrap();

    let (_, _, c, secs) = find(ScoreKind::Wasserstein, 1.0);
    let fit = fit_rate(c, [1_000, 10_000], RateMeasure::Trace).unwrap();
    let (t, v) = c.last().unwrap();
    let dev = (v * t as f64 - Mat::identity(2, 2)).norm() / Mat::identity(2, 2).norm();
    ledger.record(
        7,
        (-1.05..=-0.95).contains(&fit.slope) && dev < 0.1 && escaped_ok(c) && *secs < 300.0,
        format!("slope {:.4}, ||t V_t - I|| / ||I|| = {dev:.4}, {secs:.1} s", fit.slope),
    );

    let (_, _, c2, s2) = find(ScoreKind::Fisher, 2.0);
    let slow = fit_rate(c2, [1_000, 10_000], RateMeasure::SpectralNorm).unwrap();
    let (_, _, c1, s1) = find(ScoreKind::Fisher, 1.0);
    let fast = fit_rate(c1, [1_000, 10_000], RateMeasure::Trace).unwrap();
    let (t, v) = c1.last().unwrap();
    let tv = v * t as f64;
    let limit = [1.0, 4.0 / 3.0];
    let rel = (0..2)
        .map(|i| (tv[(i, i)] / limit[i] - 1.0).abs())
        .fold(tv[(0, 1)].abs() / limit[0], f64::max);
    ledger.record(
        8,
        (-0.57..=-0.43).contains(&slow.slope)
            && (-1.05..=-0.95).contains(&fast.slope)
            && rel < 0.15
            && escaped_ok(c1)
            && escaped_ok(c2)
            && s1 + s2 < 300.0,
        format!(
            "sigma*=2 slope {:.4} (largest eigenvalue), sigma*=1 slope {:.4}, t V_t = [{:.4}, {:.4}; {:.4}] (max rel dev {rel:.3})",
            slow.slope, fast.slope, tv[(0, 0)], tv[(1, 1)], tv[(0, 1)]
        ),
    );
}

fn sensitivity(ledger: &mut Ledger) {
    let mut worst: f64 = 0.0;
    let t_start = 5;
    let cases: [(&dyn Family, ScoreKind, [f64; 2]); 3] = [
        (&Gaussian, ScoreKind::Wasserstein, [0.5, 1.2]),
        (&Gaussian, ScoreKind::Fisher, [0.5, 1.2]),
        (&Laplacian, ScoreKind::Wasserstein, [0.5, 1.2]),
    ];
    for (fam, kind, theta0) in cases {
        let samples: Vec<f64> = (0..(20 - t_start + 1))
            .map(|k| fam.quantile(&theta0, (k as f64 * 0.618_033_988_7 + 0.1).fract() * 0.9 + 0.05))
            .collect();
        let s = simulate_trajectory(fam, kind, &theta0, t_start, &samples).unwrap();
        let fd = sensitivity_fd(fam, kind, &theta0, t_start, &samples, 1e-6).unwrap();
        let rel = (&s.sens - &fd).abs().max() / fd.abs().max();
        worst = worst.max(rel);
    }
    ledger.record(
        9,
        worst < 1e-4,
        format!("max relative deviation {worst:.2e} over steps {t_start}..=20"),
    );
}

fn lsi(ledger: &mut Ledger) {
    let ts = [20.0, 2.0];
    let alpha = 1.0 / (2.0 * ts[1] * ts[1]);
    let grid = default_grid(&ts);
    let ok = riw_check(&Gaussian, &grid, &ts, alpha).unwrap();
    let too_big = riw_check(&Gaussian, &grid, &ts, 1.2 * alpha).unwrap();
    let inf = grid
        .iter()
        .filter_map(|t| lsi_ratio(&Gaussian, t, &ts).ok())
        .fold(f64::INFINITY, f64::min);
    let gaussian_ok = ok.holds && !too_big.holds && inf >= alpha - 1e-6;

    let ls = [0.0, 1.0];
    let mut worst: f64 = 0.0;
    let mut at = vec![];
    for t in laplacian_restricted_grid(&ls, 2.0, 0.5, 3.0, 21) {
        let d = (hessian_metric_ratio(&Laplacian, &t, &ls).unwrap() - laplacian_alpha_formula(&t, &ls)).abs();
        if d > worst {
            worst = d;
            at = t;
        }
    }
    ledger.record(
        10,
        gaussian_ok && worst < 1e-6,
        format!(
            "gaussian: certifies {alpha} (gap {:.1e}), rejects 1.2x (gap {:.1e}), inf ratio {inf:.4}; laplacian: max |certificate - formula| {worst:.3e} at {at:?}",
            ok.min_gap_eig, too_big.min_gap_eig
        ),
    );
}

fn recursion(ledger: &mut Ledger, runs: &[(ScoreKind, f64, VarianceCurve, f64)]) {
    let mut worst: f64 = 0.0;
    for (kind, sigma, mc, _) in runs {
        let pred = predict_variance_curve(
            &Gaussian,
            &PredictConfig {
                theta_star: vec![20.0, *sigma].into(),
                kind: *kind,
                t_start: DEFAULT_T_START,
                t_max: 10_000,
                v_init: None,
                order: RecursionOrder::Full,
                grid: Some(mc.times.clone()),
            },
        )
        .unwrap();
        for ((t, m), p) in mc.times.iter().zip(&mc.v).zip(&pred.v) {
            if (100..=10_000).contains(t) {
                worst = worst.max((m.trace() / p.trace() - 1.0).abs());
            }
        }
    }
    ledger.record(
        11,
        worst < 0.15,
        format!("max relative trace deviation {worst:.4} over 4 configurations"),
    );
}

#[test]
fn acceptance() {
    let mut ledger = Ledger { results: Vec::new() };
    closed_form_matrices(&mut ledger);
    poisson(&mut ledger);
    separability(&mut ledger);
    distance(&mut ledger);
    relu(&mut ledger);
    cramer_rao_corpus(&mut ledger);

    let configs = [
        (ScoreKind::Wasserstein, 1.0),
        (ScoreKind::Fisher, 1.0),
        (ScoreKind::Fisher, 2.0),
        (ScoreKind::Wasserstein, 2.0),
    ];
    let runs = |offset: f64, n: usize| -> Vec<(ScoreKind, f64, VarianceCurve, f64)> {
        configs[..n]
            .iter()
            .map(|&(k, s)| {
                let (c, secs) = ensemble(k, s, offset);
                (k, s, c, secs)
            })
            .collect()
    };
    // Rate checks start away from the optimum; the recursion is linearized
    // at theta*, so its comparison starts there.
    efficiency(&mut ledger, &runs(1.0, 3));
    sensitivity(&mut ledger);
    lsi(&mut ledger);
    recursion(&mut ledger, &runs(0.0, 4));

    ledger.results.sort_by_key(|r| r.0);
    let failed: Vec<usize> = ledger.results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!(
        "{} of {} criteria pass",
        ledger.results.len() - failed.len(),
        ledger.results.len()
    );
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
