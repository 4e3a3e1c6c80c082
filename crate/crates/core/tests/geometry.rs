use std::sync::Arc;

use wimlab::families::{family, Exponential, Gaussian, Interval, Laplacian, Relu, ReluKind, Uniform};
use wimlab::geometry::{
    fim, fisher_score, poisson_residual, score_mean, w2_distance_1d, w2_squared_1d, wasserstein_score,
    wasserstein_score_grad, wasserstein_score_numeric, wim, wim_from_distance, CdfInput, InfoMethod, MatrixMethod,
    Member, ScoreField,
};
use wimlab::linalg::from_rows;
use wimlab::WimError;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn wasserstein_scores_at_reference_points() {
    assert_eq!(wasserstein_score(&Gaussian, &[0.5, 1.0], 0, 0.5).unwrap(), 0.0);
    assert!(close(
        wasserstein_score(&Gaussian, &[0.0, 2.0], 1, 0.0).unwrap(),
        -1.0,
        1e-15
    ));
    assert!(close(
        wasserstein_score(&Exponential, &[0.0, 1.0], 0, 1.0).unwrap(),
        0.0,
        1e-15
    ));
}

#[test]
fn numeric_scores_match_closed_forms() {
    for name in [
        "gaussian",
        "exponential",
        "laplacian",
        "uniform",
        "semicircle",
        "logistic",
    ] {
        let f = family(name).unwrap();
        let theta = [0.2, 1.6];
        for u in [0.1, 0.35, 0.6, 0.9] {
            let x = f.quantile(&theta, u);
            for i in 0..2 {
                let a = wasserstein_score(f.as_ref(), &theta, i, x).unwrap();
                let n = wasserstein_score_numeric(f.as_ref(), &theta, i, x).unwrap();
                assert!(close(a, n, 1e-7), "{name} component {i} at {x}: {a} vs {n}");
            }
        }
    }
}

#[test]
fn score_gradients() {
    for x in [-2.0, 0.3, 4.0] {
        assert_eq!(wasserstein_score_grad(&Gaussian, &[0.0, 1.0], 0, x).unwrap(), 1.0);
        assert!(close(
            wasserstein_score_grad(&Gaussian, &[1.0, 2.0], 1, x).unwrap(),
            (x - 1.0) / 2.0,
            1e-14
        ));
    }
    // -d_a F / p = (b - x)/(b - a) for the uniform family.
    assert!(close(
        wasserstein_score_grad(&Uniform, &[0.0, 1.0], 0, 0.5).unwrap(),
        0.5,
        1e-12
    ));
    assert!(close(
        wasserstein_score_grad(&Uniform, &[0.0, 1.0], 1, 0.25).unwrap(),
        0.25,
        1e-12
    ));
    let field = ScoreField::wasserstein(Arc::new(Laplacian), vec![0.0, 1.5], 0).unwrap();
    assert!(close(field.grad(0.7).unwrap(), 1.0, 1e-6));
}

#[test]
fn scores_have_zero_mean() {
    for name in [
        "gaussian",
        "exponential",
        "laplacian",
        "uniform",
        "semicircle",
        "logistic",
    ] {
        let f = family(name).unwrap();
        for i in 0..2 {
            let m = score_mean(f.as_ref(), &[0.1, 1.2], i, true).unwrap();
            assert!(m.abs() < 1e-8, "{name} {i}: {m}");
        }
    }
}

#[test]
fn information_matrices() {
    let g = wim(&Gaussian, &[3.0, 0.4], MatrixMethod::Quadrature).unwrap();
    assert!((g.entries.clone() - from_rows(&[&[1.0, 0.0], &[0.0, 1.0]])).abs().max() < 1e-10);
    let u = wim(&Uniform, &[0.0, 1.0], MatrixMethod::Auto).unwrap();
    assert_eq!(u.method, InfoMethod::Analytic);
    assert!(close(u.get(0, 1), 1.0 / 6.0, 1e-15));
    // Direct quadrature of E[Phi_m' Phi_lambda'] gives -1/lambda^2 off the diagonal.
    let e = wim(&Exponential, &[0.0, 1.0], MatrixMethod::Quadrature).unwrap();
    assert!(close(e.get(0, 1), -1.0, 1e-9));
    assert!(close(e.get(1, 1), 2.0, 1e-9));
    let s = wim(
        family("semicircle").unwrap().as_ref(),
        &[0.0, 1.0],
        MatrixMethod::Quadrature,
    )
    .unwrap();
    assert!(close(s.get(1, 1), 0.25, 1e-9));
}

#[test]
fn fisher_side() {
    assert!(close(fisher_score(&Gaussian, &[1.0, 2.0], 0, 3.0).unwrap(), 0.5, 1e-15));
    assert!(matches!(
        fisher_score(&Exponential, &[0.0, 1.0], 0, 1.0),
        Err(WimError::NotWellDefined { .. })
    ));
    let g = fim(&Gaussian, &[0.0, 2.0]).unwrap();
    assert!(close(g.get(0, 0), 0.25, 1e-15) && close(g.get(1, 1), 0.5, 1e-15));
    let l = fim(&Laplacian, &[0.0, 3.0]).unwrap();
    assert!(close(l.get(0, 0), 9.0, 1e-12) && close(l.get(1, 1), 1.0 / 9.0, 1e-12));
    assert!(matches!(
        fim(&Uniform, &[0.0, 1.0]),
        Err(WimError::NotWellDefined { .. })
    ));
}

#[test]
fn one_dimensional_w2() {
    let a = Member::new(&Gaussian, &[0.0, 1.0]).unwrap();
    assert_eq!(w2_squared_1d(&a, &a).unwrap(), 0.0);
    let b = Member::new(&Gaussian, &[1.0, 1.0]).unwrap();
    assert!(close(w2_squared_1d(&a, &b).unwrap(), 1.0, 1e-10));
    let c = Member::new(&Gaussian, &[0.0, 2.0]).unwrap();
    assert!(close(w2_distance_1d(&a, &c).unwrap(), 1.0, 1e-10));

    // A CDF supplied as a closure: Uniform(0, 1) against Uniform(0.5, 1.5).
    let u = CdfInput::new(|x: f64| x.clamp(0.0, 1.0), Interval::new(0.0, 1.0)).unwrap();
    let v = Member::new(&Uniform, &[0.5, 1.5]).unwrap();
    assert!(close(w2_squared_1d(&u, &v).unwrap(), 0.25, 1e-10));
    assert!(matches!(
        CdfInput::new(|x: f64| 1.0 - x.clamp(0.0, 1.0), Interval::new(0.0, 1.0)),
        Err(WimError::NonCdfInput(_))
    ));
}

#[test]
fn metric_from_distances() {
    let r = Relu::standard(ReluKind::Shift);
    assert!(close(
        wim_from_distance(&r, &[0.0], 1e-3).unwrap().entries[(0, 0)],
        0.5,
        1e-3
    ));
    let h = Relu::standard(ReluKind::Floor);
    assert!(close(
        wim_from_distance(&h, &[3.0], 1e-3).unwrap().entries[(0, 0)],
        0.998_650_101_968_37,
        1e-3
    ));
    assert!(wim_from_distance(&r, &[-30.0], 1e-3).unwrap().entries[(0, 0)] > 0.999);
    let g = wim_from_distance(&Gaussian, &[0.0, 1.0], 1e-3).unwrap();
    assert!((g.entries - from_rows(&[&[1.0, 0.0], &[0.0, 1.0]])).abs().max() < 1e-3);
    assert!(matches!(fim(&r, &[0.0]), Err(WimError::NotWellDefined { .. })));
}

#[test]
fn poisson_equation() {
    for x in [-1.5, -0.2, 0.4, 2.2] {
        for i in 0..2 {
            assert!(poisson_residual(&Gaussian, &[0.3, 0.9], i, x).unwrap().abs() < 1e-6);
        }
        if x != 0.0 {
            assert!(poisson_residual(&Laplacian, &[0.0, 1.5], 1, x).unwrap().abs() < 1e-6);
        }
    }
    assert!(matches!(
        poisson_residual(&Laplacian, &[0.0, 1.5], 1, 0.0),
        Err(WimError::NotSmooth { .. })
    ));
}
