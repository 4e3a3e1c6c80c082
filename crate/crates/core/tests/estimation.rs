use std::sync::Arc;

use wimlab::estimation::{
    cramer_rao, efficiency_residual, expectation_param_grad, expectation_param_grad_fd, probe_integrability,
    random_polynomials, wasserstein_covariance, Statistic,
};
use wimlab::families::{Exponential, Family, Gaussian, Laplacian, Uniform};
use wimlab::WimError;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

const STD: [f64; 2] = [0.0, 1.0];

#[test]
fn covariance_reference_values() {
    let x = Statistic::monomial(1);
    let x2 = Statistic::monomial(2);
    assert!(close(
        wasserstein_covariance(&Gaussian, &STD, &x, &x).unwrap()[(0, 0)],
        1.0,
        1e-12
    ));
    assert!(close(
        wasserstein_covariance(&Gaussian, &STD, &x, &x2).unwrap()[(0, 0)],
        0.0,
        1e-12
    ));
    assert!(close(
        wasserstein_covariance(&Gaussian, &STD, &x2, &x2).unwrap()[(0, 0)],
        4.0,
        1e-10
    ));
}

#[test]
fn covariance_is_bilinear_and_symmetric() {
    let theta = [0.4, 1.3];
    let a = Statistic::polynomial(&[0.0, 1.0, -0.5]);
    let b = Statistic::polynomial(&[1.0, 0.0, 0.3, 0.2]);
    let combo = Statistic::polynomial(&[3.0, 2.0, -0.1, 0.6]); // 2a + 3b
    let ab = wasserstein_covariance(&Gaussian, &theta, &a, &b).unwrap()[(0, 0)];
    let ba = wasserstein_covariance(&Gaussian, &theta, &b, &a).unwrap()[(0, 0)];
    assert!(close(ab, ba, 1e-12));
    let aa = wasserstein_covariance(&Gaussian, &theta, &a, &a).unwrap()[(0, 0)];
    let lhs = wasserstein_covariance(&Gaussian, &theta, &combo, &a).unwrap()[(0, 0)];
    assert!(close(lhs, 2.0 * aa + 3.0 * ab, 1e-10));
}

#[test]
fn expectation_gradients() {
    let g = expectation_param_grad(&Gaussian, &[1.5, 0.7], &Statistic::monomial(1)).unwrap();
    assert!(close(g[(0, 0)], 1.0, 1e-12) && close(g[(0, 1)], 0.0, 1e-12));
    let g = expectation_param_grad(&Gaussian, &STD, &Statistic::monomial(3)).unwrap();
    assert!(close(g[(0, 0)], 3.0, 1e-10) && close(g[(0, 1)], 0.0, 1e-10));
    let g = expectation_param_grad(&Exponential, &[0.0, 2.0], &Statistic::monomial(1)).unwrap();
    assert!(close(g[(0, 0)], 1.0, 1e-12) && close(g[(0, 1)], -0.25, 1e-12));
    for fam in [&Gaussian as &dyn Family, &Laplacian, &Exponential] {
        let t = Statistic::polynomials(&[vec![0.3, -1.0, 0.5, 0.1], vec![0.0, 0.0, 1.0]]);
        let theta = [0.2, 1.4];
        let a = expectation_param_grad(fam, &theta, &t).unwrap();
        let b = expectation_param_grad_fd(fam, &theta, &t).unwrap();
        assert!((a - b).abs().max() < 1e-5, "{}", fam.name());
    }
}

#[test]
fn cramer_rao_reference_values() {
    let r = cramer_rao(&Gaussian, &STD, &Statistic::monomial(1)).unwrap();
    assert!(r.efficient && r.gap[(0, 0)].abs() < 1e-10);
    let r = cramer_rao(&Gaussian, &STD, &Statistic::monomial(3)).unwrap();
    assert!(close(r.lhs[(0, 0)], 27.0, 1e-8));
    assert!(close(r.rhs[(0, 0)], 9.0, 1e-8));
    assert!(close(r.gap[(0, 0)], 18.0, 1e-8));
    assert!(!r.efficient);
    let r = cramer_rao(&Exponential, &STD, &Statistic::monomial(2)).unwrap();
    assert!(r.efficient && r.min_eig_gap >= -1e-8);
}

#[test]
fn efficiency_residuals() {
    let fam: Arc<dyn Family> = Arc::new(Gaussian);
    let s = Statistic::score_combination(fam.clone(), &[0.3, 1.1], &[2.0, 1.0]).unwrap();
    assert!(efficiency_residual(fam.as_ref(), &[0.3, 1.1], &s).unwrap() < 1e-8);
    assert!(close(
        efficiency_residual(&Gaussian, &STD, &Statistic::monomial(3)).unwrap(),
        18.0,
        1e-8
    ));
    let u: Arc<dyn Family> = Arc::new(Uniform);
    let s = Statistic::score_combination(u.clone(), &STD, &[1.0, 0.0]).unwrap();
    assert!(efficiency_residual(u.as_ref(), &STD, &s).unwrap() < 1e-8);
}

#[test]
fn vector_statistics_give_psd_gaps() {
    for poly in random_polynomials(10, 2, 4, 99) {
        let r = cramer_rao(&Laplacian, &[0.1, 0.8], &Statistic::polynomials(&poly)).unwrap();
        assert_eq!(r.gap.nrows(), 2);
        assert!(r.min_eig_gap >= -1e-8);
    }
}

#[test]
fn non_integrable_gradients_are_rejected() {
    let root = Statistic::new(
        1,
        |x: f64| vec![x.abs().sqrt()],
        |x: f64| vec![x.signum() * 0.5 / x.abs().sqrt()],
    );
    assert!(matches!(
        wasserstein_covariance(&Gaussian, &STD, &root, &root),
        Err(WimError::NotIntegrable(_))
    ));
    let fine = Statistic::from_fn(1, |x: f64| vec![x.abs().powf(1.5)]);
    assert!(wasserstein_covariance(&Gaussian, &STD, &fine, &fine).is_ok());
    assert!(probe_integrability(&Gaussian, &STD, &fine).is_ok());
}

#[test]
fn random_corpus_is_reproducible() {
    let a = random_polynomials(5, 1, 5, 3);
    assert_eq!(a, random_polynomials(5, 1, 5, 3));
    assert_ne!(a, random_polynomials(5, 1, 5, 4));
    for p in &a {
        assert!(p[0].len() <= 6 && p[0].iter().all(|c| c.abs() <= 2.0));
    }
}
