use wimlab::families::{
    by_name, family, project_theta, Exponential, Family, Gaussian, Laplacian, Model, ParamPoint, Semicircle, Uniform,
};
use wimlab::WimError;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn densities_at_reference_points() {
    assert!(close(
        Gaussian.density(&[0.0, 1.0], 0.0),
        0.398_942_280_401_432_7,
        1e-15
    ));
    assert_eq!(Uniform.density(&[0.0, 1.0], 2.0), 0.0);
    assert!(close(Exponential.density(&[0.0, 1.0], 0.0), 1.0, 1e-15));
    assert!(close(Laplacian.density(&[0.0, 2.0], 0.0), 1.0, 1e-15));
}

#[test]
fn cdfs_at_reference_points() {
    assert_eq!(Gaussian.cdf(&[0.0, 1.0], 0.0), 0.5);
    assert!(close(Uniform.cdf(&[0.0, 2.0], 1.0), 0.5, 1e-15));
    assert!(close(Semicircle.cdf(&[0.0, 1.0], 0.0), 0.5, 1e-14));
}

#[test]
fn cdf_parameter_gradients() {
    for name in ["gaussian", "laplacian", "semicircle", "logistic"] {
        let f = family(name).unwrap();
        let theta = [0.2, 1.3];
        for x in [-0.5, 0.1, 0.9] {
            let g = f.cdf_param_grad(&theta, x);
            assert!(close(g[0], -f.density(&theta, x), 1e-7), "{name} at {x}");
        }
    }
    let g = Exponential.cdf_param_grad(&[0.0, 1.0], 1.0);
    assert!(close(g[1], (-1.0f64).exp(), 1e-12));
    assert_eq!(Gaussian.cdf_param_grad(&[0.0, 1.0], 1e3), vec![0.0, 0.0]);
}

#[test]
fn quantiles_invert_cdfs() {
    assert_eq!(Gaussian.quantile(&[3.0, 0.7], 0.5), 3.0);
    assert!(close(
        Exponential.quantile(&[1.0, 2.0], 0.5),
        1.0 + 2f64.ln() / 2.0,
        1e-14
    ));
    assert!(close(Uniform.quantile(&[-1.0, 3.0], 0.3), 0.2, 1e-14));
    for name in [
        "gaussian",
        "exponential",
        "laplacian",
        "uniform",
        "semicircle",
        "logistic",
        "relu-f",
        "relu-h",
    ] {
        let f = family(name).unwrap();
        let theta: Vec<f64> = if f.dim() == 1 { vec![0.4] } else { vec![0.3, 1.7] };
        for u in [0.01, 0.2, 0.5, 0.77, 0.99] {
            let x = f.quantile(&theta, u);
            let back = f.cdf(&theta, x);
            assert!(back >= u - 1e-9, "{name} at u = {u}: F(Q(u)) = {back}");
        }
    }
}

#[test]
fn relu_families_carry_atoms() {
    let f = family("relu-f").unwrap();
    let atoms = f.atoms(&[0.0]);
    assert_eq!(atoms.len(), 1);
    assert!(close(atoms[0].mass, 0.5, 1e-15));
    assert!(!f.is_smooth());
}

#[test]
fn registry_and_products() {
    assert!(matches!(family("weibull"), Err(WimError::UnknownFamily(_))));
    match by_name("product:gaussian,gaussian").unwrap() {
        Model::Product(p) => {
            assert_eq!(p.dim(), 2);
            let d = p.density(&[0.0, 1.0], &[0.3, -0.2]).unwrap();
            let want = Gaussian.density(&[0.0, 1.0], 0.3) * Gaussian.density(&[0.0, 1.0], -0.2);
            assert!(close(d, want, 1e-16));
        }
        Model::Single(_) => panic!("expected a product"),
    }
    assert!(by_name("product:gaussian,cauchy").is_err());
}

#[test]
fn domain_checks_and_projection() {
    let p = ParamPoint::new(vec![0.0, -1.0]);
    assert!(matches!(
        wimlab::families::density(&Gaussian, &p, 0.0),
        Err(WimError::Domain { .. })
    ));
    assert!(wimlab::families::density(&Uniform, &ParamPoint::new(vec![1.0, 0.5]), 0.7).is_err());
    let mut theta = [0.0, -0.3];
    assert!(project_theta(&Gaussian, &mut theta, 1e-3));
    assert_eq!(theta, [0.0, 1e-3]);
}
