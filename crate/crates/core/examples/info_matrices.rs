//! Wasserstein and Fisher information matrices of the built-in families,
//! closed form next to adaptive quadrature.

use wimlab::families::{family, FAMILY_NAMES};
use wimlab::geometry::{fim, wim, MatrixMethod};
use wimlab::linalg::Mat;

fn show(m: &Mat) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| r.iter().map(|v| format!("{v:>10.6}")).collect::<Vec<_>>().join(" "))
        .collect();
    format!("[{}]", rows.join(" ; "))
}

fn main() -> wimlab::Result<()> {
    let points: &[(&str, &[f64])] = &[
        ("gaussian", &[0.0, 1.5]),
        ("exponential", &[0.0, 2.0]),
        ("laplacian", &[0.0, 2.0]),
        ("uniform", &[0.0, 1.0]),
        ("semicircle", &[0.0, 1.0]),
        ("logistic", &[0.0, 1.0]),
        ("relu-f", &[0.5]),
        ("relu-h", &[0.5]),
    ];
    assert_eq!(points.len(), FAMILY_NAMES.len());
    for (name, theta) in points {
        let f = family(name)?;
        let auto = wim(f.as_ref(), theta, MatrixMethod::Auto)?;
        println!("{name:<12} theta = {theta:?}");
        println!("  G_W ({:?})   {}", auto.method, show(&auto.entries));
        if let Ok(q) = wim(f.as_ref(), theta, MatrixMethod::Quadrature) {
            println!("  G_W (quadrature) {}", show(&q.entries));
        }
        match fim(f.as_ref(), theta) {
            Ok(g) => println!("  G_F              {}", show(&g.entries)),
            Err(e) => println!("  G_F              {e}"),
        }
    }
    Ok(())
}
