//! Entropy functionals on a parametric family and the Hessian criterion for
//! log-Sobolev constants.
//!
//! `H(theta) = ∫ p log p` and `H(theta | theta*) = KL(p_theta | p_theta*)`
//! are pulled back to parameter space. The relative Fisher information is
//! the squared Wasserstein gradient norm `∇H^T G_W^{-1} ∇H`, and the family
//! satisfies a log-Sobolev inequality with constant `alpha` on a region
//! wherever `Hess_W H(· | theta*) >= 2 alpha G_W` there. The Wasserstein
//! Hessian is the covariant one, `∂_i ∂_j H - Γ^k_ij ∂_k H`.

use serde::Serialize;

use crate::error::{Result, WimError};
use crate::families::{check_theta, theta_step, Family, ParamPoint};
use crate::geometry::{serialize_mat, wim, MatrixMethod};
use crate::linalg::{generalized_eigenvalues, min_eigenvalue, spd_inverse, symmetrize, Mat, Vector};
use crate::quad::{integrate_pieces, QuadOptions};

fn opts() -> QuadOptions {
    QuadOptions::default()
}

fn metric(fam: &dyn Family, theta: &[f64]) -> Result<Mat> {
    Ok(wim(fam, theta, MatrixMethod::Auto)?.entries)
}

/// `∫ p log p`, closed form where available.
pub fn entropy(fam: &dyn Family, theta: &[f64]) -> Result<f64> {
    check_theta(fam, theta)?;
    match fam.entropy_closed(theta) {
        Some(v) => Ok(v),
        None => entropy_numeric(fam, theta),
    }
}

/// `∫ p log p` by quadrature.
pub fn entropy_numeric(fam: &dyn Family, theta: &[f64]) -> Result<f64> {
    check_theta(fam, theta)?;
    if !fam.atoms(theta).is_empty() {
        return Err(WimError::NotSmooth {
            family: fam.name(),
            what: "the differential entropy".into(),
        });
    }
    let s = fam.support(theta);
    integrate_pieces(
        |x| {
            let p = fam.density(theta, x);
            if p > 0.0 {
                p * p.ln()
            } else {
                0.0
            }
        },
        s.lo,
        s.hi,
        &fam.kinks(theta),
        opts(),
    )
}

/// `KL(p_theta | p_theta*)`; `+inf` when `p_theta` puts mass where
/// `p_theta*` has none.
pub fn relative_entropy(fam: &dyn Family, theta: &[f64], theta_star: &[f64]) -> Result<f64> {
    check_theta(fam, theta)?;
    check_theta(fam, theta_star)?;
    match fam.relative_entropy_closed(theta, theta_star) {
        Some(v) => Ok(v),
        None => relative_entropy_numeric(fam, theta, theta_star),
    }
}

const TAIL_MASS: f64 = 1e-15;

/// [`relative_entropy`] by quadrature.
pub fn relative_entropy_numeric(fam: &dyn Family, theta: &[f64], theta_star: &[f64]) -> Result<f64> {
    check_theta(fam, theta)?;
    check_theta(fam, theta_star)?;
    if !fam.atoms(theta).is_empty() {
        return Err(WimError::NotSmooth {
            family: fam.name(),
            what: "the relative entropy".into(),
        });
    }
    let (s, s_star) = (fam.support(theta), fam.support(theta_star));
    if !s_star.contains_interval(&s) {
        return Ok(f64::INFINITY);
    }
    let mut cuts = fam.kinks(theta);
    cuts.extend(fam.kinks(theta_star));
    // Infinite ends are cut where the mass left over is below double
    // precision, before the reference density underflows.
    let lo = if s.lo.is_finite() {
        s.lo
    } else {
        fam.quantile(theta, TAIL_MASS)
    };
    let hi = if s.hi.is_finite() {
        s.hi
    } else {
        fam.quantile(theta, 1.0 - TAIL_MASS)
    };
    integrate_pieces(
        |x| {
            let p = fam.density(theta, x);
            if p <= 0.0 {
                return 0.0;
            }
            let q = fam.density(theta_star, x);
            if q <= 0.0 {
                return f64::INFINITY;
            }
            p * (p.ln() - q.ln())
        },
        lo,
        hi,
        &cuts,
        opts(),
    )
}

/// Euclidean gradient of the relative entropy in `theta`.
pub fn relative_entropy_grad(fam: &dyn Family, theta: &[f64], theta_star: &[f64]) -> Result<Vec<f64>> {
    check_theta(fam, theta)?;
    check_theta(fam, theta_star)?;
    if let Some(g) = fam.relative_entropy_grad_closed(theta, theta_star) {
        return Ok(g);
    }
    let mut t = theta.to_vec();
    let mut g = vec![0.0; theta.len()];
    for i in 0..theta.len() {
        let h = theta_step(theta[i]);
        t[i] = theta[i] + h;
        let up = relative_entropy(fam, &t, theta_star)?;
        t[i] = theta[i] - h;
        let down = relative_entropy(fam, &t, theta_star)?;
        t[i] = theta[i];
        g[i] = (up - down) / (2.0 * h);
    }
    Ok(g)
}

/// Euclidean Hessian of the relative entropy in `theta`.
fn relative_entropy_euclidean_hessian(fam: &dyn Family, theta: &[f64], theta_star: &[f64]) -> Result<Mat> {
    if let Some(h) = fam.relative_entropy_hessian_closed(theta, theta_star) {
        return Ok(h);
    }
    let d = theta.len();
    let mut m = Mat::zeros(d, d);
    let mut t = theta.to_vec();
    for j in 0..d {
        let h = theta_step(theta[j]);
        t[j] = theta[j] + h;
        let up = relative_entropy_grad(fam, &t, theta_star)?;
        t[j] = theta[j] - h;
        let down = relative_entropy_grad(fam, &t, theta_star)?;
        t[j] = theta[j];
        for i in 0..d {
            m[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Ok(symmetrize(&m))
}

/// `Ĩ(theta | theta*) = ∇H^T G_W^{-1} ∇H`.
pub fn relative_fisher_info(fam: &dyn Family, theta: &[f64], theta_star: &[f64]) -> Result<f64> {
    let g = Vector::from_vec(relative_entropy_grad(fam, theta, theta_star)?);
    let gi = spd_inverse(&metric(fam, theta)?)?;
    Ok(g.dot(&(gi * &g)))
}

/// The three functionals and the Wasserstein gradient at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub theta: ParamPoint,
    pub theta_star: ParamPoint,
    pub h: f64,
    pub h_rel: f64,
    pub i_rel: f64,
    /// `G_W^{-1} ∇H(· | theta*)`.
    pub grad_w: Vec<f64>,
}

pub fn entropy_report(fam: &dyn Family, theta: &[f64], theta_star: &[f64]) -> Result<EntropyReport> {
    let g = Vector::from_vec(relative_entropy_grad(fam, theta, theta_star)?);
    let grad_w = spd_inverse(&metric(fam, theta)?)? * &g;
    Ok(EntropyReport {
        theta: ParamPoint::from(theta),
        theta_star: ParamPoint::from(theta_star),
        h: entropy(fam, theta)?,
        h_rel: relative_entropy(fam, theta, theta_star)?,
        i_rel: g.dot(&grad_w),
        grad_w: grad_w.iter().copied().collect(),
    })
}

/// Christoffel symbols of the Wasserstein metric, `out[k][(i, j)] =
/// Γ^k_ij`, from the closed form or central differences of `G_W`.
pub fn christoffel(fam: &dyn Family, theta: &[f64]) -> Result<Vec<Mat>> {
    check_theta(fam, theta)?;
    if let Some(c) = fam.christoffel_closed(theta) {
        return Ok(c);
    }
    let d = theta.len();
    let nondiff = || WimError::NonDifferentiableMetric { theta: theta.to_vec() };
    // dg[l] = ∂_l G.
    let mut dg = Vec::with_capacity(d);
    let mut t = theta.to_vec();
    for l in 0..d {
        let h = theta_step(theta[l]);
        t[l] = theta[l] + h;
        let up = metric(fam, &t).map_err(|_| nondiff())?;
        t[l] = theta[l] - h;
        let down = metric(fam, &t).map_err(|_| nondiff())?;
        t[l] = theta[l];
        let diff = (up - down) / (2.0 * h);
        if diff.iter().any(|v| !v.is_finite()) {
            return Err(nondiff());
        }
        dg.push(diff);
    }
    let gi = spd_inverse(&metric(fam, theta)?)?;
    let mut out = vec![Mat::zeros(d, d); d];
    for (k, gk) in out.iter_mut().enumerate() {
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for l in 0..d {
                    s += gi[(k, l)] * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]);
                }
                gk[(i, j)] = 0.5 * s;
            }
        }
    }
    Ok(out)
}

/// `a^k + Γ^k_ij v^i v^j`: zero along a geodesic with velocity `v` and
/// acceleration `a`.
pub fn geodesic_residual(fam: &dyn Family, theta: &[f64], velocity: &[f64], acceleration: &[f64]) -> Result<Vec<f64>> {
    let gam = christoffel(fam, theta)?;
    let v = Vector::from_column_slice(velocity);
    Ok(gam
        .iter()
        .zip(acceleration)
        .map(|(g, a)| a + v.dot(&(g * &v)))
        .collect())
}

/// Covariant Hessian of the relative entropy with its ingredients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessianReport {
    pub theta: ParamPoint,
    pub theta_star: ParamPoint,
    #[serde(serialize_with = "serialize_mat")]
    pub hess: Mat,
    #[serde(serialize_with = "serialize_mat")]
    pub euclidean: Mat,
    #[serde(skip)]
    pub christoffel: Vec<Mat>,
    pub gradient: Vec<f64>,
}

pub fn wasserstein_hessian(fam: &dyn Family, theta: &[f64], theta_star: &[f64]) -> Result<HessianReport> {
    check_theta(fam, theta_star)?;
    let gradient = relative_entropy_grad(fam, theta, theta_star)?;
    let euclidean = relative_entropy_euclidean_hessian(fam, theta, theta_star)?;
    let gam = christoffel(fam, theta)?;
    let mut hess = euclidean.clone();
    for (g, dk) in gam.iter().zip(&gradient) {
        hess -= g * *dk;
    }
    Ok(HessianReport {
        theta: ParamPoint::from(theta),
        theta_star: ParamPoint::from(theta_star),
        hess: symmetrize(&hess),
        euclidean,
        christoffel: gam,
        gradient,
    })
}

/// Outcome of the Hessian criterion over a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LsiCertificate {
    pub alpha: f64,
    pub grid_points: usize,
    /// Minimum over the grid of the least eigenvalue of `Hess - 2 alpha G_W`.
    pub min_gap_eig: f64,
    /// Where the minimum is attained.
    pub argmin: ParamPoint,
    pub holds: bool,
}

/// Tolerance on the least gap eigenvalue for a certificate to hold.
pub const RIW_TOL: f64 = 1e-8;

/// Least eigenvalue of `Hess_W H(· | theta*) - 2 alpha G_W` at `theta`.
pub fn gap_eigenvalue(fam: &dyn Family, theta: &[f64], theta_star: &[f64], alpha: f64) -> Result<f64> {
    let h = wasserstein_hessian(fam, theta, theta_star)?;
    Ok(min_eigenvalue(&(&h.hess - metric(fam, theta)? * (2.0 * alpha))))
}

/// Checks `Hess_W H(· | theta*) >= 2 alpha G_W` at every grid point.
pub fn riw_check(fam: &dyn Family, grid: &[Vec<f64>], theta_star: &[f64], alpha: f64) -> Result<LsiCertificate> {
    if grid.is_empty() {
        return Err(WimError::Config("the parameter grid is empty".into()));
    }
    let mut worst = f64::INFINITY;
    let mut argmin = grid[0].clone();
    for theta in grid {
        let e = gap_eigenvalue(fam, theta, theta_star, alpha)?;
        if e < worst {
            worst = e;
            argmin = theta.clone();
        }
    }
    Ok(LsiCertificate {
        alpha,
        grid_points: grid.len(),
        min_gap_eig: worst,
        argmin: ParamPoint::from(argmin),
        holds: worst >= -RIW_TOL,
    })
}

/// Largest `c` with `Hess_W H(· | theta*) >= c G_W` at `theta`, the least
/// generalized eigenvalue of the pair.
pub fn hessian_metric_ratio(fam: &dyn Family, theta: &[f64], theta_star: &[f64]) -> Result<f64> {
    let h = wasserstein_hessian(fam, theta, theta_star)?;
    Ok(generalized_eigenvalues(&h.hess, &metric(fam, theta)?)?[0])
}

/// Largest `alpha` certified on the grid: half the smallest
/// [`hessian_metric_ratio`].
pub fn certified_alpha(fam: &dyn Family, grid: &[Vec<f64>], theta_star: &[f64]) -> Result<f64> {
    let mut best = f64::INFINITY;
    for theta in grid {
        best = best.min(hessian_metric_ratio(fam, theta, theta_star)?);
    }
    Ok(0.5 * best)
}

/// `Ĩ / (2 H)`: the largest `alpha` for which the log-Sobolev inequality
/// holds at this point.
pub fn lsi_ratio(fam: &dyn Family, theta: &[f64], theta_star: &[f64]) -> Result<f64> {
    let h = relative_entropy(fam, theta, theta_star)?;
    if h <= 0.0 {
        return Err(WimError::DivisionByZero(format!(
            "relative entropy vanishes at {theta:?}"
        )));
    }
    Ok(relative_fisher_info(fam, theta, theta_star)? / (2.0 * h))
}

/// Rectangular grid over two coordinates, `n0 x n1` points, row-major in
/// the first coordinate.
pub fn rect_grid(r0: [f64; 2], r1: [f64; 2], n0: usize, n1: usize) -> Vec<Vec<f64>> {
    let lin = |r: [f64; 2], n: usize, k: usize| {
        if n == 1 {
            r[0]
        } else {
            r[0] + (r[1] - r[0]) * k as f64 / (n - 1) as f64
        }
    };
    let mut g = Vec::with_capacity(n0 * n1);
    for a in 0..n0 {
        for b in 0..n1 {
            g.push(vec![lin(r0, n0, a), lin(r1, n1, b)]);
        }
    }
    g
}

/// The default grid for two-parameter location-scale families:
/// `mu* ± 5 sigma*` by `[0.1, 5] sigma*`, 50 x 50.
pub fn default_grid(theta_star: &[f64]) -> Vec<Vec<f64>> {
    let (m, s) = (theta_star[0], theta_star[1]);
    rect_grid([m - 5.0 * s, m + 5.0 * s], [0.1 * s, 5.0 * s], 50, 50)
}

/// Closed-form lower bound for the Laplacian certificate obtained from the
/// diagonal entries of the Hessian against `G_W = diag(1, 2/lambda^4)`:
/// `min{lambda lambda* e, (lambda^2 + lambda* e lambda (m* - m)^2)/2}` with
/// `e = exp(-lambda |m - m*|)`.
pub fn laplacian_alpha_formula(theta: &[f64], theta_star: &[f64]) -> f64 {
    let (l, ls) = (theta[1], theta_star[1]);
    let d = theta[0] - theta_star[0];
    let e = (-l * d.abs()).exp();
    (l * ls * e).min(0.5 * (l * l + ls * e * l * d * d))
}

/// Grid on `m in [m* - big_m, m* + big_m]`, `lambda in [n_lo, n_hi]`, with
/// the kink line `m = m*` removed.
pub fn laplacian_restricted_grid(theta_star: &[f64], big_m: f64, n_lo: f64, n_hi: f64, n: usize) -> Vec<Vec<f64>> {
    let ms = theta_star[0];
    rect_grid([ms - big_m, ms + big_m], [n_lo, n_hi], n, n)
        .into_iter()
        .filter(|t| (t[0] - ms).abs() > 1e-12)
        .collect()
}

/// Wasserstein gradient flow of the relative entropy,
/// `dtheta/dt = -G_W^{-1} ∇H(theta | theta*)`, by classical fourth-order
/// Runge–Kutta. Returns the states at every step including the start.
pub fn gradient_flow(
    fam: &dyn Family,
    theta0: &[f64],
    theta_star: &[f64],
    dt: f64,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let field = |t: &[f64]| -> Result<Vector> {
        let g = Vector::from_vec(relative_entropy_grad(fam, t, theta_star)?);
        Ok(-(spd_inverse(&metric(fam, t)?)? * g))
    };
    let mut out = vec![theta0.to_vec()];
    let mut cur = Vector::from_column_slice(theta0);
    for _ in 0..steps {
        let k1 = field(cur.as_slice())?;
        let k2 = field((&cur + &k1 * (0.5 * dt)).as_slice())?;
        let k3 = field((&cur + &k2 * (0.5 * dt)).as_slice())?;
        let k4 = field((&cur + &k3 * dt).as_slice())?;
        cur += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        out.push(cur.iter().copied().collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{Gaussian, Laplacian};

    #[test]
    fn gaussian_reference_values() {
        assert!((entropy(&Gaussian, &[0.0, 1.0]).unwrap() + 1.418_938_533_204_672_7).abs() < 1e-12);
        assert!((relative_entropy(&Gaussian, &[1.0, 1.0], &[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((relative_fisher_info(&Gaussian, &[1.0, 1.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((lsi_ratio(&Gaussian, &[1.0, 1.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(
            lsi_ratio(&Gaussian, &[0.0, 1.0], &[0.0, 1.0]),
            Err(WimError::DivisionByZero(_))
        ));
    }

    #[test]
    fn laplacian_christoffel_matches_differences() {
        let t = [0.3, 2.0];
        let closed = christoffel(&Laplacian, &t).unwrap();
        assert!((closed[1][(1, 1)] + 1.0).abs() < 1e-15);
        let g = |l: f64| 2.0 / l.powi(4);
        // Γ^λ_λλ = (1/2) g^{-1} ∂_λ g = -2/λ.
        let h = 1e-5;
        let fd = 0.5 * (g(2.0 + h) - g(2.0 - h)) / (2.0 * h) / g(2.0);
        assert!((closed[1][(1, 1)] - fd).abs() < 1e-8);
    }

    #[test]
    fn formula_agrees_on_the_kink_line_limit() {
        let ts = [0.0, 1.0];
        let t = [1e-9, 1.5];
        let c = hessian_metric_ratio(&Laplacian, &t, &ts).unwrap();
        assert!((c - laplacian_alpha_formula(&t, &ts)).abs() < 1e-6);
    }
}
