//! Wasserstein covariance of statistics and the Wasserstein–Cramér–Rao bound.
//!
//! For a statistic `T` the bound reads `Cov_W[T] >= D G_W^{-1} D^T` where
//! `Cov_W[T]_{ab} = E[T_a' T_b']` and `D = d E[T] / d theta`. The gradient
//! `D` is computed from the covariance identity
//! `d_j E[T] = E[Phi_j' T'] = -∫ d_j F(x) T'(x) dx`, with a finite-difference
//! cross-check available separately.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, WimError};
use crate::families::{check_theta, theta_step, Family, FamilyRef, ParamPoint, X_STEP};
use crate::geometry::{expectation, serialize_mat, wim, MatrixMethod, ScoreField};
use crate::linalg::{frobenius, min_eigenvalue, spd_inverse, symmetrize, Mat};
use crate::quad::{integrate_pieces, QuadOptions};

type VecFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// A vector-valued statistic `T: R -> R^m` with its spatial gradient.
#[derive(Clone)]
pub struct Statistic {
    dim: usize,
    eval: VecFn,
    grad: VecFn,
    label: String,
}

impl fmt::Debug for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Statistic")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .finish()
    }
}

/// Evaluates `sum_k c_k x^k` and its derivative by Horner's rule.
fn horner(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for &c in coeffs.iter().rev() {
        d = d * x + v;
        v = v * x + c;
    }
    (v, d)
}

impl Statistic {
    /// A statistic with an explicit gradient.
    pub fn new(
        dim: usize,
        eval: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        grad: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Statistic {
            dim,
            eval: Arc::new(eval),
            grad: Arc::new(grad),
            label: "custom".into(),
        }
    }

    /// A statistic whose gradient is a central difference with step
    /// `1e-5 max(1, |x|)`.
    pub fn from_fn(dim: usize, eval: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        let eval: VecFn = Arc::new(eval);
        let e = Arc::clone(&eval);
        let grad = move |x: f64| {
            let h = X_STEP * x.abs().max(1.0);
            let (up, down) = (e(x + h), e(x - h));
            up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        };
        Statistic {
            dim,
            eval,
            grad: Arc::new(grad),
            label: "finite-difference".into(),
        }
    }

    /// Scalar polynomial with coefficients in increasing degree.
    pub fn polynomial(coeffs: &[f64]) -> Self {
        Statistic::polynomials(&[coeffs.to_vec()])
    }

    /// One polynomial per component.
    pub fn polynomials(polys: &[Vec<f64>]) -> Self {
        let p1 = polys.to_vec();
        let p2 = polys.to_vec();
        Statistic {
            dim: polys.len(),
            eval: Arc::new(move |x| p1.iter().map(|c| horner(c, x).0).collect()),
            grad: Arc::new(move |x| p2.iter().map(|c| horner(c, x).1).collect()),
            label: format!("polynomial{polys:?}"),
        }
    }

    /// `T(x) = x^k`.
    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Statistic::polynomial(&c)
    }

    /// The scalar statistic `sum_i w_i Phi_i` built from Wasserstein scores.
    pub fn score_combination(fam: FamilyRef, theta: &[f64], weights: &[f64]) -> Result<Self> {
        if weights.len() != fam.dim() {
            return Err(WimError::DimensionMismatch {
                expected: fam.dim(),
                got: weights.len(),
            });
        }
        let fields = (0..fam.dim())
            .map(|i| ScoreField::wasserstein(Arc::clone(&fam), theta, i))
            .collect::<Result<Vec<_>>>()?;
        let (f1, w1) = (fields.clone(), weights.to_vec());
        let (f2, w2) = (fields, weights.to_vec());
        Ok(Statistic {
            dim: 1,
            eval: Arc::new(move |x| vec![f1.iter().zip(&w1).map(|(f, w)| w * f.eval(x).unwrap_or(f64::NAN)).sum()]),
            grad: Arc::new(move |x| vec![f2.iter().zip(&w2).map(|(f, w)| w * f.grad(x).unwrap_or(f64::NAN)).sum()]),
            label: format!("scores{weights:?}"),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        (self.eval)(x)
    }

    pub fn grad(&self, x: f64) -> Vec<f64> {
        (self.grad)(x)
    }
}

fn opts() -> QuadOptions {
    QuadOptions::default()
}

/// Rejects statistics whose squared gradient is not integrable against
/// `p_theta`.
///
/// The integrand `p |T'|^2` is scanned on 4001 quantile levels; the largest
/// value is localized by ternary search and the product `f(s + delta) delta`
/// is followed as `delta` shrinks. It decays for integrable singularities
/// like `|x|^{-1/2}` and stays flat or grows for `1/|x|` and worse.
pub fn probe_integrability(fam: &dyn Family, theta: &[f64], t: &Statistic) -> Result<()> {
    check_theta(fam, theta)?;
    let f = |x: f64| -> f64 {
        let p = fam.density(theta, x);
        if p <= 0.0 {
            return 0.0;
        }
        p * t.grad(x).iter().map(|g| g * g).sum::<f64>()
    };
    let n = 4000;
    let xs: Vec<f64> = (1..n).map(|k| fam.quantile(theta, k as f64 / n as f64)).collect();
    let mut best = 0;
    for (k, &x) in xs.iter().enumerate() {
        let v = f(x);
        if !v.is_finite() {
            return Err(WimError::NotIntegrable(format!(
                "gradient of `{}` is not finite at x = {x}",
                t.label
            )));
        }
        if v > f(xs[best]) {
            best = k;
        }
    }
    let (mut lo, mut hi) = (xs[best.saturating_sub(1)], xs[(best + 1).min(xs.len() - 1)]);
    for _ in 0..200 {
        let (a, b) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if f(a) < f(b) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let s = 0.5 * (lo + hi);
    for side in [-1.0, 1.0] {
        let growth: Vec<f64> = (4..=10)
            .map(|k| {
                let delta = 10f64.powi(-k) * s.abs().max(1.0);
                f(s + side * delta) * delta
            })
            .collect();
        if growth.iter().any(|g| !g.is_finite()) {
            return Err(WimError::NotIntegrable(format!(
                "gradient of `{}` blows up near x = {s}",
                t.label
            )));
        }
        let (first, last) = (growth[0], growth[growth.len() - 1]);
        if last > 0.0 && last >= 0.5 * first && f(s + side * 1e-10 * s.abs().max(1.0)) > 1e6 * f(xs[0]).max(1.0) {
            return Err(WimError::NotIntegrable(format!(
                "p |T'|^2 grows like 1/|x - {s}| or faster for `{}`",
                t.label
            )));
        }
    }
    Ok(())
}

/// `Cov_W[T1, T2]_{ab} = E[T1_a' T2_b']`.
pub fn wasserstein_covariance(fam: &dyn Family, theta: &[f64], t1: &Statistic, t2: &Statistic) -> Result<Mat> {
    check_theta(fam, theta)?;
    probe_integrability(fam, theta, t1)?;
    probe_integrability(fam, theta, t2)?;
    let same = Arc::ptr_eq(&t1.grad, &t2.grad);
    let mut m = Mat::zeros(t1.dim, t2.dim);
    for a in 0..t1.dim {
        for b in 0..t2.dim {
            if same && b < a {
                m[(a, b)] = m[(b, a)];
                continue;
            }
            m[(a, b)] = expectation(fam, theta, |x| t1.grad(x)[a] * t2.grad(x)[b])?;
        }
    }
    Ok(m)
}

/// `d E[T_a] / d theta_j` through the covariance identity,
/// `-∫ d_j F(x) T_a'(x) dx`.
pub fn expectation_param_grad(fam: &dyn Family, theta: &[f64], t: &Statistic) -> Result<Mat> {
    check_theta(fam, theta)?;
    if !fam.is_smooth() {
        return Err(WimError::NotSmooth {
            family: fam.name(),
            what: "the covariance identity".into(),
        });
    }
    let s = fam.support(theta);
    let kinks = fam.kinks(theta);
    let d = fam.dim();
    let mut m = Mat::zeros(t.dim, d);
    for a in 0..t.dim {
        for j in 0..d {
            m[(a, j)] = -integrate_pieces(
                |x| {
                    let g = fam.cdf_param_grad(theta, x)[j];
                    if g == 0.0 {
                        0.0
                    } else {
                        g * t.grad(x)[a]
                    }
                },
                s.lo,
                s.hi,
                &kinks,
                opts(),
            )?;
        }
    }
    Ok(m)
}

/// Central differences in `theta` of the quadrature expectation `E[T]`.
pub fn expectation_param_grad_fd(fam: &dyn Family, theta: &[f64], t: &Statistic) -> Result<Mat> {
    check_theta(fam, theta)?;
    let d = fam.dim();
    let mut m = Mat::zeros(t.dim, d);
    let mut th = theta.to_vec();
    for j in 0..d {
        let h = theta_step(theta[j]);
        th[j] = theta[j] + h;
        check_theta(fam, &th)?;
        let up: Vec<f64> = (0..t.dim)
            .map(|a| expectation(fam, &th, |x| t.eval(x)[a]))
            .collect::<Result<_>>()?;
        th[j] = theta[j] - h;
        check_theta(fam, &th)?;
        let down: Vec<f64> = (0..t.dim)
            .map(|a| expectation(fam, &th, |x| t.eval(x)[a]))
            .collect::<Result<_>>()?;
        th[j] = theta[j];
        for a in 0..t.dim {
            m[(a, j)] = (up[a] - down[a]) / (2.0 * h);
        }
    }
    Ok(m)
}

/// Both sides of the Wasserstein–Cramér–Rao inequality and their gap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CramerRaoReport {
    pub theta: ParamPoint,
    #[serde(serialize_with = "serialize_mat")]
    pub lhs: Mat,
    #[serde(serialize_with = "serialize_mat")]
    pub rhs: Mat,
    #[serde(serialize_with = "serialize_mat")]
    pub gap: Mat,
    pub min_eig_gap: f64,
    pub efficient: bool,
}

/// Relative Frobenius threshold separating equality from genuine slack.
pub const EFFICIENCY_TOL: f64 = 1e-6;
/// Smallest admissible eigenvalue of the gap matrix.
pub const PSD_TOL: f64 = 1e-8;

pub fn cramer_rao(fam: &dyn Family, theta: &[f64], t: &Statistic) -> Result<CramerRaoReport> {
    let g = wim(fam, theta, MatrixMethod::Auto)?;
    let g_inv = spd_inverse(&g.entries)?;
    let lhs = wasserstein_covariance(fam, theta, t, t)?;
    let dm = expectation_param_grad(fam, theta, t)?;
    let rhs = symmetrize(&(&dm * g_inv * dm.transpose()));
    let gap = symmetrize(&(&lhs - &rhs));
    let min_eig_gap = min_eigenvalue(&gap);
    let efficient = frobenius(&gap) <= EFFICIENCY_TOL * frobenius(&lhs) + 1e-12 && min_eig_gap >= -PSD_TOL;
    Ok(CramerRaoReport {
        theta: ParamPoint::from(theta),
        lhs,
        rhs,
        gap,
        min_eig_gap,
        efficient,
    })
}

/// Squared Wasserstein norm of a scalar statistic's component orthogonal to
/// the span of the score functions; zero exactly for efficient statistics.
pub fn efficiency_residual(fam: &dyn Family, theta: &[f64], t: &Statistic) -> Result<f64> {
    if t.dim != 1 {
        return Err(WimError::DimensionMismatch {
            expected: 1,
            got: t.dim,
        });
    }
    let r = cramer_rao(fam, theta, t)?;
    Ok(r.gap[(0, 0)].max(0.0))
}

/// Random polynomial statistics: `count` vector statistics with `components`
/// polynomials each, degrees drawn uniformly from `1..=max_degree` and
/// coefficients uniform on `[-2, 2]`.
pub fn random_polynomials(count: usize, components: usize, max_degree: usize, seed: u64) -> Vec<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..components)
                .map(|_| {
                    let deg = rng.gen_range(1..=max_degree);
                    (0..=deg).map(|_| rng.gen_range(-2.0..=2.0)).collect()
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::Gaussian;

    #[test]
    fn horner_matches_direct_evaluation() {
        let c = [1.0, -2.0, 0.5, 3.0];
        let x = 1.3_f64;
        let (v, d) = horner(&c, x);
        assert!((v - (1.0 - 2.0 * x + 0.5 * x * x + 3.0 * x.powi(3))).abs() < 1e-14);
        assert!((d - (-2.0 + x + 9.0 * x * x)).abs() < 1e-13);
    }

    #[test]
    fn finite_difference_gradient_tracks_analytic() {
        let t = Statistic::from_fn(1, |x| vec![x.powi(3)]);
        for &x in &[-2.0, 0.1, 3.0] {
            assert!((t.grad(x)[0] - 3.0 * x * x).abs() < 1e-6);
        }
    }

    #[test]
    fn gaussian_cubic_bound() {
        let r = cramer_rao(&Gaussian, &[0.0, 1.0], &Statistic::monomial(3)).unwrap();
        assert!((r.lhs[(0, 0)] - 27.0).abs() < 1e-9);
        assert!((r.rhs[(0, 0)] - 9.0).abs() < 1e-9);
        assert!(!r.efficient);
    }

    #[test]
    fn probe_rejects_inverse_square_root_gradient() {
        let t = Statistic::new(
            1,
            |x: f64| vec![x.abs().sqrt()],
            |x: f64| vec![x.signum() * 0.5 / x.abs().sqrt()],
        );
        assert!(matches!(
            probe_integrability(&Gaussian, &[0.3, 1.0], &t),
            Err(WimError::NotIntegrable(_))
        ));
        let ok = Statistic::new(
            1,
            |x: f64| vec![x.abs().powf(0.75)],
            |x: f64| vec![0.75 * x.signum() * x.abs().powf(-0.25)],
        );
        assert!(probe_integrability(&Gaussian, &[0.3, 1.0], &ok).is_ok());
    }
}
