use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use statrs::function::erf::erfc_inv;

use super::{Constraint, Family, Interval};
use crate::error::Result;
use crate::linalg::{diag, Mat};

/// Normal distribution with parameters `(mu, sigma)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Gaussian;

pub(crate) fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

pub(crate) fn std_normal_quantile(u: f64) -> f64 {
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    // statrs' inverse is good to roughly 1e-10; one Halley step against the
    // correctly rounded erfc brings it to working precision.
    let z = -SQRT_2 * erfc_inv(2.0 * u);
    let p = std_normal_pdf(z);
    if p == 0.0 {
        return z;
    }
    let e = (std_normal_cdf(z) - u) / p;
    z - e / (1.0 + 0.5 * z * e)
}

impl Family for Gaussian {
    fn name(&self) -> String {
        "gaussian".into()
    }
    fn param_names(&self) -> Vec<&'static str> {
        vec!["mu", "sigma"]
    }
    fn constraints(&self) -> Vec<Constraint> {
        vec![Constraint::Positive(1)]
    }
    fn support(&self, _theta: &[f64]) -> Interval {
        Interval::REAL_LINE
    }
    fn density(&self, t: &[f64], x: f64) -> f64 {
        std_normal_pdf((x - t[0]) / t[1]) / t[1]
    }
    fn cdf(&self, t: &[f64], x: f64) -> f64 {
        std_normal_cdf((x - t[0]) / t[1])
    }
    fn cdf_param_grad(&self, t: &[f64], x: f64) -> Vec<f64> {
        let z = (x - t[0]) / t[1];
        let p = self.density(t, x);
        vec![-p, -z * p]
    }
    fn quantile(&self, t: &[f64], u: f64) -> f64 {
        t[0] + t[1] * std_normal_quantile(u)
    }
    fn log_density_x_grad(&self, t: &[f64], x: f64) -> f64 {
        -(x - t[0]) / (t[1] * t[1])
    }
    fn log_density_param_grad(&self, t: &[f64], x: f64) -> Vec<f64> {
        let z = (x - t[0]) / t[1];
        vec![z / t[1], (z * z - 1.0) / t[1]]
    }
    fn fisher_score_x_grad(&self, t: &[f64], i: usize, x: f64) -> Result<f64> {
        let s2 = t[1] * t[1];
        Ok(match i {
            0 => 1.0 / s2,
            _ => 2.0 * (x - t[0]) / (s2 * t[1]),
        })
    }
    fn analytic_wim(&self, _t: &[f64]) -> Option<Mat> {
        Some(Mat::identity(2, 2))
    }
    fn analytic_fim(&self, t: &[f64]) -> Option<Mat> {
        let s2 = t[1] * t[1];
        Some(diag(&[1.0 / s2, 2.0 / s2]))
    }
    fn analytic_wasserstein_score(&self, t: &[f64], i: usize, x: f64) -> Option<f64> {
        let d = x - t[0];
        Some(match i {
            0 => d,
            _ => (d * d - t[1] * t[1]) / (2.0 * t[1]),
        })
    }
    fn analytic_wasserstein_score_grad(&self, t: &[f64], i: usize, x: f64) -> Option<f64> {
        Some(match i {
            0 => 1.0,
            _ => (x - t[0]) / t[1],
        })
    }
    fn entropy_closed(&self, t: &[f64]) -> Option<f64> {
        Some(-0.5 * (2.0 * PI).ln() - t[1].ln() - 0.5)
    }
    fn relative_entropy_closed(&self, t: &[f64], s: &[f64]) -> Option<f64> {
        let dm = t[0] - s[0];
        Some(-t[1].ln() + s[1].ln() - 0.5 + (t[1] * t[1] + dm * dm) / (2.0 * s[1] * s[1]))
    }
    fn relative_entropy_grad_closed(&self, t: &[f64], s: &[f64]) -> Option<Vec<f64>> {
        let s2 = s[1] * s[1];
        Some(vec![(t[0] - s[0]) / s2, -1.0 / t[1] + t[1] / s2])
    }
    fn relative_entropy_hessian_closed(&self, t: &[f64], s: &[f64]) -> Option<Mat> {
        let s2 = s[1] * s[1];
        Some(diag(&[1.0 / s2, 1.0 / (t[1] * t[1]) + 1.0 / s2]))
    }
    fn christoffel_closed(&self, _t: &[f64]) -> Option<Vec<Mat>> {
        Some(vec![Mat::zeros(2, 2), Mat::zeros(2, 2)])
    }
}
