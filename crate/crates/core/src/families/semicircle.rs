use std::f64::consts::PI;

use super::{Constraint, Family, Interval};
use crate::linalg::{diag, Mat};

/// Wigner semicircle `(2/(pi R^2)) sqrt(R^2 - (x - m)^2)` on `[m - R, m + R]`.
///
/// There is no closed-form inverse CDF, so sampling uses the bisection default.
#[derive(Debug, Clone, Copy, Default)]
pub struct Semicircle;

fn root(r: f64, z: f64) -> f64 {
    (r * r - z * z).max(0.0).sqrt()
}

impl Family for Semicircle {
    fn name(&self) -> String {
        "semicircle".into()
    }
    fn param_names(&self) -> Vec<&'static str> {
        vec!["m", "R"]
    }
    fn constraints(&self) -> Vec<Constraint> {
        vec![Constraint::Positive(1)]
    }
    fn support(&self, t: &[f64]) -> Interval {
        Interval::new(t[0] - t[1], t[0] + t[1])
    }
    fn density(&self, t: &[f64], x: f64) -> f64 {
        let z = x - t[0];
        if z.abs() > t[1] {
            return 0.0;
        }
        2.0 * root(t[1], z) / (PI * t[1] * t[1])
    }
    fn cdf(&self, t: &[f64], x: f64) -> f64 {
        let (z, r) = (x - t[0], t[1]);
        if z <= -r {
            return 0.0;
        }
        if z >= r {
            return 1.0;
        }
        (0.5 + (z * root(r, z) / (r * r) + (z / r).asin()) / PI).clamp(0.0, 1.0)
    }
    fn cdf_param_grad(&self, t: &[f64], x: f64) -> Vec<f64> {
        let (z, r) = (x - t[0], t[1]);
        if z.abs() >= r {
            return vec![0.0, 0.0];
        }
        vec![-self.density(t, x), -2.0 * z * root(r, z) / (PI * r * r * r)]
    }
    fn log_density_x_grad(&self, t: &[f64], x: f64) -> f64 {
        let (z, r) = (x - t[0], t[1]);
        -z / (r * r - z * z)
    }
    fn log_density_param_grad(&self, t: &[f64], x: f64) -> Vec<f64> {
        let (z, r) = (x - t[0], t[1]);
        let q = r * r - z * z;
        vec![z / q, -2.0 / r + r / q]
    }
    fn fisher_defined(&self, _i: usize) -> bool {
        // The support moves with both parameters and the squared scores are
        // not integrable at the edges.
        false
    }
    fn analytic_wim(&self, _t: &[f64]) -> Option<Mat> {
        Some(diag(&[1.0, 0.25]))
    }
    fn analytic_wasserstein_score(&self, t: &[f64], i: usize, x: f64) -> Option<f64> {
        let (z, r) = (x - t[0], t[1]);
        Some(match i {
            0 => z,
            _ => (z * z / 2.0 - r * r / 8.0) / r,
        })
    }
    fn analytic_wasserstein_score_grad(&self, t: &[f64], i: usize, x: f64) -> Option<f64> {
        Some(match i {
            0 => 1.0,
            _ => (x - t[0]) / t[1],
        })
    }
}
