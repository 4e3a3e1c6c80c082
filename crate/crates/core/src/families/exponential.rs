use super::{Constraint, Family, Interval};
use crate::error::Result;
use crate::linalg::{from_rows, Mat};

/// Shifted exponential distribution `lambda e^{-lambda (x - m)}` on `[m, ∞)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exponential;

impl Family for Exponential {
    fn name(&self) -> String {
        "exponential".into()
    }
    fn param_names(&self) -> Vec<&'static str> {
        vec!["m", "lambda"]
    }
    fn constraints(&self) -> Vec<Constraint> {
        vec![Constraint::Positive(1)]
    }
    fn support(&self, t: &[f64]) -> Interval {
        Interval::new(t[0], f64::INFINITY)
    }
    fn density(&self, t: &[f64], x: f64) -> f64 {
        if x < t[0] {
            0.0
        } else {
            t[1] * (-t[1] * (x - t[0])).exp()
        }
    }
    fn cdf(&self, t: &[f64], x: f64) -> f64 {
        if x < t[0] {
            0.0
        } else {
            -(-t[1] * (x - t[0])).exp_m1()
        }
    }
    fn cdf_param_grad(&self, t: &[f64], x: f64) -> Vec<f64> {
        if x < t[0] {
            return vec![0.0, 0.0];
        }
        let e = (-t[1] * (x - t[0])).exp();
        vec![-t[1] * e, (x - t[0]) * e]
    }
    fn quantile(&self, t: &[f64], u: f64) -> f64 {
        if u >= 1.0 {
            return f64::INFINITY;
        }
        t[0] - (-u).ln_1p() / t[1]
    }
    fn log_density_x_grad(&self, t: &[f64], _x: f64) -> f64 {
        -t[1]
    }
    fn log_density_param_grad(&self, t: &[f64], x: f64) -> Vec<f64> {
        vec![t[1], 1.0 / t[1] - (x - t[0])]
    }
    fn fisher_defined(&self, i: usize) -> bool {
        // The support moves with m.
        i == 1
    }
    fn fisher_score_x_grad(&self, _t: &[f64], _i: usize, _x: f64) -> Result<f64> {
        Ok(-1.0)
    }
    fn analytic_wim(&self, t: &[f64]) -> Option<Mat> {
        let l2 = t[1] * t[1];
        Some(from_rows(&[&[1.0, -1.0 / l2], &[-1.0 / l2, 2.0 / (l2 * l2)]]))
    }
    fn analytic_wasserstein_score(&self, t: &[f64], i: usize, x: f64) -> Option<f64> {
        let d = x - t[0];
        let l = t[1];
        Some(match i {
            0 => d - 1.0 / l,
            _ => -(d * d - 2.0 / (l * l)) / (2.0 * l),
        })
    }
    fn analytic_wasserstein_score_grad(&self, t: &[f64], i: usize, x: f64) -> Option<f64> {
        Some(match i {
            0 => 1.0,
            _ => -(x - t[0]) / t[1],
        })
    }
    fn entropy_closed(&self, t: &[f64]) -> Option<f64> {
        Some(t[1].ln() - 1.0)
    }
    fn relative_entropy_closed(&self, t: &[f64], s: &[f64]) -> Option<f64> {
        if t[0] < s[0] {
            return Some(f64::INFINITY);
        }
        Some(t[1].ln() - s[1].ln() - 1.0 + s[1] * (t[0] - s[0] + 1.0 / t[1]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let e = Exponential;
        assert_eq!(e.density(&[0.0, 1.0], 0.0), 1.0);
        assert!((e.cdf_param_grad(&[0.0, 1.0], 1.0)[1] - (-1.0f64).exp()).abs() < 1e-16);
        assert!((e.quantile(&[1.0, 2.0], 0.5) - (1.0 + 2f64.ln() / 2.0)).abs() < 1e-15);
        assert_eq!(e.analytic_wasserstein_score(&[0.0, 1.0], 0, 1.0), Some(0.0));
    }
}
