use super::{Constraint, Family, Interval};
use crate::linalg::{from_rows, Mat};

/// Uniform distribution on `[a, b]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl Family for Uniform {
    fn name(&self) -> String {
        "uniform".into()
    }
    fn param_names(&self) -> Vec<&'static str> {
        vec!["a", "b"]
    }
    fn constraints(&self) -> Vec<Constraint> {
        vec![Constraint::Ordered(0, 1)]
    }
    fn support(&self, t: &[f64]) -> Interval {
        Interval::new(t[0], t[1])
    }
    fn density(&self, t: &[f64], x: f64) -> f64 {
        if x < t[0] || x > t[1] {
            0.0
        } else {
            1.0 / (t[1] - t[0])
        }
    }
    fn cdf(&self, t: &[f64], x: f64) -> f64 {
        ((x - t[0]) / (t[1] - t[0])).clamp(0.0, 1.0)
    }
    fn cdf_param_grad(&self, t: &[f64], x: f64) -> Vec<f64> {
        if x < t[0] || x > t[1] {
            return vec![0.0, 0.0];
        }
        let w2 = (t[1] - t[0]).powi(2);
        vec![(x - t[1]) / w2, (t[0] - x) / w2]
    }
    fn quantile(&self, t: &[f64], u: f64) -> f64 {
        t[0] + (t[1] - t[0]) * u.clamp(0.0, 1.0)
    }
    fn log_density_x_grad(&self, _t: &[f64], _x: f64) -> f64 {
        0.0
    }
    fn log_density_param_grad(&self, t: &[f64], _x: f64) -> Vec<f64> {
        let w = t[1] - t[0];
        vec![1.0 / w, -1.0 / w]
    }
    fn fisher_defined(&self, _i: usize) -> bool {
        false
    }
    fn analytic_wim(&self, _t: &[f64]) -> Option<Mat> {
        Some(from_rows(&[&[1.0 / 3.0, 1.0 / 6.0], &[1.0 / 6.0, 1.0 / 3.0]]))
    }
    fn analytic_wasserstein_score(&self, t: &[f64], i: usize, x: f64) -> Option<f64> {
        let w = t[1] - t[0];
        Some(match i {
            0 => -((t[1] - x).powi(2) - w * w / 3.0) / (2.0 * w),
            _ => ((x - t[0]).powi(2) - w * w / 3.0) / (2.0 * w),
        })
    }
    fn analytic_wasserstein_score_grad(&self, t: &[f64], i: usize, x: f64) -> Option<f64> {
        let w = t[1] - t[0];
        Some(match i {
            0 => (t[1] - x) / w,
            _ => (x - t[0]) / w,
        })
    }
    fn entropy_closed(&self, t: &[f64]) -> Option<f64> {
        Some(-(t[1] - t[0]).ln())
    }
}
