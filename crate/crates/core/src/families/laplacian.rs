use super::{Constraint, Family, Interval};
use crate::error::{Result, WimError};
use crate::linalg::{diag, from_rows, Mat};

/// Laplace distribution `(lambda/2) e^{-lambda |x - m|}` with rate `lambda`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Laplacian;

impl Family for Laplacian {
    fn name(&self) -> String {
        "laplacian".into()
    }
    fn param_names(&self) -> Vec<&'static str> {
        vec!["m", "lambda"]
    }
    fn constraints(&self) -> Vec<Constraint> {
        vec![Constraint::Positive(1)]
    }
    fn support(&self, _t: &[f64]) -> Interval {
        Interval::REAL_LINE
    }
    fn density(&self, t: &[f64], x: f64) -> f64 {
        0.5 * t[1] * (-t[1] * (x - t[0]).abs()).exp()
    }
    fn cdf(&self, t: &[f64], x: f64) -> f64 {
        let d = x - t[0];
        if d < 0.0 {
            0.5 * (t[1] * d).exp()
        } else {
            1.0 - 0.5 * (-t[1] * d).exp()
        }
    }
    fn cdf_param_grad(&self, t: &[f64], x: f64) -> Vec<f64> {
        let d = x - t[0];
        let e = (-t[1] * d.abs()).exp();
        vec![-0.5 * t[1] * e, 0.5 * d * e]
    }
    fn quantile(&self, t: &[f64], u: f64) -> f64 {
        if u < 0.5 {
            t[0] + (2.0 * u).ln() / t[1]
        } else {
            t[0] - (2.0 * (1.0 - u)).ln() / t[1]
        }
    }
    fn kinks(&self, t: &[f64]) -> Vec<f64> {
        vec![t[0]]
    }
    fn log_density_x_grad(&self, t: &[f64], x: f64) -> f64 {
        -t[1] * (x - t[0]).signum()
    }
    fn log_density_param_grad(&self, t: &[f64], x: f64) -> Vec<f64> {
        let d = x - t[0];
        vec![t[1] * d.signum(), 1.0 / t[1] - d.abs()]
    }
    fn fisher_score_x_grad(&self, t: &[f64], i: usize, x: f64) -> Result<f64> {
        match i {
            0 => Err(WimError::QuadratureFailure(
                "the Laplacian Fisher m-score is a step function; its spatial derivative is a Dirac mass".into(),
            )),
            _ => Ok(-(x - t[0]).signum()),
        }
    }
    fn analytic_wim(&self, t: &[f64]) -> Option<Mat> {
        Some(diag(&[1.0, 2.0 / t[1].powi(4)]))
    }
    fn analytic_fim(&self, t: &[f64]) -> Option<Mat> {
        let l2 = t[1] * t[1];
        Some(diag(&[l2, 1.0 / l2]))
    }
    fn analytic_wasserstein_score(&self, t: &[f64], i: usize, x: f64) -> Option<f64> {
        let d = x - t[0];
        let l = t[1];
        Some(match i {
            0 => d,
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
        Some(-1.0 + t[1].ln() - 2f64.ln())
    }
    fn relative_entropy_closed(&self, t: &[f64], s: &[f64]) -> Option<f64> {
        let (l, ls) = (t[1], s[1]);
        let a = (t[0] - s[0]).abs();
        Some(-1.0 + l.ln() - ls.ln() + ls * a + ls * (-l * a).exp() / l)
    }
    fn relative_entropy_grad_closed(&self, t: &[f64], s: &[f64]) -> Option<Vec<f64>> {
        let (l, ls) = (t[1], s[1]);
        let d = t[0] - s[0];
        let a = d.abs();
        let e = (-l * a).exp();
        Some(vec![
            ls * d.signum() * (1.0 - e),
            -((l * a + 1.0) * ls * e - l) / (l * l),
        ])
    }
    fn relative_entropy_hessian_closed(&self, t: &[f64], s: &[f64]) -> Option<Mat> {
        let (l, ls) = (t[1], s[1]);
        let d = t[0] - s[0];
        let a = d.abs();
        let e = (-l * a).exp();
        let mm = l * ls * e;
        let ml = ls * d * e;
        let ll = -1.0 / (l * l) + ls * e * (l * l * a * a + 2.0 * l * a + 2.0) / (l * l * l);
        Some(from_rows(&[&[mm, ml], &[ml, ll]]))
    }
    fn christoffel_closed(&self, t: &[f64]) -> Option<Vec<Mat>> {
        let mut g2 = Mat::zeros(2, 2);
        g2[(1, 1)] = -2.0 / t[1];
        Some(vec![Mat::zeros(2, 2), g2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fisher_m_score_gradient_is_rejected() {
        assert!(Laplacian.fisher_score_x_grad(&[0.0, 1.0], 0, 0.3).is_err());
        assert_eq!(Laplacian.fisher_score_x_grad(&[0.0, 1.0], 1, 0.3), Ok(-1.0));
    }

    #[test]
    fn quantile_inverts_cdf() {
        let t = [0.5, 2.0];
        for &u in &[1e-9, 0.1, 0.5, 0.77, 1.0 - 1e-9] {
            let x = Laplacian.quantile(&t, u);
            assert!((Laplacian.cdf(&t, x) - u).abs() < 1e-14);
        }
    }
}
