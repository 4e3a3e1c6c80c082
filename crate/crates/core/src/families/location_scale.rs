use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::{bisect_quantile, Constraint, Family, Interval, X_STEP};
use crate::error::{Result, WimError};
use crate::linalg::{from_rows, Mat};
use crate::quad::{integrate, QuadOptions};

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Location-scale family `p(x; m, lambda) = p0((x - m)/lambda) / lambda` built
/// from a user-supplied standardized density and CDF.
///
/// The first two moments of the base are integrated once at construction;
/// they give the Wasserstein matrix `[[1, E z], [E z, E z^2]]` and the
/// zero-mean scores `lambda (z - E z)` and `lambda (z^2 - E z^2)/2`.
#[derive(Clone)]
pub struct LocationScale {
    name: String,
    pdf: Scalar,
    cdf: Scalar,
    quantile: Option<Scalar>,
    log_pdf_grad: Option<Scalar>,
    base_support: Interval,
    mean: f64,
    second_moment: f64,
}

impl fmt::Debug for LocationScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocationScale")
            .field("name", &self.name)
            .field("base_support", &self.base_support)
            .field("mean", &self.mean)
            .field("second_moment", &self.second_moment)
            .finish()
    }
}

impl LocationScale {
    /// Builds the family from a standardized density and CDF on
    /// `base_support`. Fails when the density does not integrate to one or
    /// the second moment is not finite.
    pub fn new(
        name: impl Into<String>,
        base_support: Interval,
        pdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        cdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let opts = QuadOptions::default();
        let mass = integrate(&pdf, base_support.lo, base_support.hi, opts)?;
        if (mass - 1.0).abs() > 1e-8 {
            return Err(WimError::Config(format!("base density integrates to {mass}, not 1")));
        }
        let mean = integrate(|z| z * pdf(z), base_support.lo, base_support.hi, opts)?;
        let second_moment = integrate(|z| z * z * pdf(z), base_support.lo, base_support.hi, opts)?;
        Ok(LocationScale {
            name: name.into(),
            pdf: Arc::new(pdf),
            cdf: Arc::new(cdf),
            quantile: None,
            log_pdf_grad: None,
            base_support,
            mean,
            second_moment,
        })
    }

    /// Supplies a closed-form standardized quantile function.
    pub fn with_quantile(mut self, q: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.quantile = Some(Arc::new(q));
        self
    }

    /// Supplies `d/dz log p0(z)`; otherwise it is differenced numerically.
    pub fn with_log_pdf_grad(mut self, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.log_pdf_grad = Some(Arc::new(g));
        self
    }

    /// The standard logistic base, `E z = 0`, `E z^2 = pi^2/3`.
    pub fn logistic() -> Self {
        let pdf = |z: f64| {
            let e = (-z.abs()).exp();
            e / ((1.0 + e) * (1.0 + e))
        };
        let cdf = |z: f64| {
            if z >= 0.0 {
                1.0 / (1.0 + (-z).exp())
            } else {
                let e = z.exp();
                e / (1.0 + e)
            }
        };
        LocationScale {
            name: "logistic".into(),
            pdf: Arc::new(pdf),
            cdf: Arc::new(cdf),
            quantile: Some(Arc::new(|u: f64| (u / (1.0 - u)).ln())),
            log_pdf_grad: Some(Arc::new(|z: f64| -(0.5 * z).tanh())),
            base_support: Interval::REAL_LINE,
            mean: 0.0,
            second_moment: PI * PI / 3.0,
        }
    }

    pub fn base_mean(&self) -> f64 {
        self.mean
    }

    pub fn base_second_moment(&self) -> f64 {
        self.second_moment
    }

    fn z(&self, t: &[f64], x: f64) -> f64 {
        (x - t[0]) / t[1]
    }

    fn base_log_grad(&self, z: f64) -> f64 {
        match &self.log_pdf_grad {
            Some(g) => g(z),
            None => {
                let h = X_STEP * z.abs().max(1.0);
                ((self.pdf)(z + h).ln() - (self.pdf)(z - h).ln()) / (2.0 * h)
            }
        }
    }

    /// Optimal transport map from member `from` to member `to`: the affine
    /// map `x -> m2 + (lambda2/lambda1)(x - m1)`.
    pub fn transport_map(from: &[f64], to: &[f64]) -> impl Fn(f64) -> f64 {
        let (m1, l1, m2, l2) = (from[0], from[1], to[0], to[1]);
        move |x| m2 + (l2 / l1) * (x - m1)
    }

    /// Squared 2-Wasserstein distance between two members, from the affine
    /// transport map.
    pub fn w2_squared(&self, a: &[f64], b: &[f64]) -> f64 {
        let dm = a[0] - b[0];
        let dl = a[1] - b[1];
        dm * dm + 2.0 * dm * dl * self.mean + dl * dl * self.second_moment
    }
}

impl Family for LocationScale {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn param_names(&self) -> Vec<&'static str> {
        vec!["m", "lambda"]
    }
    fn constraints(&self) -> Vec<Constraint> {
        vec![Constraint::Positive(1)]
    }
    fn support(&self, t: &[f64]) -> Interval {
        Interval::new(t[0] + t[1] * self.base_support.lo, t[0] + t[1] * self.base_support.hi)
    }
    fn density(&self, t: &[f64], x: f64) -> f64 {
        let z = self.z(t, x);
        if !self.base_support.contains(z) {
            return 0.0;
        }
        (self.pdf)(z) / t[1]
    }
    fn cdf(&self, t: &[f64], x: f64) -> f64 {
        let z = self.z(t, x);
        if z < self.base_support.lo {
            0.0
        } else if z > self.base_support.hi {
            1.0
        } else {
            (self.cdf)(z)
        }
    }
    fn cdf_param_grad(&self, t: &[f64], x: f64) -> Vec<f64> {
        let z = self.z(t, x);
        let p = self.density(t, x);
        vec![-p, -z * p]
    }
    fn quantile(&self, t: &[f64], u: f64) -> f64 {
        let z = match &self.quantile {
            Some(q) => q(u),
            None => bisect_quantile(|z| (self.cdf)(z), self.base_support, u),
        };
        t[0] + t[1] * z
    }
    fn log_density_x_grad(&self, t: &[f64], x: f64) -> f64 {
        self.base_log_grad(self.z(t, x)) / t[1]
    }
    fn log_density_param_grad(&self, t: &[f64], x: f64) -> Vec<f64> {
        let z = self.z(t, x);
        let g = self.base_log_grad(z);
        vec![-g / t[1], -(1.0 + z * g) / t[1]]
    }
    fn fisher_defined(&self, _i: usize) -> bool {
        !self.base_support.lo.is_finite() && !self.base_support.hi.is_finite()
    }
    fn analytic_wim(&self, _t: &[f64]) -> Option<Mat> {
        Some(from_rows(&[&[1.0, self.mean], &[self.mean, self.second_moment]]))
    }
    fn analytic_wasserstein_score(&self, t: &[f64], i: usize, x: f64) -> Option<f64> {
        let z = self.z(t, x);
        Some(match i {
            0 => t[1] * (z - self.mean),
            _ => t[1] * (z * z - self.second_moment) / 2.0,
        })
    }
    fn analytic_wasserstein_score_grad(&self, t: &[f64], i: usize, x: f64) -> Option<f64> {
        Some(match i {
            0 => 1.0,
            _ => self.z(t, x),
        })
    }
}
