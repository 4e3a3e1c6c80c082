//! Parametric families of distributions on the real line.
//!
//! A family implements [`Family`]: density, CDF, the parameter gradient of the
//! CDF and an inverse CDF, plus optional closed forms that the geometry and
//! functional modules prefer over quadrature when present. Trait methods take
//! raw `&[f64]` parameters and assume they are valid; the free functions in
//! this module ([`density`], [`cdf`], ...) validate first and are what callers
//! outside the crate should use.
//!
//! Parameter order is fixed per family: Gaussian `(mu, sigma)`, exponential
//! and Laplacian `(m, lambda)` with `lambda` a rate, uniform `(a, b)`,
//! semicircle `(m, R)`, generic location-scale `(m, lambda)` with `lambda` a
//! scale.

mod exponential;
mod gaussian;
mod laplacian;
mod location_scale;
mod product;
mod relu;
mod semicircle;
mod uniform;

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WimError};
use crate::linalg::Mat;

pub use exponential::Exponential;
pub use gaussian::Gaussian;
pub use laplacian::Laplacian;
pub use location_scale::LocationScale;
pub use product::ProductFamily;
pub use relu::{Relu, ReluKind};
pub use semicircle::Semicircle;
pub use uniform::Uniform;

/// A point in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamPoint(Vec<f64>);

impl ParamPoint {
    pub fn new(theta: impl Into<Vec<f64>>) -> Self {
        ParamPoint(theta.into())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ParamPoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParamPoint {
    fn from(v: Vec<f64>) -> Self {
        ParamPoint(v)
    }
}

impl<const N: usize> From<[f64; N]> for ParamPoint {
    fn from(v: [f64; N]) -> Self {
        ParamPoint(v.to_vec())
    }
}

impl From<&[f64]> for ParamPoint {
    fn from(v: &[f64]) -> Self {
        ParamPoint(v.to_vec())
    }
}

/// A closed interval of the real line; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const REAL_LINE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        other.lo >= self.lo && other.hi <= self.hi
    }
}

/// A point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub mass: f64,
}

/// One constraint on the parameter vector. All coordinates must also be finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// `theta[i] > 0`.
    Positive(usize),
    /// `theta[i] < theta[j]`.
    Ordered(usize, usize),
}

/// Checks `theta` against a family's dimension and constraints.
pub fn check_theta(fam: &dyn Family, theta: &[f64]) -> Result<()> {
    if theta.len() != fam.dim() {
        return Err(WimError::DimensionMismatch {
            expected: fam.dim(),
            got: theta.len(),
        });
    }
    let fail = |reason: String| WimError::Domain {
        family: fam.name(),
        theta: theta.to_vec(),
        reason,
    };
    if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
        return Err(fail(format!("{} is not finite", fam.param_names()[i])));
    }
    let names = fam.param_names();
    for c in fam.constraints() {
        match c {
            Constraint::Positive(i) if theta[i] <= 0.0 => {
                return Err(fail(format!("{} must be positive", names[i])));
            }
            Constraint::Ordered(i, j) if theta[i] >= theta[j] => {
                return Err(fail(format!("{} must be less than {}", names[i], names[j])));
            }
            _ => {}
        }
    }
    Ok(())
}

/// Moves `theta` back inside the domain, keeping a margin of `floor` from each
/// boundary. Returns true when anything changed.
pub fn project_theta(fam: &dyn Family, theta: &mut [f64], floor: f64) -> bool {
    let mut changed = false;
    for c in fam.constraints() {
        match c {
            Constraint::Positive(i) => {
                if !(theta[i] >= floor) {
                    theta[i] = floor;
                    changed = true;
                }
            }
            Constraint::Ordered(i, j) => {
                if !(theta[j] - theta[i] >= floor) {
                    theta[j] = theta[i] + floor;
                    changed = true;
                }
            }
        }
    }
    changed
}

/// Central-difference step for parameter coordinate `v`.
pub fn theta_step(v: f64) -> f64 {
    1e-5 * v.abs().max(1.0)
}

/// Step used for spatial finite differences.
pub const X_STEP: f64 = 1e-5;

/// A 1-d parametric family.
///
/// Implementors supply the density, CDF and constraints; everything else has
/// a finite-difference or bisection default that concrete families override
/// with closed forms.
pub trait Family: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    fn param_names(&self) -> Vec<&'static str>;
    fn dim(&self) -> usize {
        self.param_names().len()
    }
    fn constraints(&self) -> Vec<Constraint>;
    fn support(&self, theta: &[f64]) -> Interval;

    /// Density of the absolutely continuous part; 0 outside the support.
    fn density(&self, theta: &[f64], x: f64) -> f64;
    /// Right-continuous CDF.
    fn cdf(&self, theta: &[f64], x: f64) -> f64;

    fn cdf_param_grad(&self, theta: &[f64], x: f64) -> Vec<f64> {
        central_param_grad(theta, |t| self.cdf(t, x))
    }

    /// Generalized inverse `inf{x : F(x) >= u}`.
    fn quantile(&self, theta: &[f64], u: f64) -> f64 {
        bisect_quantile(|x| self.cdf(theta, x), self.support(theta), u)
    }

    /// Interior points where the density is not smooth.
    fn kinks(&self, _theta: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    fn atoms(&self, _theta: &[f64]) -> Vec<Atom> {
        Vec::new()
    }

    /// False for families whose densities are not differentiable in the
    /// parameter (the ReLU push-forwards).
    fn is_smooth(&self) -> bool {
        true
    }

    fn log_density_x_grad(&self, theta: &[f64], x: f64) -> f64 {
        let h = X_STEP * x.abs().max(1.0);
        (self.density(theta, x + h).ln() - self.density(theta, x - h).ln()) / (2.0 * h)
    }

    /// Pointwise `d/dtheta log p(x; theta)` at an interior point of the
    /// support. Defined even when the Fisher score is not (for example the
    /// uniform family, whose support moves with the parameter).
    fn log_density_param_grad(&self, theta: &[f64], x: f64) -> Vec<f64> {
        central_param_grad(theta, |t| self.density(t, x).ln())
    }

    /// Whether the Fisher score of component `i` is well-defined.
    fn fisher_defined(&self, _i: usize) -> bool {
        self.is_smooth()
    }

    /// Spatial derivative of the Fisher score of component `i`.
    fn fisher_score_x_grad(&self, theta: &[f64], i: usize, x: f64) -> Result<f64> {
        let h = X_STEP * x.abs().max(1.0);
        let up = self.log_density_param_grad(theta, x + h)[i];
        let down = self.log_density_param_grad(theta, x - h)[i];
        Ok((up - down) / (2.0 * h))
    }

    fn analytic_wim(&self, _theta: &[f64]) -> Option<Mat> {
        None
    }

    fn analytic_fim(&self, _theta: &[f64]) -> Option<Mat> {
        None
    }

    /// Closed-form Wasserstein score, normalized to zero mean.
    fn analytic_wasserstein_score(&self, _theta: &[f64], _i: usize, _x: f64) -> Option<f64> {
        None
    }

    /// Closed-form spatial derivative of the Wasserstein score.
    fn analytic_wasserstein_score_grad(&self, _theta: &[f64], _i: usize, _x: f64) -> Option<f64> {
        None
    }

    /// `∫ p log p`, the negative differential entropy.
    fn entropy_closed(&self, _theta: &[f64]) -> Option<f64> {
        None
    }

    /// `KL(p_theta | p_theta_star)`.
    fn relative_entropy_closed(&self, _theta: &[f64], _theta_star: &[f64]) -> Option<f64> {
        None
    }

    fn relative_entropy_grad_closed(&self, _theta: &[f64], _theta_star: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Euclidean (coordinate) Hessian of the relative entropy in `theta`.
    fn relative_entropy_hessian_closed(&self, _theta: &[f64], _theta_star: &[f64]) -> Option<Mat> {
        None
    }

    /// Christoffel symbols of the Wasserstein metric: element `k` of the
    /// returned vector is the matrix `Gamma^k_{ij}`.
    fn christoffel_closed(&self, _theta: &[f64]) -> Option<Vec<Mat>> {
        None
    }
}

/// Shared handle to a family.
pub type FamilyRef = Arc<dyn Family>;

/// Central finite-difference gradient of a scalar function of the parameter.
pub fn central_param_grad(theta: &[f64], f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut t = theta.to_vec();
    (0..theta.len())
        .map(|i| {
            let h = theta_step(theta[i]);
            t[i] = theta[i] + h;
            let up = f(&t);
            t[i] = theta[i] - h;
            let down = f(&t);
            t[i] = theta[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Generalized inverse of a CDF by bisection to an absolute tolerance of
/// `1e-12`, expanding the bracket outward from the origin for unbounded
/// supports.
pub fn bisect_quantile(cdf: impl Fn(f64) -> f64, support: Interval, u: f64) -> f64 {
    if u <= 0.0 {
        return support.lo;
    }
    if u >= 1.0 {
        return support.hi;
    }
    let mut lo = support.lo;
    let mut hi = support.hi;
    if lo.is_finite() && cdf(lo) >= u {
        return lo;
    }
    let anchor = if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    };
    if !lo.is_finite() {
        let mut width = 1.0;
        lo = anchor - width;
        while cdf(lo) >= u {
            width *= 2.0;
            lo = anchor - width;
            if !lo.is_finite() {
                return f64::NEG_INFINITY;
            }
        }
    }
    if !hi.is_finite() {
        let mut width = 1.0;
        hi = anchor.max(lo) + width;
        while cdf(hi) < u {
            width *= 2.0;
            hi = anchor.max(lo) + width;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 || mid <= lo || mid >= hi {
            break;
        }
        if cdf(mid) >= u {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Draws one sample by inverting the CDF at a uniform from `(0, 1)`.
pub fn sample<R: Rng + ?Sized>(fam: &dyn Family, theta: &ParamPoint, rng: &mut R) -> Result<f64> {
    check_theta(fam, theta)?;
    Ok(fam.quantile(theta, open_uniform(rng)))
}

/// Uniform draw from the open interval `(0, 1)`.
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand::distributions::Open01)
}

/// Checked density; 0 outside the support.
pub fn density(fam: &dyn Family, theta: &ParamPoint, x: f64) -> Result<f64> {
    check_theta(fam, theta)?;
    Ok(fam.density(theta, x))
}

/// Checked CDF, clamped to `[0, 1]`.
pub fn cdf(fam: &dyn Family, theta: &ParamPoint, x: f64) -> Result<f64> {
    check_theta(fam, theta)?;
    Ok(fam.cdf(theta, x).clamp(0.0, 1.0))
}

pub fn cdf_param_grad(fam: &dyn Family, theta: &ParamPoint, x: f64) -> Result<Vec<f64>> {
    check_theta(fam, theta)?;
    Ok(fam.cdf_param_grad(theta, x))
}

pub fn quantile(fam: &dyn Family, theta: &ParamPoint, u: f64) -> Result<f64> {
    check_theta(fam, theta)?;
    Ok(fam.quantile(theta, u))
}

/// A family selected by name: either a 1-d family or a product of several.
#[derive(Debug, Clone)]
pub enum Model {
    Single(FamilyRef),
    Product(ProductFamily),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Single(f) => f.dim(),
            Model::Product(p) => p.dim(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Model::Single(f) => f.name(),
            Model::Product(p) => p.name(),
        }
    }

    /// The 1-d family, or a configuration error for products.
    pub fn single(&self) -> Result<&FamilyRef> {
        match self {
            Model::Single(f) => Ok(f),
            Model::Product(p) => Err(WimError::Config(format!(
                "`{}` is a product family; this operation needs a 1-d family",
                p.name()
            ))),
        }
    }
}

/// Names accepted by [`by_name`], excluding the `product:` form.
pub const FAMILY_NAMES: &[&str] = &[
    "gaussian",
    "exponential",
    "laplacian",
    "uniform",
    "semicircle",
    "logistic",
    "relu-f",
    "relu-h",
];

/// Looks up a 1-d family by name.
pub fn family(name: &str) -> Result<FamilyRef> {
    let f: FamilyRef = match name.trim() {
        "gaussian" | "normal" => Arc::new(Gaussian),
        "exponential" => Arc::new(Exponential),
        "laplacian" | "laplace" => Arc::new(Laplacian),
        "uniform" => Arc::new(Uniform),
        "semicircle" => Arc::new(Semicircle),
        "logistic" => Arc::new(LocationScale::logistic()),
        "relu-f" => Arc::new(Relu::standard(ReluKind::Shift)),
        "relu-h" => Arc::new(Relu::standard(ReluKind::Floor)),
        other => return Err(WimError::UnknownFamily(other.to_string())),
    };
    Ok(f)
}

/// Looks up a family or product (`product:gaussian,gaussian`) by name.
pub fn by_name(name: &str) -> Result<Model> {
    match name.trim().strip_prefix("product:") {
        Some(list) => {
            let factors = list.split(',').map(family).collect::<Result<Vec<_>>>()?;
            Ok(Model::Product(ProductFamily::new(factors)?))
        }
        None => family(name).map(Model::Single),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_round_trips_names() {
        for name in FAMILY_NAMES {
            assert_eq!(&family(name).unwrap().name(), name);
        }
        assert!(matches!(family("cauchy"), Err(WimError::UnknownFamily(_))));
    }

    #[test]
    fn product_name_parses() {
        let m = by_name("product:gaussian,laplacian").unwrap();
        assert_eq!(m.dim(), 2);
        assert!(m.single().is_err());
    }

    #[test]
    fn domain_checks() {
        let g = Gaussian;
        assert!(check_theta(&g, &[0.0, 1.0]).is_ok());
        assert!(matches!(check_theta(&g, &[0.0, -1.0]), Err(WimError::Domain { .. })));
        assert!(matches!(
            check_theta(&g, &[0.0]),
            Err(WimError::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert!(check_theta(&Uniform, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn projection_applies_floor() {
        let mut t = [0.0, -0.5];
        assert!(project_theta(&Gaussian, &mut t, 1e-3));
        assert_eq!(t, [0.0, 1e-3]);
        let mut u = [1.0, 0.5];
        assert!(project_theta(&Uniform, &mut u, 1e-3));
        assert_eq!(u, [1.0, 1.001]);
    }

    #[test]
    fn bisection_handles_atoms() {
        // Atom of mass 0.3 at 0, then uniform on (0, 1].
        let f = |x: f64| if x < 0.0 { 0.0 } else { (0.3 + 0.7 * x).min(1.0) };
        let s = Interval::new(0.0, 1.0);
        assert_eq!(bisect_quantile(f, s, 0.2), 0.0);
        assert!((bisect_quantile(f, s, 0.65) - 0.5).abs() < 1e-12);
    }
}
