use rand::Rng;

use super::{check_theta, open_uniform, FamilyRef};
use crate::error::{Result, WimError};

/// Independent model `p(x_1, ..., x_k; theta) = prod_j p_j(x_j; theta)`: every
/// factor is evaluated at the same parameter vector.
#[derive(Debug, Clone)]
pub struct ProductFamily {
    factors: Vec<FamilyRef>,
}

impl ProductFamily {
    /// Fails unless there is at least one factor and all factors share one
    /// parameter dimension.
    pub fn new(factors: Vec<FamilyRef>) -> Result<Self> {
        let first = factors
            .first()
            .ok_or_else(|| WimError::Config("a product family needs at least one factor".into()))?;
        let d = first.dim();
        if let Some(bad) = factors.iter().find(|f| f.dim() != d) {
            return Err(WimError::DimensionMismatch {
                expected: d,
                got: bad.dim(),
            });
        }
        Ok(ProductFamily { factors })
    }

    pub fn factors(&self) -> &[FamilyRef] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors[0].dim()
    }

    pub fn name(&self) -> String {
        let names: Vec<String> = self.factors.iter().map(|f| f.name()).collect();
        format!("product:{}", names.join(","))
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        self.factors.iter().try_for_each(|f| check_theta(f.as_ref(), theta))
    }

    /// Joint density at a point with one coordinate per factor.
    pub fn density(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        self.check(theta)?;
        if x.len() != self.factors.len() {
            return Err(WimError::DimensionMismatch {
                expected: self.factors.len(),
                got: x.len(),
            });
        }
        Ok(self
            .factors
            .iter()
            .zip(x)
            .map(|(f, &xi)| f.density(theta, xi))
            .product())
    }

    /// Draws each coordinate independently by inverse-CDF sampling.
    pub fn sample<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.check(theta)?;
        Ok(self
            .factors
            .iter()
            .map(|f| f.quantile(theta, open_uniform(rng)))
            .collect())
    }
}
