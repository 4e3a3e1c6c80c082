use std::sync::Arc;

use super::{Atom, Family, FamilyRef, Gaussian, Interval};

/// Which rectifier pushes the source forward.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReluKind {
    /// `f_theta(x) = max(x - theta, 0)`: atom at 0.
    Shift,
    /// `h_theta(x) = max(x, theta)`: atom at `theta`.
    Floor,
}

/// Push-forward of a fixed source distribution through a rectifier with a
/// scalar parameter `theta`. The result has an atom of mass `F0(theta)`, so
/// the density is not differentiable in `theta` and the Fisher matrix does
/// not exist; the Wasserstein matrix is estimated from distances.
#[derive(Debug, Clone)]
pub struct Relu {
    kind: ReluKind,
    source: FamilyRef,
    source_theta: Vec<f64>,
}

impl Relu {
    pub fn new(kind: ReluKind, source: FamilyRef, source_theta: Vec<f64>) -> Self {
        Relu {
            kind,
            source,
            source_theta,
        }
    }

    /// Standard normal source.
    pub fn standard(kind: ReluKind) -> Self {
        Relu::new(kind, Arc::new(Gaussian), vec![0.0, 1.0])
    }

    pub fn kind(&self) -> ReluKind {
        self.kind
    }

    fn f0(&self, x: f64) -> f64 {
        self.source.cdf(&self.source_theta, x)
    }

    /// The closed-form metric: `1 - F0(theta)` for the shift and `F0(theta)`
    /// for the floor.
    pub fn reference_wim(&self, theta: f64) -> f64 {
        match self.kind {
            ReluKind::Shift => 1.0 - self.f0(theta),
            ReluKind::Floor => self.f0(theta),
        }
    }

    /// Source CDF at `x`.
    pub fn source_cdf(&self, x: f64) -> f64 {
        self.f0(x)
    }
}

impl Family for Relu {
    fn name(&self) -> String {
        match self.kind {
            ReluKind::Shift => "relu-f".into(),
            ReluKind::Floor => "relu-h".into(),
        }
    }
    fn param_names(&self) -> Vec<&'static str> {
        vec!["theta"]
    }
    fn constraints(&self) -> Vec<super::Constraint> {
        Vec::new()
    }
    fn support(&self, t: &[f64]) -> Interval {
        let src = self.source.support(&self.source_theta);
        match self.kind {
            ReluKind::Shift => Interval::new(0.0, (src.hi - t[0]).max(0.0)),
            ReluKind::Floor => Interval::new(t[0], src.hi.max(t[0])),
        }
    }
    fn density(&self, t: &[f64], x: f64) -> f64 {
        match self.kind {
            ReluKind::Shift if x > 0.0 => self.source.density(&self.source_theta, x + t[0]),
            ReluKind::Floor if x > t[0] => self.source.density(&self.source_theta, x),
            _ => 0.0,
        }
    }
    fn cdf(&self, t: &[f64], x: f64) -> f64 {
        match self.kind {
            ReluKind::Shift if x >= 0.0 => self.f0(x + t[0]),
            ReluKind::Floor if x >= t[0] => self.f0(x),
            _ => 0.0,
        }
    }
    fn cdf_param_grad(&self, t: &[f64], x: f64) -> Vec<f64> {
        match self.kind {
            ReluKind::Shift if x >= 0.0 => {
                vec![self.source.density(&self.source_theta, x + t[0])]
            }
            // Away from the atom the floor CDF does not depend on theta.
            _ => vec![0.0],
        }
    }
    fn quantile(&self, t: &[f64], u: f64) -> f64 {
        let q = self.source.quantile(&self.source_theta, u);
        match self.kind {
            ReluKind::Shift => (q - t[0]).max(0.0),
            ReluKind::Floor => q.max(t[0]),
        }
    }
    fn atoms(&self, t: &[f64]) -> Vec<Atom> {
        let x = match self.kind {
            ReluKind::Shift => 0.0,
            ReluKind::Floor => t[0],
        };
        vec![Atom { x, mass: self.f0(t[0]) }]
    }
    fn kinks(&self, t: &[f64]) -> Vec<f64> {
        self.atoms(t).iter().map(|a| a.x).collect()
    }
    fn is_smooth(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atom_mass_and_quantiles() {
        let f = Relu::standard(ReluKind::Shift);
        let a = f.atoms(&[0.0]);
        assert_eq!(a[0].x, 0.0);
        assert!((a[0].mass - 0.5).abs() < 1e-15);
        assert_eq!(f.quantile(&[0.0], 0.3), 0.0);
        assert!(f.quantile(&[0.0], 0.7) > 0.0);

        let h = Relu::standard(ReluKind::Floor);
        assert!((h.reference_wim(3.0) - 0.998_650_101_968_369_9).abs() < 1e-12);
        assert_eq!(h.quantile(&[1.0], 0.2), 1.0);
    }
}
