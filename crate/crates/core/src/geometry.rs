//! Score functions and information matrices.
//!
//! On the real line the Wasserstein score of component `i` has the closed
//! form `Phi_i(x) = -∫^x (d_i F)/p dz`, normalized to zero mean, and the
//! Wasserstein information matrix is `G_ij = E[d_i F d_j F / p^2]`. Both are
//! computed from closed forms when a family provides them and by adaptive
//! quadrature otherwise. Families with atoms (the ReLU push-forwards) have no
//! smooth density in the parameter, so their metric is recovered from
//! second differences of the squared 2-Wasserstein distance instead.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Result, WimError};
use crate::families::{check_theta, Family, FamilyRef, Interval, Model, ParamPoint, ProductFamily, X_STEP};
use crate::linalg::{frobenius, symmetrize, Mat};
use crate::quad::{gauss_legendre, integrate_pieces, QuadOptions};

/// Which geometry an object belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InfoKind {
    Wasserstein,
    Fisher,
}

/// How an information matrix was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfoMethod {
    Analytic,
    Quadrature,
    DistanceFd,
}

/// Requested evaluation route for [`wim`] and [`fim_with`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MatrixMethod {
    /// Closed form if the family has one, else quadrature; non-smooth
    /// families fall through to the distance estimate.
    #[default]
    Auto,
    Analytic,
    Quadrature,
    /// Second differences of `W2^2` with the given step.
    Distance {
        h: f64,
    },
}

/// A symmetric information matrix tagged with its geometry and origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoMatrix {
    pub kind: InfoKind,
    pub theta: ParamPoint,
    #[serde(serialize_with = "serialize_mat")]
    pub entries: Mat,
    pub method: InfoMethod,
}

pub(crate) fn serialize_mat<S: serde::Serializer>(m: &Mat, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect();
    rows.serialize(s)
}

impl InfoMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }
}

/// One score function frozen at a parameter point.
///
/// For Wasserstein scores without a closed form the normalization constant
/// is integrated once at construction, so repeated evaluation only pays for
/// the antiderivative.
#[derive(Debug, Clone)]
pub struct ScoreField {
    pub kind: InfoKind,
    pub index: usize,
    fam: FamilyRef,
    theta: ParamPoint,
    numeric: Option<NumericScore>,
}

#[derive(Debug, Clone, Copy)]
struct NumericScore {
    anchor: f64,
    shift: f64,
}

impl ScoreField {
    pub fn wasserstein(fam: FamilyRef, theta: impl Into<ParamPoint>, index: usize) -> Result<Self> {
        let theta = theta.into();
        check_score_args(fam.as_ref(), &theta, index)?;
        require_smooth(fam.as_ref(), "the Wasserstein score")?;
        let numeric = if fam
            .analytic_wasserstein_score(&theta, index, fam.quantile(&theta, 0.5))
            .is_some()
        {
            None
        } else {
            Some(numeric_score_constant(fam.as_ref(), &theta, index)?)
        };
        Ok(ScoreField {
            kind: InfoKind::Wasserstein,
            index,
            fam,
            theta,
            numeric,
        })
    }

    pub fn fisher(fam: FamilyRef, theta: impl Into<ParamPoint>, index: usize) -> Result<Self> {
        let theta = theta.into();
        check_score_args(fam.as_ref(), &theta, index)?;
        require_fisher(fam.as_ref(), index, "score")?;
        Ok(ScoreField {
            kind: InfoKind::Fisher,
            index,
            fam,
            theta,
            numeric: None,
        })
    }

    pub fn theta(&self) -> &ParamPoint {
        &self.theta
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (fam, t, i) = (self.fam.as_ref(), self.theta.as_slice(), self.index);
        match self.kind {
            InfoKind::Fisher => Ok(fam.log_density_param_grad(t, x)[i]),
            InfoKind::Wasserstein => match self.numeric {
                None => Ok(fam
                    .analytic_wasserstein_score(t, i, x)
                    .expect("closed form checked at construction")),
                Some(n) => Ok(score_antiderivative(fam, t, i, n.anchor, x)? - n.shift),
            },
        }
    }

    /// Spatial derivative.
    pub fn grad(&self, x: f64) -> Result<f64> {
        match self.kind {
            InfoKind::Fisher => self.fam.fisher_score_x_grad(&self.theta, self.index, x),
            InfoKind::Wasserstein => score_grad_unchecked(self.fam.as_ref(), &self.theta, self.index, x),
        }
    }
}

fn check_score_args(fam: &dyn Family, theta: &[f64], i: usize) -> Result<()> {
    check_theta(fam, theta)?;
    if i >= fam.dim() {
        return Err(WimError::DimensionMismatch {
            expected: fam.dim(),
            got: i + 1,
        });
    }
    Ok(())
}

fn require_smooth(fam: &dyn Family, what: &str) -> Result<()> {
    if fam.is_smooth() {
        Ok(())
    } else {
        Err(WimError::NotSmooth {
            family: fam.name(),
            what: what.to_string(),
        })
    }
}

fn require_fisher(fam: &dyn Family, i: usize, what: &str) -> Result<()> {
    if fam.fisher_defined(i) {
        Ok(())
    } else {
        Err(WimError::NotWellDefined {
            family: fam.name(),
            component: fam.param_names()[i].to_string(),
            what: what.to_string(),
        })
    }
}

/// `-d_i F / p`, taken as zero where both vanish (far tails, outside the
/// support) so that quadrature integrands stay finite.
fn ratio_or_zero(fam: &dyn Family, theta: &[f64], i: usize, z: f64) -> f64 {
    let p = fam.density(theta, z);
    if p <= 0.0 || !p.is_finite() {
        return 0.0;
    }
    -fam.cdf_param_grad(theta, z)[i] / p
}

fn quad_opts() -> QuadOptions {
    QuadOptions::default()
}

/// `∫_{anchor}^{x} -d_i F / p dz`.
fn score_antiderivative(fam: &dyn Family, theta: &[f64], i: usize, anchor: f64, x: f64) -> Result<f64> {
    let kinks = fam.kinks(theta);
    let (lo, hi, sign) = if x >= anchor {
        (anchor, x, 1.0)
    } else {
        (x, anchor, -1.0)
    };
    Ok(sign * integrate_pieces(|z| ratio_or_zero(fam, theta, i, z), lo, hi, &kinks, quad_opts())?)
}

fn numeric_score_constant(fam: &dyn Family, theta: &[f64], i: usize) -> Result<NumericScore> {
    let anchor = fam.quantile(theta, 0.5);
    let s = fam.support(theta);
    let kinks = fam.kinks(theta);
    // E[∫_{anchor}^{X} g] = ∫_{anchor}^{hi} g (1 - F) - ∫_{lo}^{anchor} g F.
    let upper = integrate_pieces(
        |z| ratio_or_zero(fam, theta, i, z) * (1.0 - fam.cdf(theta, z)),
        anchor,
        s.hi,
        &kinks,
        quad_opts(),
    )?;
    let lower = integrate_pieces(
        |z| ratio_or_zero(fam, theta, i, z) * fam.cdf(theta, z),
        s.lo,
        anchor,
        &kinks,
        quad_opts(),
    )?;
    Ok(NumericScore {
        anchor,
        shift: upper - lower,
    })
}

fn check_in_support(fam: &dyn Family, theta: &[f64], x: f64) -> Result<()> {
    let s = fam.support(theta);
    if x.is_finite() && s.contains(x) {
        Ok(())
    } else {
        Err(WimError::Domain {
            family: fam.name(),
            theta: theta.to_vec(),
            reason: format!("x = {x} lies outside the support [{}, {}]", s.lo, s.hi),
        })
    }
}

/// Wasserstein score `Phi_i(x)` with zero mean under `p_theta`.
pub fn wasserstein_score(fam: &dyn Family, theta: &[f64], i: usize, x: f64) -> Result<f64> {
    check_score_args(fam, theta, i)?;
    require_smooth(fam, "the Wasserstein score")?;
    check_in_support(fam, theta, x)?;
    match fam.analytic_wasserstein_score(theta, i, x) {
        Some(v) => Ok(v),
        None => wasserstein_score_numeric(fam, theta, i, x),
    }
}

/// The quadrature route for [`wasserstein_score`], ignoring closed forms.
pub fn wasserstein_score_numeric(fam: &dyn Family, theta: &[f64], i: usize, x: f64) -> Result<f64> {
    check_score_args(fam, theta, i)?;
    require_smooth(fam, "the Wasserstein score")?;
    check_in_support(fam, theta, x)?;
    let n = numeric_score_constant(fam, theta, i)?;
    Ok(score_antiderivative(fam, theta, i, n.anchor, x)? - n.shift)
}

fn score_grad_unchecked(fam: &dyn Family, theta: &[f64], i: usize, x: f64) -> Result<f64> {
    let p = fam.density(theta, x);
    if p <= 0.0 || !p.is_finite() {
        return Err(WimError::DivisionByZero(format!("density vanishes at x = {x}")));
    }
    Ok(match fam.analytic_wasserstein_score_grad(theta, i, x) {
        Some(v) => v,
        None => -fam.cdf_param_grad(theta, x)[i] / p,
    })
}

/// Spatial derivative of the Wasserstein score, `-d_i F(x) / p(x)`.
pub fn wasserstein_score_grad(fam: &dyn Family, theta: &[f64], i: usize, x: f64) -> Result<f64> {
    check_score_args(fam, theta, i)?;
    require_smooth(fam, "the Wasserstein score")?;
    score_grad_unchecked(fam, theta, i, x)
}

/// Fisher score `d_i log p(x)`.
pub fn fisher_score(fam: &dyn Family, theta: &[f64], i: usize, x: f64) -> Result<f64> {
    check_score_args(fam, theta, i)?;
    require_fisher(fam, i, "score")?;
    Ok(fam.log_density_param_grad(theta, x)[i])
}

/// Integrates a symmetric matrix-valued integrand entrywise over the support.
fn integrate_matrix(fam: &dyn Family, theta: &[f64], entry: impl Fn(f64, usize, usize) -> f64) -> Result<Mat> {
    let d = fam.dim();
    let s = fam.support(theta);
    let kinks = fam.kinks(theta);
    let mut m = Mat::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = integrate_pieces(|x| entry(x, i, j), s.lo, s.hi, &kinks, quad_opts())?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// The Wasserstein information matrix.
pub fn wim(fam: &dyn Family, theta: &[f64], method: MatrixMethod) -> Result<InfoMatrix> {
    check_theta(fam, theta)?;
    let make = |entries: Mat, method| InfoMatrix {
        kind: InfoKind::Wasserstein,
        theta: ParamPoint::from(theta),
        entries,
        method,
    };
    match method {
        MatrixMethod::Distance { h } => wim_from_distance(fam, theta, h),
        _ if !fam.is_smooth() => match method {
            MatrixMethod::Auto => wim_from_distance(fam, theta, DEFAULT_DISTANCE_STEP),
            _ => Err(WimError::NotSmooth {
                family: fam.name(),
                what: "the quadrature information matrix".into(),
            }),
        },
        MatrixMethod::Analytic => fam
            .analytic_wim(theta)
            .map(|m| make(m, InfoMethod::Analytic))
            .ok_or_else(|| WimError::Config(format!("`{}` has no closed-form metric", fam.name()))),
        MatrixMethod::Auto if fam.analytic_wim(theta).is_some() => {
            Ok(make(fam.analytic_wim(theta).expect("checked"), InfoMethod::Analytic))
        }
        _ => {
            let m = integrate_matrix(fam, theta, |x, i, j| {
                let p = fam.density(theta, x);
                if p <= 0.0 {
                    return 0.0;
                }
                let g = fam.cdf_param_grad(theta, x);
                g[i] * g[j] / p
            })?;
            Ok(make(m, InfoMethod::Quadrature))
        }
    }
}

/// The Fisher information matrix, closed form where available.
pub fn fim(fam: &dyn Family, theta: &[f64]) -> Result<InfoMatrix> {
    fim_with(fam, theta, MatrixMethod::Auto)
}

/// [`fim`] with an explicit evaluation route.
pub fn fim_with(fam: &dyn Family, theta: &[f64], method: MatrixMethod) -> Result<InfoMatrix> {
    check_theta(fam, theta)?;
    for i in 0..fam.dim() {
        require_fisher(fam, i, "information matrix")?;
    }
    let make = |entries: Mat, method| InfoMatrix {
        kind: InfoKind::Fisher,
        theta: ParamPoint::from(theta),
        entries,
        method,
    };
    let closed = fam.analytic_fim(theta);
    match (method, closed) {
        (MatrixMethod::Analytic | MatrixMethod::Auto, Some(m)) => Ok(make(m, InfoMethod::Analytic)),
        (MatrixMethod::Analytic, None) => Err(WimError::Config(format!(
            "`{}` has no closed-form Fisher matrix",
            fam.name()
        ))),
        (MatrixMethod::Distance { .. }, _) => Err(WimError::Config(
            "the Fisher matrix has no distance-based estimate".into(),
        )),
        _ => {
            let m = integrate_matrix(fam, theta, |x, i, j| {
                let p = fam.density(theta, x);
                if p <= 0.0 {
                    return 0.0;
                }
                let g = fam.log_density_param_grad(theta, x);
                g[i] * g[j] * p
            })?;
            Ok(make(m, InfoMethod::Quadrature))
        }
    }
}

/// A 1-d probability law given through its generalized inverse CDF.
pub trait Distribution1d {
    /// `inf{x : F(x) >= u}` for `u` in `(0, 1)`.
    fn quantile(&self, u: f64) -> f64;

    /// Probability levels at which the quantile function may jump or kink
    /// (the ends of an atom's flat segment, support gaps).
    fn quantile_breaks(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// A family member viewed as a [`Distribution1d`].
#[derive(Debug, Clone, Copy)]
pub struct Member<'a> {
    pub fam: &'a dyn Family,
    pub theta: &'a [f64],
}

impl<'a> Member<'a> {
    pub fn new(fam: &'a dyn Family, theta: &'a [f64]) -> Result<Self> {
        check_theta(fam, theta)?;
        Ok(Member { fam, theta })
    }
}

impl Distribution1d for Member<'_> {
    fn quantile(&self, u: f64) -> f64 {
        self.fam.quantile(self.theta, u)
    }

    fn quantile_breaks(&self) -> Vec<f64> {
        let mut b = Vec::new();
        for a in self.fam.atoms(self.theta) {
            let top = self.fam.cdf(self.theta, a.x);
            b.push(top - a.mass);
            b.push(top);
        }
        for k in self.fam.kinks(self.theta) {
            b.push(self.fam.cdf(self.theta, k));
        }
        b
    }
}

type CdfFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied CDF, validated for monotonicity on construction.
#[derive(Clone)]
pub struct CdfInput {
    cdf: CdfFn,
    support: Interval,
    atoms: Vec<f64>,
}

impl std::fmt::Debug for CdfInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CdfInput")
            .field("support", &self.support)
            .field("atoms", &self.atoms)
            .finish()
    }
}

impl CdfInput {
    /// Checks on a grid of 4001 points that the function maps into `[0, 1]`,
    /// is nondecreasing, and tends to 0 and 1 at the ends of `support`.
    pub fn new(cdf: impl Fn(f64) -> f64 + Send + Sync + 'static, support: Interval) -> Result<Self> {
        let lo = if support.lo.is_finite() { support.lo } else { -1e3 };
        let hi = if support.hi.is_finite() { support.hi } else { 1e3 };
        if !(lo < hi) {
            return Err(WimError::NonCdfInput(format!("empty support [{lo}, {hi}]")));
        }
        let n = 4000;
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=n {
            let x = lo + (hi - lo) * k as f64 / n as f64;
            let v = cdf(x);
            if !(0.0..=1.0).contains(&v) {
                return Err(WimError::NonCdfInput(format!("F({x}) = {v} is outside [0, 1]")));
            }
            if v < prev - 1e-12 {
                return Err(WimError::NonCdfInput(format!("decreases at x = {x}")));
            }
            prev = v;
        }
        let below = if support.lo.is_finite() {
            cdf(lo - 1e-9 * lo.abs().max(1.0))
        } else {
            cdf(lo)
        };
        if below > 1e-9 || cdf(hi) < 1.0 - 1e-9 {
            return Err(WimError::NonCdfInput(
                "does not run from 0 to 1 over the support".into(),
            ));
        }
        Ok(CdfInput {
            cdf: Arc::new(cdf),
            support,
            atoms: Vec::new(),
        })
    }

    /// Declares point masses so the quadrature can split at their levels.
    pub fn with_atoms(mut self, atoms: &[f64]) -> Self {
        self.atoms = atoms.to_vec();
        self
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (self.cdf)(x)
    }
}

impl Distribution1d for CdfInput {
    fn quantile(&self, u: f64) -> f64 {
        crate::families::bisect_quantile(|x| (self.cdf)(x), self.support, u)
    }

    fn quantile_breaks(&self) -> Vec<f64> {
        let mut b = Vec::new();
        for &x in &self.atoms {
            b.push((self.cdf)(x - 1e-12 * x.abs().max(1.0)));
            b.push((self.cdf)(x));
        }
        b
    }
}

const W2_PANELS: usize = 4096;
const W2_GRADING: i32 = 30;

/// Panel edges on `[0, 1]`: uniform panels between the break levels, with
/// geometrically graded refinement at both ends of every segment where
/// quantile functions may be singular.
fn w2_edges(breaks: &[f64]) -> Vec<f64> {
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|u| *u > 0.0 && *u < 1.0 && u.is_finite())
        .collect();
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::new();
    for seg in cuts.windows(2) {
        let (s0, s1) = (seg[0], seg[1]);
        let len = s1 - s0;
        if len <= 0.0 {
            continue;
        }
        let n = ((W2_PANELS as f64 * len).ceil() as usize).max(1);
        let w = len / n as f64;
        for k in 0..=n {
            edges.push(s0 + w * k as f64);
        }
        for k in 1..=W2_GRADING {
            let off = 0.5 * w * 2f64.powi(-k + 1);
            edges.push(s0 + off);
            edges.push(s1 - off);
        }
        edges.push(s1);
    }
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges
}

/// `W2^2` between two laws through the quantile coupling,
/// `∫_0^1 (Qa(u) - Qb(u))^2 du`.
pub fn w2_squared_1d(a: &dyn Distribution1d, b: &dyn Distribution1d) -> Result<f64> {
    let mut breaks = a.quantile_breaks();
    breaks.extend(b.quantile_breaks());
    let edges = w2_edges(&breaks);
    let (nodes, weights) = gauss_legendre(8);
    let mut total = 0.0;
    for e in edges.windows(2) {
        let (c, h) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
        let mut s = 0.0;
        for (z, w) in nodes.iter().zip(&weights) {
            let u = c + h * z;
            let d = a.quantile(u) - b.quantile(u);
            s += w * d * d;
        }
        total += h * s;
    }
    if !total.is_finite() {
        return Err(WimError::QuadratureFailure(
            "quantile difference is not square-integrable".into(),
        ));
    }
    Ok(total)
}

/// 2-Wasserstein distance between two laws on the real line.
pub fn w2_distance_1d(a: &dyn Distribution1d, b: &dyn Distribution1d) -> Result<f64> {
    w2_squared_1d(a, b).map(f64::sqrt)
}

/// `W2^2(p_theta, p_{theta + step})` for one displacement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceProbe {
    pub theta: ParamPoint,
    pub step: Vec<f64>,
    pub w2sq: f64,
}

impl DistanceProbe {
    /// The quadratic-form prediction `step^T G step`.
    pub fn predicted(&self, g: &Mat) -> f64 {
        let v = crate::linalg::Vector::from_column_slice(&self.step);
        (v.transpose() * g * &v)[(0, 0)]
    }
}

pub fn distance_probe(fam: &dyn Family, theta: &[f64], step: &[f64]) -> Result<DistanceProbe> {
    check_theta(fam, theta)?;
    if step.len() != theta.len() {
        return Err(WimError::DimensionMismatch {
            expected: theta.len(),
            got: step.len(),
        });
    }
    let moved: Vec<f64> = theta.iter().zip(step).map(|(t, s)| t + s).collect();
    let w2sq = if step.iter().all(|s| *s == 0.0) {
        0.0
    } else {
        w2_squared_1d(&Member::new(fam, theta)?, &Member::new(fam, &moved)?)?
    };
    Ok(DistanceProbe {
        theta: ParamPoint::from(theta),
        step: step.to_vec(),
        w2sq,
    })
}

/// Step used by [`wim`] when it falls back to the distance estimate.
pub const DEFAULT_DISTANCE_STEP: f64 = 1e-3;
const RICHARDSON_LIMIT: f64 = 1e-3;

fn distance_quadratic_form(fam: &dyn Family, theta: &[f64], v: &[f64], h: f64) -> Result<f64> {
    let shift = |s: f64| -> Vec<f64> { theta.iter().zip(v).map(|(t, d)| t + s * h * d).collect() };
    let here = Member::new(fam, theta)?;
    let (up, down) = (shift(1.0), shift(-1.0));
    let w_up = w2_squared_1d(&here, &Member::new(fam, &up)?)?;
    let w_down = w2_squared_1d(&here, &Member::new(fam, &down)?)?;
    Ok((w_up + w_down) / (2.0 * h * h))
}

fn distance_matrix(fam: &dyn Family, theta: &[f64], h: f64) -> Result<Mat> {
    let d = fam.dim();
    let unit = |i: usize| -> Vec<f64> { (0..d).map(|k| if k == i { 1.0 } else { 0.0 }).collect() };
    let mut m = Mat::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = distance_quadratic_form(fam, theta, &unit(i), h)?;
        for j in 0..i {
            let plus: Vec<f64> = (0..d).map(|k| unit(i)[k] + unit(j)[k]).collect();
            let minus: Vec<f64> = (0..d).map(|k| unit(i)[k] - unit(j)[k]).collect();
            let v = (distance_quadratic_form(fam, theta, &plus, h)? - distance_quadratic_form(fam, theta, &minus, h)?)
                / 4.0;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Wasserstein metric from `W2^2(p_theta, p_{theta +- h v}) / (2 h^2)`
/// along coordinate and diagonal probe directions; off-diagonal entries come
/// from polarization. The estimate at `h` is compared with the one at `h/2`
/// and rejected when they differ by more than `1e-3` relative.
pub fn wim_from_distance(fam: &dyn Family, theta: &[f64], h: f64) -> Result<InfoMatrix> {
    check_theta(fam, theta)?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(WimError::Config(format!("distance step must be positive, got {h}")));
    }
    let coarse = distance_matrix(fam, theta, h)?;
    let fine = distance_matrix(fam, theta, 0.5 * h)?;
    let scale = frobenius(&fine).max(f64::MIN_POSITIVE);
    let rel_err = frobenius(&(&coarse - &fine)) / scale;
    if !(rel_err <= RICHARDSON_LIMIT) {
        return Err(WimError::StepTooSmall {
            rel_err,
            limit: RICHARDSON_LIMIT,
        });
    }
    Ok(InfoMatrix {
        kind: InfoKind::Wasserstein,
        theta: ParamPoint::from(theta),
        entries: symmetrize(&coarse),
        method: InfoMethod::DistanceFd,
    })
}

/// Residual of the weighted Poisson equation at `x`,
/// `(log p)' Phi_i' + Phi_i'' + d_i log p`, which vanishes for the true score.
pub fn poisson_residual(fam: &dyn Family, theta: &[f64], i: usize, x: f64) -> Result<f64> {
    check_score_args(fam, theta, i)?;
    require_smooth(fam, "the Poisson residual")?;
    let h = X_STEP * x.abs().max(1.0);
    let s = fam.support(theta);
    let near_kink = fam.kinks(theta).iter().any(|k| (x - k).abs() <= 2.0 * h);
    if near_kink || x - 2.0 * h < s.lo || x + 2.0 * h > s.hi {
        return Err(WimError::NotSmooth {
            family: fam.name(),
            what: format!("the Poisson residual at x = {x} (kink or support edge)"),
        });
    }
    let g = score_grad_unchecked(fam, theta, i, x)?;
    let lap = (score_grad_unchecked(fam, theta, i, x + h)? - score_grad_unchecked(fam, theta, i, x - h)?) / (2.0 * h);
    Ok(fam.log_density_x_grad(theta, x) * g + lap + fam.log_density_param_grad(theta, x)[i])
}

/// Wasserstein metric of a family or product model.
pub fn model_wim(model: &Model, theta: &[f64], method: MatrixMethod) -> Result<InfoMatrix> {
    match model {
        Model::Single(f) => wim(f.as_ref(), theta, method),
        Model::Product(p) => product_wim(p, theta, method),
    }
}

/// Metric of an independent model as the sum of the factor metrics.
pub fn product_wim(prod: &ProductFamily, theta: &[f64], method: MatrixMethod) -> Result<InfoMatrix> {
    prod.check(theta)?;
    let mut total = Mat::zeros(prod.dim(), prod.dim());
    let mut origin = InfoMethod::Analytic;
    for f in prod.factors() {
        let g = wim(f.as_ref(), theta, method)?;
        if g.method != InfoMethod::Analytic {
            origin = g.method;
        }
        total += g.entries;
    }
    Ok(InfoMatrix {
        kind: InfoKind::Wasserstein,
        theta: ParamPoint::from(theta),
        entries: total,
        method: origin,
    })
}

/// Metric of a two-factor independent model computed directly on the plane:
/// `G_ij = ∫∫ p1 p2 ∇Phi_i . ∇Phi_j` with the separable score
/// `Phi_i(x, y) = Phi_i^1(x) + Phi_i^2(y)`, by nested adaptive quadrature.
pub fn product_wim_joint(prod: &ProductFamily, theta: &[f64]) -> Result<Mat> {
    prod.check(theta)?;
    let [f1, f2] = prod.factors() else {
        return Err(WimError::DimensionMismatch {
            expected: 2,
            got: prod.factors().len(),
        });
    };
    let (f1, f2) = (f1.as_ref(), f2.as_ref());
    let (s1, s2) = (f1.support(theta), f2.support(theta));
    let (k1, k2) = (f1.kinks(theta), f2.kinks(theta));
    let grad_or_zero = |f: &dyn Family, i: usize, x: f64| score_grad_unchecked(f, theta, i, x).unwrap_or(0.0);
    let d = prod.dim();
    let mut m = Mat::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let inner = |x: f64| -> f64 {
                let px = f1.density(theta, x);
                if px <= 0.0 {
                    return 0.0;
                }
                let gx = grad_or_zero(f1, i, x) * grad_or_zero(f1, j, x);
                integrate_pieces(
                    |y| {
                        let py = f2.density(theta, y);
                        if py <= 0.0 {
                            return 0.0;
                        }
                        px * py * (gx + grad_or_zero(f2, i, y) * grad_or_zero(f2, j, y))
                    },
                    s2.lo,
                    s2.hi,
                    &k2,
                    quad_opts(),
                )
                .unwrap_or(f64::NAN)
            };
            let v = integrate_pieces(inner, s1.lo, s1.hi, &k1, quad_opts())?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Poisson residual of the separable score on the plane:
/// `∇log p . ∇Phi_i + ΔPhi_i + d_i log p` at `(x, y)`.
pub fn product_poisson_residual(prod: &ProductFamily, theta: &[f64], i: usize, x: &[f64]) -> Result<f64> {
    prod.check(theta)?;
    if x.len() != prod.factors().len() {
        return Err(WimError::DimensionMismatch {
            expected: prod.factors().len(),
            got: x.len(),
        });
    }
    prod.factors()
        .iter()
        .zip(x)
        .map(|(f, &xi)| poisson_residual(f.as_ref(), theta, i, xi))
        .sum()
}

/// Expectation of `g` under `p_theta`, split at kinks.
pub fn expectation(fam: &dyn Family, theta: &[f64], g: impl Fn(f64) -> f64) -> Result<f64> {
    let s = fam.support(theta);
    let kinks = fam.kinks(theta);
    let cont = integrate_pieces(
        |x| {
            let p = fam.density(theta, x);
            if p <= 0.0 {
                0.0
            } else {
                p * g(x)
            }
        },
        s.lo,
        s.hi,
        &kinks,
        quad_opts(),
    )?;
    let atoms: f64 = fam.atoms(theta).iter().map(|a| a.mass * g(a.x)).sum();
    Ok(cont + atoms)
}

/// Several expectations at once, `E[f(X)]` with `f` writing `n` values,
/// by graded Gauss–Legendre panels in probability space,
/// `E f(X) = ∫_0^1 f(Q(u)) du`. One quantile evaluation serves every
/// output, which suits vector-valued integrands that are costly to evaluate.
pub fn expectation_vec(
    fam: &dyn Family,
    theta: &[f64],
    n: usize,
    f: impl Fn(f64, &mut [f64]) -> Result<()>,
) -> Result<Vec<f64>> {
    check_theta(fam, theta)?;
    let edges = w2_edges(&Member { fam, theta }.quantile_breaks());
    let (nodes, weights) = gauss_legendre(8);
    let mut total = vec![0.0; n];
    let mut buf = vec![0.0; n];
    for e in edges.windows(2) {
        let (c, h) = (0.5 * (e[0] + e[1]), 0.5 * (e[1] - e[0]));
        for (z, w) in nodes.iter().zip(&weights) {
            let x = fam.quantile(theta, c + h * z);
            f(x, &mut buf)?;
            for (t, b) in total.iter_mut().zip(&buf) {
                *t += h * w * b;
            }
        }
    }
    if total.iter().any(|v| !v.is_finite()) {
        return Err(WimError::QuadratureFailure("expectation is not finite".into()));
    }
    Ok(total)
}

/// `E[Phi_i]` under `p_theta`; zero up to quadrature error when the
/// normalization is right. With `numeric` set the closed form is ignored.
pub fn score_mean(fam: &dyn Family, theta: &[f64], i: usize, numeric: bool) -> Result<f64> {
    check_score_args(fam, theta, i)?;
    require_smooth(fam, "the Wasserstein score")?;
    let probe = fam.quantile(theta, 0.5);
    if !numeric && fam.analytic_wasserstein_score(theta, i, probe).is_some() {
        return expectation(fam, theta, |x| {
            fam.analytic_wasserstein_score(theta, i, x).unwrap_or(f64::NAN)
        });
    }
    // Quantile space keeps every evaluation point finite; the antiderivative
    // grows without bound in heavy or long tails.
    let n = numeric_score_constant(fam, theta, i)?;
    let m = expectation_vec(fam, theta, 1, |x, out| {
        out[0] = score_antiderivative(fam, theta, i, n.anchor, x)? - n.shift;
        Ok(())
    })?;
    Ok(m[0])
}
