//! Online natural-gradient estimation and its Wasserstein covariance.
//!
//! The estimator consumes one sample per step,
//!
//! ```text
//! theta_{t+1} = theta_t + (1/t) G_W(theta_t)^{-1} s(x_t; theta_t),
//! ```
//!
//! with `s` either the Wasserstein or the Fisher score. Along each trajectory
//! the sensitivity `S_t = d theta_t / d(x_{t0}, ..., x_{t-1})` obeys
//!
//! ```text
//! S_{t+1} = [ (I + J_t / t) S_t  |  c_t / t ],
//! J_t = d/dtheta [G_W^{-1} s](x_t; theta_t),   c_t = G_W^{-1} d/dx s(x_t; theta_t),
//! ```
//!
//! and the Wasserstein covariance of the estimator is the ensemble mean of
//! `S_t S_t^T`. Ensembles only ever need that Gram matrix, which satisfies
//! `V <- M V M^T + c c^T`, so the full `S_t` is kept only by
//! [`simulate_trajectory`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WimError};
use crate::families::{check_theta, open_uniform, project_theta, Family, ParamPoint};
use crate::geometry::{expectation, expectation_vec, fim, serialize_mat, wasserstein_score_grad, wim, MatrixMethod};
use crate::linalg::{generalized_eigenvalues, max_eigenvalue, spd_inverse, symmetrize, Mat, Vector};

/// Which score drives the update. The preconditioner is always `G_W^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    Wasserstein,
    Fisher,
}

impl std::str::FromStr for ScoreKind {
    type Err = WimError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wasserstein" | "w" => Ok(ScoreKind::Wasserstein),
            "fisher" | "f" => Ok(ScoreKind::Fisher),
            other => Err(WimError::Config(format!("unknown score kind `{other}`"))),
        }
    }
}

/// Lower margin kept from the parameter-domain boundary after an escape.
pub const DOMAIN_FLOOR: f64 = 1e-3;

fn jac_step(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

fn score(fam: &dyn Family, kind: ScoreKind, theta: &[f64], x: f64) -> Result<Vector> {
    let d = fam.dim();
    match kind {
        ScoreKind::Wasserstein => {
            let mut v = Vector::zeros(d);
            for i in 0..d {
                v[i] = match fam.analytic_wasserstein_score(theta, i, x) {
                    Some(s) => s,
                    None => crate::geometry::wasserstein_score_numeric(fam, theta, i, x)?,
                };
            }
            Ok(v)
        }
        ScoreKind::Fisher => Ok(Vector::from_vec(fam.log_density_param_grad(theta, x))),
    }
}

fn score_x_grad(fam: &dyn Family, kind: ScoreKind, theta: &[f64], x: f64) -> Result<Vector> {
    let d = fam.dim();
    let mut v = Vector::zeros(d);
    for i in 0..d {
        v[i] = match kind {
            ScoreKind::Wasserstein => match fam.analytic_wasserstein_score_grad(theta, i, x) {
                Some(g) => g,
                None => wasserstein_score_grad(fam, theta, i, x)?,
            },
            ScoreKind::Fisher => fam.fisher_score_x_grad(theta, i, x)?,
        };
    }
    Ok(v)
}

fn wim_inverse(fam: &dyn Family, theta: &[f64]) -> Result<Mat> {
    let g = match fam.analytic_wim(theta) {
        Some(g) => g,
        None => wim(fam, theta, MatrixMethod::Auto)?.entries,
    };
    if g.nrows() == 2 {
        // Direct 2x2 inverse; this sits on the per-step hot path.
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        if !(det > 0.0 && g[(0, 0)] > 0.0) || !det.is_finite() {
            return Err(WimError::SingularWim);
        }
        return Ok(Mat::from_row_slice(
            2,
            2,
            &[g[(1, 1)] / det, -g[(0, 1)] / det, -g[(1, 0)] / det, g[(0, 0)] / det],
        ));
    }
    spd_inverse(&g)
}

/// The update direction `G_W^{-1} s(x; theta)`.
fn direction(fam: &dyn Family, kind: ScoreKind, theta: &[f64], x: f64) -> Result<Vector> {
    Ok(wim_inverse(fam, theta)? * score(fam, kind, theta, x)?)
}

/// `d/dtheta` of the update direction by central differences.
fn direction_jacobian(fam: &dyn Family, kind: ScoreKind, theta: &[f64], x: f64) -> Result<Mat> {
    let d = theta.len();
    let mut j = Mat::zeros(d, d);
    let mut t = theta.to_vec();
    for k in 0..d {
        let h = jac_step(theta[k]);
        t[k] = theta[k] + h;
        let up = direction(fam, kind, &t, x)?;
        t[k] = theta[k] - h;
        let down = direction(fam, kind, &t, x)?;
        t[k] = theta[k];
        j.set_column(k, &((up - down) / (2.0 * h)));
    }
    Ok(j)
}

/// Checks that the requested score exists for the family.
pub fn check_score_kind(fam: &dyn Family, kind: ScoreKind, theta: &[f64]) -> Result<()> {
    check_theta(fam, theta)?;
    if !fam.is_smooth() {
        return Err(WimError::NotSmooth {
            family: fam.name(),
            what: "the natural-gradient update".into(),
        });
    }
    if kind == ScoreKind::Fisher {
        for i in 0..fam.dim() {
            if !fam.fisher_defined(i) {
                return Err(WimError::NotWellDefined {
                    family: fam.name(),
                    component: fam.param_names()[i].to_string(),
                    what: "score".into(),
                });
            }
        }
    }
    let probe = fam.quantile(theta, 0.37);
    score_x_grad(fam, kind, theta, probe).map(|_| ())
}

/// Estimator state at step `t`: the parameter and the sensitivity to every
/// sample consumed so far (one column per sample).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub t: u64,
    pub theta: Vec<f64>,
    pub sens: Mat,
}

impl TrajectoryState {
    pub fn new(theta: Vec<f64>, t_start: u64) -> Self {
        let d = theta.len();
        TrajectoryState {
            t: t_start,
            theta,
            sens: Mat::zeros(d, 0),
        }
    }

    /// `S_t S_t^T`.
    pub fn gram(&self) -> Mat {
        &self.sens * self.sens.transpose()
    }
}

/// Linearization of one update at `(theta_t, x_t)`.
struct StepLinearization {
    next: Vec<f64>,
    m: Mat,
    c: Vector,
}

fn linearize(fam: &dyn Family, kind: ScoreKind, t: u64, theta: &[f64], x: f64) -> Result<StepLinearization> {
    let rate = 1.0 / t as f64;
    let g_inv = wim_inverse(fam, theta)?;
    let dir = &g_inv * score(fam, kind, theta, x)?;
    let next: Vec<f64> = theta.iter().zip(dir.iter()).map(|(a, b)| a + rate * b).collect();
    let j = direction_jacobian(fam, kind, theta, x)?;
    let m = Mat::identity(theta.len(), theta.len()) + j * rate;
    let c = g_inv * score_x_grad(fam, kind, theta, x)? * rate;
    Ok(StepLinearization { next, m, c })
}

/// One update with sample `x`, propagating the full sensitivity matrix.
/// Fails with [`WimError::DomainEscape`] when the new parameter leaves the
/// domain.
pub fn step(fam: &dyn Family, state: &TrajectoryState, kind: ScoreKind, x: f64) -> Result<TrajectoryState> {
    check_theta(fam, &state.theta)?;
    if state.t == 0 {
        return Err(WimError::Config("step index starts at 1".into()));
    }
    let lin = linearize(fam, kind, state.t, &state.theta, x)?;
    if check_theta(fam, &lin.next).is_err() {
        return Err(WimError::DomainEscape {
            t: state.t,
            theta: lin.next,
        });
    }
    let d = state.theta.len();
    let cols = state.sens.ncols();
    let mut sens = Mat::zeros(d, cols + 1);
    sens.columns_mut(0, cols).copy_from(&(&lin.m * &state.sens));
    sens.set_column(cols, &lin.c);
    Ok(TrajectoryState {
        t: state.t + 1,
        theta: lin.next,
        sens,
    })
}

/// Runs the estimator over a fixed sample sequence starting at step
/// `t_start`, keeping the full sensitivity matrix.
pub fn simulate_trajectory(
    fam: &dyn Family,
    kind: ScoreKind,
    theta0: &[f64],
    t_start: u64,
    samples: &[f64],
) -> Result<TrajectoryState> {
    check_score_kind(fam, kind, theta0)?;
    let mut s = TrajectoryState::new(theta0.to_vec(), t_start);
    for &x in samples {
        s = step(fam, &s, kind, x)?;
    }
    Ok(s)
}

/// Reference sensitivities: central differences of the final parameter with
/// respect to each sample, `d theta_T / d x_s`, one column per sample.
pub fn sensitivity_fd(
    fam: &dyn Family,
    kind: ScoreKind,
    theta0: &[f64],
    t_start: u64,
    samples: &[f64],
    eps: f64,
) -> Result<Mat> {
    let run = |xs: &[f64]| -> Result<Vec<f64>> {
        let mut theta = theta0.to_vec();
        for (k, &x) in xs.iter().enumerate() {
            let dir = direction(fam, kind, &theta, x)?;
            let rate = 1.0 / (t_start + k as u64) as f64;
            for (a, b) in theta.iter_mut().zip(dir.iter()) {
                *a += rate * b;
            }
            check_theta(fam, &theta)?;
        }
        Ok(theta)
    };
    let d = theta0.len();
    let mut out = Mat::zeros(d, samples.len());
    let mut xs = samples.to_vec();
    for s in 0..samples.len() {
        let h = eps * samples[s].abs().max(1.0);
        xs[s] = samples[s] + h;
        let up = run(&xs)?;
        xs[s] = samples[s] - h;
        let down = run(&xs)?;
        xs[s] = samples[s];
        for a in 0..d {
            out[(a, s)] = (up[a] - down[a]) / (2.0 * h);
        }
    }
    Ok(out)
}

/// Recorded Wasserstein covariance `V_t` on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceCurve {
    pub times: Vec<u64>,
    #[serde(serialize_with = "serialize_mats")]
    pub v: Vec<Mat>,
    pub ensemble_size: usize,
    pub seed: u64,
    /// Trajectories that left the parameter domain at least once and were
    /// clamped back.
    pub escaped: usize,
}

fn serialize_mats<S: serde::Serializer>(v: &[Mat], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    struct Wrap<'a>(&'a Mat);
    impl Serialize for Wrap<'_> {
        fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            serialize_mat(self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for m in v {
        seq.serialize_element(&Wrap(m))?;
    }
    seq.end()
}

impl VarianceCurve {
    /// `V_t` at a recorded time.
    pub fn at(&self, t: u64) -> Option<&Mat> {
        self.times.iter().position(|&s| s == t).map(|k| &self.v[k])
    }

    /// Traces of the recorded matrices.
    pub fn traces(&self) -> Vec<f64> {
        self.v.iter().map(|m| m.trace()).collect()
    }

    pub fn last(&self) -> Option<(u64, &Mat)> {
        self.times.last().copied().zip(self.v.last())
    }
}

/// `count` logarithmically spaced integer times from `lo` to `hi`, rounded
/// and deduplicated.
pub fn log_grid(lo: u64, hi: u64, count: usize) -> Vec<u64> {
    if hi <= lo || count < 2 {
        return vec![hi.max(lo)];
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut g: Vec<u64> = (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp().round() as u64)
        .collect();
    g[0] = lo;
    g[count - 1] = hi;
    g.dedup();
    g
}

/// The default recording grid: 40 points from `max(10, t_start + 1)` to
/// `t_max`.
pub fn default_grid(t_start: u64, t_max: u64) -> Vec<u64> {
    log_grid(10.max(t_start + 1).min(t_max), t_max, 40)
}

/// Settings for [`run_ensemble`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub theta_star: ParamPoint,
    pub theta0: ParamPoint,
    pub kind: ScoreKind,
    /// Index of the first step; the first update uses step size `1/t_start`.
    pub t_start: u64,
    pub t_max: u64,
    pub ensemble: usize,
    pub seed: u64,
    /// Recording times; [`default_grid`] when absent.
    pub grid: Option<Vec<u64>>,
}

/// Default first step index of the `1/t` schedule.
pub const DEFAULT_T_START: u64 = 20;

fn worker_count() -> Result<usize> {
    match std::env::var("WIMLAB_THREADS") {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(WimError::Config(format!(
                "WIMLAB_THREADS must be a positive integer, got `{v}`"
            ))),
        },
        _ => Ok(0),
    }
}

/// Builds a worker pool sized by `WIMLAB_THREADS` (all cores when unset).
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count()?)
        .build()
        .map_err(|e| WimError::Config(format!("cannot start worker threads: {e}")))
}

fn validate_grid(grid: &[u64], t_start: u64, t_max: u64) -> Result<()> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(WimError::Config("recording times must be strictly increasing".into()));
    }
    if grid[0] < t_start || grid[grid.len() - 1] > t_max {
        return Err(WimError::Config(format!(
            "recording times must lie in [{t_start}, {t_max}]"
        )));
    }
    Ok(())
}

/// One trajectory's Gram matrices at the grid times and whether it escaped.
fn run_one(fam: &dyn Family, cfg: &EnsembleConfig, grid: &[u64], stream: u64) -> Result<(Vec<Mat>, bool)> {
    let d = fam.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut theta = cfg.theta0.to_vec();
    let mut gram = Mat::zeros(d, d);
    let mut out = Vec::with_capacity(grid.len());
    let mut next = 0;
    let mut escaped = false;
    let mut t = cfg.t_start;
    while next < grid.len() {
        if grid[next] == t {
            out.push(gram.clone());
            next += 1;
            continue;
        }
        let x = fam.quantile(&cfg.theta_star, open_uniform(&mut rng));
        let lin = linearize(fam, cfg.kind, t, &theta, x)?;
        let (mut m, mut c) = (lin.m, lin.c);
        theta = lin.next;
        if check_theta(fam, &theta).is_err() {
            let before = theta.clone();
            if !theta.iter().all(|v| v.is_finite()) {
                return Err(WimError::DomainEscape { t, theta });
            }
            project_theta(fam, &mut theta, DOMAIN_FLOOR);
            // A clamped coordinate no longer depends on the samples.
            for k in 0..d {
                if theta[k] != before[k] {
                    m.row_mut(k).fill(0.0);
                    c[k] = 0.0;
                }
            }
            escaped = true;
        }
        gram = &m * gram * m.transpose() + &c * c.transpose();
        t += 1;
    }
    Ok((out, escaped))
}

/// Runs `ensemble` independent trajectories with samples drawn from
/// `p_{theta_star}` and averages `S_t S_t^T` on the recording grid.
///
/// Trajectory `i` draws from the ChaCha8 stream `i` of the master seed, and
/// the ensemble sum runs in trajectory order, so the result does not depend
/// on the number of worker threads.
pub fn run_ensemble(fam: &dyn Family, cfg: &EnsembleConfig) -> Result<VarianceCurve> {
    check_score_kind(fam, cfg.kind, &cfg.theta0)?;
    check_theta(fam, &cfg.theta_star)?;
    if cfg.ensemble == 0 {
        return Err(WimError::Config("ensemble size must be at least 1".into()));
    }
    if cfg.t_start == 0 || cfg.t_max <= cfg.t_start {
        return Err(WimError::Config(format!(
            "need 1 <= t_start < t_max, got t_start = {}, t_max = {}",
            cfg.t_start, cfg.t_max
        )));
    }
    let grid = cfg.grid.clone().unwrap_or_else(|| default_grid(cfg.t_start, cfg.t_max));
    validate_grid(&grid, cfg.t_start, cfg.t_max)?;
    let pool = thread_pool()?;
    let runs: Vec<Result<(Vec<Mat>, bool)>> = pool.install(|| {
        (0..cfg.ensemble as u64)
            .into_par_iter()
            .map(|i| run_one(fam, cfg, &grid, i))
            .collect()
    });
    let d = fam.dim();
    let mut sum = vec![Mat::zeros(d, d); grid.len()];
    let mut escaped = 0;
    for r in runs {
        let (mats, esc) = r?;
        for (acc, m) in sum.iter_mut().zip(mats) {
            *acc += m;
        }
        escaped += usize::from(esc);
    }
    let n = cfg.ensemble as f64;
    Ok(VarianceCurve {
        times: grid,
        v: sum.into_iter().map(|m| symmetrize(&(m / n))).collect(),
        ensemble_size: cfg.ensemble,
        seed: cfg.seed,
        escaped,
    })
}

/// `𝔍 = E[∇_x s ∇_x s^T]` at `theta_star`.
pub fn score_sensitivity(fam: &dyn Family, theta_star: &[f64], kind: ScoreKind) -> Result<Mat> {
    check_score_kind(fam, kind, theta_star)?;
    let d = fam.dim();
    let mut m = Mat::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = expectation(fam, theta_star, |x| {
                score_x_grad(fam, kind, theta_star, x).map_or(f64::NAN, |g| g[a] * g[b])
            })?;
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    Ok(m)
}

/// `alpha = sup{a : G_F >= a G_W}`, the least generalized eigenvalue.
pub fn poincare_alpha(fam: &dyn Family, theta_star: &[f64]) -> Result<f64> {
    let gf = fim(fam, theta_star)?;
    let gw = wim(fam, theta_star, MatrixMethod::Auto)?;
    Ok(generalized_eigenvalues(&gf.entries, &gw.entries)?[0])
}

/// Truncation level of the deterministic variance recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RecursionOrder {
    /// `V_{t+1} = V - (A V + V A^T)/t + C/t^2` with `A = G_W^{-1} G` and
    /// `C = G_W^{-1} 𝔍 G_W^{-1}`.
    Leading,
    /// `V_{t+1} = E[M V M^T] + E[c c^T]`, `M = I + J(x, theta*)/t`, keeping the
    /// `1/t^2` term of the propagation as well.
    #[default]
    Full,
}

impl std::str::FromStr for RecursionOrder {
    type Err = WimError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "leading" => Ok(RecursionOrder::Leading),
            "full" => Ok(RecursionOrder::Full),
            other => Err(WimError::Config(format!("unknown recursion order `{other}`"))),
        }
    }
}

/// Settings for [`predict_variance_curve`].
#[derive(Debug, Clone, PartialEq)]
pub struct PredictConfig {
    pub theta_star: ParamPoint,
    pub kind: ScoreKind,
    pub t_start: u64,
    pub t_max: u64,
    pub v_init: Option<Mat>,
    pub order: RecursionOrder,
    pub grid: Option<Vec<u64>>,
}

/// Deterministic evolution of `V_t` linearized at `theta_star`.
pub fn predict_variance_curve(fam: &dyn Family, cfg: &PredictConfig) -> Result<VarianceCurve> {
    let ts = &cfg.theta_star;
    check_score_kind(fam, cfg.kind, ts)?;
    if cfg.t_start == 0 || cfg.t_max <= cfg.t_start {
        return Err(WimError::Config("need 1 <= t_start < t_max".into()));
    }
    let d = fam.dim();
    let grid = cfg.grid.clone().unwrap_or_else(|| default_grid(cfg.t_start, cfg.t_max));
    validate_grid(&grid, cfg.t_start, cfg.t_max)?;
    let gw_inv = wim_inverse(fam, ts)?;
    let jj = score_sensitivity(fam, ts, cfg.kind)?;
    let c = symmetrize(&(&gw_inv * jj * &gw_inv));
    let mut v = match &cfg.v_init {
        Some(m) if m.nrows() == d && m.ncols() == d => m.clone(),
        Some(m) => {
            return Err(WimError::DimensionMismatch {
                expected: d,
                got: m.nrows(),
            })
        }
        None => Mat::zeros(d, d),
    };

    // E[J] and E[J_ak J_bl] by quadrature, for the full recursion.
    let (mean_j, pair) = match cfg.order {
        RecursionOrder::Leading => {
            let g = match cfg.kind {
                ScoreKind::Wasserstein => wim(fam, ts, MatrixMethod::Auto)?.entries,
                ScoreKind::Fisher => fim(fam, ts)?.entries,
            };
            (-(&gw_inv * g), None)
        }
        RecursionOrder::Full => {
            // Entries: E[J] (d^2 values) followed by E[J_ak J_bl] (d^4 values).
            let d2 = d * d;
            let moments = expectation_vec(fam, ts, d2 + d2 * d2, |x, out| {
                let j = direction_jacobian(fam, cfg.kind, ts, x)?;
                for a in 0..d {
                    for k in 0..d {
                        out[a * d + k] = j[(a, k)];
                        for b in 0..d {
                            for l in 0..d {
                                out[d2 + ((a * d + k) * d + b) * d + l] = j[(a, k)] * j[(b, l)];
                            }
                        }
                    }
                }
                Ok(())
            })?;
            let mean = Mat::from_row_slice(d, d, &moments[..d2]);
            (mean, Some(moments[d2..].to_vec()))
        }
    };

    let mut out = Vec::with_capacity(grid.len());
    let mut next = 0;
    let mut t = cfg.t_start;
    while next < grid.len() {
        if grid[next] == t {
            out.push(v.clone());
            next += 1;
            continue;
        }
        let r = 1.0 / t as f64;
        let mut nv = &v + (&mean_j * &v + &v * mean_j.transpose()) * r + &c * (r * r);
        if let Some(pair) = &pair {
            for a in 0..d {
                for b in 0..d {
                    let mut s = 0.0;
                    for k in 0..d {
                        for l in 0..d {
                            s += pair[((a * d + k) * d + b) * d + l] * v[(k, l)];
                        }
                    }
                    nv[(a, b)] += s * r * r;
                }
            }
        }
        v = symmetrize(&nv);
        t += 1;
    }
    Ok(VarianceCurve {
        times: grid,
        v: out,
        ensemble_size: 0,
        seed: 0,
        escaped: 0,
    })
}

/// Scalar summary of `V_t` used for rate fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RateMeasure {
    #[default]
    Trace,
    /// Largest eigenvalue: follows the slowest mode when modes decay at
    /// different rates.
    SpectralNorm,
}

impl RateMeasure {
    pub fn of(self, m: &Mat) -> f64 {
        match self {
            RateMeasure::Trace => m.trace(),
            RateMeasure::SpectralNorm => max_eigenvalue(m),
        }
    }
}

/// Power-law fit `V_t ≈ C t^slope` over a window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    #[serde(serialize_with = "serialize_mat")]
    pub constant: Mat,
    pub window: [u64; 2],
    pub r2: f64,
    pub measure: RateMeasure,
    pub points: usize,
}

/// Least-squares slope of `log measure(V_t)` against `log t` over the grid
/// points inside `window`; the constant is the mean of `t^{-slope} V_t`.
pub fn fit_rate(curve: &VarianceCurve, window: [u64; 2], measure: RateMeasure) -> Result<RateFit> {
    let pts: Vec<(f64, f64, &Mat)> = curve
        .times
        .iter()
        .zip(&curve.v)
        .filter(|(t, _)| **t >= window[0] && **t <= window[1])
        .map(|(&t, m)| ((t as f64).ln(), measure.of(m), m))
        .filter(|(_, y, _)| *y > 0.0 && y.is_finite())
        .map(|(x, y, m)| (x, y.ln(), m))
        .collect();
    if pts.len() < 5 {
        return Err(WimError::InsufficientData {
            need: 5,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    let d = pts[0].2.nrows();
    let mut constant = Mat::zeros(d, d);
    for (x, _, m) in &pts {
        constant += *m * (-slope * x).exp();
    }
    Ok(RateFit {
        slope,
        constant: constant / n,
        window,
        r2,
        measure,
        points: pts.len(),
    })
}
