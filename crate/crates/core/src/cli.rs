//! Experiment configuration and the command implementations behind the
//! `wimlab` binary.
//!
//! A run is described by an [`ExperimentConfig`]. [`ExperimentConfig::resolve`]
//! fills every default explicitly, and the resolved config is echoed into the
//! [`ResultBundle`], so feeding the echoed config back in reproduces the same
//! CSV output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dynamics::{
    fit_rate, predict_variance_curve, run_ensemble, EnsembleConfig, PredictConfig, RateMeasure, RecursionOrder,
    ScoreKind, VarianceCurve, DEFAULT_T_START,
};
use crate::error::{Result, WimError};
use crate::estimation::{cramer_rao, Statistic};
use crate::families::{by_name, check_theta, FamilyRef, Model, ParamPoint, Relu, ReluKind};
use crate::functional::{certified_alpha, gap_eigenvalue, lsi_ratio, rect_grid, LsiCertificate, RIW_TOL};
use crate::geometry::{
    fim, fisher_score, model_wim, wasserstein_score, wim_from_distance, MatrixMethod, DEFAULT_DISTANCE_STEP,
};
use crate::linalg::Mat;

/// Subcommands of the binary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Info,
    CramerRao,
    Simulate,
    Predict,
    Lsi,
    ReluWim,
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Command::Info => "info",
            Command::CramerRao => "cramer-rao",
            Command::Simulate => "simulate",
            Command::Predict => "predict",
            Command::Lsi => "lsi",
            Command::ReluWim => "relu-wim",
        };
        f.write_str(s)
    }
}

/// One experiment. Fields irrelevant to `command` are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_star: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    /// Polynomial coefficients, lowest degree first, one list per component
    /// of the statistic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_kind: Option<ScoreKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_start: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_grid: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[u64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<RateMeasure>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<RecursionOrder>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Points per axis of the parameter sweep (`lsi`, `relu-wim`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Sweep range for `relu-wim`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(command: Command, family: impl Into<String>) -> Self {
        ExperimentConfig {
            command,
            family: family.into(),
            theta: None,
            theta_star: None,
            theta0: None,
            statistic: None,
            score_kind: None,
            t_start: None,
            t_max: None,
            ensemble: None,
            seed: None,
            record_grid: None,
            fit_window: None,
            measure: None,
            order: None,
            alpha: None,
            grid: None,
            range: None,
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| WimError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| WimError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// A copy with every default made explicit for the configured command.
    pub fn resolve(&self) -> Result<Self> {
        let mut c = self.clone();
        let model = by_name(&c.family)?;
        let d = model.dim();
        let need = |v: &Option<Vec<f64>>, what: &str| -> Result<Vec<f64>> {
            let v = v
                .clone()
                .ok_or_else(|| WimError::Config(format!("`{what}` is required for `{}`", self.command)))?;
            if v.len() != d {
                return Err(WimError::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
            Ok(v)
        };
        match c.command {
            Command::Info => {
                need(&c.theta, "theta")?;
            }
            Command::CramerRao => {
                need(&c.theta, "theta")?;
                match &c.statistic {
                    None => c.statistic = Some(vec![vec![0.0, 0.0, 0.0, 1.0]]),
                    Some(s) if s.is_empty() || s.iter().any(|p| p.is_empty()) => {
                        return Err(WimError::Config(
                            "statistic needs at least one coefficient per component".into(),
                        ))
                    }
                    Some(_) => {}
                }
            }
            Command::Simulate | Command::Predict => {
                let ts = need(&c.theta_star, "theta_star")?;
                c.score_kind.get_or_insert(ScoreKind::Wasserstein);
                c.t_start.get_or_insert(DEFAULT_T_START);
                let t_max = *c.t_max.get_or_insert(10_000);
                c.fit_window.get_or_insert([(t_max / 10).max(1), t_max]);
                c.measure.get_or_insert(RateMeasure::Trace);
                if c.command == Command::Simulate {
                    if c.theta0.is_none() {
                        c.theta0 = Some(default_theta0(&ts));
                    }
                    need(&c.theta0, "theta0")?;
                    c.ensemble.get_or_insert(1000);
                    c.seed.get_or_insert(0);
                } else {
                    c.order.get_or_insert(RecursionOrder::Full);
                }
            }
            Command::Lsi => {
                let ts = need(&c.theta_star, "theta_star")?;
                if d != 2 {
                    return Err(WimError::Config("`lsi` sweeps two-parameter families".into()));
                }
                let n = *c.grid.get_or_insert(50);
                if n < 2 {
                    return Err(WimError::Config("grid needs at least 2 points per axis".into()));
                }
                if c.alpha.is_none() {
                    let fam = model.single()?;
                    c.alpha = Some(certified_alpha(fam.as_ref(), &lsi_grid(&ts, n), &ts)?);
                }
            }
            Command::ReluWim => {
                relu_kind(&c.family)?;
                c.grid.get_or_insert(61);
                c.range.get_or_insert([-3.0, 3.0]);
            }
        }
        Ok(c)
    }
}

/// Default start of a trajectory: `theta* + (1, 0.5, 0.5, ...)`.
pub fn default_theta0(theta_star: &[f64]) -> Vec<f64> {
    theta_star
        .iter()
        .enumerate()
        .map(|(i, v)| v + if i == 0 { 1.0 } else { 0.5 })
        .collect()
}

/// `theta*[0] ± 5 theta*[1]` by `[0.1, 5] theta*[1]`, dropping the line
/// `theta[0] = theta*[0]` where location families have a kink.
fn lsi_grid(ts: &[f64], n: usize) -> Vec<Vec<f64>> {
    let (m, s) = (ts[0], ts[1]);
    rect_grid([m - 5.0 * s, m + 5.0 * s], [0.1 * s, 5.0 * s], n, n)
        .into_iter()
        .filter(|t| t[0] != m)
        .collect()
}

fn relu_kind(name: &str) -> Result<ReluKind> {
    match name.trim() {
        "relu-f" => Ok(ReluKind::Shift),
        "relu-h" => Ok(ReluKind::Floor),
        other => Err(WimError::Config(format!(
            "`relu-wim` needs family relu-f or relu-h, got `{other}`"
        ))),
    }
}

/// A CSV payload.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    fn new(name: &str, header: Vec<String>) -> Self {
        CsvTable {
            name: name.into(),
            header,
            rows: Vec::new(),
        }
    }

    /// Renders with 17 significant digits so values round-trip exactly.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| WimError::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| format_number(*v))).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| WimError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| WimError::Io(e.to_string()))
    }
}

/// `{:.16e}` for finite values; `nan`, `inf`, `-inf` otherwise.
pub fn format_number(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Everything a command produced plus the metadata needed to rerun it.
#[derive(Debug, Clone, Serialize)]
pub struct ResultBundle {
    pub command: Command,
    pub version: String,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub wall_time_s: f64,
    pub result: Value,
    /// Names of the CSV files written next to the JSON.
    pub tables: Vec<String>,
    #[serde(skip)]
    pub csv: Vec<CsvTable>,
}

impl ResultBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    /// Writes `result.json` and one `<name>.csv` per table into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let io = |e: std::io::Error| WimError::Io(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        for t in &self.csv {
            fs::write(dir.join(format!("{}.csv", t.name)), t.to_csv()?).map_err(io)?;
        }
        fs::write(dir.join("result.json"), self.to_json()).map_err(io)
    }
}

/// Resolves the config and runs its command.
pub fn run(config: &ExperimentConfig) -> Result<ResultBundle> {
    let start = Instant::now();
    let cfg = config.resolve()?;
    let (result, csv) = match cfg.command {
        Command::Info => cmd_info(&cfg)?,
        Command::CramerRao => cmd_cramer_rao(&cfg)?,
        Command::Simulate => cmd_simulate(&cfg)?,
        Command::Predict => cmd_predict(&cfg)?,
        Command::Lsi => cmd_lsi(&cfg)?,
        Command::ReluWim => cmd_relu_wim(&cfg)?,
    };
    Ok(ResultBundle {
        command: cfg.command,
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        config: cfg,
        wall_time_s: start.elapsed().as_secs_f64(),
        result,
        tables: csv.iter().map(|t| format!("{}.csv", t.name)).collect(),
        csv,
    })
}

type Output = (Value, Vec<CsvTable>);

fn mat_json(m: &Mat) -> Value {
    json!((0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn single(cfg: &ExperimentConfig) -> Result<FamilyRef> {
    by_name(&cfg.family)?.single().cloned()
}

fn cmd_info(cfg: &ExperimentConfig) -> Result<Output> {
    let model = by_name(&cfg.family)?;
    let theta = cfg.theta.clone().unwrap_or_default();
    let gw = model_wim(&model, &theta, MatrixMethod::Auto)?;
    let fisher = |f: &FamilyRef| fim(f.as_ref(), &theta).map(|g| g.entries);
    let gf = match &model {
        Model::Single(f) => fisher(f),
        Model::Product(p) => p
            .factors()
            .iter()
            .map(fisher)
            .try_fold(Mat::zeros(p.dim(), p.dim()), |acc, g| g.map(|g| acc + g)),
    };
    let gf_json = match gf {
        Ok(m) => mat_json(&m),
        Err(WimError::NotWellDefined { .. }) => json!("not-well-defined"),
        Err(e) => return Err(e),
    };
    let mut tables = Vec::new();
    if let Model::Single(f) = &model {
        let d = f.dim();
        let mut header = vec!["x".to_string()];
        header.extend((0..d).map(|i| format!("wasserstein_score_{i}")));
        header.extend((0..d).map(|i| format!("fisher_score_{i}")));
        let mut t = CsvTable::new("scores", header);
        for k in 0..19 {
            let u = (k as f64 + 1.0) / 20.0;
            let x = f.quantile(&theta, u);
            let mut row = vec![x];
            for i in 0..d {
                row.push(wasserstein_score(f.as_ref(), &theta, i, x).unwrap_or(f64::NAN));
            }
            for i in 0..d {
                row.push(fisher_score(f.as_ref(), &theta, i, x).unwrap_or(f64::NAN));
            }
            t.rows.push(row);
        }
        tables.push(t);
    }
    let result = json!({
        "family": model.name(),
        "theta": theta,
        "wim": mat_json(&gw.entries),
        "wim_method": gw.method,
        "fim": gf_json,
    });
    Ok((result, tables))
}

fn cmd_cramer_rao(cfg: &ExperimentConfig) -> Result<Output> {
    let fam = single(cfg)?;
    let theta = cfg.theta.clone().unwrap_or_default();
    let polys = cfg.statistic.clone().unwrap_or_default();
    let stat = Statistic::polynomials(&polys);
    let report = cramer_rao(fam.as_ref(), &theta, &stat)?;
    let value = serde_json::to_value(&report).map_err(|e| WimError::Io(e.to_string()))?;
    Ok((value, Vec::new()))
}

fn curve_table(curve: &VarianceCurve, d: usize) -> CsvTable {
    let mut header = vec!["t".to_string()];
    for i in 0..d {
        for j in 0..d {
            header.push(format!("V_{i}{j}"));
        }
    }
    header.push("trace".into());
    let mut t = CsvTable::new("curve", header);
    for (time, v) in curve.times.iter().zip(&curve.v) {
        let mut row = vec![*time as f64];
        for i in 0..d {
            for j in 0..d {
                row.push(v[(i, j)]);
            }
        }
        row.push(v.trace());
        t.rows.push(row);
    }
    t
}

fn fit_json(curve: &VarianceCurve, cfg: &ExperimentConfig) -> Result<Value> {
    let window = cfg.fit_window.unwrap_or([1, u64::MAX]);
    let fit = fit_rate(curve, window, cfg.measure.unwrap_or_default())?;
    serde_json::to_value(&fit).map_err(|e| WimError::Io(e.to_string()))
}

fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Output> {
    let fam = single(cfg)?;
    let ens = EnsembleConfig {
        theta_star: ParamPoint::new(cfg.theta_star.clone().unwrap_or_default()),
        theta0: ParamPoint::new(cfg.theta0.clone().unwrap_or_default()),
        kind: cfg.score_kind.unwrap_or(ScoreKind::Wasserstein),
        t_start: cfg.t_start.unwrap_or(DEFAULT_T_START),
        t_max: cfg.t_max.unwrap_or(10_000),
        ensemble: cfg.ensemble.unwrap_or(1000),
        seed: cfg.seed.unwrap_or(0),
        grid: cfg.record_grid.clone(),
    };
    let curve = run_ensemble(fam.as_ref(), &ens)?;
    let result = json!({
        "rate_fit": fit_json(&curve, cfg)?,
        "ensemble": curve.ensemble_size,
        "escaped": curve.escaped,
        "escaped_fraction": curve.escaped as f64 / curve.ensemble_size as f64,
    });
    Ok((result, vec![curve_table(&curve, fam.dim())]))
}

fn cmd_predict(cfg: &ExperimentConfig) -> Result<Output> {
    let fam = single(cfg)?;
    let pc = PredictConfig {
        theta_star: ParamPoint::new(cfg.theta_star.clone().unwrap_or_default()),
        kind: cfg.score_kind.unwrap_or(ScoreKind::Wasserstein),
        t_start: cfg.t_start.unwrap_or(DEFAULT_T_START),
        t_max: cfg.t_max.unwrap_or(10_000),
        v_init: None,
        order: cfg.order.unwrap_or_default(),
        grid: cfg.record_grid.clone(),
    };
    let curve = predict_variance_curve(fam.as_ref(), &pc)?;
    let result = json!({ "rate_fit": fit_json(&curve, cfg)? });
    Ok((result, vec![curve_table(&curve, fam.dim())]))
}

fn cmd_lsi(cfg: &ExperimentConfig) -> Result<Output> {
    let fam = single(cfg)?;
    let ts = cfg.theta_star.clone().unwrap_or_default();
    let alpha = cfg.alpha.unwrap_or(0.0);
    let grid = lsi_grid(&ts, cfg.grid.unwrap_or(50));
    let mut t = CsvTable::new(
        "lsi",
        vec![
            "theta_0".into(),
            "theta_1".into(),
            "lsi_ratio".into(),
            "min_eig_gap".into(),
        ],
    );
    let mut worst = f64::INFINITY;
    let mut argmin = grid[0].clone();
    let mut ratio_inf = f64::INFINITY;
    for theta in &grid {
        let gap = gap_eigenvalue(fam.as_ref(), theta, &ts, alpha)?;
        let ratio = match lsi_ratio(fam.as_ref(), theta, &ts) {
            Ok(r) => r,
            Err(WimError::DivisionByZero(_)) => f64::NAN,
            Err(e) => return Err(e),
        };
        if gap < worst {
            worst = gap;
            argmin = theta.clone();
        }
        if ratio < ratio_inf {
            ratio_inf = ratio;
        }
        t.rows.push(vec![theta[0], theta[1], ratio, gap]);
    }
    let cert = LsiCertificate {
        alpha,
        grid_points: grid.len(),
        min_gap_eig: worst,
        argmin: ParamPoint::new(argmin),
        holds: worst >= -RIW_TOL,
    };
    let mut value = serde_json::to_value(&cert).map_err(|e| WimError::Io(e.to_string()))?;
    value["lsi_ratio_inf"] = json!(ratio_inf);
    Ok((value, vec![t]))
}

fn cmd_relu_wim(cfg: &ExperimentConfig) -> Result<Output> {
    let relu = Relu::standard(relu_kind(&cfg.family)?);
    let [lo, hi] = cfg.range.unwrap_or([-3.0, 3.0]);
    let n = cfg.grid.unwrap_or(61).max(1);
    let mut t = CsvTable::new(
        "relu_wim",
        vec![
            "theta".into(),
            "wim_numeric".into(),
            "wim_analytic".into(),
            "abs_error".into(),
        ],
    );
    let mut max_err: f64 = 0.0;
    for k in 0..n {
        let th = if n == 1 {
            lo
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        };
        check_theta(&relu, &[th])?;
        let g = wim_from_distance(&relu, &[th], DEFAULT_DISTANCE_STEP)?.entries[(0, 0)];
        let a = relu.reference_wim(th);
        max_err = max_err.max((g - a).abs());
        t.rows.push(vec![th, g, a, (g - a).abs()]);
    }
    let fisher = match fim(&relu, &[0.0]) {
        Err(WimError::NotWellDefined { .. }) => json!("not-well-defined"),
        Ok(m) => mat_json(&m.entries),
        Err(e) => return Err(e),
    };
    Ok((json!({ "max_abs_error": max_err, "fim": fisher }), vec![t]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_and_rejects_unknown_fields() {
        let mut c = ExperimentConfig::new(Command::Simulate, "gaussian");
        c.theta_star = Some(vec![20.0, 1.0]);
        let r = c.resolve().unwrap();
        assert_eq!(ExperimentConfig::from_json(&r.to_json()).unwrap(), r);
        assert_eq!(r.theta0, Some(vec![21.0, 1.5]));
        let bad = r#"{"command": "info", "family": "gaussian", "thetaa": [0, 1]}"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(WimError::Config(_))));
    }

    #[test]
    fn numbers_carry_seventeen_digits() {
        assert_eq!(format_number(0.1), "1.0000000000000001e-1");
        assert_eq!(format_number(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(format_number(f64::NAN), "nan");
    }
}
