//! Run configuration: a single JSON document of grid overrides plus flags.
//!
//! Keys accepted for every study: `study`, `master_seed`, `output_dir`,
//! `emit_svg`, `threads`. The remaining keys depend on the study and
//! override fields of the default grid; anything else is rejected.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::IoError;
use crate::harness::{
    default_calibration_grid, default_density_study, default_triad_grid, CalibrationGrid, DensityStudy, TriadGrid,
};

pub const DEFAULT_MASTER_SEED: u64 = 20_180_001;
pub const SEED_ENV_VAR: &str = "DIETCALIB_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Calibration,
    Triads,
    Density,
}

impl Study {
    pub fn as_str(&self) -> &'static str {
        match self {
            Study::Calibration => "calibration",
            Study::Triads => "triads",
            Study::Density => "density",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StudyGrid {
    Calibration(CalibrationGrid),
    Triads(TriadGrid),
    Density(DensityStudy),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub study: Study,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub emit_svg: bool,
    pub threads: Option<usize>,
    pub grid: StudyGrid,
}

/// Command-line values; each one, when present, wins over the file.
#[derive(Debug, Clone, Default)]
pub struct ConfigFlags {
    pub study: Option<Study>,
    pub master_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub emit_svg: bool,
    pub replicates: Option<usize>,
    pub threads: Option<usize>,
    /// Value of the seed environment variable, if set.
    pub env_seed: Option<String>,
}

const COMMON_KEYS: &[&str] = &["study", "master_seed", "output_dir", "emit_svg", "threads"];

const CALIBRATION_KEYS: &[&str] = &[
    "alphas",
    "lambdas_wx",
    "rhos_mw",
    "replicates",
    "mu_x",
    "sigma_x",
    "mu_m",
    "lambda_mx",
    "mu_w",
    "sigma_w",
    "n_sub",
    "n_large",
];

const TRIAD_KEYS: &[&str] = &[
    "lambda_pairs",
    "rhos_rw",
    "replicates",
    "mu_x",
    "sigma_x",
    "mu",
    "lambda_mx",
    "alpha",
    "sigma",
    "rho_mr",
    "rho_mw",
    "n",
];

const DENSITY_KEYS: &[&str] = &[
    "alpha",
    "lambda_wx",
    "rhos_mw",
    "n",
    "band_quantile",
    "band_width_sd",
    "mu_x",
    "sigma_x",
    "mu_m",
    "lambda_mx",
    "mu_w",
    "sigma_w",
];

fn allowed_keys(study: Study) -> &'static [&'static str] {
    match study {
        Study::Calibration => CALIBRATION_KEYS,
        Study::Triads => TRIAD_KEYS,
        Study::Density => DENSITY_KEYS,
    }
}

struct Overrides {
    map: Map<String, Value>,
}

impl Overrides {
    fn take<T: DeserializeOwned>(&mut self, key: &str) -> Result<Option<T>, IoError> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => serde_json::from_value(v)
                .map(Some)
                .map_err(|e| IoError::config(key, e.to_string())),
        }
    }

    fn set<T: DeserializeOwned>(&mut self, key: &str, field: &mut T) -> Result<(), IoError> {
        if let Some(v) = self.take(key)? {
            *field = v;
        }
        Ok(())
    }
}

fn check_correlations(key: &str, values: &[f64]) -> Result<(), IoError> {
    for (i, v) in values.iter().enumerate() {
        if !(v.abs() < 1.0) {
            return Err(IoError::config(
                format!("{key}[{i}]"),
                format!("correlation {v} must lie strictly inside (-1, 1)"),
            ));
        }
    }
    Ok(())
}

fn check_positive(key: &str, values: &[f64]) -> Result<(), IoError> {
    for (i, v) in values.iter().enumerate() {
        if !(*v > 0.0) || !v.is_finite() {
            let at = if values.len() == 1 {
                key.to_string()
            } else {
                format!("{key}[{i}]")
            };
            return Err(IoError::config(at, format!("{v} must be positive")));
        }
    }
    Ok(())
}

fn check_nonempty<T>(key: &str, values: &[T]) -> Result<(), IoError> {
    if values.is_empty() {
        return Err(IoError::config(key, "list must not be empty"));
    }
    Ok(())
}

fn build_calibration(o: &mut Overrides) -> Result<CalibrationGrid, IoError> {
    let mut g = default_calibration_grid();
    o.set("alphas", &mut g.alphas)?;
    o.set("lambdas_wx", &mut g.lambdas_wx)?;
    o.set("rhos_mw", &mut g.rhos_mw)?;
    o.set("replicates", &mut g.replicates)?;
    let b = &mut g.base;
    o.set("mu_x", &mut b.mu_x)?;
    o.set("sigma_x", &mut b.sigma_x)?;
    o.set("mu_m", &mut b.mu_m)?;
    o.set("lambda_mx", &mut b.lambda_mx)?;
    o.set("mu_w", &mut b.mu_w)?;
    o.set("sigma_w", &mut b.sigma_w)?;
    o.set("n_sub", &mut b.n_sub)?;
    o.set("n_large", &mut b.n_large)?;
    check_nonempty("alphas", &g.alphas)?;
    check_nonempty("lambdas_wx", &g.lambdas_wx)?;
    check_nonempty("rhos_mw", &g.rhos_mw)?;
    check_positive("alphas", &g.alphas)?;
    check_correlations("rhos_mw", &g.rhos_mw)?;
    check_positive("sigma_x", &[g.base.sigma_x])?;
    check_positive("sigma_w", &[g.base.sigma_w])?;
    Ok(g)
}

fn build_triads(o: &mut Overrides) -> Result<TriadGrid, IoError> {
    let mut g = default_triad_grid();
    let mut pairs: Option<Vec<[f64; 2]>> = None;
    o.set("lambda_pairs", &mut pairs)?;
    if let Some(p) = pairs {
        g.lambda_pairs = p.into_iter().map(|[a, b]| (a, b)).collect();
    }
    o.set("rhos_rw", &mut g.rhos_rw)?;
    o.set("replicates", &mut g.replicates)?;
    let b = &mut g.base;
    o.set("mu_x", &mut b.mu_x)?;
    let sigma_x_override: Option<f64> = o.take("sigma_x")?;
    if let Some(sx) = sigma_x_override {
        // σ_M tracks σ_X unless set explicitly below.
        b.sigma[0] = b.sigma[0] / b.sigma_x * sx;
        b.sigma_x = sx;
    }
    o.set("mu", &mut b.mu)?;
    o.set("lambda_mx", &mut b.lambda[0])?;
    if let Some(alpha) = o.take::<f64>("alpha")? {
        check_positive("alpha", &[alpha])?;
        b.sigma[0] = crate::model::TriadScenario::sigma_m_from_alpha(alpha, b.sigma_x);
    }
    o.set("sigma", &mut b.sigma)?;
    o.set("rho_mr", &mut b.rho.mr)?;
    o.set("rho_mw", &mut b.rho.mw)?;
    o.set("n", &mut b.n)?;
    check_nonempty("lambda_pairs", &g.lambda_pairs)?;
    check_nonempty("rhos_rw", &g.rhos_rw)?;
    check_correlations("rhos_rw", &g.rhos_rw)?;
    check_correlations("rho_mr", &[g.base.rho.mr])?;
    check_correlations("rho_mw", &[g.base.rho.mw])?;
    check_positive("sigma", &g.base.sigma)?;
    check_positive("sigma_x", &[g.base.sigma_x])?;
    Ok(g)
}

fn build_density(o: &mut Overrides) -> Result<DensityStudy, IoError> {
    let mut d = default_density_study();
    let b = &mut d.base;
    o.set("alpha", &mut b.alpha)?;
    o.set("lambda_wx", &mut b.lambda_wx)?;
    o.set("mu_x", &mut b.mu_x)?;
    o.set("sigma_x", &mut b.sigma_x)?;
    o.set("mu_m", &mut b.mu_m)?;
    o.set("lambda_mx", &mut b.lambda_mx)?;
    o.set("mu_w", &mut b.mu_w)?;
    o.set("sigma_w", &mut b.sigma_w)?;
    o.set("rhos_mw", &mut d.rhos_mw)?;
    o.set("n", &mut d.n)?;
    o.set("band_quantile", &mut d.band_quantile)?;
    o.set("band_width_sd", &mut d.band_width_sd)?;
    d.base.n_sub = d.n;
    d.base.n_large = d.n;
    check_nonempty("rhos_mw", &d.rhos_mw)?;
    check_correlations("rhos_mw", &d.rhos_mw)?;
    check_positive("alpha", &[d.base.alpha])?;
    check_positive("band_width_sd", &[d.band_width_sd])?;
    if !(0.0..=1.0).contains(&d.band_quantile) {
        return Err(IoError::config("band_quantile", "must lie in [0, 1]"));
    }
    Ok(d)
}

fn parse_seed_env(raw: &str) -> Result<u64, IoError> {
    raw.trim()
        .parse()
        .map_err(|_| IoError::config(SEED_ENV_VAR, format!("`{raw}` is not an unsigned 64-bit integer")))
}

/// Builds a [`RunConfig`] from an optional JSON document and flags.
///
/// Seed precedence: flag, then the file's `master_seed`, then the
/// environment, then [`DEFAULT_MASTER_SEED`].
pub fn parse_config(json: Option<&str>, flags: &ConfigFlags) -> Result<RunConfig, IoError> {
    let map = match json {
        None => Map::new(),
        Some(text) => match serde_json::from_str::<Value>(text) {
            Ok(Value::Object(map)) => map,
            Ok(_) => return Err(IoError::config("$", "config must be a JSON object")),
            Err(e) => return Err(IoError::config("$", e.to_string())),
        },
    };
    let mut o = Overrides { map };

    let file_study: Option<Study> = o.take("study")?;
    let study = flags
        .study
        .or(file_study)
        .ok_or_else(|| IoError::config("study", "no study given (use --study or the `study` key)"))?;

    let allowed = allowed_keys(study);
    if let Some(bad) = o
        .map
        .keys()
        .find(|k| !allowed.contains(&k.as_str()) && !COMMON_KEYS.contains(&k.as_str()))
    {
        return Err(IoError::config(
            bad.clone(),
            format!("unknown key for the {} study", study.as_str()),
        ));
    }

    let file_seed: Option<u64> = o.take("master_seed")?;
    let env_seed = flags.env_seed.as_deref().map(parse_seed_env).transpose()?;
    let master_seed = flags
        .master_seed
        .or(file_seed)
        .or(env_seed)
        .unwrap_or(DEFAULT_MASTER_SEED);
    let file_out: Option<PathBuf> = o.take("output_dir")?;
    let output_dir = flags
        .output_dir
        .clone()
        .or(file_out)
        .unwrap_or_else(|| PathBuf::from("out"));
    let file_svg: Option<bool> = o.take("emit_svg")?;
    let emit_svg = flags.emit_svg || file_svg.unwrap_or(false);
    let file_threads: Option<usize> = o.take("threads")?;
    let threads = flags.threads.or(file_threads);
    if threads == Some(0) {
        return Err(IoError::config("threads", "must be at least 1"));
    }

    if let Some(r) = flags.replicates {
        o.map.insert("replicates".into(), Value::from(r));
    }
    let grid = match study {
        Study::Calibration => {
            let g = build_calibration(&mut o)?;
            g.cells().map_err(|e| IoError::config("grid", e.to_string()))?;
            StudyGrid::Calibration(g)
        }
        Study::Triads => {
            let g = build_triads(&mut o)?;
            g.cells().map_err(|e| IoError::config("grid", e.to_string()))?;
            StudyGrid::Triads(g)
        }
        Study::Density => {
            if flags.replicates.is_some() {
                return Err(IoError::config("replicates", "the density study has no replicates"));
            }
            let d = build_density(&mut o)?;
            d.base.validate().map_err(|e| IoError::config("grid", e.to_string()))?;
            StudyGrid::Density(d)
        }
    };
    debug_assert!(o.map.is_empty(), "unconsumed keys: {:?}", o.map.keys());

    Ok(RunConfig {
        study,
        master_seed,
        output_dir,
        emit_svg,
        threads,
        grid,
    })
}

/// The default grid of a study as a config document (feeding it back to
/// [`parse_config`] reproduces the defaults).
pub fn defaults_json(study: Study) -> Value {
    let mut m = Map::new();
    m.insert("study".into(), Value::from(study.as_str()));
    m.insert("master_seed".into(), Value::from(DEFAULT_MASTER_SEED));
    let mut put = |k: &str, v: Value| {
        m.insert(k.to_string(), v);
    };
    match study {
        Study::Calibration => {
            let g = default_calibration_grid();
            put("alphas", serde_json::json!(g.alphas));
            put("lambdas_wx", serde_json::json!(g.lambdas_wx));
            put("rhos_mw", serde_json::json!(g.rhos_mw));
            put("replicates", Value::from(g.replicates));
            let b = g.base;
            put("mu_x", Value::from(b.mu_x));
            put("sigma_x", Value::from(b.sigma_x));
            put("mu_m", Value::from(b.mu_m));
            put("lambda_mx", Value::from(b.lambda_mx));
            put("mu_w", Value::from(b.mu_w));
            put("sigma_w", Value::from(b.sigma_w));
            put("n_sub", Value::from(b.n_sub));
            put("n_large", Value::from(b.n_large));
        }
        Study::Triads => {
            let g = default_triad_grid();
            let pairs: Vec<[f64; 2]> = g.lambda_pairs.iter().map(|&(a, b)| [a, b]).collect();
            put("lambda_pairs", serde_json::json!(pairs));
            put("rhos_rw", serde_json::json!(g.rhos_rw));
            put("replicates", Value::from(g.replicates));
            let b = g.base;
            put("mu_x", Value::from(b.mu_x));
            put("sigma_x", Value::from(b.sigma_x));
            put("mu", serde_json::json!(b.mu));
            put("lambda_mx", Value::from(b.lambda[0]));
            put("sigma", serde_json::json!(b.sigma));
            put("rho_mr", Value::from(b.rho.mr));
            put("rho_mw", Value::from(b.rho.mw));
            put("n", Value::from(b.n));
        }
        Study::Density => {
            let d = default_density_study();
            put("alpha", Value::from(d.base.alpha));
            put("lambda_wx", Value::from(d.base.lambda_wx));
            put("rhos_mw", serde_json::json!(d.rhos_mw));
            put("n", Value::from(d.n));
            put("band_quantile", Value::from(d.band_quantile));
            put("band_width_sd", Value::from(d.band_width_sd));
            put("mu_x", Value::from(d.base.mu_x));
            put("sigma_x", Value::from(d.base.sigma_x));
            put("mu_m", Value::from(d.base.mu_m));
            put("lambda_mx", Value::from(d.base.lambda_mx));
            put("mu_w", Value::from(d.base.mu_w));
            put("sigma_w", Value::from(d.base.sigma_w));
        }
    }
    Value::Object(m)
}
