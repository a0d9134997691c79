//! Scenario grids, replicated simulation runs and per-cell aggregation.
//!
//! Replicate `r` of grid cell `c` always draws from stream
//! `c·2³² + r` of the master seed, so the record list is a pure function of
//! `(grid, master_seed)` whatever the worker count. Records are returned
//! sorted by `(scenario_id, replicate)`.

use serde::{Deserialize, Serialize};

use crate::calibration::{
    band_around_quantile, coefficient_ratio, curves_from_dataset, fit_calibration, mean_absolute_error, predict_intake,
    true_coefficients, DensityCurves,
};
use crate::error::{Error, Result};
use crate::kernel::rng::{stream_id, RngStream};
use crate::kernel::summary::{one_sample_t, summarize, Summary};
use crate::model::{
    simulate_calibration, simulate_calibration_rows, simulate_triads, CalibrationScenario, TriadCorrelations,
    TriadScenario,
};
use crate::triads::{estimate_vc, true_vc, TriadStatus};

pub const DEFAULT_REPLICATES: usize = 500;

/// Shared constants of both simulation studies (log intake scale).
pub fn default_mu_x() -> f64 {
    2141f64.ln()
}

pub fn default_sigma_x() -> f64 {
    14f64.ln()
}

pub fn default_mu_w() -> f64 {
    1485f64.ln()
}

pub fn default_sigma_w() -> f64 {
    28f64.ln()
}

pub fn default_sigma_r() -> f64 {
    21f64.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub alphas: Vec<f64>,
    pub lambdas_wx: Vec<f64>,
    pub rhos_mw: Vec<f64>,
    pub replicates: usize,
    pub base: CalibrationScenario,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriadGrid {
    /// `(lambda_rx, lambda_wx)` settings.
    pub lambda_pairs: Vec<(f64, f64)>,
    pub rhos_rw: Vec<f64>,
    pub replicates: usize,
    pub base: TriadScenario,
}

pub fn default_calibration_grid() -> CalibrationGrid {
    CalibrationGrid {
        alphas: vec![0.5, 1.0, 2.0],
        lambdas_wx: vec![0.1, 0.5, 0.8],
        rhos_mw: vec![0.0, 0.1, 0.8],
        replicates: DEFAULT_REPLICATES,
        base: CalibrationScenario {
            mu_x: default_mu_x(),
            sigma_x: default_sigma_x(),
            mu_m: 0.0,
            lambda_mx: 1.0,
            alpha: 0.5,
            mu_w: default_mu_w(),
            lambda_wx: 0.8,
            sigma_w: default_sigma_w(),
            rho_mw: 0.0,
            n_sub: 1000,
            n_large: 10_000,
        },
    }
}

pub fn default_triad_grid() -> TriadGrid {
    let sigma_x = default_sigma_x();
    TriadGrid {
        lambda_pairs: vec![(0.95, 0.9), (0.8, 0.5)],
        rhos_rw: vec![0.0, 0.1, 0.3, 0.5],
        replicates: DEFAULT_REPLICATES,
        base: TriadScenario {
            mu_x: default_mu_x(),
            sigma_x,
            mu: [0.0, 0.0, default_mu_w()],
            lambda: [1.0, 0.95, 0.9],
            sigma: [
                TriadScenario::sigma_m_from_alpha(0.5, sigma_x),
                default_sigma_r(),
                default_sigma_w(),
            ],
            rho: TriadCorrelations::default(),
            n: 1000,
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationCell {
    pub index: usize,
    pub id: String,
    pub scenario: CalibrationScenario,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriadCell {
    pub index: usize,
    pub id: String,
    pub scenario: TriadScenario,
}

pub fn calibration_id(alpha: f64, lambda_wx: f64, rho_mw: f64) -> String {
    format!("calib/a{alpha}/l{lambda_wx}/r{rho_mw}")
}

pub fn triad_id(lambda_rx: f64, lambda_wx: f64, rho_rw: f64) -> String {
    format!("triad/l{lambda_rx}-{lambda_wx}/r{rho_rw}")
}

fn check_counts(replicates: usize, lists: &[(&str, usize)]) -> Result<()> {
    if replicates == 0 {
        return Err(Error::InvalidGrid("replicates must be at least 1".into()));
    }
    if replicates > u32::MAX as usize {
        return Err(Error::InvalidGrid("too many replicates".into()));
    }
    for (name, len) in lists {
        if *len == 0 {
            return Err(Error::InvalidGrid(format!("`{name}` is empty")));
        }
    }
    Ok(())
}

impl CalibrationGrid {
    pub fn cells(&self) -> Result<Vec<CalibrationCell>> {
        check_counts(
            self.replicates,
            &[
                ("alphas", self.alphas.len()),
                ("lambdas_wx", self.lambdas_wx.len()),
                ("rhos_mw", self.rhos_mw.len()),
            ],
        )?;
        let mut cells = Vec::new();
        for &alpha in &self.alphas {
            for &lambda_wx in &self.lambdas_wx {
                for &rho_mw in &self.rhos_mw {
                    let id = calibration_id(alpha, lambda_wx, rho_mw);
                    let scenario = CalibrationScenario {
                        alpha,
                        lambda_wx,
                        rho_mw,
                        ..self.base
                    };
                    scenario.validate().map_err(|e| e.in_scenario(&id))?;
                    cells.push(CalibrationCell {
                        index: cells.len(),
                        id,
                        scenario,
                    });
                }
            }
        }
        Ok(cells)
    }
}

impl TriadGrid {
    pub fn cells(&self) -> Result<Vec<TriadCell>> {
        check_counts(
            self.replicates,
            &[
                ("lambda_pairs", self.lambda_pairs.len()),
                ("rhos_rw", self.rhos_rw.len()),
            ],
        )?;
        let mut cells = Vec::new();
        for &(lambda_rx, lambda_wx) in &self.lambda_pairs {
            for &rho_rw in &self.rhos_rw {
                let id = triad_id(lambda_rx, lambda_wx, rho_rw);
                let mut scenario = self.base;
                scenario.lambda[1] = lambda_rx;
                scenario.lambda[2] = lambda_wx;
                scenario.rho.rw = rho_rw;
                scenario.validate().map_err(|e| e.in_scenario(&id))?;
                cells.push(TriadCell {
                    index: cells.len(),
                    id,
                    scenario,
                });
            }
        }
        Ok(cells)
    }
}

/// How replicates are scheduled. Results never depend on the choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon work-stealing, on a dedicated pool when `threads` is set.
    /// Falls back to sequential when built without the `parallel` feature.
    Parallel {
        threads: Option<usize>,
    },
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel { threads: None }
    }
}

fn run_tasks<T, F>(count: usize, exec: Execution, task: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..count).map(task).collect(),
        #[cfg(feature = "parallel")]
        Execution::Parallel { threads } => {
            use rayon::prelude::*;
            let run = || (0..count).into_par_iter().map(&task).collect::<Result<Vec<T>>>();
            match threads {
                None => run(),
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::WorkerPool(e.to_string()))?
                    .install(run),
            }
        }
        #[cfg(not(feature = "parallel"))]
        Execution::Parallel { .. } => (0..count).map(task).collect(),
    }
}

/// Common view of a replicate record for aggregation and CSV output.
pub trait ReplicateRecord {
    fn scenario_id(&self) -> &str;
    fn replicate(&self) -> u32;
    /// Grid coordinates of the cell, in column order.
    fn params(&self) -> Vec<(&'static str, f64)>;
    /// Metrics to aggregate; only called for `Ok` records.
    fn metrics(&self) -> Vec<(&'static str, f64)>;
    fn status(&self) -> TriadStatus {
        TriadStatus::Ok
    }
    /// `(estimate, truth)` pair tested with a one-sample t-test, if any.
    fn truth_test(&self) -> Option<(f64, f64)> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub scenario_id: String,
    pub alpha: f64,
    pub lambda_wx: f64,
    pub rho_mw: f64,
    pub replicate: u32,
    pub beta0_hat: f64,
    pub beta1_hat: f64,
    pub tilde_beta1: f64,
    pub apparent_beta1: f64,
    pub ratio: f64,
    pub mae: f64,
}

impl ReplicateRecord for CalibrationRecord {
    fn scenario_id(&self) -> &str {
        &self.scenario_id
    }

    fn replicate(&self) -> u32 {
        self.replicate
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("alpha", self.alpha),
            ("lambda_wx", self.lambda_wx),
            ("rho_mw", self.rho_mw),
        ]
    }

    fn metrics(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("beta0_hat", self.beta0_hat),
            ("beta1_hat", self.beta1_hat),
            ("tilde_beta1", self.tilde_beta1),
            ("apparent_beta1", self.apparent_beta1),
            ("ratio", self.ratio),
            ("mae", self.mae),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriadRecord {
    pub scenario_id: String,
    pub lambda_rx: f64,
    pub lambda_wx: f64,
    pub rho_rw: f64,
    pub replicate: u32,
    pub rho_mw_hat: f64,
    pub rho_wr_hat: f64,
    pub rho_mr_hat: f64,
    pub vc_hat: Option<f64>,
    pub vc_true: f64,
    pub status: TriadStatus,
}

impl ReplicateRecord for TriadRecord {
    fn scenario_id(&self) -> &str {
        &self.scenario_id
    }

    fn replicate(&self) -> u32 {
        self.replicate
    }

    fn params(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("lambda_rx", self.lambda_rx),
            ("lambda_wx", self.lambda_wx),
            ("rho_rw", self.rho_rw),
        ]
    }

    fn metrics(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("rho_mw_hat", self.rho_mw_hat),
            ("rho_wr_hat", self.rho_wr_hat),
            ("rho_mr_hat", self.rho_mr_hat),
            ("vc_hat", self.vc_hat.unwrap_or(f64::NAN)),
            ("vc_true", self.vc_true),
        ]
    }

    fn status(&self) -> TriadStatus {
        self.status
    }

    fn truth_test(&self) -> Option<(f64, f64)> {
        self.vc_hat.map(|v| (v, self.vc_true))
    }
}

fn sort_records<T: ReplicateRecord>(records: &mut [T]) {
    records.sort_by(|a, b| {
        a.scenario_id()
            .cmp(b.scenario_id())
            .then(a.replicate().cmp(&b.replicate()))
    });
}

pub fn run_calibration_study(grid: &CalibrationGrid, master_seed: u64) -> Result<Vec<CalibrationRecord>> {
    run_calibration_study_with(grid, master_seed, Execution::default())
}

pub fn run_calibration_study_with(
    grid: &CalibrationGrid,
    master_seed: u64,
    exec: Execution,
) -> Result<Vec<CalibrationRecord>> {
    let cells = grid.cells()?;
    let truths: Vec<_> = cells.iter().map(|c| true_coefficients(&c.scenario)).collect();
    let reps = grid.replicates;
    let mut records = run_tasks(cells.len() * reps, exec, |task| {
        let cell = &cells[task / reps];
        let truth = &truths[task / reps];
        let replicate = (task % reps) as u32;
        let one = || -> Result<CalibrationRecord> {
            let mut rng = RngStream::new(master_seed, stream_id(cell.index as u32, replicate));
            let (sub, large) = simulate_calibration(&cell.scenario, &mut rng)?;
            let fit = fit_calibration(&sub)?;
            let ratio = coefficient_ratio(&fit, truth)?;
            let predicted = predict_intake(&fit, &large.w);
            let mae = mean_absolute_error(&predicted, &large.x)?;
            Ok(CalibrationRecord {
                scenario_id: cell.id.clone(),
                alpha: cell.scenario.alpha,
                lambda_wx: cell.scenario.lambda_wx,
                rho_mw: cell.scenario.rho_mw,
                replicate,
                beta0_hat: fit.beta0_hat,
                beta1_hat: fit.beta1_hat,
                tilde_beta1: truth.tilde_beta1,
                apparent_beta1: truth.apparent_beta1,
                ratio,
                mae,
            })
        };
        one().map_err(|e| e.in_scenario(&cell.id))
    })?;
    sort_records(&mut records);
    Ok(records)
}

pub fn run_triads_study(grid: &TriadGrid, master_seed: u64) -> Result<Vec<TriadRecord>> {
    run_triads_study_with(grid, master_seed, Execution::default())
}

pub fn run_triads_study_with(grid: &TriadGrid, master_seed: u64, exec: Execution) -> Result<Vec<TriadRecord>> {
    let cells = grid.cells()?;
    let reps = grid.replicates;
    let mut records = run_tasks(cells.len() * reps, exec, |task| {
        let cell = &cells[task / reps];
        let replicate = (task % reps) as u32;
        let one = || -> Result<TriadRecord> {
            let mut rng = RngStream::new(master_seed, stream_id(cell.index as u32, replicate));
            let data = simulate_triads(&cell.scenario, &mut rng)?;
            let est = estimate_vc(&data)?;
            Ok(TriadRecord {
                scenario_id: cell.id.clone(),
                lambda_rx: cell.scenario.lambda[1],
                lambda_wx: cell.scenario.lambda[2],
                rho_rw: cell.scenario.rho.rw,
                replicate,
                rho_mw_hat: est.rho_mw_hat,
                rho_wr_hat: est.rho_wr_hat,
                rho_mr_hat: est.rho_mr_hat,
                vc_hat: est.vc_hat,
                vc_true: true_vc(&cell.scenario),
                status: est.status,
            })
        };
        one().map_err(|e| e.in_scenario(&cell.id))
    })?;
    sort_records(&mut records);
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario_id: String,
    pub params: Vec<(String, f64)>,
    pub replicates: usize,
    pub n_ok: usize,
    pub n_heywood: usize,
    pub n_negative: usize,
    pub metrics: Vec<(String, Summary)>,
    pub t_statistic: Option<f64>,
    pub p_value_vs_truth: Option<f64>,
}

impl ScenarioSummary {
    pub fn metric(&self, name: &str) -> Option<&Summary> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Per-cell summaries over `Ok` records, in scenario-id order.
pub fn aggregate<T: ReplicateRecord + Clone>(records: &[T]) -> Result<Vec<ScenarioSummary>> {
    if records.is_empty() {
        return Err(Error::TooFewObservations { required: 1, actual: 0 });
    }
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut out = Vec::new();
    for group in sorted.chunk_by(|a, b| a.scenario_id() == b.scenario_id()) {
        out.push(summarize_cell(group)?);
    }
    Ok(out)
}

fn summarize_cell<T: ReplicateRecord>(group: &[T]) -> Result<ScenarioSummary> {
    let first = &group[0];
    let ok: Vec<&T> = group.iter().filter(|r| r.status() == TriadStatus::Ok).collect();
    let count = |s: TriadStatus| group.iter().filter(|r| r.status() == s).count();

    let mut metrics = Vec::new();
    if let Some(head) = ok.first() {
        let names: Vec<&'static str> = head.metrics().iter().map(|(n, _)| *n).collect();
        let columns: Vec<Vec<f64>> = {
            let mut cols = vec![Vec::with_capacity(ok.len()); names.len()];
            for r in &ok {
                for (j, (_, v)) in r.metrics().into_iter().enumerate() {
                    cols[j].push(v);
                }
            }
            cols
        };
        for (name, col) in names.into_iter().zip(columns) {
            metrics.push((name.to_string(), summarize(&col)?));
        }
    }

    let tests: Vec<(f64, f64)> = ok.iter().filter_map(|r| r.truth_test()).collect();
    let (t_statistic, p_value_vs_truth) = match tests.first() {
        Some(&(_, truth)) if tests.len() >= 3 => {
            let est: Vec<f64> = tests.iter().map(|(e, _)| *e).collect();
            match one_sample_t(&est, truth) {
                Ok(t) => (Some(t.t_statistic), Some(t.p_value)),
                Err(Error::DegenerateRegressor { .. }) => (None, None),
                Err(e) => return Err(e),
            }
        }
        _ => (None, None),
    };

    Ok(ScenarioSummary {
        scenario_id: first.scenario_id().to_string(),
        params: first.params().into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
        replicates: group.len(),
        n_ok: ok.len(),
        n_heywood: count(TriadStatus::Heywood),
        n_negative: count(TriadStatus::NegativeCorrelation),
        metrics,
        t_statistic,
        p_value_vs_truth,
    })
}

/// Settings of the conditional-density illustration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityStudy {
    pub base: CalibrationScenario,
    pub rhos_mw: Vec<f64>,
    /// Rows drawn per scenario before band selection.
    pub n: usize,
    /// The band is centred on this quantile of the sampled W.
    pub band_quantile: f64,
    /// Band width in units of `sigma_w`.
    pub band_width_sd: f64,
}

pub fn default_density_study() -> DensityStudy {
    let mut base = default_calibration_grid().base;
    let n = 2_000_000;
    base.alpha = 1.0;
    base.lambda_wx = 0.8;
    base.n_sub = n;
    base.n_large = n;
    DensityStudy {
        base,
        rhos_mw: vec![0.0, 0.1],
        n,
        band_quantile: 0.9,
        band_width_sd: 0.2,
    }
}

/// One `(scenario_id, curves)` pair per correlation setting.
pub fn run_density_study(study: &DensityStudy, master_seed: u64) -> Result<Vec<(String, DensityCurves)>> {
    if study.rhos_mw.is_empty() {
        return Err(Error::InvalidGrid("`rhos_mw` is empty".into()));
    }
    if !(0.0..=1.0).contains(&study.band_quantile) || !(study.band_width_sd > 0.0) {
        return Err(Error::InvalidGrid(
            "band_quantile must lie in [0, 1] and band_width_sd must be positive".into(),
        ));
    }
    study
        .rhos_mw
        .iter()
        .enumerate()
        .map(|(i, &rho_mw)| {
            let s = CalibrationScenario { rho_mw, ..study.base };
            let id = format!("density/a{}/l{}/r{}", s.alpha, s.lambda_wx, rho_mw);
            let run = || -> Result<DensityCurves> {
                let mut rng = RngStream::new(master_seed, stream_id(i as u32, 0));
                let data = simulate_calibration_rows(&s, &mut rng, study.n)?;
                let band = band_around_quantile(&data.w, study.band_quantile, study.band_width_sd * s.sigma_w);
                curves_from_dataset(&data, band)
            };
            run().map(|c| (id.clone(), c)).map_err(|e| e.in_scenario(&id))
        })
        .collect()
}
