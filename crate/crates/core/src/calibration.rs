//! The calibration method: regress the biomarker on the self-report in the
//! sub-study, then use the fitted line to predict intake in the large study.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::kde::{kde_with_bandwidth, linspace, silverman_bandwidth};
use crate::kernel::regression::ols_fit;
use crate::kernel::rng::RngStream;
use crate::kernel::summary::{quantile_sorted, summarize};
use crate::model::{
    marginal_covariance_calibration, simulate_calibration_rows, CalibrationScenario, StudyDataset, StudyRole,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub beta0_hat: f64,
    pub beta1_hat: f64,
    pub residual_variance: f64,
    pub n_fit: usize,
}

/// Closed-form targets: the coefficients of E(X|W) (what calibration aims
/// for) and of E(M|W) (what the regression actually estimates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueCoefficients {
    pub tilde_beta0: f64,
    pub tilde_beta1: f64,
    /// Var(X | W).
    pub tilde_psi: f64,
    pub apparent_beta0: f64,
    pub apparent_beta1: f64,
    /// Var(M | W).
    pub cond_var_mw: f64,
}

pub fn fit_calibration(sub: &StudyDataset) -> Result<CalibrationFit> {
    if sub.role != StudyRole::SubStudy {
        return Err(Error::MissingColumn("m"));
    }
    let fit = ols_fit(&sub.w, sub.m()?)?;
    Ok(CalibrationFit {
        beta0_hat: fit.intercept,
        beta1_hat: fit.slope,
        residual_variance: fit.residual_variance,
        n_fit: fit.n,
    })
}

pub fn true_coefficients(s: &CalibrationScenario) -> TrueCoefficients {
    let vx = s.sigma_x * s.sigma_x;
    let vw = s.sigma_w * s.sigma_w;
    let sm = s.sigma_m();
    let lw = s.lambda_wx;
    let lm = s.lambda_mx;
    let denom = vw + lw * lw * vx;
    let err_cov = sm * s.rho_mw * s.sigma_w;

    let tilde_beta1 = lw * vx / denom;
    let tilde_beta0 = (vw * s.mu_x - vx * lw * s.mu_w) / denom;
    let tilde_psi = vw * vx / denom;

    let apparent_beta1 = (lm * lw * vx + err_cov) / denom;
    let apparent_beta0 =
        (vw * (s.mu_m + lm * s.mu_x) - vx * lw * (lm * s.mu_w - lw * s.mu_m) - err_cov * (s.mu_w + lw * s.mu_x))
            / denom;

    let omega = marginal_covariance_calibration(s);
    let cond_var_mw = omega.get(0, 0) - omega.get(0, 1).powi(2) / omega.get(1, 1);

    TrueCoefficients {
        tilde_beta0,
        tilde_beta1,
        tilde_psi,
        apparent_beta0,
        apparent_beta1,
        cond_var_mw,
    }
}

pub fn predict_intake(fit: &CalibrationFit, w: &[f64]) -> Vec<f64> {
    w.iter().map(|wi| fit.beta0_hat + fit.beta1_hat * wi).collect()
}

/// Var[E(X|W)] under the classical model with independent errors.
pub fn shrinkage_variance(s: &CalibrationScenario) -> Result<f64> {
    if s.lambda_wx == 0.0 {
        return Err(Error::ZeroLoading("lambda_wx"));
    }
    let vx = s.sigma_x * s.sigma_x;
    Ok(vx / (1.0 + s.sigma_w * s.sigma_w / (s.lambda_wx * s.lambda_wx * vx)))
}

pub fn coefficient_ratio(fit: &CalibrationFit, truth: &TrueCoefficients) -> Result<f64> {
    if truth.tilde_beta1.abs() <= 1e-12 {
        return Err(Error::ZeroLoading("tilde_beta1"));
    }
    Ok(fit.beta1_hat / truth.tilde_beta1)
}

/// Population slope ratio β₁/β̃₁ = λ_MX + σ_M·ρ_MW·σ_W/(λ_WX·σ_X²).
pub fn population_ratio(s: &CalibrationScenario) -> Result<f64> {
    let t = true_coefficients(s);
    if t.tilde_beta1.abs() <= 1e-12 {
        return Err(Error::ZeroLoading("tilde_beta1"));
    }
    Ok(t.apparent_beta1 / t.tilde_beta1)
}

/// Mean absolute error on the model (log) scale.
pub fn mean_absolute_error(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::TooFewObservations { required: 1, actual: 0 });
    }
    let total: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(total / predicted.len() as f64)
}

/// Rows needed inside the conditioning band before densities are computed.
pub const MIN_BAND_ROWS: usize = 100;
pub const DENSITY_GRID_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub label: String,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub mean: f64,
    pub variance: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCurves {
    pub w_band: (f64, f64),
    /// KDE of X among rows with W in the band (approximates p(X|W)).
    pub truth: DensityCurve,
    /// KDE of M among the same rows (approximates p(M|W)).
    pub biomarker: DensityCurve,
}

/// Band of total width `width` centred on the `quantile` of the
/// sampled W column.
pub fn band_around_quantile(w: &[f64], quantile: f64, width: f64) -> (f64, f64) {
    let mut sorted = w.to_vec();
    sorted.sort_by(f64::total_cmp);
    let centre = quantile_sorted(&sorted, quantile);
    (centre - 0.5 * width, centre + 0.5 * width)
}

/// Draws `n` rows and estimates the band-conditional densities of X and M.
pub fn conditional_density_curves(
    s: &CalibrationScenario,
    rng: &mut RngStream,
    n: usize,
    w_band: (f64, f64),
) -> Result<DensityCurves> {
    let data = simulate_calibration_rows(s, rng, n)?;
    curves_from_dataset(&data, w_band)
}

pub fn curves_from_dataset(data: &StudyDataset, w_band: (f64, f64)) -> Result<DensityCurves> {
    let (lo, hi) = w_band;
    let m = data.m()?;
    let (mut xs, mut ms) = (Vec::new(), Vec::new());
    for ((w, x), mi) in data.w.iter().zip(&data.x).zip(m) {
        if *w >= lo && *w <= hi {
            xs.push(*x);
            ms.push(*mi);
        }
    }
    if xs.len() < MIN_BAND_ROWS {
        return Err(Error::EmptyConditioningBand {
            found: xs.len(),
            required: MIN_BAND_ROWS,
        });
    }
    let hx = silverman_bandwidth(&xs)?;
    let hm = silverman_bandwidth(&ms)?;
    let lo_g = min(&xs).min(min(&ms)) - 3.0 * hx.max(hm);
    let hi_g = max(&xs).max(max(&ms)) + 3.0 * hx.max(hm);
    let grid = linspace(lo_g, hi_g, DENSITY_GRID_POINTS);
    let curve = |label: &str, values: &[f64], h: f64| -> Result<DensityCurve> {
        let s = summarize(values)?;
        Ok(DensityCurve {
            label: label.to_string(),
            density: kde_with_bandwidth(values, &grid, h),
            grid: grid.clone(),
            bandwidth: h,
            mean: s.mean,
            variance: s.sd.unwrap_or(0.0).powi(2),
            count: s.n,
        })
    };
    Ok(DensityCurves {
        w_band,
        truth: curve("X|W", &xs, hx)?,
        biomarker: curve("M|W", &ms, hm)?,
    })
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
