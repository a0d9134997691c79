//! Univariate Gaussian kernel density estimation.

use super::regression::check_finite;
use super::summary::quantile_sorted;
use crate::error::{Error, Result};

const MIN_SAMPLES: usize = 10;

/// Silverman's rule of thumb, `0.9·min(sd, IQR/1.34)·n^(-1/5)`.
///
/// When the robust spread collapses to zero the standard deviation is used
/// instead; a constant sample gets a bandwidth of `1e-3·max(|c|, 1)` so
/// that the estimate is still a proper (very narrow) density at `c`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewObservations {
            required: MIN_SAMPLES,
            actual: samples.len(),
        });
    }
    check_finite(samples)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = match (sd.min(iqr / 1.34), sd) {
        (s, _) if s > 0.0 => s,
        (_, sd) if sd > 0.0 => sd,
        _ => return Ok(1e-3 * mean.abs().max(1.0)),
    };
    Ok(0.9 * spread * n.powf(-0.2))
}

/// Density estimate at each grid point with Silverman bandwidth.
pub fn kde(samples: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    let h = silverman_bandwidth(samples)?;
    Ok(kde_with_bandwidth(samples, grid, h))
}

pub fn kde_with_bandwidth(samples: &[f64], grid: &[f64], bandwidth: f64) -> Vec<f64> {
    let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let inv_h = 1.0 / bandwidth;
    grid.iter()
        .map(|&g| {
            let s: f64 = samples
                .iter()
                .map(|&x| {
                    let u = (g - x) * inv_h;
                    // exp(-u²/2) underflows to exactly zero past |u| ≈ 38.6
                    if u.abs() > 40.0 {
                        0.0
                    } else {
                        (-0.5 * u * u).exp()
                    }
                })
                .sum();
            s * norm
        })
        .collect()
}

/// `count` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (count - 1) as f64;
            (0..count).map(|i| lo + step * i as f64).collect()
        }
    }
}

pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| 0.5 * (g[1] - g[0]) * (v[0] + v[1]))
        .sum()
}
