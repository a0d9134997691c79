//! Generative latent-variable measurement models.
//!
//! True (log) intake `X ~ N(mu_x, sigma_x²)`. Each manifest measurement is
//! an affine image of `X` plus a jointly Gaussian error:
//!
//! ```text
//!   M = mu_M + lambda_MX·X + e_M
//!   R = mu_R + lambda_RX·X + e_R     (triads only)
//!   W = mu_W + lambda_WX·X + e_W
//! ```
//!
//! with `Cov(e_j, e_k) = sigma_j·rho_jk·sigma_k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::linalg::{cholesky, Matrix, SymmetricMatrix};
use crate::kernel::rng::{GaussianFactor, RngStream};

/// Bivariate (M, W | X) model plus study sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationScenario {
    pub mu_x: f64,
    pub sigma_x: f64,
    pub mu_m: f64,
    pub lambda_mx: f64,
    /// Biomarker error scale relative to `sigma_x`: `sigma_M = alpha·sigma_x`.
    pub alpha: f64,
    pub mu_w: f64,
    pub lambda_wx: f64,
    pub sigma_w: f64,
    pub rho_mw: f64,
    pub n_sub: usize,
    pub n_large: usize,
}

impl CalibrationScenario {
    pub fn sigma_m(&self) -> f64 {
        self.alpha * self.sigma_x
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.mu_x,
            self.sigma_x,
            self.mu_m,
            self.lambda_mx,
            self.alpha,
            self.mu_w,
            self.lambda_wx,
            self.sigma_w,
            self.rho_mw,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidScenario("non-finite parameter".into()));
        }
        if !(self.sigma_x > 0.0) || !(self.sigma_w > 0.0) || !(self.alpha > 0.0) {
            return Err(Error::InvalidScenario(
                "sigma_x, sigma_w and alpha must be positive".into(),
            ));
        }
        if !(self.rho_mw.abs() < 1.0) {
            return Err(Error::InvalidScenario(format!(
                "rho_mw = {} must lie strictly inside (-1, 1)",
                self.rho_mw
            )));
        }
        if self.n_sub == 0 || self.n_large == 0 {
            return Err(Error::InvalidScenario("study sizes must be positive".into()));
        }
        if self.n_sub > self.n_large {
            return Err(Error::InvalidScenario(format!(
                "n_sub = {} exceeds n_large = {}",
                self.n_sub, self.n_large
            )));
        }
        Ok(())
    }

    fn error_factor(&self) -> Result<GaussianFactor> {
        let corr = SymmetricMatrix::from_rows(&[vec![1.0, self.rho_mw], vec![self.rho_mw, 1.0]])?;
        GaussianFactor::from_correlation(vec![self.sigma_m(), self.sigma_w], &corr)
    }

    /// Population mean of (M, W).
    pub fn marginal_mean(&self) -> [f64; 2] {
        [
            self.mu_m + self.lambda_mx * self.mu_x,
            self.mu_w + self.lambda_wx * self.mu_x,
        ]
    }
}

/// Error correlations of the triad, indexed (M, R), (M, W), (R, W).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TriadCorrelations {
    pub mr: f64,
    pub mw: f64,
    pub rw: f64,
}

impl TriadCorrelations {
    pub fn is_independent(&self) -> bool {
        self.mr == 0.0 && self.mw == 0.0 && self.rw == 0.0
    }

    pub fn matrix(&self) -> SymmetricMatrix {
        SymmetricMatrix::from_rows(&[
            vec![1.0, self.mr, self.mw],
            vec![self.mr, 1.0, self.rw],
            vec![self.mw, self.rw, 1.0],
        ])
        .expect("correlation matrix is symmetric by construction")
    }
}

/// Trivariate (M, R, W | X) model. Vectors are ordered (M, R, W).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriadScenario {
    pub mu_x: f64,
    pub sigma_x: f64,
    pub mu: [f64; 3],
    pub lambda: [f64; 3],
    pub sigma: [f64; 3],
    pub rho: TriadCorrelations,
    pub n: usize,
}

pub const M: usize = 0;
pub const R: usize = 1;
pub const W: usize = 2;

impl TriadScenario {
    /// Biomarker error scale for a given multiplier of `sigma_x`.
    pub fn sigma_m_from_alpha(alpha: f64, sigma_x: f64) -> f64 {
        alpha * sigma_x
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.mu_x, self.sigma_x]
            .into_iter()
            .chain(self.mu)
            .chain(self.lambda)
            .chain(self.sigma)
            .chain([self.rho.mr, self.rho.mw, self.rho.rw]);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidScenario("non-finite parameter".into()));
        }
        if !(self.sigma_x > 0.0) || self.sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidScenario("all sigmas must be positive".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidScenario("study size must be positive".into()));
        }
        cholesky(&self.rho.matrix())?;
        Ok(())
    }

    fn error_factor(&self) -> Result<GaussianFactor> {
        GaussianFactor::from_correlation(self.sigma.to_vec(), &self.rho.matrix())
    }

    pub fn error_covariance(&self) -> SymmetricMatrix {
        crate::kernel::linalg::covariance_from_correlation(&self.sigma, &self.rho.matrix()).expect("dimensions agree")
    }

    pub fn marginal_mean(&self) -> [f64; 3] {
        [0, 1, 2].map(|j| self.mu[j] + self.lambda[j] * self.mu_x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyRole {
    SubStudy,
    LargeStudy,
}

/// One simulated study. `x` is the latent truth, retained only so that
/// predictions can be scored; estimators never read it.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyDataset {
    pub role: StudyRole,
    pub x: Vec<f64>,
    pub m: Option<Vec<f64>>,
    pub r: Option<Vec<f64>>,
    pub w: Vec<f64>,
}

impl StudyDataset {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn m(&self) -> Result<&[f64]> {
        self.m.as_deref().ok_or(Error::MissingColumn("m"))
    }

    pub fn r(&self) -> Result<&[f64]> {
        self.r.as_deref().ok_or(Error::MissingColumn("r"))
    }
}

/// Draws `(x, e_M, e_W)` rows; `keep_m == false` skips storing M.
fn draw_calibration_rows(
    s: &CalibrationScenario,
    factor: &GaussianFactor,
    rng: &mut RngStream,
    n: usize,
    keep_m: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(if keep_m { n } else { 0 });
    let mut w = Vec::with_capacity(n);
    let mut e = [0.0; 2];
    for _ in 0..n {
        let xi = s.mu_x + s.sigma_x * rng.standard_normal();
        factor.sample_into(rng, &mut e);
        if keep_m {
            m.push(s.mu_m + s.lambda_mx * xi + e[0]);
        }
        w.push(s.mu_w + s.lambda_wx * xi + e[1]);
        x.push(xi);
    }
    (x, m, w)
}

/// Samples the sub-study (x, m, w) and then the large study (x, w) from one
/// stream, in that order.
pub fn simulate_calibration(s: &CalibrationScenario, rng: &mut RngStream) -> Result<(StudyDataset, StudyDataset)> {
    s.validate()?;
    let factor = s.error_factor()?;
    let (x, m, w) = draw_calibration_rows(s, &factor, rng, s.n_sub, true);
    let sub = StudyDataset {
        role: StudyRole::SubStudy,
        x,
        m: Some(m),
        r: None,
        w,
    };
    let (x, _, w) = draw_calibration_rows(s, &factor, rng, s.n_large, false);
    let large = StudyDataset {
        role: StudyRole::LargeStudy,
        x,
        m: None,
        r: None,
        w,
    };
    Ok((sub, large))
}

/// Sub-study of `n` rows from an arbitrary-size calibration draw, used for
/// the conditional density figure where only (x, m, w) matter.
pub fn simulate_calibration_rows(s: &CalibrationScenario, rng: &mut RngStream, n: usize) -> Result<StudyDataset> {
    s.validate()?;
    let factor = s.error_factor()?;
    let (x, m, w) = draw_calibration_rows(s, &factor, rng, n, true);
    Ok(StudyDataset {
        role: StudyRole::SubStudy,
        x,
        m: Some(m),
        r: None,
        w,
    })
}

pub fn simulate_triads(s: &TriadScenario, rng: &mut RngStream) -> Result<StudyDataset> {
    s.validate()?;
    let factor = s.error_factor()?;
    let n = s.n;
    let mut x = Vec::with_capacity(n);
    let mut cols = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut e = [0.0; 3];
    for _ in 0..n {
        let xi = s.mu_x + s.sigma_x * rng.standard_normal();
        factor.sample_into(rng, &mut e);
        for j in 0..3 {
            cols[j].push(s.mu[j] + s.lambda[j] * xi + e[j]);
        }
        x.push(xi);
    }
    let [m, r, w] = cols;
    Ok(StudyDataset {
        role: StudyRole::SubStudy,
        x,
        m: Some(m),
        r: Some(r),
        w,
    })
}

/// Ω for (M, W): `Λ Λᵀ sigma_x² + Σ`.
pub fn marginal_covariance_calibration(s: &CalibrationScenario) -> SymmetricMatrix {
    let vx = s.sigma_x * s.sigma_x;
    let sm = s.sigma_m();
    let o11 = s.lambda_mx * s.lambda_mx * vx + sm * sm;
    let o12 = sm * s.rho_mw * s.sigma_w + s.lambda_mx * s.lambda_wx * vx;
    let o22 = s.lambda_wx * s.lambda_wx * vx + s.sigma_w * s.sigma_w;
    SymmetricMatrix::from_rows(&[vec![o11, o12], vec![o12, o22]]).expect("2x2 symmetric")
}

/// Ω for (M, R, W).
pub fn marginal_covariance_triads(s: &TriadScenario) -> SymmetricMatrix {
    let vx = s.sigma_x * s.sigma_x;
    let rho = s.rho.matrix();
    let mut m = Matrix::zeros(3, 3);
    for j in 0..3 {
        for k in 0..3 {
            m[(j, k)] = s.sigma[j] * rho.get(j, k) * s.sigma[k] + s.lambda[j] * s.lambda[k] * vx;
        }
    }
    SymmetricMatrix::new(m).expect("3x3 symmetric")
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn baseline_calibration(alpha: f64, lambda_wx: f64, rho_mw: f64) -> CalibrationScenario {
        CalibrationScenario {
            mu_x: 2141f64.ln(),
            sigma_x: 14f64.ln(),
            mu_m: 0.0,
            lambda_mx: 1.0,
            alpha,
            mu_w: 1485f64.ln(),
            lambda_wx,
            sigma_w: 28f64.ln(),
            rho_mw,
            n_sub: 1000,
            n_large: 10_000,
        }
    }

    fn baseline_triads(lambda_rx: f64, lambda_wx: f64, rho_rw: f64, n: usize) -> TriadScenario {
        let sigma_x = 14f64.ln();
        TriadScenario {
            mu_x: 2141f64.ln(),
            sigma_x,
            mu: [0.0, 0.0, 1485f64.ln()],
            lambda: [1.0, lambda_rx, lambda_wx],
            sigma: [TriadScenario::sigma_m_from_alpha(0.5, sigma_x), 21f64.ln(), 28f64.ln()],
            rho: TriadCorrelations {
                mr: 0.0,
                mw: 0.0,
                rw: rho_rw,
            },
            n,
        }
    }

    fn sample_cov(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        sample_cov(a, b) / (sample_cov(a, a) * sample_cov(b, b)).sqrt()
    }

    #[test]
    fn biomarker_equals_truth_when_error_vanishes() {
        let s = baseline_calibration(1e-8, 0.8, 0.0);
        let (sub, large) = simulate_calibration(&s, &mut RngStream::new(1, 0)).unwrap();
        let m = sub.m().unwrap();
        let max = m.iter().zip(&sub.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(max < 1e-6, "{max}");
        assert_eq!(sub.len(), 1000);
        assert_eq!(large.len(), 10_000);
        assert!(large.m.is_none());
        assert_eq!(large.x.len(), 10_000);
    }

    #[test]
    fn omega22_default_value() {
        let s = baseline_calibration(0.5, 0.8, 0.0);
        let o = marginal_covariance_calibration(&s);
        let expected = 0.64 * 14f64.ln().powi(2) + 28f64.ln().powi(2);
        assert!((o.get(1, 1) - expected).abs() < 1e-12);
        assert!((o.get(1, 1) - 15.561).abs() < 5e-4);
        // rho = 0, lambda_MX = 1: Ω₁₂ = λ_WX σ_X²
        assert!((o.get(0, 1) - 0.8 * 14f64.ln().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn noiseless_omega_is_rank_one() {
        let mut s = baseline_calibration(0.5, 0.8, 0.0);
        s.alpha = 0.0;
        s.sigma_w = 0.0;
        let o = marginal_covariance_calibration(&s);
        let vx = s.sigma_x.powi(2);
        assert!((o.get(0, 0) - vx).abs() < 1e-12);
        assert!((o.get(0, 1) - 0.8 * vx).abs() < 1e-12);
        assert!((o.get(1, 1) - 0.64 * vx).abs() < 1e-12);
        let det = o.get(0, 0) * o.get(1, 1) - o.get(0, 1).powi(2);
        assert!(det.abs() < 1e-12);
    }

    #[test]
    fn triad_omega_simplifications() {
        let s = baseline_triads(0.95, 0.9, 0.0, 10);
        let o = marginal_covariance_triads(&s);
        let vx = s.sigma_x.powi(2);
        for j in 0..3 {
            for k in 0..3 {
                if j != k {
                    assert!((o.get(j, k) - s.lambda[j] * s.lambda[k] * vx).abs() < 1e-12);
                }
            }
        }
        let mut zero = baseline_triads(0.95, 0.9, 0.3, 10);
        zero.lambda = [0.0; 3];
        let o = marginal_covariance_triads(&zero);
        let sigma = zero.error_covariance();
        assert!(o.as_matrix().max_abs_diff(sigma.as_matrix()) < 1e-15);
    }

    #[test]
    fn calibration_sampler_matches_omega() {
        let mut s = baseline_calibration(0.5, 0.8, 0.0);
        s.n_sub = 1_000_000;
        s.n_large = 1_000_000;
        let sub = simulate_calibration_rows(&s, &mut RngStream::new(7, 0), 1_000_000).unwrap();
        let o = marginal_covariance_calibration(&s);
        let c12 = sample_cov(sub.m().unwrap(), &sub.w);
        assert!(((c12 - o.get(0, 1)) / o.get(0, 1)).abs() < 0.01, "{c12}");
    }

    #[test]
    fn calibration_residual_correlation() {
        let s = baseline_calibration(1.0, 0.5, 0.8);
        let d = simulate_calibration_rows(&s, &mut RngStream::new(8, 0), 1_000_000).unwrap();
        let em: Vec<f64> = d
            .m()
            .unwrap()
            .iter()
            .zip(&d.x)
            .map(|(m, x)| m - s.mu_m - s.lambda_mx * x)
            .collect();
        let ew: Vec<f64> =
            d.w.iter()
                .zip(&d.x)
                .map(|(w, x)| w - s.mu_w - s.lambda_wx * x)
                .collect();
        assert!((corr(&em, &ew) - 0.8).abs() < 0.01);
    }

    #[test]
    fn triad_noiseless_limit() {
        let mut s = baseline_triads(0.95, 0.9, 0.0, 500);
        s.sigma = [1e-8; 3];
        let d = simulate_triads(&s, &mut RngStream::new(3, 0)).unwrap();
        let (m, r) = (d.m().unwrap(), d.r().unwrap());
        for (a, b) in [(m, r), (m, &d.w[..]), (r, &d.w[..])] {
            assert!((corr(a, b) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn triad_sampler_matches_omega() {
        let s = baseline_triads(0.95, 0.9, 0.0, 1_000_000);
        let d = simulate_triads(&s, &mut RngStream::new(5, 0)).unwrap();
        let o = marginal_covariance_triads(&s);
        let vw = sample_cov(&d.w, &d.w);
        let expected = 0.81 * s.sigma_x.powi(2) + 28f64.ln().powi(2);
        assert!((o.get(W, W) - expected).abs() < 1e-12);
        assert!(((vw - expected) / expected).abs() < 0.01);
        let cols = [d.m().unwrap(), d.r().unwrap(), &d.w[..]];
        for j in 0..3 {
            for k in 0..3 {
                let c = sample_cov(cols[j], cols[k]);
                assert!(((c - o.get(j, k)) / o.get(j, k)).abs() < 0.01, "({j},{k})");
            }
        }
    }

    #[test]
    fn triad_residual_correlation() {
        let s = baseline_triads(0.95, 0.9, 0.5, 1_000_000);
        let d = simulate_triads(&s, &mut RngStream::new(6, 0)).unwrap();
        let er: Vec<f64> = d
            .r()
            .unwrap()
            .iter()
            .zip(&d.x)
            .map(|(r, x)| r - s.mu[R] - s.lambda[R] * x)
            .collect();
        let ew: Vec<f64> =
            d.w.iter()
                .zip(&d.x)
                .map(|(w, x)| w - s.mu[W] - s.lambda[W] * x)
                .collect();
        assert!((corr(&er, &ew) - 0.5).abs() < 0.01);
    }

    #[test]
    fn sampler_moment_consistency_and_mean_recovery() {
        let n = 100_000;
        for (i, &(a, l, r)) in [(0.5, 0.8, 0.0), (2.0, 0.1, 0.8), (1.0, 0.5, 0.1)].iter().enumerate() {
            let s = baseline_calibration(a, l, r);
            let d = simulate_calibration_rows(&s, &mut RngStream::new(11, i as u64), n).unwrap();
            let o = marginal_covariance_calibration(&s);
            let scale = o.as_matrix().max_abs();
            let cols = [d.m().unwrap(), &d.w[..]];
            for j in 0..2 {
                for k in 0..2 {
                    let c = sample_cov(cols[j], cols[k]);
                    assert!((c - o.get(j, k)).abs() / scale <= 0.02);
                }
            }
            let mean_w = d.w.iter().sum::<f64>() / n as f64;
            let expected = s.marginal_mean()[1];
            assert!((mean_w - expected).abs() < 4.0 * (o.get(1, 1) / n as f64).sqrt());
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let s = baseline_triads(0.8, 0.5, 0.3, 200);
        let a = simulate_triads(&s, &mut RngStream::new(99, 4)).unwrap();
        let b = simulate_triads(&s, &mut RngStream::new(99, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_scenarios_rejected() {
        assert!(baseline_calibration(0.5, 0.8, 1.0).validate().is_err());
        assert!(baseline_calibration(0.0, 0.8, 0.0).validate().is_err());
        let mut s = baseline_calibration(0.5, 0.8, 0.0);
        s.n_sub = 20_000;
        assert!(s.validate().is_err());
        let mut t = baseline_triads(0.95, 0.9, 0.0, 10);
        t.rho = TriadCorrelations {
            mr: 0.9,
            mw: 0.9,
            rw: -0.9,
        };
        assert!(matches!(t.validate(), Err(Error::NotPositiveDefinite { .. })));
    }
}
