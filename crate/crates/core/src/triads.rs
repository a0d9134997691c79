//! Method of triads: the validity coefficient of W from the three pairwise
//! correlations of (M, R, W), `VC = √(ρ_MW·ρ_WR / ρ_MR)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::regression::pearson;
use crate::model::{marginal_covariance_triads, StudyDataset, TriadScenario, M, R, W};

/// Ratios within rounding of one (perfect instruments) are not Heywood cases.
pub const HEYWOOD_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriadStatus {
    Ok,
    /// The ratio under the square root exceeds one.
    Heywood,
    /// At least one pairwise correlation is ≤ 0.
    NegativeCorrelation,
}

impl TriadStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            TriadStatus::Ok => "ok",
            TriadStatus::Heywood => "heywood",
            TriadStatus::NegativeCorrelation => "negative_correlation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(TriadStatus::Ok),
            "heywood" => Some(TriadStatus::Heywood),
            "negative_correlation" => Some(TriadStatus::NegativeCorrelation),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriadEstimate {
    pub rho_mw_hat: f64,
    pub rho_wr_hat: f64,
    pub rho_mr_hat: f64,
    /// Raw square-root value: the estimate for `Ok`, a diagnostic (> 1) for
    /// `Heywood`, absent for `NegativeCorrelation`.
    pub vc_hat: Option<f64>,
    pub status: TriadStatus,
}

impl TriadEstimate {
    /// The usable validity coefficient, only when the status is `Ok`.
    pub fn vc(&self) -> Option<f64> {
        match self.status {
            TriadStatus::Ok => self.vc_hat,
            _ => None,
        }
    }

    pub fn from_correlations(rho_mw: f64, rho_wr: f64, rho_mr: f64) -> Self {
        let (vc_hat, status) = if rho_mw <= 0.0 || rho_wr <= 0.0 || rho_mr <= 0.0 {
            (None, TriadStatus::NegativeCorrelation)
        } else {
            let ratio = rho_mw * rho_wr / rho_mr;
            let status = if ratio > 1.0 + HEYWOOD_TOLERANCE {
                TriadStatus::Heywood
            } else {
                TriadStatus::Ok
            };
            (Some(ratio.sqrt()), status)
        };
        TriadEstimate {
            rho_mw_hat: rho_mw,
            rho_wr_hat: rho_wr,
            rho_mr_hat: rho_mr,
            vc_hat,
            status,
        }
    }
}

pub fn estimate_vc(data: &StudyDataset) -> Result<TriadEstimate> {
    let m = data.m()?;
    let r = data.r()?;
    let w = &data.w;
    Ok(TriadEstimate::from_correlations(
        pearson(m, w)?,
        pearson(w, r)?,
        pearson(m, r)?,
    ))
}

/// Corr(W, X) = λ_WX σ_X / √(λ_WX² σ_X² + σ_W²).
pub fn true_vc(s: &TriadScenario) -> f64 {
    let lw = s.lambda[W];
    let sw = s.sigma[W];
    lw * s.sigma_x / (lw * lw * s.sigma_x * s.sigma_x + sw * sw).sqrt()
}

/// Population correlations (ρ_MW, ρ_WR, ρ_MR) implied by Ω.
pub fn population_correlations(s: &TriadScenario) -> (f64, f64, f64) {
    let o = marginal_covariance_triads(s);
    let c = |j: usize, k: usize| o.get(j, k) / (o.get(j, j) * o.get(k, k)).sqrt();
    (c(M, W), c(W, R), c(M, R))
}

/// What the triad estimator converges to, with or without correlated
/// errors.
pub fn population_triad_vc(s: &TriadScenario) -> f64 {
    let (mw, wr, mr) = population_correlations(s);
    (mw * wr / mr).sqrt()
}

/// Population triad product, defined only when all error correlations are
/// zero; it then coincides with [`true_vc`].
pub fn population_vc_triad_product(s: &TriadScenario) -> Result<f64> {
    if !s.rho.is_independent() {
        return Err(Error::AssumptionViolated(format!(
            "triad identity requires independent errors, got rho = ({}, {}, {})",
            s.rho.mr, s.rho.mw, s.rho.rw
        )));
    }
    Ok(population_triad_vc(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::rng::RngStream;
    use crate::model::{simulate_triads, StudyRole, TriadCorrelations};
    use proptest::prelude::*;

    fn scenario(lambda_rx: f64, lambda_wx: f64, rho_rw: f64) -> TriadScenario {
        let sx = 14f64.ln();
        TriadScenario {
            mu_x: 2141f64.ln(),
            sigma_x: sx,
            mu: [0.0, 0.0, 1485f64.ln()],
            lambda: [1.0, lambda_rx, lambda_wx],
            sigma: [0.5 * sx, 21f64.ln(), 28f64.ln()],
            rho: TriadCorrelations {
                mr: 0.0,
                mw: 0.0,
                rw: rho_rw,
            },
            n: 1000,
        }
    }

    fn dataset(m: Vec<f64>, r: Vec<f64>, w: Vec<f64>) -> StudyDataset {
        StudyDataset {
            role: StudyRole::SubStudy,
            x: vec![0.0; w.len()],
            m: Some(m),
            r: Some(r),
            w,
        }
    }

    #[test]
    fn known_truth_values() {
        assert!((true_vc(&scenario(0.95, 0.9, 0.0)) - 0.580).abs() < 5e-4);
        assert!((true_vc(&scenario(0.8, 0.5, 0.0)) - 0.368).abs() < 5e-4);
        let mut perfect = scenario(0.95, 0.9, 0.0);
        perfect.sigma[W] = 0.0;
        assert_eq!(true_vc(&perfect), 1.0);
    }

    #[test]
    fn triad_product_matches_truth_under_independence() {
        let s = scenario(0.95, 0.9, 0.0);
        let p = population_vc_triad_product(&s).unwrap();
        assert!((p - true_vc(&s)).abs() < 1e-12);
        assert!((p - 0.580).abs() < 5e-4);
        assert!(matches!(
            population_vc_triad_product(&scenario(0.95, 0.9, 0.5)),
            Err(Error::AssumptionViolated(_))
        ));
    }

    #[test]
    fn correlated_errors_inflate_population_value() {
        // Published estimate for this cell: 0.789 (sd 0.019).
        let inflated = population_triad_vc(&scenario(0.95, 0.9, 0.5));
        assert!((inflated - 0.789).abs() < 0.01, "{inflated}");
        for (lr, lw) in [(0.95, 0.9), (0.8, 0.5)] {
            let values: Vec<f64> = [0.0, 0.1, 0.3, 0.5]
                .iter()
                .map(|&r| population_triad_vc(&scenario(lr, lw, r)))
                .collect();
            assert!(values.windows(2).all(|p| p[1] > p[0]), "{values:?}");
        }
    }

    #[test]
    fn symmetric_triad() {
        // Unit loadings and unit-variance independent noise: every pairwise
        // correlation is 1/2, so the estimate is √(1/2).
        let s = TriadScenario {
            mu_x: 0.0,
            sigma_x: 1.0,
            mu: [0.0; 3],
            lambda: [1.0; 3],
            sigma: [1.0; 3],
            rho: TriadCorrelations::default(),
            n: 200_000,
        };
        let est = estimate_vc(&simulate_triads(&s, &mut RngStream::new(5, 5)).unwrap()).unwrap();
        for r in [est.rho_mw_hat, est.rho_wr_hat, est.rho_mr_hat] {
            assert!((r - 0.5).abs() < 0.01, "{r}");
        }
        assert!((est.vc().unwrap() - 0.5f64.sqrt()).abs() < 0.01);
        let (mw, wr, mr) = population_correlations(&s);
        assert!((mw - 0.5).abs() < 1e-15 && (wr - 0.5).abs() < 1e-15 && (mr - 0.5).abs() < 1e-15);
    }

    #[test]
    fn noiseless_triad_is_perfect() {
        let mut s = scenario(0.95, 0.9, 0.0);
        s.sigma = [1e-8; 3];
        let d = simulate_triads(&s, &mut RngStream::new(1, 2)).unwrap();
        let est = estimate_vc(&d).unwrap();
        assert_eq!(est.status, TriadStatus::Ok);
        assert!((est.vc().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heywood_detected() {
        // ρ_MW·ρ_WR = 0.81 > ρ_MR = 0.5.
        let e = TriadEstimate::from_correlations(0.9, 0.9, 0.5);
        assert_eq!(e.status, TriadStatus::Heywood);
        assert!(e.vc_hat.unwrap() > 1.0);
        assert!(e.vc().is_none());
    }

    #[test]
    fn heywood_from_constructed_columns() {
        // M and R nearly uncorrelated, both strongly tied to W.
        let n = 400;
        let mut rng = RngStream::new(77, 0);
        let a: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        let w: Vec<f64> = (0..n).map(|i| a[i] + b[i]).collect();
        let m: Vec<f64> = (0..n).map(|i| a[i] + 0.2 * b[i]).collect();
        let r: Vec<f64> = (0..n).map(|i| b[i] + 0.2 * a[i]).collect();
        let est = estimate_vc(&dataset(m, r, w)).unwrap();
        assert!(est.rho_mw_hat * est.rho_wr_hat > est.rho_mr_hat);
        assert_eq!(est.status, TriadStatus::Heywood);
    }

    #[test]
    fn negative_correlation_status() {
        let e = TriadEstimate::from_correlations(0.4, -0.1, 0.5);
        assert_eq!(e.status, TriadStatus::NegativeCorrelation);
        assert!(e.vc_hat.is_none());
    }

    #[test]
    fn requires_all_three_columns() {
        let mut d = dataset(vec![1.0, 2.0, 3.0], vec![1.0, 3.0, 2.0], vec![3.0, 1.0, 2.0]);
        d.r = None;
        assert!(matches!(estimate_vc(&d), Err(Error::MissingColumn("r"))));
    }

    #[test]
    fn status_strings_round_trip() {
        for s in [TriadStatus::Ok, TriadStatus::Heywood, TriadStatus::NegativeCorrelation] {
            assert_eq!(TriadStatus::parse(s.as_str()), Some(s));
        }
    }

    #[test]
    fn rescaling_columns_leaves_estimate_unchanged() {
        let d = simulate_triads(&scenario(0.8, 0.5, 0.1), &mut RngStream::new(3, 3)).unwrap();
        let base = estimate_vc(&d).unwrap();
        let mut scaled = d.clone();
        scaled.w.iter_mut().for_each(|v| *v = 3.5 * *v - 2.0);
        if let Some(m) = scaled.m.as_mut() {
            m.iter_mut().for_each(|v| *v = 0.01 * *v + 40.0);
        }
        let est = estimate_vc(&scaled).unwrap();
        assert!((est.vc_hat.unwrap() - base.vc_hat.unwrap()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn identity_holds_over_positive_loadings(
            lm in 0.05f64..3.0, lr in 0.05f64..3.0, lw in 0.05f64..3.0,
            sx in 0.1f64..5.0, sm in 0.05f64..5.0, sr in 0.05f64..5.0, sw in 0.05f64..5.0,
        ) {
            let s = TriadScenario {
                mu_x: 1.0, sigma_x: sx, mu: [0.0; 3], lambda: [lm, lr, lw],
                sigma: [sm, sr, sw], rho: TriadCorrelations::default(), n: 10,
            };
            let p = population_vc_triad_product(&s).unwrap();
            prop_assert!((p - true_vc(&s)).abs() < 1e-12 * true_vc(&s));
        }

        #[test]
        fn population_estimate_increases_with_rho_rw(lr in 0.3f64..1.5, lw in 0.2f64..1.5) {
            let vals: Vec<f64> = [0.0, 0.1, 0.3, 0.5].iter().map(|&r| population_triad_vc(&scenario(lr, lw, r))).collect();
            prop_assert!(vals.windows(2).all(|p| p[1] > p[0]));
        }
    }
}
