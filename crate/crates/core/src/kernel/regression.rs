use crate::error::{Error, Result};

/// Sample variance below which a column is treated as constant.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlsFit {
    pub intercept: f64,
    pub slope: f64,
    /// Residual sum of squares over `n - 2`.
    pub residual_variance: f64,
    pub slope_se: f64,
    pub n: usize,
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 3 {
        return Err(Error::TooFewObservations {
            required: 3,
            actual: x.len(),
        });
    }
    check_finite(x)?;
    check_finite(y)
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

struct Moments {
    mean_x: f64,
    mean_y: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

fn centered_moments(x: &[f64], y: &[f64]) -> Moments {
    let mean_x = mean(x);
    let mean_y = mean(y);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    Moments {
        mean_x,
        mean_y,
        sxx,
        syy,
        sxy,
    }
}

/// Least-squares line `y = intercept + slope·x`.
pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<OlsFit> {
    check_pair(x, y)?;
    let n = x.len();
    let m = centered_moments(x, y);
    let var_x = m.sxx / (n - 1) as f64;
    if var_x < DEGENERATE_VARIANCE {
        return Err(Error::DegenerateRegressor { variance: var_x });
    }
    let slope = m.sxy / m.sxx;
    let intercept = m.mean_y - slope * m.mean_x;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - intercept - slope * a;
            e * e
        })
        .sum();
    let residual_variance = rss / (n - 2) as f64;
    Ok(OlsFit {
        intercept,
        slope,
        residual_variance,
        slope_se: (residual_variance / m.sxx).sqrt(),
        n,
    })
}

/// Product-moment correlation, clamped to [-1, 1].
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len();
    let m = centered_moments(x, y);
    for s in [m.sxx, m.syy] {
        let var = s / (n - 1) as f64;
        if var < DEGENERATE_VARIANCE {
            return Err(Error::DegenerateRegressor { variance: var });
        }
    }
    Ok((m.sxy / (m.sxx.sqrt() * m.syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_line() {
        let fit = ols_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((fit.intercept - 1.0).abs() < 1e-15);
        assert!((fit.slope - 2.0).abs() < 1e-15);
        assert!(fit.residual_variance.abs() < 1e-28);
    }

    #[test]
    fn identity_regression() {
        let x = [0.3, -1.2, 4.0, 2.2, 0.0];
        let fit = ols_fit(&x, &x).unwrap();
        assert!(fit.intercept.abs() < 1e-15);
        assert!((fit.slope - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_regressor_is_degenerate() {
        let err = ols_fit(&[2.0, 2.0, 2.0, 2.0], &[1.0, 2.0, 3.0, 4.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateRegressor { .. }));
        assert!(matches!(
            pearson(&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]),
            Err(Error::DegenerateRegressor { .. })
        ));
    }

    #[test]
    fn input_validation() {
        assert!(matches!(
            ols_fit(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::TooFewObservations { .. })
        ));
        assert!(matches!(
            pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            pearson(&[1.0, f64::NAN, 3.0], &[1.0, 2.0, 3.0]),
            Err(Error::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn perfect_correlations() {
        let x = [1.0, 2.5, -3.0, 7.0, 0.1];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn slope_standard_error_matches_textbook_formula() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.1, 1.9, 3.2, 3.9, 5.1];
        let fit = ols_fit(&x, &y).unwrap();
        // Sxx = 10; residuals recomputed by hand below.
        let res: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(a, b)| b - fit.intercept - fit.slope * a)
            .collect();
        let s2 = res.iter().map(|e| e * e).sum::<f64>() / 3.0;
        assert!((fit.slope_se - (s2 / 10.0).sqrt()).abs() < 1e-15);
        assert!((fit.slope - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn noiseless_affine_recovered(
            a in -50.0f64..50.0,
            b in prop_oneof![-20.0f64..-0.1, 0.1f64..20.0],
            xs in proptest::collection::vec(-100.0f64..100.0, 3..40),
        ) {
            prop_assume!({
                let m = mean(&xs);
                xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64 > 1e-3
            });
            let ys: Vec<f64> = xs.iter().map(|x| a + b * x).collect();
            let fit = ols_fit(&xs, &ys).unwrap();
            prop_assert!(((fit.slope - b) / b).abs() < 1e-12);
            let scale = a.abs().max(b.abs() * 100.0);
            prop_assert!((fit.intercept - a).abs() < 1e-12 * scale);
        }

        #[test]
        fn pearson_affine_invariant(
            xs in proptest::collection::vec(-10.0f64..10.0, 5..40),
            ys in proptest::collection::vec(-10.0f64..10.0, 5..40),
            scale in 0.01f64..100.0,
            shift in -100.0f64..100.0,
        ) {
            let n = xs.len().min(ys.len());
            let (xs, ys) = (&xs[..n], &ys[..n]);
            let base = match pearson(xs, ys) { Ok(r) => r, Err(_) => return Ok(()) };
            let xt: Vec<f64> = xs.iter().map(|v| scale * v + shift).collect();
            let r = pearson(&xt, ys).unwrap();
            prop_assert!((r - base).abs() < 1e-12);
            prop_assert!((pearson(ys, xs).unwrap() - base).abs() < 1e-15);
        }
    }
}
