//! Counter-based random streams and Gaussian sampling.
//!
//! Every stream is a ChaCha8 keystream keyed by the master seed and
//! positioned on its own 64-bit stream id, so replicate `r` of scenario `c`
//! draws the same numbers no matter which thread runs it.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::linalg::{cholesky, Matrix, SymmetricMatrix};
use crate::error::{Error, Result};

/// Stream id for replicate `replicate` of grid cell `scenario`.
pub fn stream_id(scenario: u32, replicate: u32) -> u64 {
    (u64::from(scenario) << 32) | u64::from(replicate)
}

pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        RngStream {
            master_seed,
            stream_id,
            inner,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on the open interval (0, 1) with 53 bits of resolution.
    pub fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        normal_quantile(self.uniform_open())
    }
}

/// Standard normal quantile function (Wichura's AS 241, PPND16).
///
/// Relative accuracy is about 1e-16 over (0, 1).
#[allow(clippy::excessive_precision)] // published coefficients
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num =
            ((((((2509.0809287301227 * r + 33430.575583588128) * r + 67265.7709270087) * r + 45921.953931549871) * r
                + 13731.693765509461)
                * r
                + 1971.5909503065514)
                * r
                + 133.14166789178438)
                * r
                + 3.3871328727963666;
        let den =
            ((((((5226.495278852546 * r + 28729.085735721943) * r + 39307.89580009271) * r + 21213.794301586596) * r
                + 5394.196021424751)
                * r
                + 687.1870074920579)
                * r
                + 42.313330701600911)
                * r
                + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let value = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745450142783414e-4 * r + 0.022723844989269184) * r + 0.2417807251774506) * r
            + 1.2704582524523684)
            * r
            + 3.6478483247632046)
            * r
            + 5.769497221460691)
            * r
            + 4.630337846156545)
            * r
            + 1.4234371107496836;
        let den = ((((((1.0507500716444168e-9 * r + 5.475938084995345e-4) * r + 0.015198666563616457) * r
            + 0.14810397642748007)
            * r
            + 0.6897673349851)
            * r
            + 1.6763848301838038)
            * r
            + 2.0531916266377588)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010334399292288e-7 * r + 2.7115555687434876e-5) * r + 0.0012426609473880784) * r
            + 0.026532189526576124)
            * r
            + 0.2965605718285049)
            * r
            + 1.7848265399172913)
            * r
            + 5.463784911164114)
            * r
            + 6.6579046435011038;
        let den = ((((((2.0442631033899397e-15 * r + 1.421511758316446e-7) * r + 1.8463183175100548e-5) * r
            + 7.868691311456133e-4)
            * r
            + 0.014875361290850615)
            * r
            + 0.1369298809227358)
            * r
            + 0.5998322065558879)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -value
    } else {
        value
    }
}

/// Pre-factored covariance for repeated Gaussian draws.
///
/// The covariance is split into standard deviations and a correlation
/// matrix; only the correlation block of the non-degenerate components is
/// Cholesky-factored. Components with exactly zero variance are held at
/// their mean, which makes tiny or vanishing error scales usable.
#[derive(Debug, Clone)]
pub struct GaussianFactor {
    dim: usize,
    sd: Vec<f64>,
    active: Vec<usize>,
    corr_chol: Matrix,
}

impl GaussianFactor {
    pub fn new(cov: &SymmetricMatrix) -> Result<Self> {
        let dim = cov.dim();
        let mut sd = Vec::with_capacity(dim);
        for i in 0..dim {
            let v = cov.get(i, i);
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::NotPositiveDefinite { index: i, pivot: v });
            }
            sd.push(v.sqrt());
        }
        for i in (0..dim).filter(|&i| sd[i] == 0.0) {
            if let Some(j) = (0..dim).find(|&j| cov.get(i, j) != 0.0) {
                return Err(Error::NotPositiveDefinite {
                    index: i.max(j),
                    pivot: 0.0,
                });
            }
        }
        let mut corr = Matrix::identity(dim);
        for i in 0..dim {
            for j in 0..dim {
                if i != j && sd[i] > 0.0 && sd[j] > 0.0 {
                    corr[(i, j)] = cov.get(i, j) / (sd[i] * sd[j]);
                }
            }
        }
        Self::from_correlation(sd, &SymmetricMatrix::new(corr)?)
    }

    /// Builds the factor from standard deviations and a correlation matrix
    /// directly, avoiding the round trip through covariance entries.
    pub fn from_correlation(sd: Vec<f64>, corr: &SymmetricMatrix) -> Result<Self> {
        let dim = corr.dim();
        if sd.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: sd.len(),
            });
        }
        if let Some(i) = sd.iter().position(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::NotPositiveDefinite { index: i, pivot: sd[i] });
        }
        let active: Vec<usize> = (0..dim).filter(|&i| sd[i] > 0.0).collect();
        let k = active.len();
        let mut sub = Matrix::zeros(k, k);
        for (a, &i) in active.iter().enumerate() {
            for (b, &j) in active.iter().enumerate() {
                sub[(a, b)] = corr.get(i, j);
            }
        }
        let corr_chol = cholesky(&SymmetricMatrix::new(sub)?)?;
        Ok(GaussianFactor {
            dim,
            sd,
            active,
            corr_chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes one zero-mean draw into `out` (length `dim`). Consumes exactly
    /// `dim` standard normals from the stream.
    pub fn sample_into(&self, rng: &mut RngStream, out: &mut [f64]) {
        let mut z = [0.0f64; 8];
        let mut z_heap;
        let z: &mut [f64] = if self.dim <= z.len() {
            &mut z[..self.dim]
        } else {
            z_heap = vec![0.0; self.dim];
            &mut z_heap
        };
        for zi in z.iter_mut() {
            *zi = rng.standard_normal();
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        for (a, &i) in self.active.iter().enumerate() {
            let s: f64 = z[..=a]
                .iter()
                .enumerate()
                .map(|(b, zb)| self.corr_chol[(a, b)] * zb)
                .sum();
            out[i] = self.sd[i] * s;
        }
    }
}

/// `count` i.i.d. rows from N(mean, cov).
pub fn mvn_sample(rng: &mut RngStream, mean: &[f64], cov: &SymmetricMatrix, count: usize) -> Result<Matrix> {
    if mean.len() != cov.dim() {
        return Err(Error::DimensionMismatch {
            expected: cov.dim(),
            actual: mean.len(),
        });
    }
    let factor = GaussianFactor::new(cov)?;
    let dim = mean.len();
    let mut out = Matrix::zeros(count, dim);
    let mut row = vec![0.0; dim];
    for i in 0..count {
        factor.sample_into(rng, &mut row);
        for j in 0..dim {
            out[(i, j)] = mean[j] + row[j];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn quantile_matches_reference_inverse_cdf() {
        let reference = Normal::standard();
        for &p in &[
            1e-300,
            1e-20,
            1e-10,
            1e-4,
            0.01,
            0.025,
            0.075,
            0.2,
            0.5,
            0.6,
            0.925,
            0.99,
            1.0 - 1e-9,
        ] {
            let ours = normal_quantile(p);
            let back = reference.cdf(ours);
            let rel = ((back - p) / p.min(1.0 - p)).abs();
            assert!(rel < 1e-9, "p={p}: quantile {ours}, cdf back {back}");
        }
        assert_eq!(normal_quantile(0.5), 0.0);
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-14);
    }

    #[test]
    fn quantile_is_antisymmetric() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let a = normal_quantile(p);
            let b = normal_quantile(1.0 - p);
            assert!((a + b).abs() < 1e-12, "p={p}");
        }
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = RngStream::new(42, 0);
        let mut b = RngStream::new(42, 0);
        let mut c = RngStream::new(42, 1);
        let xs: Vec<u64> = (0..64).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..64).map(|_| b.next_u64()).collect();
        let zs: Vec<u64> = (0..64).map(|_| c.next_u64()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
        assert_eq!(stream_id(3, 7), (3u64 << 32) + 7);
    }

    #[test]
    fn uniform_stays_open() {
        let mut r = RngStream::new(1, 1);
        for _ in 0..100_000 {
            let u = r.uniform_open();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn zero_covariance_returns_mean() {
        let cov = SymmetricMatrix::new(Matrix::zeros(2, 2)).unwrap();
        let out = mvn_sample(&mut RngStream::new(9, 0), &[1.5, -2.0], &cov, 50).unwrap();
        for i in 0..50 {
            assert_eq!(out.row(i), &[1.5, -2.0]);
        }
    }

    #[test]
    fn determinism_bit_identical() {
        let cov = SymmetricMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let a = mvn_sample(&mut RngStream::new(42, 0), &[0.0, 0.0], &cov, 1000).unwrap();
        let b = mvn_sample(&mut RngStream::new(42, 0), &[0.0, 0.0], &cov, 1000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_sample_covariance_converges() {
        let n = 1_000_000;
        let out = mvn_sample(
            &mut RngStream::new(42, 0),
            &[0.0, 0.0],
            &SymmetricMatrix::identity(2),
            n,
        )
        .unwrap();
        let (a, b) = (out.column(0), out.column(1));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (ma, mb) = (mean(&a), mean(&b));
        let cov = |x: &[f64], mx: f64, y: &[f64], my: f64| {
            x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum::<f64>() / (n - 1) as f64
        };
        assert!((cov(&a, ma, &a, ma) - 1.0).abs() < 0.01);
        assert!((cov(&b, mb, &b, mb) - 1.0).abs() < 0.01);
        assert!(cov(&a, ma, &b, mb).abs() < 0.01);
    }

    #[test]
    fn inconsistent_zero_variance_rejected() {
        let cov = SymmetricMatrix::from_rows(&[vec![0.0, 0.1], vec![0.1, 1.0]]).unwrap();
        assert!(GaussianFactor::new(&cov).is_err());
    }
}
