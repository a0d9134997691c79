//! Numerical primitives shared by the model, the estimators and the harness.

pub mod kde;
pub mod linalg;
pub mod regression;
pub mod rng;
pub mod summary;

pub use kde::{kde, silverman_bandwidth};
pub use linalg::{cholesky, Matrix, SymmetricMatrix};
pub use regression::{ols_fit, pearson, OlsFit};
pub use rng::{mvn_sample, stream_id, GaussianFactor, RngStream};
pub use summary::{one_sample_t, summarize, Summary, TTest};
