//! Firm-productivity toolkit: control-function TFP estimation, iterative PCA
//! imputation, self-organizing maps, k-means model selection, cluster
//! diagnostics and principal-component / Lasso regression.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*F64`
//! aliases below fix the scalar to `f64`, which is what the CLI uses.

pub mod cluster;
pub mod dgp;
pub mod error;
pub mod linalg;
pub mod panel;
pub mod pca;
pub mod prodest;
pub mod regress;
pub mod rng;
pub mod scalar;
pub mod som;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::Matrix;
pub use scalar::Scalar;

pub type MatrixF64 = Matrix<f64>;
pub type PanelF64 = panel::FirmPanel<f64>;
pub type EstimatorResultF64 = prodest::EstimatorResult<f64>;
pub type PcaModelF64 = pca::PcaModel<f64>;
pub type SomModelF64 = som::SomModel<f64>;
pub type KMeansModelF64 = cluster::KMeansModel<f64>;
pub type RegressionReportF64 = regress::RegressionReport<f64>;
pub type LassoResultF64 = regress::LassoResult<f64>;
