//! Desparsified multi-task Lasso inference for spatio-temporal linear models
//! with AR(1)-autocorrelated noise.
//!
//! The library covers the full inference chain for the model `Y = X B + E`
//! where rows of the noise matrix follow a Toeplitz AR(1) covariance:
//!
//! * [`solvers`] — Lasso / multi-task Lasso block coordinate descent with
//!   duality-gap certificates and cross-validated regularization;
//! * [`desparsify`] — nodewise score vectors, the debiased estimator, noise
//!   parameter estimation and Fisher-statistic p-values (d-MTLasso);
//! * [`cluster`] — spatially constrained Ward clustering and design
//!   compression (cd-MTLasso);
//! * [`ensemble`] — clustering randomization and adaptive quantile
//!   aggregation of p-value maps (ecd-MTLasso);
//! * [`baselines`] — ridge-based dSPM and sLORETA reference estimators;
//! * [`metrics`] — peak localization error, spatial dispersion, δ-FWER and
//!   δ-precision/recall;
//! * [`sim`] — synthetic geometries, gain matrices, sparse sources and AR(1)
//!   noise for calibration studies.

pub mod baselines;
pub mod cluster;
pub mod design;
pub mod desparsify;
pub mod distributions;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod sim;
pub mod solvers;
pub mod toeplitz;

pub use design::{CoefMatrix, DesignMatrix, MultiResponse};
pub use error::{Error, Result};
pub use geometry::Geometry;
pub use toeplitz::ToeplitzAr1;
