//! Pipeline layer over `sbfp-core`: CSV ingestion, parameter estimation,
//! the end-to-end turning-point decision report, parallel Monte Carlo and
//! the analytic-vs-Monte-Carlo reconciliation harness.

pub mod fit;
pub mod mc;
pub mod reconcile;
pub mod report;
pub mod series;

pub use fit::{fit_params, FitError, FitResult};
pub use mc::mc_estimate_parallel;
pub use reconcile::{reconcile, ReconcileConfig, ReconcileReport};
pub use report::{predict, PredictConfig, Report};
pub use series::{load_csv, SeriesData, SeriesError, TimeUnit};
