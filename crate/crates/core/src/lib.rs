//! Instrumental-variable estimation with the PULSE estimator and the wider
//! k-class family, together with a linear structural-equation simulator used to
//! study them.
//!
//! ```
//! use nalgebra::{DMatrix, DVector};
//! use pulse_core::{DesignView, Dataset, ModelPartition, PulseConfig, pulse_estimate};
//!
//! let n = 200;
//! let a = DMatrix::from_fn(n, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 - 5.0);
//! let h = DVector::from_fn(n, |i, _| ((i * 5) % 13) as f64 - 6.0);
//! let x = DMatrix::from_fn(n, 1, |i, _| a[(i, 0)] + 0.5 * a[(i, 1)] + h[i] + ((i * 3) % 7) as f64 - 3.0);
//! let y = DVector::from_fn(n, |i, _| 2.0 * x[(i, 0)] + h[i] + ((i * 11) % 5) as f64 - 2.0);
//! let ds = Dataset::new(y, x, a).unwrap();
//! let view = DesignView::new(&ds, &ModelPartition::all_endogenous(1)).unwrap();
//! let fit = pulse_estimate(&view, &PulseConfig::default()).unwrap();
//! assert!(fit.test_at_solution.accepted);
//! ```

// `!(x > 0.0)` style guards reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// Library version, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod data;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod inference;
pub mod linalg;
pub mod pulse;
pub mod rng;
pub mod sem;

#[cfg(test)]
mod test_util;

pub use data::{center, load_csv, projection_apply, read_csv, ColumnSchema, Dataset, DesignView, IdentificationClass, ModelPartition, Roles};
pub use error::{Error, ErrorKind, Result};
pub use estimators::{
    anchor_estimate, estimate, fuller_kappa, kclass_estimate, liml_kappa, modified_tsls_estimate, ols_estimate,
    tsls_estimate, EstimateResult, EstimatorSpec,
};
pub use inference::{
    ar_accepts, ar_statistic, chi2_cdf, chi2_quantile, test_statistic, weak_instrument_stat, Scaling, TestConfig,
    TestResult, WeakInstrumentReport,
};
pub use pulse::{
    lambda_star_search, primal_domain, primal_solve, pulse_estimate, t_star, LambdaStar, PulseConfig, PulseMessage,
    PulseResult, TStar,
};
pub use sem::{
    population_kclass, population_moments, sample, worst_case_mspe, Intervention, PopulationMoments, SemModel, SemSpec,
};
pub use experiments::{
    run_experiment, Design, EstimatorChoice, ExperimentConfig, ExperimentReport, MseOrder, PerformanceReport,
};
