//! Dependence between numerical features and a categorical label measured
//! with Gini distance statistics in a reproducing kernel Hilbert space.
//!
//! * [`kernels`]: bounded kernels, induced distances, distance matrices.
//! * [`estimators`]: Gini mean differences, `gcov`/`gcor`, U-centered
//!   `dcov`/`dcor`, the correlation ratio baseline.
//! * [`oracle`]: exact population values over discrete joints and a Monte
//!   Carlo harness.
//! * [`inference`]: distribution-free critical values and bounds,
//!   permutation tests, the asymptotic confidence interval.
//! * [`simgen`]: synthetic H0/H1 generators and the power/AUC study.

// `!(x > 0.0)` style guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimators;
pub mod inference;
pub mod kernels;
pub mod numeric;
pub mod oracle;
pub mod simgen;

pub use error::{Error, Result};
pub use estimators::{
    dcor_n, dcov_n, dcov_plugin, eta2, gcor_n, gcov_n, gini_statistics, gmd, gmd_1d_fast, u_center,
    GiniStatistics, LabeledDataset, Statistic,
};
pub use kernels::{induced_distance, pairwise_matrix, set_distance, DistanceMatrix, Kernel};
