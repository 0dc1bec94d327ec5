//! Permutation test of one feature against the label.

use std::path::PathBuf;

use ginidep_core::estimators::eta2;
use ginidep_core::inference::{permutation_test, permutation_test_with, TestReport};
use ginidep_core::kernels::{pairwise_matrix_1d, Kernel};
use serde::{Deserialize, Serialize};

use crate::data::{is_constant, load_csv, standardize, ColumnSelector};
use crate::error::{CliError, Result};
use crate::screen::ScreenStatistic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleTestConfig {
    pub input: PathBuf,
    pub label: ColumnSelector,
    pub feature: ColumnSelector,
    pub statistic: ScreenStatistic,
    pub sigma2: f64,
    pub standardize: bool,
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
    pub drop_small_classes: bool,
}

pub fn run_single_test(cfg: &SingleTestConfig) -> Result<TestReport> {
    let loaded = load_csv(&cfg.input, &cfg.label, cfg.drop_small_classes)?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    let mut dataset = loaded.dataset;
    let j = cfg.feature.resolve(&dataset.feature_names)?;
    if is_constant(&dataset.column(j)) {
        return Err(CliError::Infeasible(format!(
            "feature '{}' has zero variance",
            dataset.feature_names[j]
        )));
    }
    if cfg.standardize {
        dataset = standardize(&dataset).dataset;
    }
    let values = dataset.column(j);
    let labels = &dataset.labels;
    let report = match cfg.statistic.distance_statistic() {
        Some(stat) => {
            let d = pairwise_matrix_1d(&Kernel::weighted_gaussian(cfg.sigma2)?, &values)?;
            permutation_test(stat, &d, labels, cfg.permutations, cfg.alpha, cfg.seed)?
        }
        None => {
            permutation_test_with("eta2", labels, cfg.permutations, cfg.alpha, cfg.seed, |y| {
                eta2(&values, y)
            })?
        }
    };
    Ok(report)
}
