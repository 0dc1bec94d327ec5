//! Per-feature screening: each feature is treated as a one-dimensional `X`
//! and scored against the label.

use std::fs;
use std::path::{Path, PathBuf};

use ginidep_core::estimators::{eta2, ClassPartition, Statistic};
use ginidep_core::inference::{permutation_test, permutation_test_with, TestReport};
use ginidep_core::kernels::{pairwise_matrix_1d, Kernel, DEFAULT_SIGMA2};
use ginidep_core::numeric::derive_seed;
use ginidep_core::LabeledDataset;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{is_constant, load_csv, standardize, subsample, ColumnSelector};
use crate::error::{CliError, Result};

pub const REPORT_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ScreenStatistic {
    Gcov,
    Gcor,
    Dcov,
    Dcor,
    Eta2,
}

impl ScreenStatistic {
    pub fn name(&self) -> &'static str {
        match self {
            ScreenStatistic::Gcov => "gcov",
            ScreenStatistic::Gcor => "gcor",
            ScreenStatistic::Dcov => "dcov",
            ScreenStatistic::Dcor => "dcor",
            ScreenStatistic::Eta2 => "eta2",
        }
    }

    /// The distance statistic, or `None` for the correlation ratio.
    pub fn distance_statistic(&self) -> Option<Statistic> {
        match self {
            ScreenStatistic::Gcov => Some(Statistic::Gcov),
            ScreenStatistic::Gcor => Some(Statistic::Gcor),
            ScreenStatistic::Dcov => Some(Statistic::Dcov),
            ScreenStatistic::Dcor => Some(Statistic::Dcor),
            ScreenStatistic::Eta2 => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningConfig {
    pub input: PathBuf,
    pub label: ColumnSelector,
    pub statistic: ScreenStatistic,
    pub sigma2: f64,
    pub standardize: bool,
    pub top_k: Option<usize>,
    /// Permutations per feature; 0 skips testing.
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
    pub sample_cap: Option<usize>,
    pub drop_small_classes: bool,
}

impl ScreeningConfig {
    pub fn new(input: impl Into<PathBuf>, label: impl Into<String>) -> Self {
        Self {
            input: input.into(),
            label: ColumnSelector(label.into()),
            statistic: ScreenStatistic::Gcor,
            sigma2: DEFAULT_SIGMA2,
            standardize: true,
            top_k: None,
            permutations: 0,
            alpha: 0.05,
            seed: 0,
            sample_cap: None,
            drop_small_classes: false,
        }
    }

    pub fn kernel(&self) -> Result<Kernel> {
        Ok(Kernel::weighted_gaussian(self.sigma2)?)
    }

    fn validate(&self) -> Result<()> {
        self.kernel()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CliError::Input(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.sample_cap == Some(0) {
            return Err(CliError::Input("sample cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub name: String,
    /// Absent when the feature was excluded.
    pub value: Option<f64>,
    pub rank: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
}

/// Features in rank order: scored features by descending value (ties by
/// column index), then excluded features by column index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeatures {
    pub features: Vec<RankedFeature>,
    pub warnings: Vec<String>,
}

struct Scored {
    index: usize,
    value: Option<f64>,
    p_value: Option<f64>,
    excluded: Option<String>,
}

fn score_feature(values: &[f64], labels: &[usize], cfg: &ScreeningConfig, index: usize) -> Scored {
    let excluded = |reason: String| Scored {
        index,
        value: None,
        p_value: None,
        excluded: Some(reason),
    };
    if is_constant(values) {
        return excluded("zero variance".into());
    }
    let seed = derive_seed(cfg.seed, index as u64);
    let outcome: ginidep_core::Result<(f64, Option<TestReport>)> =
        match cfg.statistic.distance_statistic() {
            Some(stat) => Kernel::weighted_gaussian(cfg.sigma2).and_then(|kernel| {
                let d = pairwise_matrix_1d(&kernel, values)?;
                let value = stat.compute(&d, labels)?;
                let test = if cfg.permutations > 0 {
                    Some(permutation_test(
                        stat,
                        &d,
                        labels,
                        cfg.permutations,
                        cfg.alpha,
                        seed,
                    )?)
                } else {
                    None
                };
                Ok((value, test))
            }),
            None => eta2(values, labels).and_then(|value| {
                let test = if cfg.permutations > 0 {
                    Some(permutation_test_with(
                        "eta2",
                        labels,
                        cfg.permutations,
                        cfg.alpha,
                        seed,
                        |y| eta2(values, y),
                    )?)
                } else {
                    None
                };
                Ok((value, test))
            }),
        };
    match outcome {
        Ok((value, test)) => Scored {
            index,
            value: Some(value),
            p_value: test.and_then(|t| t.p_value),
            excluded: None,
        },
        Err(e) => excluded(e.to_string()),
    }
}

/// Checks the class-size requirements of the chosen statistic on the whole
/// dataset; failures here make every feature infeasible.
fn check_feasible(dataset: &LabeledDataset, statistic: ScreenStatistic) -> Result<Vec<String>> {
    let part = dataset.partition();
    let mut warnings = Vec::new();
    if part.k() < 2 {
        warnings.push(format!(
            "only {} class present; every statistic is 0",
            part.k()
        ));
    }
    if statistic == ScreenStatistic::Eta2 {
        return Ok(warnings);
    }
    if let Err(e) = part.require_min_size(2) {
        return Err(CliError::Infeasible(format!(
            "{e}; rerun with --drop-small-classes to exclude such classes"
        )));
    }
    if matches!(statistic, ScreenStatistic::Dcov | ScreenStatistic::Dcor) && dataset.n() < 4 {
        return Err(CliError::Infeasible(format!(
            "{} needs at least 4 rows",
            statistic.name()
        )));
    }
    let at_minimum: Vec<&str> = minimal_classes(&part, dataset);
    if !at_minimum.is_empty() {
        warnings.push(format!(
            "classes with exactly 2 rows give high-variance estimates: {}",
            at_minimum.join(", ")
        ));
    }
    Ok(warnings)
}

fn minimal_classes<'a>(part: &ClassPartition, dataset: &'a LabeledDataset) -> Vec<&'a str> {
    part.codes()
        .iter()
        .zip(part.sizes())
        .filter(|(_, s)| *s == 2)
        .map(|(&c, _)| dataset.class_names[c].as_str())
        .collect()
}

/// Scores every feature in parallel and orders them. Per-feature
/// permutation seeds derive from the run seed and the column index, so the
/// output does not depend on the thread count.
pub fn rank_features(dataset: &LabeledDataset, cfg: &ScreeningConfig) -> Result<RankedFeatures> {
    cfg.validate()?;
    let mut warnings = check_feasible(dataset, cfg.statistic)?;
    let labels = &dataset.labels;
    let mut scored: Vec<Scored> = (0..dataset.q())
        .into_par_iter()
        .map(|j| score_feature(&dataset.column(j), labels, cfg, j))
        .collect();
    for s in &scored {
        if let Some(reason) = &s.excluded {
            warnings.push(format!(
                "feature '{}' excluded from ranking: {reason}",
                dataset.feature_names[s.index]
            ));
        }
    }
    scored.sort_by(|a, b| match (a.value, b.value) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.index.cmp(&b.index)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.index.cmp(&b.index),
    });
    let features = scored
        .into_iter()
        .enumerate()
        .map(|(r, s)| RankedFeature {
            name: dataset.feature_names[s.index].clone(),
            value: s.value,
            rank: r + 1,
            p_value: s.p_value,
            excluded: s.excluded,
        })
        .collect();
    Ok(RankedFeatures { features, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub version: String,
    pub config: ScreeningConfig,
    pub seed: u64,
    /// Rows actually scored, after class filtering and subsampling.
    pub n: usize,
    pub features: Vec<RankedFeature>,
    pub selected: Vec<String>,
    pub warnings: Vec<String>,
}

/// Load, optionally subsample and standardize, rank, and select. Writes
/// nothing; see [`write_outputs`].
pub fn screen(cfg: &ScreeningConfig) -> Result<ScreeningReport> {
    cfg.validate()?;
    let loaded = load_csv(&cfg.input, &cfg.label, cfg.drop_small_classes)?;
    let mut warnings = loaded.warnings;
    let mut dataset = loaded.dataset;
    if let Some(cap) = cfg.sample_cap {
        if dataset.n() > cap {
            warnings.push(format!("subsampled {cap} of {} rows", dataset.n()));
            dataset = subsample(&dataset, cap, cfg.seed);
        }
    }
    if cfg.top_k.is_some_and(|k| k > dataset.q()) {
        return Err(CliError::Input(format!(
            "top-k {} exceeds the {} available features",
            cfg.top_k.unwrap_or(0),
            dataset.q()
        )));
    }
    if cfg.standardize {
        dataset = standardize(&dataset).dataset;
    }
    let ranked = rank_features(&dataset, cfg)?;
    warnings.extend(ranked.warnings);
    let scored: Vec<&RankedFeature> = ranked
        .features
        .iter()
        .filter(|f| f.value.is_some())
        .collect();
    let take = cfg.top_k.unwrap_or(scored.len());
    if take > scored.len() {
        warnings.push(format!(
            "top-k {take} requested but only {} features could be scored",
            scored.len()
        ));
    }
    let selected = scored.iter().take(take).map(|f| f.name.clone()).collect();
    Ok(ScreeningReport {
        version: REPORT_VERSION.to_string(),
        config: cfg.clone(),
        seed: cfg.seed,
        n: dataset.n(),
        features: ranked.features,
        selected,
        warnings,
    })
}

/// Writes `ranking.csv` and `report.json` into `out_dir`.
pub fn write_outputs(report: &ScreeningReport, out_dir: &Path) -> Result<()> {
    let write_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Write { path, source }
    };
    fs::create_dir_all(out_dir).map_err(write_err(out_dir))?;

    let csv_path = out_dir.join("ranking.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["rank", "feature", "statistic", "p_value"])?;
    for f in &report.features {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([
            f.rank.to_string(),
            f.name.clone(),
            fmt(f.value),
            fmt(f.p_value),
        ])?;
    }
    w.flush().map_err(write_err(&csv_path))?;

    let json_path = out_dir.join("report.json");
    let mut body = serde_json::to_string_pretty(report)?;
    body.push('\n');
    fs::write(&json_path, body).map_err(write_err(&json_path))?;
    Ok(())
}

/// [`screen`] followed by [`write_outputs`].
pub fn run_screening(cfg: &ScreeningConfig, out_dir: &Path) -> Result<ScreeningReport> {
    let report = screen(cfg)?;
    write_outputs(&report, out_dir)?;
    Ok(report)
}
