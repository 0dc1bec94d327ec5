//! Sample statistics: Gini mean differences, Gini distance covariance and
//! correlation, the U-centered distance covariance, and baselines.
//!
//! Labels are passed as class codes (`usize`); the set of classes is the set
//! of distinct codes that occur. Every routine is a pure function of its
//! inputs and sums with compensated accumulation, so identities such as
//! `gcor * delta == gcov` hold to ~1e-12 even for large samples.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::DistanceMatrix;
use crate::numeric::{self, CompensatedSum};

/// Samples grouped by class code, classes in ascending code order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPartition {
    codes: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl ClassPartition {
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &y) in labels.iter().enumerate() {
            groups.entry(y).or_default().push(i);
        }
        let (codes, members) = groups.into_iter().unzip();
        Self { codes, members }
    }

    /// Number of distinct classes.
    pub fn k(&self) -> usize {
        self.codes.len()
    }

    pub fn n(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    pub fn codes(&self) -> &[usize] {
        &self.codes
    }

    pub fn members(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// Fails on the first class with fewer than `min` members.
    pub fn require_min_size(&self, min: usize) -> Result<()> {
        match self
            .codes
            .iter()
            .zip(&self.members)
            .find(|(_, m)| m.len() < min)
        {
            Some((&class, m)) => Err(Error::ClassTooSmall {
                class,
                size: m.len(),
            }),
            None => Ok(()),
        }
    }
}

/// `n` samples of `q` numeric features with a categorical label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    /// Row-major features, one row per sample.
    pub features: Vec<Vec<f64>>,
    /// Class code of each sample, indexing into `class_names`.
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let q = feature_names.len();
        if let Some(i) = features.iter().position(|r| r.len() != q) {
            return Err(Error::invalid(format!(
                "row {i} has {} features, expected {q}",
                features[i].len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_names.len()) {
            return Err(Error::invalid(format!(
                "label code {bad} has no class name"
            )));
        }
        Ok(Self {
            features,
            labels,
            feature_names,
            class_names,
        })
    }

    /// Builds a one-feature dataset with classes named by their codes.
    pub fn from_column(values: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(
            values.into_iter().map(|v| vec![v]).collect(),
            labels,
            vec!["x".to_string()],
            (0..k).map(|c| c.to_string()).collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn q(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.features.iter().map(|r| r[j]).collect()
    }

    pub fn partition(&self) -> ClassPartition {
        ClassPartition::from_labels(&self.labels)
    }

    /// Keeps the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }
}

fn check_labels(d: &DistanceMatrix, labels: &[usize]) -> Result<()> {
    if labels.len() != d.n() {
        return Err(Error::invalid(format!(
            "{} labels for a {}x{} distance matrix",
            labels.len(),
            d.n(),
            d.n()
        )));
    }
    Ok(())
}

/// Gini mean difference of the samples in `subset`:
/// the average distance over all unordered pairs.
pub fn gmd(d: &DistanceMatrix, subset: &[usize]) -> Result<f64> {
    let m = subset.len();
    if m < 2 {
        return Err(Error::InsufficientData { needed: 2, got: m });
    }
    if let Some(&bad) = subset.iter().find(|&&i| i >= d.n()) {
        return Err(Error::invalid(format!("index {bad} out of range")));
    }
    let mut acc = CompensatedSum::new();
    for (a, &i) in subset.iter().enumerate() {
        let row = d.row(i);
        for &j in &subset[a + 1..] {
            acc.add(row[j]);
        }
    }
    Ok(acc.total() / (m * (m - 1) / 2) as f64)
}

/// Gini mean difference of the whole sample.
pub fn gmd_all(d: &DistanceMatrix) -> Result<f64> {
    let n = d.n();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mut acc = CompensatedSum::new();
    for i in 0..n {
        acc.extend(d.row(i)[i + 1..].iter().copied());
    }
    Ok(acc.total() / (n * (n - 1) / 2) as f64)
}

/// Gini mean difference of a 1-D sample under the Euclidean distance,
/// computed in `O(n log n)` from the order statistics.
pub fn gmd_1d_fast(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let sorted = numeric::sorted(values);
    let nf = n as f64;
    let s = numeric::sum(
        sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| (2.0 * (i + 1) as f64 - nf - 1.0) * x),
    );
    Ok(2.0 * s / (nf * (nf - 1.0)))
}

/// Sample Gini distance statistics of one feature block against a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiniStatistics {
    /// Gini mean difference of the pooled sample.
    pub delta_hat: f64,
    /// Within-class Gini mean differences, in ascending class-code order.
    pub class_deltas: Vec<f64>,
    pub class_codes: Vec<usize>,
    pub class_sizes: Vec<usize>,
    pub gcov: f64,
    /// `gcov / delta_hat`; `None` when the pooled sample is degenerate.
    pub gcor: Option<f64>,
}

impl GiniStatistics {
    /// Smallest class size; callers may warn when it equals 2.
    pub fn min_class_size(&self) -> usize {
        self.class_sizes.iter().copied().min().unwrap_or(0)
    }
}

/// Computes the pooled and within-class Gini mean differences and the
/// derived covariance `delta - sum_k (n_k / n) delta_k` and correlation.
pub fn gini_statistics(d: &DistanceMatrix, labels: &[usize]) -> Result<GiniStatistics> {
    check_labels(d, labels)?;
    let n = d.n();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let part = ClassPartition::from_labels(labels);
    part.require_min_size(2)?;

    let delta_hat = gmd_all(d)?;
    let class_deltas = part
        .members()
        .iter()
        .map(|m| gmd(d, m))
        .collect::<Result<Vec<_>>>()?;
    let sizes = part.sizes();
    let within = numeric::sum(
        sizes
            .iter()
            .zip(&class_deltas)
            .map(|(&nk, &dk)| (nk as f64 / n as f64) * dk),
    );
    let gcov = delta_hat - within;
    let gcor = (delta_hat > 0.0).then(|| gcov / delta_hat);
    Ok(GiniStatistics {
        delta_hat,
        class_deltas,
        class_codes: part.codes().to_vec(),
        class_sizes: sizes,
        gcov,
        gcor,
    })
}

/// Unbiased Gini distance covariance estimate. May be negative.
pub fn gcov_n(d: &DistanceMatrix, labels: &[usize]) -> Result<f64> {
    Ok(gini_statistics(d, labels)?.gcov)
}

/// Gini distance correlation estimate `gcov_n / delta_hat`.
pub fn gcor_n(d: &DistanceMatrix, labels: &[usize]) -> Result<f64> {
    gini_statistics(d, labels)?
        .gcor
        .ok_or_else(|| Error::DegenerateDistribution("all points coincide (delta_hat = 0)".into()))
}

/// U-centered matrix (zero diagonal, rows and columns summing to zero).
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CenteredMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// `1 / (n (n - 3)) * sum_{i != j} A_ij B_ij`.
    pub fn inner(&self, other: &CenteredMatrix) -> Result<f64> {
        if self.n != other.n {
            return Err(Error::invalid(format!(
                "size mismatch: {} vs {}",
                self.n, other.n
            )));
        }
        let n = self.n;
        // diagonals are zero, so summing every entry is the off-diagonal sum
        let s = numeric::sum(self.entries.iter().zip(&other.entries).map(|(a, b)| a * b));
        Ok(s / (n as f64 * (n as f64 - 3.0)))
    }
}

/// U-centering of a distance matrix:
/// `A_ij = a_ij - a_i. / (n-2) - a_.j / (n-2) + a_.. / ((n-1)(n-2))` off the
/// diagonal, zero on it.
pub fn u_center(d: &DistanceMatrix) -> Result<CenteredMatrix> {
    let n = d.n();
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, got: n });
    }
    let row_sums: Vec<f64> = (0..n)
        .map(|i| numeric::sum(d.row(i).iter().copied()))
        .collect();
    let total = numeric::sum(row_sums.iter().copied());
    let nf = n as f64;
    let grand = total / ((nf - 1.0) * (nf - 2.0));
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        let ri = row_sums[i] / (nf - 2.0);
        for j in 0..n {
            if i != j {
                entries[i * n + j] = d.get(i, j) - ri - row_sums[j] / (nf - 2.0) + grand;
            }
        }
    }
    Ok(CenteredMatrix { n, entries })
}

/// Unbiased (U-statistic) distance covariance between two distance matrices.
pub fn dcov_n(dx: &DistanceMatrix, dy: &DistanceMatrix) -> Result<f64> {
    if dx.n() != dy.n() {
        return Err(Error::invalid(format!(
            "size mismatch: {} vs {}",
            dx.n(),
            dy.n()
        )));
    }
    u_center(dx)?.inner(&u_center(dy)?)
}

/// Distance covariance of a feature distance matrix against labels under
/// the set distance.
pub fn dcov_labels(dx: &DistanceMatrix, labels: &[usize]) -> Result<f64> {
    check_labels(dx, labels)?;
    dcov_n(dx, &DistanceMatrix::from_labels(labels))
}

/// Bias-corrected distance correlation
/// `dcov(x, y) / sqrt(dcov(x, x) dcov(y, y))`, defined as 0 when either
/// self term is not positive.
pub fn dcor_n(dx: &DistanceMatrix, dy: &DistanceMatrix) -> Result<f64> {
    if dx.n() != dy.n() {
        return Err(Error::invalid(format!(
            "size mismatch: {} vs {}",
            dx.n(),
            dy.n()
        )));
    }
    let a = u_center(dx)?;
    let b = u_center(dy)?;
    dcor_centered(&a, &b)
}

pub(crate) fn dcor_centered(a: &CenteredMatrix, b: &CenteredMatrix) -> Result<f64> {
    let xx = a.inner(a)?;
    let yy = b.inner(b)?;
    if xx <= 0.0 || yy <= 0.0 {
        return Ok(0.0);
    }
    Ok(a.inner(b)? / (xx * yy).sqrt())
}

pub fn dcor_labels(dx: &DistanceMatrix, labels: &[usize]) -> Result<f64> {
    check_labels(dx, labels)?;
    dcor_n(dx, &DistanceMatrix::from_labels(labels))
}

/// Plug-in distance covariance against labels,
/// `sum_k p_k^2 (2 cross_k - delta_k - delta)`, where `cross_k` averages the
/// distance from class-`k` points to every other point.
///
/// With equal class sizes this is exactly `gcov_n / K`.
pub fn dcov_plugin(d: &DistanceMatrix, labels: &[usize]) -> Result<f64> {
    let stats = gini_statistics(d, labels)?;
    let part = ClassPartition::from_labels(labels);
    let n = d.n() as f64;
    let terms = part
        .members()
        .iter()
        .zip(&stats.class_deltas)
        .map(|(m, &dk)| {
            let nk = m.len() as f64;
            let cross = numeric::sum(m.iter().flat_map(|&i| {
                let row = d.row(i);
                row.iter().copied()
            })) / (nk * (n - 1.0));
            let p = nk / n;
            p * p * (2.0 * cross - dk - stats.delta_hat)
        });
    Ok(numeric::sum(terms))
}

/// Correlation ratio: between-class variance over total variance. For two
/// classes this is the squared Pearson correlation with a 0/1 indicator.
pub fn eta2(feature: &[f64], labels: &[usize]) -> Result<f64> {
    let n = feature.len();
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "{n} feature values but {} labels",
            labels.len()
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mean = numeric::mean(feature);
    let total = numeric::sum(feature.iter().map(|x| (x - mean) * (x - mean)));
    if !(total > 0.0) {
        return Err(Error::DegenerateFeature("feature has zero variance".into()));
    }
    let part = ClassPartition::from_labels(labels);
    let between = numeric::sum(part.members().iter().map(|m| {
        let mk = numeric::sum(m.iter().map(|&i| feature[i])) / m.len() as f64;
        m.len() as f64 * (mk - mean) * (mk - mean)
    }));
    Ok((between / total).clamp(0.0, 1.0))
}

/// A distance-based dependence statistic of a feature against a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Gcov,
    Gcor,
    Dcov,
    Dcor,
    DcovPlugin,
}

impl Statistic {
    pub const TABLE: [Statistic; 4] = [
        Statistic::Dcov,
        Statistic::Dcor,
        Statistic::Gcov,
        Statistic::Gcor,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Statistic::Gcov => "gcov",
            Statistic::Gcor => "gcor",
            Statistic::Dcov => "dcov",
            Statistic::Dcor => "dcor",
            Statistic::DcovPlugin => "dcov_plugin",
        }
    }

    pub fn compute(&self, d: &DistanceMatrix, labels: &[usize]) -> Result<f64> {
        match self {
            Statistic::Gcov => gcov_n(d, labels),
            Statistic::Gcor => gcor_n(d, labels),
            Statistic::Dcov => dcov_labels(d, labels),
            Statistic::Dcor => dcor_labels(d, labels),
            Statistic::DcovPlugin => dcov_plugin(d, labels),
        }
    }
}

impl std::fmt::Display for Statistic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcov" => Ok(Statistic::Gcov),
            "gcor" => Ok(Statistic::Gcor),
            "dcov" => Ok(Statistic::Dcov),
            "dcor" => Ok(Statistic::Dcor),
            "dcov_plugin" => Ok(Statistic::DcovPlugin),
            other => Err(Error::invalid(format!("unknown statistic '{other}'"))),
        }
    }
}
