//! CSV ingestion, row subsampling and per-feature standardization.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use ginidep_core::numeric::{self, derive_seed, substream};
use ginidep_core::LabeledDataset;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Column selector: a header name, or a 0-based index when no header
/// matches the text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ColumnSelector(pub String);

impl FromStr for ColumnSelector {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(Self(s.to_string()))
    }
}

impl std::fmt::Display for ColumnSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl ColumnSelector {
    pub fn resolve(&self, headers: &[String]) -> Result<usize> {
        if let Some(i) = headers.iter().position(|h| h == &self.0) {
            return Ok(i);
        }
        match self.0.parse::<usize>() {
            Ok(i) if i < headers.len() => Ok(i),
            Ok(i) => Err(CliError::Input(format!(
                "column index {i} out of range ({} columns)",
                headers.len()
            ))),
            Err(_) => Err(CliError::Input(format!("no column named '{}'", self.0))),
        }
    }
}

/// Loaded dataset plus any warnings raised while loading.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: LabeledDataset,
    pub warnings: Vec<String>,
}

/// Reads a CSV with a header row. The label column is categorical; every
/// other column must parse as a finite number. Class codes follow the
/// lexicographic order of the class names.
///
/// Classes with fewer than two rows are reported in a warning and removed
/// only when `drop_small_classes` is set.
pub fn load_csv(path: &Path, label: &ColumnSelector, drop_small_classes: bool) -> Result<Loaded> {
    let file = std::fs::File::open(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let label_col = label.resolve(&headers)?;
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != label_col).collect();
    if feature_cols.is_empty() {
        return Err(CliError::Input(
            "no feature columns besides the label".into(),
        ));
    }

    let mut rows = Vec::new();
    let mut raw_labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row_no = r + 1;
        if record.len() != headers.len() {
            return Err(CliError::Input(format!(
                "row {row_no}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        let mut values = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            let cell = &record[c];
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(CliError::Input(format!(
                        "row {row_no}, column '{}': '{cell}' is not a finite number",
                        headers[c]
                    )))
                }
            }
        }
        rows.push(values);
        raw_labels.push(record[label_col].to_string());
    }
    if rows.is_empty() {
        return Err(CliError::Input("no data rows".into()));
    }

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in &raw_labels {
        *counts.entry(l.as_str()).or_default() += 1;
    }
    let small: BTreeSet<String> = counts
        .iter()
        .filter(|(_, &c)| c < 2)
        .map(|(name, _)| name.to_string())
        .collect();
    let mut warnings = Vec::new();
    if !small.is_empty() {
        let list = small
            .iter()
            .map(|s| format!("'{s}'"))
            .collect::<Vec<_>>()
            .join(", ");
        if drop_small_classes {
            warnings.push(format!("dropped classes with fewer than 2 rows: {list}"));
        } else {
            warnings.push(format!("classes with fewer than 2 rows: {list}"));
        }
    }
    let keep = |l: &str| !(drop_small_classes && small.contains(l));
    let class_names: Vec<String> = counts
        .keys()
        .filter(|n| keep(n))
        .map(|s| s.to_string())
        .collect();
    let code: BTreeMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();

    let mut features = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (row, l) in rows.into_iter().zip(&raw_labels) {
        if keep(l) {
            features.push(row);
            labels.push(code[l.as_str()]);
        }
    }
    let feature_names = feature_cols.iter().map(|&c| headers[c].clone()).collect();
    Ok(Loaded {
        dataset: LabeledDataset::new(features, labels, feature_names, class_names)?,
        warnings,
    })
}

/// Uniform subsample of `cap` rows without replacement, keeping file order.
/// Returns the dataset unchanged when it has at most `cap` rows.
pub fn subsample(dataset: &LabeledDataset, cap: usize, seed: u64) -> LabeledDataset {
    if dataset.n() <= cap {
        return dataset.clone();
    }
    let mut rng = substream(derive_seed(seed, 0x5a17), 0);
    let mut rows = rand::seq::index::sample(&mut rng, dataset.n(), cap).into_vec();
    rows.sort_unstable();
    dataset.select_rows(&rows)
}

/// Standardized copy of a dataset; `constant` lists feature indices with
/// zero variance, which are left untouched.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub dataset: LabeledDataset,
    pub constant: Vec<usize>,
}

/// Centers each feature and divides by its population standard deviation
/// (divisor `n`), computed on the rows present.
pub fn standardize(dataset: &LabeledDataset) -> Standardized {
    let mut out = dataset.clone();
    let mut constant = Vec::new();
    let n = dataset.n() as f64;
    for j in 0..dataset.q() {
        let col = dataset.column(j);
        if is_constant(&col) {
            constant.push(j);
            continue;
        }
        let mean = numeric::mean(&col);
        let sd = (numeric::sum(col.iter().map(|v| (v - mean) * (v - mean))) / n).sqrt();
        for (row, v) in out.features.iter_mut().zip(&col) {
            row[j] = (v - mean) / sd;
        }
    }
    Standardized {
        dataset: out,
        constant,
    }
}

pub fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(cols: &[&[f64]]) -> LabeledDataset {
        let n = cols[0].len();
        let features = (0..n)
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect();
        let labels = (0..n).map(|i| i % 2).collect();
        let names = (0..cols.len()).map(|j| format!("f{j}")).collect();
        LabeledDataset::new(features, labels, names, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn standardize_example() {
        let s = standardize(&dataset(&[&[1.0, 2.0, 3.0]]));
        let col = s.dataset.column(0);
        let want = 1.5f64.sqrt();
        assert!(
            (col[0] + want).abs() < 1e-12 && col[1].abs() < 1e-12 && (col[2] - want).abs() < 1e-12
        );
        assert!((col[0] + 1.2247).abs() < 5e-5);
    }

    #[test]
    fn standardize_is_idempotent() {
        let s1 = standardize(&dataset(&[&[0.3, -2.0, 7.5, 1.0, 4.2, 4.2]]));
        let s2 = standardize(&s1.dataset);
        for (a, b) in s1.dataset.column(0).iter().zip(s2.dataset.column(0)) {
            assert!((a - b).abs() < 1e-10);
        }
        let col = s1.dataset.column(0);
        let mean = numeric::mean(&col);
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
        assert!(mean.abs() < 1e-10 && (var.sqrt() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_feature_is_flagged() {
        let s = standardize(&dataset(&[&[1.0, 2.0, 3.0, 4.0], &[5.0; 4]]));
        assert_eq!(s.constant, vec![1]);
        assert_eq!(s.dataset.column(1), vec![5.0; 4]);
    }

    #[test]
    fn selector_prefers_names() {
        let headers: Vec<String> = ["a", "1", "class"].iter().map(|s| s.to_string()).collect();
        assert_eq!(ColumnSelector("class".into()).resolve(&headers).unwrap(), 2);
        assert_eq!(ColumnSelector("2".into()).resolve(&headers).unwrap(), 2);
        assert_eq!(ColumnSelector("1".into()).resolve(&headers).unwrap(), 1);
        assert!(ColumnSelector("9".into()).resolve(&headers).is_err());
        assert!(ColumnSelector("label".into()).resolve(&headers).is_err());
    }

    #[test]
    fn subsample_keeps_order_and_size() {
        let col: Vec<f64> = (0..100).map(f64::from).collect();
        let d = dataset(&[&col]);
        let s = subsample(&d, 10, 3);
        assert_eq!(s.n(), 10);
        let c = s.column(0);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(subsample(&d, 10, 3), s);
        assert_eq!(subsample(&d, 200, 3), d);
    }
}
