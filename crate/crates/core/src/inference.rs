//! Hypothesis tests for independence of a feature and a label.
//!
//! Two families are provided. The distribution-free tests compare the
//! statistic against `cv(alpha, n)` or `c n^-t`, whose error rates follow
//! from bounded-difference concentration (constants 12.5 for `gcov_n`, 2 for
//! the pooled Gini mean difference and 512 for `dcov_n`). The permutation
//! test calibrates the threshold on relabelled copies of the data instead.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::{
    dcor_centered, gmd, gmd_all, u_center, CenteredMatrix, ClassPartition, GiniStatistics,
    Statistic,
};
use crate::kernels::DistanceMatrix;
use crate::numeric::{self, quantile_higher, substream};

/// Concentration constant of `gcov_n` (bounded differences `5/n`).
pub const GCOV_CONSTANT: f64 = 12.5;
/// Concentration constant of the pooled Gini mean difference (`2/n`).
pub const DELTA_CONSTANT: f64 = 2.0;
/// Concentration constant of `dcov_n` (`32/n`).
pub const DCOV_CONSTANT: f64 = 512.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "reject_H0")]
    RejectH0,
    #[serde(rename = "retain_H0")]
    RetainH0,
}

/// Outcome of a single test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic_name: String,
    pub value: f64,
    /// Critical value or permutation quantile; `H0` is rejected iff
    /// `value > threshold`.
    pub threshold: f64,
    pub p_value: Option<f64>,
    pub decision: Decision,
    pub alpha: f64,
    pub n: usize,
    pub permutations: Option<usize>,
    pub seed: Option<u64>,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// Distribution-free critical value `sqrt(12.5 ln(1/alpha) / n)` for `gcov_n`
/// under a kernel whose distance is bounded by 1.
pub fn critical_value(alpha: f64, n: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok((GCOV_CONSTANT * (1.0 / alpha).ln() / n as f64).sqrt())
}

/// Tests independence by comparing `gcov_n` with `cv(alpha, n)`.
pub fn critical_value_test(gcov: f64, alpha: f64, n: usize) -> Result<TestReport> {
    let threshold = critical_value(alpha, n)?;
    Ok(TestReport {
        statistic_name: Statistic::Gcov.name().to_string(),
        value: gcov,
        threshold,
        p_value: None,
        decision: decide(gcov, threshold),
        alpha,
        n,
        permutations: None,
        seed: None,
    })
}

fn decide(value: f64, threshold: f64) -> Decision {
    if value > threshold {
        Decision::RejectH0
    } else {
        Decision::RetainH0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Gcov,
    Gcor,
    Delta,
    Dcov,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Type1,
    Type2,
}

/// Threshold `c n^-t` of a deviation test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub kind: BoundKind,
    pub c: f64,
    pub t: f64,
    pub n: usize,
}

/// Upper bound on the Type I or Type II error of rejecting when the
/// statistic exceeds `c n^-t`.
///
/// For the covariance-type statistics both errors are bounded by
/// `exp(-c^2 n^(1-2t) / C)` with `C` = 12.5 (`gcov`), 2 (`delta`) or 512
/// (`dcov`), `t` in `(0, 1/2)`. For `gcor`, `t` must lie in `(0, 1/4)`; the
/// Type I bound is `exp(-c^2 n^(1-4t) / 12.5) + exp(-n^(1-2t) / 2)` (valid
/// when the population Gini mean difference is at least `2 n^-t`) and the
/// Type II bound is that of `gcov`. Values above 1 are reported as 1.
pub fn deviation_bound(q: &BoundQuery, error_kind: ErrorKind) -> Result<f64> {
    if !(q.c >= 0.0 && q.c.is_finite()) {
        return Err(Error::invalid(format!(
            "c must be nonnegative, got {}",
            q.c
        )));
    }
    if q.n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let t_max = if q.kind == BoundKind::Gcor { 0.25 } else { 0.5 };
    if !(q.t > 0.0 && q.t < t_max) {
        return Err(Error::invalid(format!(
            "t must lie in (0, {t_max}) for {:?}, got {}",
            q.kind, q.t
        )));
    }
    let n = q.n as f64;
    let c2 = q.c * q.c;
    let single = |constant: f64| (-c2 * n.powf(1.0 - 2.0 * q.t) / constant).exp();
    let raw = match (q.kind, error_kind) {
        (BoundKind::Gcov, _) => single(GCOV_CONSTANT),
        (BoundKind::Delta, _) => single(DELTA_CONSTANT),
        (BoundKind::Dcov, _) => single(DCOV_CONSTANT),
        (BoundKind::Gcor, ErrorKind::Type1) => {
            (-c2 * n.powf(1.0 - 4.0 * q.t) / GCOV_CONSTANT).exp()
                + (-n.powf(1.0 - 2.0 * q.t) / DELTA_CONSTANT).exp()
        }
        (BoundKind::Gcor, ErrorKind::Type2) => single(GCOV_CONSTANT),
    };
    Ok(raw.min(1.0))
}

/// `exp(-n gamma^2 / 12.5) + exp(-n gamma^2 / 512)` without clamping.
pub fn underperform_bound_raw(gamma: f64, n: usize) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let s = n as f64 * gamma * gamma;
    Ok((-s / GCOV_CONSTANT).exp() + (-s / DCOV_CONSTANT).exp())
}

/// Bound on the probability that `gcov_n` falls below a threshold that
/// `dcov_n` reaches, where `gamma = (gCov - dCov) / 2` at the population
/// level. Reported as at most 1.
pub fn underperform_bound(gamma: f64, n: usize) -> Result<f64> {
    Ok(underperform_bound_raw(gamma, n)?.min(1.0))
}

/// Distance-based statistic with the label-independent parts precomputed,
/// for repeated evaluation under relabelling.
struct Prepared<'a> {
    statistic: Statistic,
    d: &'a DistanceMatrix,
    delta_hat: f64,
    centered: Option<CenteredMatrix>,
}

impl<'a> Prepared<'a> {
    fn new(statistic: Statistic, d: &'a DistanceMatrix) -> Result<Self> {
        let delta_hat = gmd_all(d)?;
        let centered = match statistic {
            Statistic::Dcov | Statistic::Dcor => Some(u_center(d)?),
            _ => None,
        };
        Ok(Self {
            statistic,
            d,
            delta_hat,
            centered,
        })
    }

    fn eval(&self, labels: &[usize]) -> Result<f64> {
        match self.statistic {
            Statistic::Gcov | Statistic::Gcor => {
                let part = ClassPartition::from_labels(labels);
                part.require_min_size(2)?;
                let n = self.d.n() as f64;
                let within = numeric::sum(
                    part.members()
                        .iter()
                        .map(|m| gmd(self.d, m).map(|g| (m.len() as f64 / n) * g))
                        .collect::<Result<Vec<_>>>()?,
                );
                let gcov = self.delta_hat - within;
                if self.statistic == Statistic::Gcov {
                    Ok(gcov)
                } else if self.delta_hat > 0.0 {
                    Ok(gcov / self.delta_hat)
                } else {
                    Err(Error::DegenerateDistribution("delta_hat = 0".into()))
                }
            }
            Statistic::Dcov => {
                let a = self.centered.as_ref().expect("centered for dcov");
                Ok(same_class_dcov(a, labels))
            }
            Statistic::Dcor => {
                let a = self.centered.as_ref().expect("centered for dcor");
                let b = u_center(&DistanceMatrix::from_labels(labels))?;
                dcor_centered(a, &b)
            }
            Statistic::DcovPlugin => self.statistic.compute(self.d, labels),
        }
    }
}

/// `dcov_n` against labels from the U-centered feature matrix alone: rows of
/// `A` sum to zero, so `sum A_ij B_ij = -sum_{i != j, y_i = y_j} A_ij`.
fn same_class_dcov(a: &CenteredMatrix, labels: &[usize]) -> f64 {
    let n = a.n();
    let mut acc = numeric::CompensatedSum::new();
    for i in 0..n {
        let row = a.row(i);
        for (j, &v) in row.iter().enumerate() {
            if j != i && labels[j] == labels[i] {
                acc.add(v);
            }
        }
    }
    -acc.total() / (n as f64 * (n as f64 - 3.0))
}

/// Permutation test of independence with a user-supplied statistic of the
/// label vector (features held fixed). Permutation `b` shuffles the labels
/// with substream `b` of `seed`.
///
/// The threshold is the upper `(1 - alpha)` empirical quantile of the
/// permuted values ("higher" order statistic), the p-value is
/// `(1 + #{permuted >= observed}) / (B + 1)`, and `H0` is rejected iff the
/// observed value exceeds the threshold.
pub fn permutation_test_with<F>(
    statistic_name: &str,
    labels: &[usize],
    permutations: usize,
    alpha: f64,
    seed: u64,
    statistic: F,
) -> Result<TestReport>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    check_alpha(alpha)?;
    if alpha >= 1.0 {
        return Err(Error::invalid(
            "alpha must be below 1 for a permutation test",
        ));
    }
    if permutations < 1 {
        return Err(Error::invalid("at least one permutation is required"));
    }
    let observed = statistic(labels)?;
    let permuted = (0..permutations)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, b as u64);
            let mut shuffled = labels.to_vec();
            shuffled.shuffle(&mut rng);
            statistic(&shuffled)
        })
        .collect::<Result<Vec<f64>>>()?;
    let exceed = permuted.iter().filter(|&&v| v >= observed).count();
    let sorted = numeric::sorted(&permuted);
    let threshold = quantile_higher(&sorted, 1.0 - alpha);
    Ok(TestReport {
        statistic_name: statistic_name.to_string(),
        value: observed,
        threshold,
        p_value: Some((1 + exceed) as f64 / (permutations + 1) as f64),
        decision: decide(observed, threshold),
        alpha,
        n: labels.len(),
        permutations: Some(permutations),
        seed: Some(seed),
    })
}

/// Permutation test of a distance-based statistic. Shuffling labels against
/// fixed features is equivalent to shuffling the features, as every
/// statistic is invariant under a joint reordering of the rows.
pub fn permutation_test(
    statistic: Statistic,
    d: &DistanceMatrix,
    labels: &[usize],
    permutations: usize,
    alpha: f64,
    seed: u64,
) -> Result<TestReport> {
    if labels.len() != d.n() {
        return Err(Error::invalid(format!(
            "{} labels for a {}x{} distance matrix",
            labels.len(),
            d.n(),
            d.n()
        )));
    }
    let prepared = Prepared::new(statistic, d)?;
    permutation_test_with(statistic.name(), labels, permutations, alpha, seed, |y| {
        prepared.eval(y)
    })
}

/// Asymptotic normal confidence interval for the population `gCov`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    /// Plug-in estimate of the asymptotic variance of `sqrt(n) gcov_n`.
    pub sigma_v2: f64,
    pub z: f64,
    pub alpha: f64,
    pub n: usize,
    pub warnings: Vec<String>,
}

impl ConfidenceInterval {
    pub fn sigma_v(&self) -> f64 {
        self.sigma_v2.sqrt()
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    /// `H0` is rejected when the interval lies strictly above zero.
    pub fn decision(&self) -> Decision {
        decide(self.lower, 0.0)
    }
}

/// Below this sample size the normal approximation is flagged.
pub const CI_MIN_RECOMMENDED_N: usize = 20;

/// Per-sample influence values of `gcov_n`:
/// `psi_i = 2 g(x_i) - 2 g_k(x_i) - (delta_k - sum_l p_l delta_l)` for `x_i`
/// in class `k`, where `g(x) = mean_j d(x, x_j) - delta` and
/// `g_k(x) = mean_{j in k} d(x, x_j) - delta_k` (leave-one-out means).
///
/// The last term is the contribution of the estimated class proportions.
pub fn gcov_influence(d: &DistanceMatrix, labels: &[usize], stats: &GiniStatistics) -> Vec<f64> {
    let n = d.n();
    let part = ClassPartition::from_labels(labels);
    let pooled_within = stats.delta_hat - stats.gcov;
    let mut psi = vec![0.0; n];
    for (k, members) in part.members().iter().enumerate() {
        let nk = members.len() as f64;
        let delta_k = stats.class_deltas[k];
        for &i in members {
            let row = d.row(i);
            let g = numeric::sum(row.iter().copied()) / (n as f64 - 1.0) - stats.delta_hat;
            let gk = numeric::sum(members.iter().map(|&j| row[j])) / (nk - 1.0) - delta_k;
            psi[i] = 2.0 * g - 2.0 * gk - (delta_k - pooled_within);
        }
    }
    psi
}

/// `gcov_n +/- z_{1 - alpha/2} sigma_v / sqrt(n)` with `sigma_v^2` the mean
/// squared influence value (see [`gcov_influence`]).
pub fn asymptotic_ci(
    d: &DistanceMatrix,
    labels: &[usize],
    alpha: f64,
) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    if alpha >= 1.0 {
        return Err(Error::invalid("alpha must be below 1"));
    }
    let stats = crate::estimators::gini_statistics(d, labels)?;
    let n = d.n();
    let psi = gcov_influence(d, labels, &stats);
    let sigma_v2 = numeric::sum(psi.iter().map(|v| v * v)) / n as f64;
    let z = Normal::standard().inverse_cdf(1.0 - alpha / 2.0);
    let half = z * sigma_v2.sqrt() / (n as f64).sqrt();
    let mut warnings = Vec::new();
    if n < CI_MIN_RECOMMENDED_N {
        warnings.push(format!(
            "n = {n} is below {CI_MIN_RECOMMENDED_N}; the normal approximation may be poor"
        ));
    }
    Ok(ConfidenceInterval {
        estimate: stats.gcov,
        lower: stats.gcov - half,
        upper: stats.gcov + half,
        sigma_v2,
        z,
        alpha,
        n,
        warnings,
    })
}
