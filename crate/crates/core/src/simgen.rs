//! Synthetic H0/H1 datasets from three parametric families and the
//! power/AUC protocol built on them.
//!
//! Under H0 a single component `F0` is drawn from the family hyperprior and
//! labels are drawn independently of `X`. Under H1 each class gets its own
//! component `F_k` and class sizes follow the drawn proportions.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Exp, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{LabeledDataset, Statistic};
use crate::kernels::{pairwise_matrix_1d, Kernel};
use crate::numeric::{self, quantile_higher, substream};

/// Redraw budget when enforcing `n_k >= 2`.
pub const MAX_DATASET_ATTEMPTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normal,
    Exponential,
    Gamma,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Normal, Family::Exponential, Family::Gamma];

    pub fn name(&self) -> &'static str {
        match self {
            Family::Normal => "normal",
            Family::Exponential => "exponential",
            Family::Gamma => "gamma",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" => Ok(Family::Normal),
            "exponential" => Ok(Family::Exponential),
            "gamma" => Ok(Family::Gamma),
            other => Err(Error::invalid(format!("unknown family '{other}'"))),
        }
    }
}

/// A distribution family with its fixed hyperprior:
/// normal `mu ~ N(0, 5)` (sd 5), `sigma ~ U(0, 5)`; exponential
/// `lambda ~ U(0, 5)`; gamma shape `alpha ~ U(0, 10)`, rate `beta ~ U(0, 10)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: Family,
}

/// One member of a family. All scale-type parameters are positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Component {
    Normal { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
}

fn positive_uniform<R: Rng + ?Sized>(rng: &mut R, upper: f64) -> f64 {
    loop {
        let v = rng.random_range(0.0..upper);
        if v > 0.0 {
            return v;
        }
    }
}

impl FamilySpec {
    pub fn new(family: Family) -> Self {
        Self { family }
    }

    /// Draws a component from the hyperprior.
    pub fn draw_component<R: Rng + ?Sized>(&self, rng: &mut R) -> Component {
        match self.family {
            Family::Normal => {
                let mean = Normal::new(0.0, 5.0).expect("valid normal").sample(rng);
                Component::Normal {
                    mean,
                    sd: positive_uniform(rng, 5.0),
                }
            }
            Family::Exponential => Component::Exponential {
                rate: positive_uniform(rng, 5.0),
            },
            Family::Gamma => Component::Gamma {
                shape: positive_uniform(rng, 10.0),
                rate: positive_uniform(rng, 10.0),
            },
        }
    }
}

impl Component {
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match *self {
            Component::Normal { mean, sd } => {
                let dist = Normal::new(mean, sd).expect("sd > 0");
                (0..n).map(|_| dist.sample(rng)).collect()
            }
            Component::Exponential { rate } => {
                let dist = Exp::new(rate).expect("rate > 0");
                (0..n).map(|_| dist.sample(rng)).collect()
            }
            Component::Gamma { shape, rate } => {
                let dist = Gamma::new(shape, 1.0 / rate).expect("shape, scale > 0");
                (0..n).map(|_| dist.sample(rng)).collect()
            }
        }
    }
}

/// `p_k = u_k / sum u`, `u_k ~ U(0, 1)`, with `u_k = 0` redrawn so every
/// component is strictly positive.
pub fn random_proportions<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::invalid(format!(
            "at least 2 classes required, got {k}"
        )));
    }
    let u: Vec<f64> = (0..k).map(|_| positive_uniform(rng, 1.0)).collect();
    Ok(normalize(&u))
}

fn normalize(u: &[f64]) -> Vec<f64> {
    let total = numeric::sum(u.iter().copied());
    u.iter().map(|v| v / total).collect()
}

/// Largest-remainder allocation of `n` items by proportions `p`; remainders
/// are ranked descending with ties going to the lower index.
pub fn allocate(n: usize, p: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = p.iter().map(|v| v * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &idx in order.iter().take(n.saturating_sub(assigned)) {
        counts[idx] += 1;
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

/// A generated dataset with the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedDataset {
    pub data: LabeledDataset,
    pub proportions: Vec<f64>,
    /// One component under H0, one per class under H1.
    pub components: Vec<Component>,
}

fn check_feasible(k: usize, n: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::invalid(format!(
            "at least 2 classes required, got {k}"
        )));
    }
    if n < 2 * k {
        return Err(Error::invalid(format!(
            "n = {n} cannot give {k} classes at least 2 samples each"
        )));
    }
    Ok(())
}

/// Draws one dataset of size `n` with `k` classes, every class of size at
/// least 2. Under H0 labels are iid from random proportions; under H1 class
/// sizes are the largest-remainder allocation of `n p_k`. Proportions
/// violating the size requirement are discarded and redrawn.
pub fn generate_dataset<R: Rng + ?Sized>(
    spec: FamilySpec,
    k: usize,
    n: usize,
    hypothesis: Hypothesis,
    rng: &mut R,
) -> Result<GeneratedDataset> {
    check_feasible(k, n)?;
    match hypothesis {
        Hypothesis::H0 => {
            let f0 = spec.draw_component(rng);
            for _ in 0..MAX_DATASET_ATTEMPTS {
                let p = random_proportions(k, rng)?;
                let dist = WeightedIndex::new(&p).expect("positive weights");
                let labels: Vec<usize> = (0..n).map(|_| dist.sample(rng)).collect();
                let mut counts = vec![0usize; k];
                for &y in &labels {
                    counts[y] += 1;
                }
                if counts.iter().all(|&c| c >= 2) {
                    let x = f0.sample(n, rng);
                    return Ok(GeneratedDataset {
                        data: LabeledDataset::from_column(x, labels)?,
                        proportions: p,
                        components: vec![f0],
                    });
                }
            }
        }
        Hypothesis::H1 => {
            for _ in 0..MAX_DATASET_ATTEMPTS {
                let p = random_proportions(k, rng)?;
                let counts = allocate(n, &p);
                if counts.iter().any(|&c| c < 2) {
                    continue;
                }
                let components: Vec<Component> = (0..k).map(|_| spec.draw_component(rng)).collect();
                let mut x = Vec::with_capacity(n);
                let mut labels = Vec::with_capacity(n);
                for (class, (&count, comp)) in counts.iter().zip(&components).enumerate() {
                    x.extend(comp.sample(count, rng));
                    labels.extend(std::iter::repeat_n(class, count));
                }
                return Ok(GeneratedDataset {
                    data: LabeledDataset::from_column(x, labels)?,
                    proportions: p,
                    components,
                });
            }
        }
    }
    Err(Error::Infeasible(format!(
        "no proportions with every class of size >= 2 after {MAX_DATASET_ATTEMPTS} draws (n = {n}, K = {k})"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub family: Family,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub kernel: Kernel,
    pub alpha: f64,
    pub seed: u64,
}

/// Smallest replicate count accepted by [`power_and_auc`].
pub const MIN_REPLICATES: usize = 100;

impl PowerConfig {
    pub fn validate(&self) -> Result<()> {
        check_feasible(self.k, self.n)?;
        if self.m < MIN_REPLICATES {
            return Err(Error::invalid(format!(
                "m = {} is below the minimum of {MIN_REPLICATES} replicates",
                self.m
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        self.kernel.validate()
    }
}

/// Statistic values on the H0 and H1 replicates, one vector per statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSamples {
    pub statistics: Vec<Statistic>,
    pub h0: Vec<Vec<f64>>,
    pub h1: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerAuc {
    pub power: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub config: PowerConfig,
    pub per_statistic: BTreeMap<String, PowerAuc>,
    pub critical_values: BTreeMap<String, f64>,
}

impl PowerReport {
    pub fn get(&self, statistic: Statistic) -> Option<PowerAuc> {
        self.per_statistic.get(statistic.name()).copied()
    }
}

fn replicate_values(
    cfg: &PowerConfig,
    statistics: &[Statistic],
    hypothesis: Hypothesis,
    stream: u64,
) -> Result<Vec<f64>> {
    let mut rng = substream(cfg.seed, stream);
    let generated = generate_dataset(
        FamilySpec::new(cfg.family),
        cfg.k,
        cfg.n,
        hypothesis,
        &mut rng,
    )?;
    let d = pairwise_matrix_1d(&cfg.kernel, &generated.data.column(0))?;
    statistics
        .iter()
        .map(|s| s.compute(&d, &generated.data.labels))
        .collect()
}

/// Runs the `m` H0 and `m` H1 replicates. Replicate `i` uses substream `2i`
/// for H0 and `2i + 1` for H1.
pub fn simulate(cfg: &PowerConfig, statistics: &[Statistic]) -> Result<SimulationSamples> {
    cfg.validate()?;
    let rows = (0..cfg.m)
        .into_par_iter()
        .map(|i| {
            let h0 = replicate_values(cfg, statistics, Hypothesis::H0, 2 * i as u64)?;
            let h1 = replicate_values(cfg, statistics, Hypothesis::H1, 2 * i as u64 + 1)?;
            Ok((h0, h1))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut h0 = vec![Vec::with_capacity(cfg.m); statistics.len()];
    let mut h1 = vec![Vec::with_capacity(cfg.m); statistics.len()];
    for (r0, r1) in rows {
        for (s, (v0, v1)) in r0.into_iter().zip(r1).enumerate() {
            h0[s].push(v0);
            h1[s].push(v1);
        }
    }
    Ok(SimulationSamples {
        statistics: statistics.to_vec(),
        h0,
        h1,
    })
}

/// Critical value (higher `1 - alpha` quantile of the H0 values), power
/// (fraction of H1 values strictly above it) and AUC.
pub fn summarize(h0: &[f64], h1: &[f64], alpha: f64) -> Result<(f64, PowerAuc)> {
    if h0.is_empty() || h1.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let sorted = numeric::sorted(h0);
    let cv = quantile_higher(&sorted, 1.0 - alpha);
    let power = h1.iter().filter(|&&v| v > cv).count() as f64 / h1.len() as f64;
    Ok((
        cv,
        PowerAuc {
            power,
            auc: auc_rank(h0, h1)?,
        },
    ))
}

/// Power and AUC of each statistic on the simulated replicates.
pub fn power_and_auc(cfg: &PowerConfig, statistics: &[Statistic]) -> Result<PowerReport> {
    let samples = simulate(cfg, statistics)?;
    report_from_samples(cfg, &samples)
}

pub fn report_from_samples(cfg: &PowerConfig, samples: &SimulationSamples) -> Result<PowerReport> {
    let mut per_statistic = BTreeMap::new();
    let mut critical_values = BTreeMap::new();
    for (s, stat) in samples.statistics.iter().enumerate() {
        let (cv, pa) = summarize(&samples.h0[s], &samples.h1[s], cfg.alpha)?;
        per_statistic.insert(stat.name().to_string(), pa);
        critical_values.insert(stat.name().to_string(), cv);
    }
    Ok(PowerReport {
        config: *cfg,
        per_statistic,
        critical_values,
    })
}

/// `P(H1 value > H0 value) + P(tie) / 2` from midranks of the pooled sample.
pub fn auc_rank(h0: &[f64], h1: &[f64]) -> Result<f64> {
    if h0.is_empty() || h1.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut pooled: Vec<(f64, bool)> = h0
        .iter()
        .map(|&v| (v, false))
        .chain(h1.iter().map(|&v| (v, true)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_h1 = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        // ranks i+1..=j+1 share the midrank
        let midrank = (i + j + 2) as f64 / 2.0;
        let h1_in_block = pooled[i..=j].iter().filter(|e| e.1).count();
        rank_sum_h1 += midrank * h1_in_block as f64;
        i = j + 1;
    }
    let (m0, m1) = (h0.len() as f64, h1.len() as f64);
    Ok((rank_sum_h1 - m1 * (m1 + 1.0) / 2.0) / (m0 * m1))
}

/// ROC points `(false positive rate, true positive rate)` for the rule
/// "reject when value >= threshold", thresholds running over the distinct
/// pooled values in descending order, starting at `(0, 0)`.
pub fn roc_curve(h0: &[f64], h1: &[f64]) -> Vec<(f64, f64)> {
    let (fp, tp) = roc_counts(h0, h1);
    let (m0, m1) = (h0.len() as f64, h1.len() as f64);
    fp.iter()
        .zip(&tp)
        .map(|(&f, &t)| (f as f64 / m0, t as f64 / m1))
        .collect()
}

fn roc_counts(h0: &[f64], h1: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let mut pooled: Vec<(f64, bool)> = h0
        .iter()
        .map(|&v| (v, false))
        .chain(h1.iter().map(|&v| (v, true)))
        .collect();
    pooled.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut fp, mut tp) = (vec![0u64], vec![0u64]);
    let mut i = 0;
    while i < pooled.len() {
        let (mut f, mut t) = (*fp.last().unwrap(), *tp.last().unwrap());
        let v = pooled[i].0;
        while i < pooled.len() && pooled[i].0 == v {
            if pooled[i].1 {
                t += 1;
            } else {
                f += 1;
            }
            i += 1;
        }
        fp.push(f);
        tp.push(t);
    }
    (fp, tp)
}

/// Trapezoidal area under [`roc_curve`], accumulated in integer counts.
pub fn auc_trapezoid(h0: &[f64], h1: &[f64]) -> Result<f64> {
    if h0.is_empty() || h1.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let (fp, tp) = roc_counts(h0, h1);
    let mut twice_area: u128 = 0;
    for w in 1..fp.len() {
        twice_area += u128::from(fp[w] - fp[w - 1]) * u128::from(tp[w] + tp[w - 1]);
    }
    Ok(twice_area as f64 / (2.0 * h0.len() as f64 * h1.len() as f64))
}
