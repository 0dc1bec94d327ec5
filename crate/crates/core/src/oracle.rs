//! Exact population values over finite discrete joint distributions, and a
//! Monte Carlo harness for comparing estimator means against them.
//!
//! With finitely many atoms every expectation is a finite sum, so population
//! identities (the label-kernel form of the distance covariance, the ordering
//! between the Gini and distance covariances) can be checked to rounding
//! error rather than to sampling error.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{ClassPartition, Statistic};
use crate::kernels::{DistanceMatrix, Kernel};
use crate::numeric::{self, substream};

const PROB_TOL: f64 = 1e-12;

/// A finite joint law of `(X, Y)`: `Y = k` with probability `class_probs[k]`
/// and, given `Y = k`, `X` is atom `a` with probability `cond_pmf[k][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    support: Vec<Vec<f64>>,
    class_probs: Vec<f64>,
    cond_pmf: Vec<Vec<f64>>,
}

impl DiscreteJoint {
    pub fn new(
        support: Vec<Vec<f64>>,
        class_probs: Vec<f64>,
        cond_pmf: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let m = support.len();
        if m == 0 {
            return Err(Error::invalid("empty support"));
        }
        let q = support[0].len();
        if support.iter().any(|a| a.len() != q) {
            return Err(Error::invalid("support atoms have differing dimensions"));
        }
        if class_probs.is_empty() || class_probs.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::invalid("class probabilities must be positive"));
        }
        if (numeric::sum(class_probs.iter().copied()) - 1.0).abs() > PROB_TOL {
            return Err(Error::invalid("class probabilities must sum to 1"));
        }
        if cond_pmf.len() != class_probs.len() {
            return Err(Error::invalid(format!(
                "{} conditional pmfs for {} classes",
                cond_pmf.len(),
                class_probs.len()
            )));
        }
        for (k, row) in cond_pmf.iter().enumerate() {
            if row.len() != m || row.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::invalid(format!("conditional pmf {k} is malformed")));
            }
            if (numeric::sum(row.iter().copied()) - 1.0).abs() > PROB_TOL {
                return Err(Error::invalid(format!(
                    "conditional pmf {k} does not sum to 1"
                )));
            }
        }
        Ok(Self {
            support,
            class_probs,
            cond_pmf,
        })
    }

    /// Every class shares the conditional pmf `pmf`, so `X` and `Y` are
    /// independent.
    pub fn independent(
        support: Vec<Vec<f64>>,
        class_probs: Vec<f64>,
        pmf: Vec<f64>,
    ) -> Result<Self> {
        let cond = vec![pmf; class_probs.len()];
        Self::new(support, class_probs, cond)
    }

    /// Random joint with `m` atoms in `[-2, 2]^q` and `k` classes.
    pub fn random<R: Rng + ?Sized>(m: usize, q: usize, k: usize, rng: &mut R) -> Result<Self> {
        let support = random_support(m, q, rng);
        let probs = normalized((0..k).map(|_| rng.random_range(0.05..1.0)).collect());
        let cond = (0..k)
            .map(|_| normalized((0..m).map(|_| rng.random_range(0.0..1.0)).collect()))
            .collect();
        Self::new(support, probs, cond)
    }

    /// Random joint under which `X` and `Y` are independent.
    pub fn random_independent<R: Rng + ?Sized>(
        m: usize,
        q: usize,
        k: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let support = random_support(m, q, rng);
        let probs = normalized((0..k).map(|_| rng.random_range(0.05..1.0)).collect());
        let pmf = normalized((0..m).map(|_| rng.random_range(0.0..1.0)).collect());
        Self::independent(support, probs, pmf)
    }

    /// Random joint with equal class probabilities `1 / k`.
    pub fn random_balanced<R: Rng + ?Sized>(
        m: usize,
        q: usize,
        k: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let support = random_support(m, q, rng);
        let cond = (0..k)
            .map(|_| normalized((0..m).map(|_| rng.random_range(0.0..1.0)).collect()))
            .collect();
        Self::new(support, vec![1.0 / k as f64; k], cond)
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn class_probs(&self) -> &[f64] {
        &self.class_probs
    }

    pub fn cond_pmf(&self) -> &[Vec<f64>] {
        &self.cond_pmf
    }

    /// Number of atoms.
    pub fn m(&self) -> usize {
        self.support.len()
    }

    /// Number of classes.
    pub fn k(&self) -> usize {
        self.class_probs.len()
    }

    /// Marginal pmf of `X`: `sum_k p_k * cond_pmf[k]`.
    pub fn marginal(&self) -> Vec<f64> {
        (0..self.m())
            .map(|a| {
                numeric::sum(
                    self.class_probs
                        .iter()
                        .zip(&self.cond_pmf)
                        .map(|(p, row)| p * row[a]),
                )
            })
            .collect()
    }

    /// Whether all conditionals coincide (within `tol`).
    pub fn is_independent(&self, tol: f64) -> bool {
        let first = &self.cond_pmf[0];
        self.cond_pmf
            .iter()
            .all(|row| row.iter().zip(first).all(|(a, b)| (a - b).abs() <= tol))
    }

    /// Distances between every pair of atoms.
    pub fn atom_distances(&self, kernel: &Kernel) -> Result<DistanceMatrix> {
        kernel.validate()?;
        let s = &self.support;
        Ok(DistanceMatrix::from_fn(self.m(), |i, j| {
            let sq: f64 = s[i].iter().zip(&s[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            kernel.distance_from_sq(sq)
        }))
    }

    /// Draws `n` iid pairs; returns atom indices and class codes.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> (Vec<usize>, Vec<usize>) {
        let classes = WeightedIndex::new(&self.class_probs).expect("validated probabilities");
        let conds: Vec<WeightedIndex<f64>> = self
            .cond_pmf
            .iter()
            .map(|row| WeightedIndex::new(row).expect("validated pmf"))
            .collect();
        let mut atoms = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let y = classes.sample(rng);
            labels.push(y);
            atoms.push(conds[y].sample(rng));
        }
        (atoms, labels)
    }

    /// `E d(U, V)` for independent `U ~ pmf_u`, `V ~ pmf_v` over the atoms.
    fn expected_distance(d: &DistanceMatrix, pmf_u: &[f64], pmf_v: &[f64]) -> f64 {
        numeric::sum(pmf_u.iter().enumerate().flat_map(|(a, &pu)| {
            pmf_v
                .iter()
                .enumerate()
                .map(move |(b, &pv)| pu * pv * d.get(a, b))
        }))
    }
}

fn random_support<R: Rng + ?Sized>(m: usize, q: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| (0..q).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect()
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let total = numeric::sum(v.iter().copied());
    for x in &mut v {
        *x /= total;
    }
    // push the rounding residue into the largest entry so the sum is 1
    let residue = 1.0 - numeric::sum(v.iter().copied());
    if let Some(max) = v.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *max += residue;
    }
    v
}

/// Population Gini quantities of a discrete joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationGini {
    /// Gini mean difference of the marginal.
    pub delta: f64,
    /// Gini mean difference of each conditional.
    pub class_deltas: Vec<f64>,
    pub gcov: f64,
    /// `None` when the marginal is a single point mass.
    pub gcor: Option<f64>,
}

impl PopulationGini {
    pub fn require_gcor(&self) -> Result<f64> {
        self.gcor.ok_or_else(|| {
            Error::DegenerateDistribution("marginal is a point mass (delta = 0)".into())
        })
    }
}

/// Exact `delta`, `delta_k`, `gcov = delta - sum_k p_k delta_k` and
/// `gcor = gcov / delta`.
pub fn population_gini(dist: &DiscreteJoint, kernel: &Kernel) -> Result<PopulationGini> {
    let d = dist.atom_distances(kernel)?;
    let marginal = dist.marginal();
    let delta = DiscreteJoint::expected_distance(&d, &marginal, &marginal);
    let class_deltas: Vec<f64> = dist
        .cond_pmf
        .iter()
        .map(|row| DiscreteJoint::expected_distance(&d, row, row))
        .collect();
    let gcov = delta
        - numeric::sum(
            dist.class_probs
                .iter()
                .zip(&class_deltas)
                .map(|(p, dk)| p * dk),
        );
    let gcor = (delta > 0.0).then(|| gcov / delta);
    Ok(PopulationGini {
        delta,
        class_deltas,
        gcov,
        gcor,
    })
}

/// Which closed form to evaluate for the population distance covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcovForm {
    /// `E dX dY + E dX E dY - 2 E[E' dX E' dY]` with the set distance on `Y`.
    Definition,
    /// `sum_k p_k^2 (2 E d(X_k, X) - E d(X_k, X_k') - E d(X, X'))`.
    LabelKernel,
}

/// Exact population distance covariance between `X` (under `kernel`) and the
/// label (under the set distance).
pub fn population_dcov(dist: &DiscreteJoint, kernel: &Kernel, form: DcovForm) -> Result<f64> {
    let d = dist.atom_distances(kernel)?;
    match form {
        DcovForm::Definition => Ok(dcov_by_definition(dist, &d)),
        DcovForm::LabelKernel => {
            let marginal = dist.marginal();
            let delta = DiscreteJoint::expected_distance(&d, &marginal, &marginal);
            Ok(numeric::sum(
                dist.class_probs
                    .iter()
                    .zip(&dist.cond_pmf)
                    .map(|(&p, row)| {
                        let cross = DiscreteJoint::expected_distance(&d, row, &marginal);
                        let within = DiscreteJoint::expected_distance(&d, row, row);
                        p * p * (2.0 * cross - within - delta)
                    }),
            ))
        }
    }
}

fn dcov_by_definition(dist: &DiscreteJoint, d: &DistanceMatrix) -> f64 {
    // joint atoms z = (atom, class) with weight p_k * f_k(atom)
    let joint: Vec<(usize, usize, f64)> = dist
        .cond_pmf
        .iter()
        .enumerate()
        .flat_map(|(k, row)| {
            let p = dist.class_probs[k];
            row.iter()
                .enumerate()
                .filter(|(_, &f)| f > 0.0)
                .map(move |(a, &f)| (a, k, p * f))
        })
        .collect();
    let dy = |k: usize, l: usize| if k == l { 0.0 } else { 1.0 };

    let mut both = numeric::CompensatedSum::new();
    let mut ex = numeric::CompensatedSum::new();
    let mut ey = numeric::CompensatedSum::new();
    let mut mixed = numeric::CompensatedSum::new();
    for &(a, k, w) in &joint {
        let mut row_x = numeric::CompensatedSum::new();
        let mut row_y = numeric::CompensatedSum::new();
        for &(b, l, v) in &joint {
            let dx = d.get(a, b);
            let dyv = dy(k, l);
            both.add(w * v * dx * dyv);
            ex.add(w * v * dx);
            ey.add(w * v * dyv);
            row_x.add(v * dx);
            row_y.add(v * dyv);
        }
        mixed.add(w * row_x.total() * row_y.total());
    }
    both.total() + ex.total() * ey.total() - 2.0 * mixed.total()
}

/// Monte Carlo mean of an estimator and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub reps: usize,
}

/// Retries per replicate before a configuration is declared infeasible.
pub const MAX_RESAMPLE_ATTEMPTS: usize = 1000;

/// Draws an `n`-sample from `dist` in which every class has at least two
/// members, retrying whole samples up to [`MAX_RESAMPLE_ATTEMPTS`] times.
pub fn sample_with_min_class_size<R: Rng + ?Sized>(
    dist: &DiscreteJoint,
    n: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<usize>)> {
    for _ in 0..MAX_RESAMPLE_ATTEMPTS {
        let (atoms, labels) = dist.sample(n, rng);
        let part = ClassPartition::from_labels(&labels);
        if part.k() == dist.k() && part.require_min_size(2).is_ok() {
            return Ok((atoms, labels));
        }
    }
    Err(Error::Infeasible(format!(
        "could not draw n = {n} with every class size >= 2 after {MAX_RESAMPLE_ATTEMPTS} attempts"
    )))
}

/// Mean and standard error of `statistic` over `reps` iid samples of size
/// `n` from `dist`. Samples in which some class has fewer than two members
/// are redrawn. Replicate `r` uses its own substream of `seed`, so the result
/// is independent of the thread count.
pub fn mc_mean(
    statistic: Statistic,
    dist: &DiscreteJoint,
    kernel: &Kernel,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n == 0 || reps == 0 {
        return Err(Error::invalid("n and reps must be at least 1"));
    }
    let atom_d = dist.atom_distances(kernel)?;
    let values = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, r as u64);
            let (atoms, labels) = sample_with_min_class_size(dist, n, &mut rng)?;
            let d = DistanceMatrix::from_atoms(&atom_d, &atoms);
            statistic.compute(&d, &labels)
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, std_error) = numeric::mean_and_se(&values);
    Ok(McEstimate {
        mean,
        std_error,
        reps,
    })
}
