//! Bounded kernels, the distances they induce, and pairwise distance matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bandwidth used when none is given (features are expected to be standardized).
pub const DEFAULT_SIGMA2: f64 = 10.0;

/// Below this size rows are filled on the calling thread.
const PARALLEL_MIN_N: usize = 256;

/// Largest double strictly below 1.
const BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

/// A kernel together with the distance it induces in its feature space.
///
/// `WeightedGaussian` is `k(x, x') = exp(-|x - x'|^2 / sigma2) / 2`, whose
/// induced distance `sqrt(1 - exp(-|x - x'|^2 / sigma2))` lies in `[0, 1)`.
/// `RawEuclidean` stands for the inner-product kernel, whose induced distance
/// is the plain Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Kernel {
    WeightedGaussian { sigma2: f64 },
    RawEuclidean,
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel::WeightedGaussian {
            sigma2: DEFAULT_SIGMA2,
        }
    }
}

impl Kernel {
    pub fn weighted_gaussian(sigma2: f64) -> Result<Self> {
        let k = Kernel::WeightedGaussian { sigma2 };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::WeightedGaussian { sigma2 } if !(sigma2 > 0.0 && sigma2.is_finite()) => Err(
                Error::invalid(format!("sigma2 must be positive and finite, got {sigma2}")),
            ),
            _ => Ok(()),
        }
    }

    /// Whether every induced distance is guaranteed to lie in `[0, 1)`.
    pub fn is_bounded(&self) -> bool {
        matches!(self, Kernel::WeightedGaussian { .. })
    }

    /// Induced distance as a function of the squared Euclidean distance.
    #[inline]
    pub fn distance_from_sq(&self, sq: f64) -> f64 {
        match *self {
            // -expm1(-r) keeps full precision for small r; the clamp keeps the
            // range half-open once 1 - exp(-r) rounds to 1 (r > ~36.7)
            Kernel::WeightedGaussian { sigma2 } => (-(-sq / sigma2).exp_m1()).sqrt().min(BELOW_ONE),
            Kernel::RawEuclidean => sq.sqrt(),
        }
    }
}

#[inline]
fn squared_euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Distance between `x` and `x2` induced by `kernel`.
pub fn induced_distance(kernel: &Kernel, x: &[f64], x2: &[f64]) -> Result<f64> {
    kernel.validate()?;
    if x.len() != x2.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            x2.len()
        )));
    }
    Ok(kernel.distance_from_sq(squared_euclidean(x, x2)))
}

/// The set distance between two categorical labels: 0 if equal, 1 otherwise.
#[inline]
pub fn set_distance<L: PartialEq + ?Sized>(y: &L, y2: &L) -> f64 {
    if y == y2 {
        0.0
    } else {
        1.0
    }
}

/// Symmetric `n x n` matrix of pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from row-major entries, checking symmetry, the zero
    /// diagonal and nonnegativity.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::invalid(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::invalid(format!("nonzero diagonal at {i}")));
            }
            for j in (i + 1)..n {
                let v = entries[i * n + j];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::invalid(format!(
                        "invalid distance at ({i}, {j}): {v}"
                    )));
                }
                if v != entries[j * n + i] {
                    return Err(Error::invalid(format!("asymmetric entry at ({i}, {j})")));
                }
            }
        }
        Ok(Self { n, entries })
    }

    /// Fills the upper triangle from `f(i, j)` (`i < j`) and mirrors it.
    /// Large matrices are filled row-parallel; each entry is evaluated exactly
    /// once, so the result does not depend on scheduling.
    pub fn from_fn<F>(n: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> f64 + Sync,
    {
        let fill_row = |i: usize| -> Vec<f64> { ((i + 1)..n).map(|j| f(i, j)).collect() };
        let upper: Vec<Vec<f64>> = if n >= PARALLEL_MIN_N {
            (0..n).into_par_iter().map(fill_row).collect()
        } else {
            (0..n).map(fill_row).collect()
        };
        let mut entries = vec![0.0; n * n];
        for (i, row) in upper.iter().enumerate() {
            for (off, &v) in row.iter().enumerate() {
                let j = i + 1 + off;
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self { n, entries }
    }

    /// Pairwise distances between sampled atoms: entry `(i, j)` is
    /// `atom_distances[atoms[i]][atoms[j]]`.
    pub fn from_atoms(atom_distances: &DistanceMatrix, atoms: &[usize]) -> Self {
        let n = atoms.len();
        let mut entries = vec![0.0; n * n];
        for (i, &a) in atoms.iter().enumerate() {
            for (j, &b) in atoms.iter().enumerate() {
                entries[i * n + j] = atom_distances.get(a, b);
            }
        }
        Self { n, entries }
    }

    /// Set-distance matrix of a label vector.
    pub fn from_labels<L: PartialEq>(labels: &[L]) -> Self {
        let n = labels.len();
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                entries[i * n + j] = set_distance(&labels[i], &labels[j]);
            }
        }
        Self { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }
}

/// Pairwise induced distances between the rows of `points`.
pub fn pairwise_matrix<R>(kernel: &Kernel, points: &[R]) -> Result<DistanceMatrix>
where
    R: AsRef<[f64]> + Sync,
{
    kernel.validate()?;
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let dim = points[0].as_ref().len();
    if let Some(bad) = points.iter().position(|p| p.as_ref().len() != dim) {
        return Err(Error::invalid(format!(
            "row {bad} has dimension {}, expected {dim}",
            points[bad].as_ref().len()
        )));
    }
    Ok(DistanceMatrix::from_fn(n, |i, j| {
        kernel.distance_from_sq(squared_euclidean(points[i].as_ref(), points[j].as_ref()))
    }))
}

/// Pairwise induced distances of a one-dimensional sample.
pub fn pairwise_matrix_1d(kernel: &Kernel, values: &[f64]) -> Result<DistanceMatrix> {
    kernel.validate()?;
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    Ok(DistanceMatrix::from_fn(n, |i, j| {
        let d = values[i] - values[j];
        kernel.distance_from_sq(d * d)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const G10: Kernel = Kernel::WeightedGaussian { sigma2: 10.0 };

    #[test]
    fn induced_distance_examples() {
        assert_eq!(induced_distance(&G10, &[0.0], &[0.0]).unwrap(), 0.0);
        // sqrt(1 - e^{-0.1})
        let expected = (1.0 - (-0.1f64).exp()).sqrt();
        let got = induced_distance(&G10, &[0.0], &[1.0]).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.30848).abs() < 5e-6);
        let e = induced_distance(&Kernel::RawEuclidean, &[0.0, 3.0], &[4.0, 0.0]).unwrap();
        assert!((e - 5.0).abs() < 1e-15);
    }

    #[test]
    fn induced_distance_rejects_bad_input() {
        assert!(matches!(
            induced_distance(&G10, &[0.0, 1.0], &[0.0]),
            Err(Error::InvalidInput(_))
        ));
        let bad = Kernel::WeightedGaussian { sigma2: 0.0 };
        assert!(induced_distance(&bad, &[0.0], &[1.0]).is_err());
        assert!(Kernel::weighted_gaussian(-1.0).is_err());
    }

    #[test]
    fn pairwise_examples() {
        let d = pairwise_matrix(&G10, &[[1.5, 2.0], [1.5, 2.0]]).unwrap();
        assert!(d.as_slice().iter().all(|&v| v == 0.0));

        let d = pairwise_matrix_1d(&Kernel::RawEuclidean, &[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(d.get(0, 1), 1.0);
        assert_eq!(d.get(0, 2), 3.0);
        assert_eq!(d.get(1, 2), 2.0);
        assert_eq!(d.get(2, 1), 2.0);

        let d = pairwise_matrix_1d(&G10, &[0.0, 1.0]).unwrap();
        assert!((d.get(0, 1) - 0.30848).abs() < 5e-6);

        assert!(matches!(
            pairwise_matrix_1d(&G10, &[1.0]),
            Err(Error::InsufficientData { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn set_distance_examples() {
        assert_eq!(set_distance("L1", "L1"), 0.0);
        assert_eq!(set_distance("L1", "L2"), 1.0);
        assert_eq!(set_distance(&3usize, &3usize), 0.0);
    }

    #[test]
    fn from_entries_validates() {
        assert!(DistanceMatrix::from_entries(2, vec![0.0, 1.0, 1.0, 0.0]).is_ok());
        assert!(DistanceMatrix::from_entries(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(DistanceMatrix::from_entries(2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(DistanceMatrix::from_entries(2, vec![0.0, -1.0, -1.0, 0.0]).is_err());
    }

    #[test]
    fn wide_bandwidth_approaches_euclidean() {
        // sigma * d_sigma(x, x') -> |x - x'| as sigma -> infinity
        let sigma2 = 1e6;
        let k = Kernel::WeightedGaussian { sigma2 };
        for (x, y) in [(0.0, 1.0), (-0.7, 0.4), (2.0, -1.0)] {
            let ratio = induced_distance(&k, &[x], &[y]).unwrap() * sigma2.sqrt() / (x - y).abs();
            assert!((ratio - 1.0).abs() < 1e-3, "ratio {ratio}");
        }
    }

    fn rotation(theta: f64) -> [[f64; 2]; 2] {
        [[theta.cos(), -theta.sin()], [theta.sin(), theta.cos()]]
    }

    proptest! {
        #[test]
        fn rigid_motion_invariance(
            x in prop::array::uniform2(-3.0f64..3.0),
            y in prop::array::uniform2(-3.0f64..3.0),
            theta in 0.0f64..std::f64::consts::TAU,
            b in prop::array::uniform2(-5.0f64..5.0),
            sigma2 in 0.5f64..50.0,
        ) {
            let r = rotation(theta);
            let mv = |p: [f64; 2]| [
                r[0][0] * p[0] + r[0][1] * p[1] + b[0],
                r[1][0] * p[0] + r[1][1] * p[1] + b[1],
            ];
            for k in [Kernel::WeightedGaussian { sigma2 }, Kernel::RawEuclidean] {
                let d0 = induced_distance(&k, &x, &y).unwrap();
                let d1 = induced_distance(&k, &mv(x), &mv(y)).unwrap();
                prop_assert!((d0 - d1).abs() < 1e-12);
            }
        }

        #[test]
        fn metric_sanity_and_boundedness(
            x in prop::collection::vec(-1e3f64..1e3, 3),
            y in prop::collection::vec(-1e3f64..1e3, 3),
            sigma2 in 1e-3f64..1e3,
        ) {
            let k = Kernel::WeightedGaussian { sigma2 };
            let dxy = induced_distance(&k, &x, &y).unwrap();
            let dyx = induced_distance(&k, &y, &x).unwrap();
            prop_assert!(dxy >= 0.0);
            prop_assert!(dxy < 1.0);
            prop_assert_eq!(dxy, dyx);
            prop_assert_eq!(induced_distance(&k, &x, &x).unwrap(), 0.0);
        }
    }
}
