//! Small numerical helpers shared by the estimators and the simulation code.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Neumaier (improved Kahan) compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for v in iter {
            self.add(v);
        }
    }
}

/// Compensated sum of an iterator of values.
pub fn sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(values);
    acc.total()
}

/// SplitMix64 finalizer, used to derive independent child seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for replicate `stream` of a run seeded with `seed`.
///
/// Each replicate owns its own ChaCha stream, so results do not depend on
/// how replicates are scheduled across threads.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Empirical quantile using the "higher" order statistic:
/// `sorted[ceil((len - 1) * prob)]`.
///
/// `sorted` must be ascending and non-empty.
pub fn quantile_higher(sorted: &[f64], prob: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let pos = ((sorted.len() - 1) as f64 * prob).ceil() as usize;
    sorted[pos.min(sorted.len() - 1)]
}

/// Sorts a copy of `values` ascending (NaN-free input assumed).
pub fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(values: &[f64]) -> f64 {
    sum(values.iter().copied()) / values.len() as f64
}

/// Sample mean and standard error of the mean (divisor n - 1 variance).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = mean(values);
    if values.len() < 2 {
        return (m, f64::NAN);
    }
    let ss = sum(values.iter().map(|v| (v - m) * (v - m)));
    (m, (ss / (n - 1.0) / n).sqrt())
}

/// Sample skewness and excess kurtosis (moment estimators).
pub fn skewness_kurtosis(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    let n = values.len() as f64;
    let m2 = sum(values.iter().map(|v| (v - m).powi(2))) / n;
    let m3 = sum(values.iter().map(|v| (v - m).powi(3))) / n;
    let m4 = sum(values.iter().map(|v| (v - m).powi(4))) / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}
