//! Ordinal agreement and classification metrics over 0..=4 ratings.

use serde::Serialize;
use thiserror::Error;

use crate::dataset::ReplaceabilityMatrix;
use crate::scalar::RealScalar;
use crate::types::{Score, Threshold};

const CLASSES: usize = Score::MAX as usize + 1;
const SCALE_RANGE: f64 = Score::MAX as f64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("empty rating series")]
    Empty,
    #[error("rater series have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("rating {0} outside 0..=4")]
    OutOfRange(i64),
    #[error("{0} is undefined: no expected disagreement (both raters constant)")]
    Undefined(&'static str),
    #[error("group {index} has {len} samples; pooled std needs at least 2")]
    GroupTooSmall { index: usize, len: usize },
    #[error("no groups")]
    NoGroups,
}

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;

/// Aligned (predicted, truth) ratings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingSeries {
    pairs: Vec<(Score, Score)>,
}

impl RatingSeries {
    pub fn new(pairs: Vec<(Score, Score)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(MetricsError::Empty);
        }
        Ok(RatingSeries { pairs })
    }

    /// Builds a series from raw integers, validating the range.
    pub fn from_ints(predicted: &[i64], truth: &[i64]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(MetricsError::LengthMismatch(predicted.len(), truth.len()));
        }
        let score = |v: i64| {
            u8::try_from(v).ok().and_then(Score::new).ok_or(MetricsError::OutOfRange(v))
        };
        let pairs = predicted
            .iter()
            .zip(truth)
            .map(|(&p, &t)| Ok((score(p)?, score(t)?)))
            .collect::<Result<Vec<_>>>()?;
        RatingSeries::new(pairs)
    }

    pub fn pairs(&self) -> &[(Score, Score)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn counts(&self) -> [[u64; CLASSES]; CLASSES] {
        let mut c = [[0u64; CLASSES]; CLASSES];
        for &(p, t) in &self.pairs {
            c[t.get() as usize][p.get() as usize] += 1;
        }
        c
    }
}

fn num<T: RealScalar>(v: u64) -> T {
    T::from_u64_exact(v)
}

/// Root-mean-square error divided by the scale range (4).
pub fn nrmse<T: RealScalar>(series: &RatingSeries) -> T {
    let sq: u64 = series
        .pairs
        .iter()
        .map(|&(p, t)| {
            let d = p.get() as i64 - t.get() as i64;
            (d * d) as u64
        })
        .sum();
    (num::<T>(sq) / num::<T>(series.len() as u64)).sqrt() / T::from_f64_lossy(SCALE_RANGE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Weighting {
    Linear,
    Quadratic,
}

impl Weighting {
    fn weight<T: RealScalar>(self, i: usize, j: usize) -> T {
        let d = T::from_f64_lossy(i.abs_diff(j) as f64) / T::from_f64_lossy(SCALE_RANGE);
        match self {
            Weighting::Linear => d,
            Weighting::Quadratic => d * d,
        }
    }
}

/// Weighted Cohen's kappa between predicted and true ratings.
pub fn weighted_kappa<T: RealScalar>(series: &RatingSeries, weighting: Weighting) -> Result<T> {
    let counts = series.counts();
    let n = num::<T>(series.len() as u64);
    let truth_marg: Vec<u64> = counts.iter().map(|row| row.iter().sum()).collect();
    let pred_marg: Vec<u64> = (0..CLASSES).map(|j| counts.iter().map(|row| row[j]).sum()).collect();

    let mut observed = T::zero();
    let mut expected = T::zero();
    for i in 0..CLASSES {
        for j in 0..CLASSES {
            let w: T = weighting.weight(i, j);
            observed = observed + w * num::<T>(counts[i][j]);
            expected = expected + w * num::<T>(truth_marg[i]) * num::<T>(pred_marg[j]) / n;
        }
    }
    if expected == T::zero() {
        return Err(MetricsError::Undefined("weighted kappa"));
    }
    Ok(T::one() - observed / expected)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedPrf<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

/// One-vs-rest precision, recall and F1 per class, averaged with weights equal
/// to each class's share of the true labels. A zero denominator yields 0 for
/// that class.
pub fn weighted_prf<T: RealScalar>(series: &RatingSeries) -> WeightedPrf<T> {
    let counts = series.counts();
    let n = num::<T>(series.len() as u64);
    let mut out = WeightedPrf { precision: T::zero(), recall: T::zero(), f1: T::zero() };
    for c in 0..CLASSES {
        let support: u64 = counts[c].iter().sum();
        if support == 0 {
            continue;
        }
        let tp = counts[c][c];
        let predicted: u64 = counts.iter().map(|row| row[c]).sum();
        let precision = if predicted == 0 { T::zero() } else { num::<T>(tp) / num::<T>(predicted) };
        let recall = num::<T>(tp) / num::<T>(support);
        let f1 = if precision + recall == T::zero() {
            T::zero()
        } else {
            T::from_f64_lossy(2.0) * precision * recall / (precision + recall)
        };
        let w = num::<T>(support);
        out.precision = out.precision + w * precision;
        out.recall = out.recall + w * recall;
        out.f1 = out.f1 + w * f1;
    }
    WeightedPrf { precision: out.precision / n, recall: out.recall / n, f1: out.f1 / n }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Normalize {
    None,
    Row,
}

/// 5x5 confusion matrix; rows are true labels, columns predictions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix<T> {
    pub counts: [[u64; CLASSES]; CLASSES],
    pub values: [[T; CLASSES]; CLASSES],
    /// True classes with no examples; their normalized rows are all zero.
    pub zero_support_rows: Vec<u8>,
}

pub fn confusion_matrix<T: RealScalar>(series: &RatingSeries, normalize: Normalize) -> ConfusionMatrix<T> {
    let counts = series.counts();
    let mut values = [[T::zero(); CLASSES]; CLASSES];
    let mut zero_support_rows = Vec::new();
    for (r, row) in counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        if total == 0 {
            zero_support_rows.push(r as u8);
        }
        for (c, &v) in row.iter().enumerate() {
            values[r][c] = match normalize {
                Normalize::None => num(v),
                Normalize::Row if total == 0 => T::zero(),
                Normalize::Row => num::<T>(v) / num::<T>(total),
            };
        }
    }
    ConfusionMatrix { counts, values, zero_support_rows }
}

/// Two-observer Krippendorff's alpha with the ordinal difference function, for
/// fully paired ratings.
///
/// Observed disagreement is the mean squared ordinal distance within units;
/// expected disagreement comes from the pooled value frequencies.
pub fn krippendorff_alpha_ordinal<T: RealScalar>(rater_a: &[Score], rater_b: &[Score]) -> Result<T> {
    if rater_a.len() != rater_b.len() {
        return Err(MetricsError::LengthMismatch(rater_a.len(), rater_b.len()));
    }
    if rater_a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut freq = [0u64; CLASSES];
    for s in rater_a.iter().chain(rater_b) {
        freq[s.get() as usize] += 1;
    }
    let delta = ordinal_distances::<T>(&freq);

    let units = num::<T>(rater_a.len() as u64);
    let observed = rater_a
        .iter()
        .zip(rater_b)
        .fold(T::zero(), |acc, (a, b)| acc + delta[a.get() as usize][b.get() as usize])
        / units;

    let total = num::<T>(2 * rater_a.len() as u64);
    let mut expected = T::zero();
    for c in 0..CLASSES {
        for k in 0..CLASSES {
            expected = expected + num::<T>(freq[c]) * num::<T>(freq[k]) * delta[c][k];
        }
    }
    expected = expected / (total * (total - T::one()));
    if expected == T::zero() {
        return Err(MetricsError::Undefined("Krippendorff's alpha"));
    }
    Ok(T::one() - observed / expected)
}

/// Squared ordinal distance between every pair of values given their pooled
/// frequencies: `(sum_{g=c..=k} n_g - (n_c + n_k)/2)^2`.
fn ordinal_distances<T: RealScalar>(freq: &[u64; CLASSES]) -> [[T; CLASSES]; CLASSES] {
    let mut d = [[T::zero(); CLASSES]; CLASSES];
    let half = T::from_f64_lossy(0.5);
    for c in 0..CLASSES {
        for k in 0..CLASSES {
            let (lo, hi) = (c.min(k), c.max(k));
            let span: u64 = freq[lo..=hi].iter().sum();
            let v = num::<T>(span) - half * (num::<T>(freq[c]) + num::<T>(freq[k]));
            d[c][k] = if c == k { T::zero() } else { v * v };
        }
    }
    d
}

/// `sqrt(sum (n_i - 1) s_i^2 / sum (n_i - 1))` with sample variances `s_i^2`.
pub fn pooled_std<T: RealScalar>(groups: &[Vec<T>]) -> Result<T> {
    if groups.is_empty() {
        return Err(MetricsError::NoGroups);
    }
    let mut weighted = T::zero();
    let mut dof = T::zero();
    for (index, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(MetricsError::GroupTooSmall { index, len: g.len() });
        }
        let n = num::<T>(g.len() as u64);
        let mean = g.iter().fold(T::zero(), |a, &x| a + x) / n;
        let ss = g.iter().fold(T::zero(), |a, &x| a + (x - mean) * (x - mean));
        weighted = weighted + ss;
        dof = dof + n - T::one();
    }
    Ok((weighted / dof).sqrt())
}

/// Share of inter-article pairs whose score meets `t`; 0 when the matrix has no
/// inter-article pairs.
pub fn useful_fraction<T: RealScalar>(matrix: &ReplaceabilityMatrix, t: Threshold) -> T {
    let (useful, total) = useful_counts(matrix, t);
    if total == 0 {
        T::zero()
    } else {
        num::<T>(useful) / num::<T>(total)
    }
}

/// (pairs meeting `t`, all inter-article pairs).
pub fn useful_counts(matrix: &ReplaceabilityMatrix, t: Threshold) -> (u64, u64) {
    matrix
        .inter_article_pairs()
        .fold((0, 0), |(u, n), (_, _, s)| (u + s.meets(t) as u64, n + 1))
}
