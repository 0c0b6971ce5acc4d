//! Closed-form model of expected byte savings from semantic reuse.
//!
//! For a category with `N` comparisons of which `useful` meet the threshold, a
//! client holding `X` cached images hits with probability
//! `p = 1 - C(N - useful, X) / C(N, X)`. Expected savings per image request are
//! `S * p - overhead * X` bytes, and per article access as a fraction of page
//! weight `mu * I / P`. All sizes are bytes.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::types::Threshold;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SavingsError {
    #[error("useful comparisons {useful} exceed total comparisons {total}")]
    UsefulExceedsTotal { useful: u64, total: u64 },
    #[error("cached image count {cached} exceeds total comparisons {total}")]
    CacheExceedsTotal { cached: u64, total: u64 },
    #[error("{name} must be positive")]
    NonPositive { name: &'static str },
    #[error("useful fraction for t={t} is outside [0, 1]")]
    FractionRange { t: u8 },
    #[error("useful fractions must be non-increasing in t (u_{t} > u_{prev})")]
    NotMonotone { t: u8, prev: u8 },
}

pub type Result<T, E = SavingsError> = std::result::Result<T, E>;

/// Parameters of the analytical model.
#[derive(Debug, Clone, PartialEq)]
pub struct SavingsParams<T> {
    /// Average comparisons per category (`N`).
    pub comparisons: u64,
    /// Fraction of useful comparisons for t = 1..=4 (`u_t`), index 0 is t = 1.
    pub useful_fraction: [T; 4],
    /// Average image size in bytes (`S`).
    pub image_size: T,
    /// Average page weight in bytes (`P`).
    pub page_weight: T,
    /// Average images per article (`I`).
    pub images_per_article: T,
    /// Bytes appended per cached id.
    pub id_overhead: T,
}

impl<T: Scalar> SavingsParams<T> {
    /// Checks ranges and that `u_t` never grows with `t`.
    pub fn validate(&self) -> Result<()> {
        if self.comparisons == 0 {
            return Err(SavingsError::NonPositive { name: "comparisons (N)" });
        }
        let zero = T::zero();
        for (name, v) in [
            ("image size (S)", &self.image_size),
            ("page weight (P)", &self.page_weight),
            ("images per article (I)", &self.images_per_article),
        ] {
            if *v <= zero {
                return Err(SavingsError::NonPositive { name });
            }
        }
        if self.id_overhead < zero {
            return Err(SavingsError::NonPositive { name: "id overhead" });
        }
        for (i, u) in self.useful_fraction.iter().enumerate() {
            if *u < zero || *u > T::one() {
                return Err(SavingsError::FractionRange { t: i as u8 + 1 });
            }
            if i > 0 && *u > self.useful_fraction[i - 1] {
                return Err(SavingsError::NotMonotone { t: i as u8 + 1, prev: i as u8 });
            }
        }
        Ok(())
    }

    pub fn useful_fraction_at(&self, t: Threshold) -> &T {
        &self.useful_fraction[t.get() as usize - 1]
    }

    /// `round(N * u_t)`, the integer count of useful comparisons.
    pub fn useful_count(&self, t: Threshold) -> u64 {
        useful_count(self.comparisons, self.useful_fraction_at(t))
    }
}

/// Rounds `total * fraction` half away from zero.
pub fn useful_count<T: Scalar>(total: u64, fraction: &T) -> u64 {
    let f = fraction.to_f64().unwrap_or(0.0);
    ((total as f64) * f).round().clamp(0.0, total as f64) as u64
}

/// Probability that at least one of `cached` images drawn without replacement
/// from `total` is among the `useful` ones.
///
/// Computed as the telescoping product
/// `prod_{i<cached} (total - useful - i) / (total - i)` so it stays finite for
/// `total` in the hundreds and is exact when `T` is a rational.
pub fn hit_probability<T: Scalar>(total: u64, useful: u64, cached: u64) -> Result<T> {
    if useful > total {
        return Err(SavingsError::UsefulExceedsTotal { useful, total });
    }
    if cached > total {
        return Err(SavingsError::CacheExceedsTotal { cached, total });
    }
    let misses = total - useful;
    if cached > misses {
        return Ok(T::one());
    }
    let mut all_miss = T::one();
    for i in 0..cached {
        all_miss = all_miss * T::from_u64_exact(misses - i) / T::from_u64_exact(total - i);
    }
    Ok(T::one() - all_miss)
}

/// Expected bytes saved per image request, `S * p - overhead * X`. Negative when
/// the id overhead outweighs the expected hit.
pub fn expected_savings<T: Scalar>(params: &SavingsParams<T>, t: Threshold, cached: u64) -> Result<T> {
    let p: T = hit_probability(params.comparisons, params.useful_count(t), cached)?;
    Ok(params.image_size.clone() * p - params.id_overhead.clone() * T::from_u64_exact(cached))
}

/// Per-article saving as a fraction of page weight, `mu * I / P`.
pub fn page_weight_reduction<T: Scalar>(mu: T, images_per_article: T, page_weight: T) -> Result<T> {
    if page_weight <= T::zero() {
        return Err(SavingsError::NonPositive { name: "page weight (P)" });
    }
    if images_per_article <= T::zero() {
        return Err(SavingsError::NonPositive { name: "images per article (I)" });
    }
    Ok(mu * images_per_article / page_weight)
}

/// One point of a savings curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint<T> {
    pub cached: u64,
    pub hit_probability: T,
    pub savings_bytes: T,
    pub page_fraction: T,
}

/// Evaluates the model for `X = 0..=max_cached`.
pub fn savings_curve<T: Scalar>(
    params: &SavingsParams<T>,
    t: Threshold,
    max_cached: u64,
) -> Result<Vec<CurvePoint<T>>> {
    params.validate()?;
    if max_cached > params.comparisons {
        return Err(SavingsError::CacheExceedsTotal { cached: max_cached, total: params.comparisons });
    }
    let useful = params.useful_count(t);
    (0..=max_cached)
        .map(|x| {
            let p: T = hit_probability(params.comparisons, useful, x)?;
            let mu = params.image_size.clone() * p.clone()
                - params.id_overhead.clone() * T::from_u64_exact(x);
            let m = page_weight_reduction(
                mu.clone(),
                params.images_per_article.clone(),
                params.page_weight.clone(),
            )?;
            Ok(CurvePoint { cached: x, hit_probability: p, savings_bytes: mu, page_fraction: m })
        })
        .collect()
}

/// First `X > 0` at which expected savings turn negative, if any.
pub fn crossover<T: Scalar>(curve: &[CurvePoint<T>]) -> Option<u64> {
    curve
        .iter()
        .find(|pt| pt.cached > 0 && pt.savings_bytes < T::zero())
        .map(|pt| pt.cached)
}
