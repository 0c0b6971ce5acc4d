//! Scalar abstractions shared by the numeric modules.
//!
//! The savings model and cost model only need field arithmetic, so they run
//! over any [`Scalar`]: `f32`, `f64`, or the exact [`Rational`]. The agreement
//! metrics take square roots and are bounded by [`RealScalar`] instead.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Exact arbitrary-precision rational used by oracles and exact reproductions.
pub type Rational = BigRational;

/// Field-like scalar: enough for products, quotients and comparisons.
pub trait Scalar: Num + FromPrimitive + ToPrimitive + Clone + PartialOrd + Debug {
    fn from_u64_exact(v: u64) -> Self {
        Self::from_u64(v).expect("u64 is representable in every Scalar")
    }

    /// Lossy conversion from a decimal `f64`, used for user-supplied parameters.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 parameter")
    }
}

impl<T> Scalar for T where T: Num + FromPrimitive + ToPrimitive + Clone + PartialOrd + Debug {}

/// Real-valued scalar (IEEE floats).
pub trait RealScalar: Scalar + Float + Copy {}

impl<T> RealScalar for T where T: Scalar + Float + Copy {}

/// Builds the exact rational `numer / denom`.
pub fn ratio(numer: i64, denom: i64) -> Rational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Parses a decimal literal such as `"0.00325"` into an exact rational.
pub fn rational_from_decimal(text: &str) -> Option<Rational> {
    let text = text.trim();
    let (negative, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let mut numer: BigInt = format!("0{int_part}{frac_part}").parse().ok()?;
    if negative {
        numer = -numer;
    }
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    Some(BigRational::new(numer, denom))
}
