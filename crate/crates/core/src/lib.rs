//! Semantic image caching: replaceability data, the expected-savings model, the
//! request/response protocol with its origin server and caching client, a cache
//! simulator, agreement metrics, and replaceability scorers.
//!
//! Numeric code is generic over [`scalar::Scalar`]; the aliases below fix it to
//! `f64`.

pub mod client;
pub mod dataset;
pub mod metrics;
pub mod protocol;
pub mod savings;
pub mod scalar;
pub mod scorer;
pub mod server;
pub mod synthetic;
pub mod types;

pub use dataset::{load_dataset, save_dataset, Dataset, DatasetError, ReplaceabilityMatrix};
pub use scalar::{Rational, RealScalar, Scalar};
pub use types::{ImageId, ImageRecord, Score, ScopeKey, Threshold};

pub type SavingsParams = savings::SavingsParams<f64>;
pub type CurvePoint = savings::CurvePoint<f64>;
pub type CostModel = scorer::CostModel<f64>;
pub type WeightedPrf = metrics::WeightedPrf<f64>;
pub type ConfusionMatrix = metrics::ConfusionMatrix<f64>;

/// Exact-arithmetic variants.
pub mod exact {
    use super::Rational;

    pub type SavingsParams = crate::savings::SavingsParams<Rational>;
    pub type CurvePoint = crate::savings::CurvePoint<Rational>;
    pub type CostModel = crate::scorer::CostModel<Rational>;
}
