//! Seeded synthetic corpora with a configurable score distribution.

use std::collections::BTreeSet;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, ReplaceabilityMatrix};
use crate::types::{ImageId, ImageRecord, ScopeKey};

const WORDS: &[&str] = &[
    "election", "storm", "market", "court", "vaccine", "summit", "protest", "festival", "wildfire", "budget",
    "strike", "museum", "launch", "harvest", "border", "stadium", "bridge", "verdict", "drought", "concert",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub websites: usize,
    pub categories_per_website: usize,
    pub articles_per_category: usize,
    /// Each article has one image plus a second with this probability.
    pub second_image_probability: f64,
    /// Share of inter-article pairs with a non-zero score.
    pub nonzero_fraction: f64,
    /// Relative frequency of scores 1, 2, 3, 4 among non-zero pairs.
    pub nonzero_weights: [f64; 4],
    pub min_bytes: u64,
    pub max_bytes: u64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            websites: 20,
            categories_per_website: 5,
            articles_per_category: 10,
            second_image_probability: 0.8,
            nonzero_fraction: 0.095,
            nonzero_weights: [894.0, 834.0, 515.0, 547.0],
            min_bytes: 20_000,
            max_bytes: 380_000,
            seed: 7,
        }
    }
}

pub fn generate(config: &SynthConfig) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let classes = WeightedIndex::new(config.nonzero_weights).expect("positive class weights");
    let mut images = Vec::new();
    let mut matrices = Vec::new();

    for w in 0..config.websites {
        for c in 0..config.categories_per_website {
            let scope = ScopeKey::new(format!("site{w:02}"), format!("category{c}"));
            let mut scope_images = Vec::new();
            for a in 0..config.articles_per_category {
                let article = format!("a{w:02}{c}{a:03}");
                let heading = heading(&mut rng);
                let count = 1 + usize::from(rng.random_bool(config.second_image_probability));
                for _ in 0..count {
                    let alt = rng.random_bool(0.7).then(|| heading_word(&mut rng).to_string());
                    scope_images.push(ImageRecord {
                        website: scope.website.clone(),
                        category: scope.category.clone(),
                        article_id: article.clone(),
                        image_id: ImageId(0),
                        byte_size: rng.random_range(config.min_bytes..=config.max_bytes),
                        alt_text: alt,
                        heading: heading.clone(),
                    });
                }
            }

            let mut ids = BTreeSet::new();
            while ids.len() < scope_images.len() {
                ids.insert(ImageId(rng.random()));
            }
            let mut ids: Vec<ImageId> = ids.into_iter().collect();
            ids.sort_by_key(|_| rng.random::<u32>());
            for (img, id) in scope_images.iter_mut().zip(&ids) {
                img.image_id = *id;
            }

            let n = scope_images.len();
            let mut cells = vec![0i64; n * n];
            for r in 0..n {
                for col in (r + 1)..n {
                    if scope_images[r].article_id == scope_images[col].article_id {
                        continue;
                    }
                    if rng.random_bool(config.nonzero_fraction) {
                        let v = classes.sample(&mut rng) as i64 + 1;
                        cells[r * n + col] = v;
                        cells[col * n + r] = v;
                    }
                }
            }
            let matrix = ReplaceabilityMatrix::new(
                scope,
                ids,
                scope_images.iter().map(|i| i.article_id.clone()).collect(),
                cells,
            )
            .expect("generated matrix is valid");
            matrices.push(matrix);
            images.extend(scope_images);
        }
    }
    Dataset::new(images, matrices).expect("generated dataset is valid")
}

fn heading_word(rng: &mut impl Rng) -> &'static str {
    WORDS[rng.random_range(0..WORDS.len())]
}

fn heading(rng: &mut impl Rng) -> String {
    (0..3).map(|_| heading_word(rng)).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::useful_counts;
    use crate::types::Threshold;

    #[test]
    fn shape_and_determinism() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg);
        let b = generate(&cfg);
        assert_eq!(a.images(), b.images());
        assert_eq!(a.websites().len(), 20);
        assert_eq!(a.matrices().count(), 100);
        let per_article = a.images().len() as f64 / 1000.0;
        assert!((1.7..1.9).contains(&per_article), "{per_article}");
    }

    #[test]
    fn score_distribution_follows_config() {
        let ds = generate(&SynthConfig::default());
        let (mut hits, mut total) = (0, 0);
        for m in ds.matrices() {
            let (h, t) = useful_counts(m, Threshold::new(1).unwrap());
            hits += h;
            total += t;
        }
        let frac = hits as f64 / total as f64;
        assert!((frac - 0.095).abs() < 0.01, "{frac}");
    }
}
