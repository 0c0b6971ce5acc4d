use std::collections::HashMap;

use super::{tokenize, PairContext, ScorerError};
use crate::dataset::Dataset;
use crate::types::{ImageId, Score, ScopeKey};

/// A labelled comparison from the training set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPair {
    pub scope: ScopeKey,
    pub a: ImageId,
    pub b: ImageId,
    pub score: Score,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FewShotSelection {
    pub scope: ScopeKey,
    /// Train image closest to the test pair's first image.
    pub anchor: ImageId,
    pub examples: Vec<LabeledPair>,
    /// Fewer than `k` comparisons were available.
    pub insufficient: bool,
}

/// Cosine similarity of word-frequency vectors; 0 when either text has no words.
pub fn cosine_similarity(a: &str, b: &str) -> f64 {
    let freq = |t: &str| {
        let mut m: HashMap<String, f64> = HashMap::new();
        for w in tokenize(t) {
            *m.entry(w).or_default() += 1.0;
        }
        m
    };
    let (fa, fb) = (freq(a), freq(b));
    let dot: f64 = fa.iter().filter_map(|(w, x)| fb.get(w).map(|y| x * y)).sum();
    let norm = |m: &HashMap<String, f64>| m.values().map(|v| v * v).sum::<f64>().sqrt();
    let denom = norm(&fa) * norm(&fb);
    if denom == 0.0 {
        0.0
    } else {
        dot / denom
    }
}

/// Picks `k` labelled comparisons relevant to `pair`.
///
/// 1. The train category whose name is most similar to the pair's category.
/// 2. Within it, the image whose heading and alt text are most similar to image A.
/// 3. Up to `k` inter-article comparisons involving that image, by ascending
///    partner id.
///
/// Ties go to the first category in (website, category) order and to the lowest
/// image id.
pub fn select_few_shot(
    pair: &PairContext,
    train: &Dataset,
    k: usize,
    similarity: &dyn Fn(&str, &str) -> f64,
) -> Result<FewShotSelection, ScorerError> {
    let mut best_scope: Option<(&ScopeKey, f64)> = None;
    for m in train.matrices() {
        if m.inter_article_pairs().next().is_none() {
            continue;
        }
        let s = similarity(&pair.image_a.category, &m.scope().category);
        if best_scope.is_none_or(|(_, b)| s > b) {
            best_scope = Some((m.scope(), s));
        }
    }
    let (scope, _) = best_scope.ok_or(ScorerError::EmptyTrainSet)?;
    let matrix = train.matrix(scope).expect("scope from train set");

    let target = pair.image_a.context_text();
    let mut ids: Vec<ImageId> = matrix.ids().to_vec();
    ids.sort();
    let mut anchor: Option<(ImageId, f64)> = None;
    for id in ids {
        let has_partner = matrix.inter_article_pairs().any(|(a, b, _)| a == id || b == id);
        if !has_partner {
            continue;
        }
        let img = train.image(scope, id).expect("validated dataset");
        let s = similarity(&target, &img.context_text());
        if anchor.is_none_or(|(_, b)| s > b) {
            anchor = Some((id, s));
        }
    }
    let (anchor, _) = anchor.ok_or(ScorerError::EmptyTrainSet)?;

    let mut examples: Vec<LabeledPair> = matrix
        .inter_article_pairs()
        .filter_map(|(a, b, score)| {
            let other = if a == anchor {
                b
            } else if b == anchor {
                a
            } else {
                return None;
            };
            Some(LabeledPair { scope: scope.clone(), a: anchor, b: other, score })
        })
        .collect();
    examples.sort_by_key(|p| p.b);
    let insufficient = examples.len() < k;
    if insufficient {
        log::warn!("few-shot: only {} comparisons for anchor {} in {}", examples.len(), anchor, scope);
    }
    examples.truncate(k);
    Ok(FewShotSelection { scope: scope.clone(), anchor, examples, insufficient })
}
