//! Replaceability scorers: ground truth lookup, an offline text heuristic, and
//! LLM judges behind a transport trait.

mod cost;
mod fewshot;
mod llm;
mod prompt;

use std::collections::HashSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError};
use crate::types::{ImageRecord, Score};

pub use cost::{cost_per_comparison, published_cost_table, CostModel, DEFAULT_INPUT_TOKENS, DEFAULT_OUTPUT_TOKENS};
pub use fewshot::{cosine_similarity, select_few_shot, FewShotSelection, LabeledPair};
pub use llm::{
    ChatRequest, ChatTransport, ContentPart, Describer, HttpChatTransport, LlmRating, LlmScorer, Pipeline,
    TransportDescriber, TransportError, DESCRIBE_PROMPT,
};
pub use prompt::{parse_rating, render_prompt, PromptMode, PromptSlots, RatingParseError, Template};

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("invalid pair: {0}")]
    InvalidPair(String),
    #[error("descriptions mode needs a description for both images")]
    MissingDescriptions,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: usize, last: RatingParseError },
    #[error("training set has no comparisons")]
    EmptyTrainSet,
}

/// Judge output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rating {
    pub score: Score,
    pub justification: String,
    pub raw_response: String,
}

/// Two images of one (website, category) from different articles, with the
/// metadata a judge sees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairContext {
    pub image_a: ImageRecord,
    pub image_b: ImageRecord,
    pub description_a: Option<String>,
    pub description_b: Option<String>,
}

impl PairContext {
    pub fn new(image_a: ImageRecord, image_b: ImageRecord) -> Result<Self, ScorerError> {
        if image_a.scope() != image_b.scope() {
            return Err(ScorerError::InvalidPair(format!(
                "{} and {} are in different categories",
                image_a.scope(),
                image_b.scope()
            )));
        }
        if image_a.article_id == image_b.article_id {
            return Err(ScorerError::InvalidPair(format!(
                "images {} and {} come from the same article {}",
                image_a.image_id, image_b.image_id, image_a.article_id
            )));
        }
        Ok(PairContext { image_a, image_b, description_a: None, description_b: None })
    }

    pub fn with_descriptions(mut self, a: impl Into<String>, b: impl Into<String>) -> Self {
        self.description_a = Some(a.into());
        self.description_b = Some(b.into());
        self
    }

    /// Swaps the roles of the two images.
    pub fn swapped(&self) -> Self {
        PairContext {
            image_a: self.image_b.clone(),
            image_b: self.image_a.clone(),
            description_a: self.description_b.clone(),
            description_b: self.description_a.clone(),
        }
    }
}

pub trait Scorer: Sync {
    fn score(&self, pair: &PairContext) -> Result<Rating, ScorerError>;
}

/// Reads the human label from the dataset.
#[derive(Debug, Clone, Copy)]
pub struct GroundTruthScorer<'a> {
    pub dataset: &'a Dataset,
}

impl Scorer for GroundTruthScorer<'_> {
    fn score(&self, pair: &PairContext) -> Result<Rating, ScorerError> {
        let score = self
            .dataset
            .replaceability(&pair.image_a.scope(), pair.image_a.image_id, pair.image_b.image_id)?;
        Ok(Rating { score, justification: "ground-truth".into(), raw_response: String::new() })
    }
}

/// Token-overlap stand-in for an LLM judge. Jaccard similarity of the word sets
/// of heading plus alt text, bucketed at 0.2 / 0.4 / 0.6 / 0.8.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeuristicScorer;

impl HeuristicScorer {
    pub fn similarity(a: &str, b: &str) -> f64 {
        let ta = word_set(a);
        let tb = word_set(b);
        if ta.is_empty() && tb.is_empty() {
            return 1.0;
        }
        ta.intersection(&tb).count() as f64 / ta.union(&tb).count() as f64
    }

    pub fn bucket(similarity: f64) -> Score {
        let v = match similarity {
            s if s >= 0.8 => 4,
            s if s >= 0.6 => 3,
            s if s >= 0.4 => 2,
            s if s >= 0.2 => 1,
            _ => 0,
        };
        Score::new(v).expect("bucket in range")
    }
}

impl Scorer for HeuristicScorer {
    fn score(&self, pair: &PairContext) -> Result<Rating, ScorerError> {
        let sim = Self::similarity(&pair.image_a.context_text(), &pair.image_b.context_text());
        Ok(Rating {
            score: Self::bucket(sim),
            justification: format!("token jaccard {sim:.4}"),
            raw_response: String::new(),
        })
    }
}

/// Lowercased alphanumeric words.
pub(crate) fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
}

fn word_set(text: &str) -> HashSet<String> {
    tokenize(text).collect()
}

/// Scores `pairs` on a pool of at most `concurrency` threads, preserving order.
pub fn score_batch(
    scorer: &dyn Scorer,
    pairs: &[PairContext],
    concurrency: usize,
) -> Vec<Result<Rating, ScorerError>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(concurrency.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| pairs.par_iter().map(|p| scorer.score(p)).collect())
}
