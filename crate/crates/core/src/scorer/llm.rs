use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use super::prompt::{parse_rating, render_prompt, PromptMode, RatingParseError, Template};
use super::{PairContext, Rating, Scorer, ScorerError};
use crate::types::ImageRecord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("endpoint returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response shape: {0}")]
    BadResponse(String),
    #[error("missing configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ContentPart {
    Text(String),
    /// Image attachment by URL or path; the adapter decides how to encode it.
    Image { reference: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChatRequest {
    pub parts: Vec<ContentPart>,
}

impl ChatRequest {
    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                ContentPart::Text(t) => Some(t.as_str()),
                ContentPart::Image { .. } => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// A chat-style inference endpoint: parts in, text out.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Produces a text description of one image (first stage of the two-step pipeline).
pub trait Describer: Send + Sync {
    fn describe(&self, image: &ImageRecord, reference: &str) -> Result<String, TransportError>;
}

pub const DESCRIBE_PROMPT: &str = "Describe this news image in detail: the people, objects, setting, \
actions, visible text and overall tone. Do not speculate about identities that are not evident.";

/// Describer that asks a vision-capable chat endpoint.
pub struct TransportDescriber<T> {
    pub transport: T,
}

impl<T: ChatTransport> Describer for TransportDescriber<T> {
    fn describe(&self, _image: &ImageRecord, reference: &str) -> Result<String, TransportError> {
        let request = ChatRequest {
            parts: vec![
                ContentPart::Text(DESCRIBE_PROMPT.to_string()),
                ContentPart::Image { reference: reference.to_string() },
            ],
        };
        self.transport.complete(&request).map(|s| s.trim().to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    /// Both images go to a multimodal judge together with the prompt.
    Direct,
    /// Images are described first; a text-only judge rates the descriptions.
    TwoStep,
}

/// A rating plus the audit trail of every raw response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmRating {
    pub rating: Rating,
    pub attempts: usize,
    pub raw_responses: Vec<String>,
}

/// LLM judge. Retries parse failures with the identical prompt.
pub struct LlmScorer<'a> {
    pub pipeline: Pipeline,
    pub template: Template,
    pub max_attempts: usize,
    pub judge: &'a dyn ChatTransport,
    pub describer: Option<&'a dyn Describer>,
    /// Prefix for image references; the image path `/img/{website}/{category}/{hex}` is appended.
    pub image_base: String,
}

impl<'a> LlmScorer<'a> {
    pub fn new(pipeline: Pipeline, template: Template, judge: &'a dyn ChatTransport) -> Self {
        LlmScorer { pipeline, template, max_attempts: 3, judge, describer: None, image_base: String::new() }
    }

    pub fn with_describer(mut self, describer: &'a dyn Describer) -> Self {
        self.describer = Some(describer);
        self
    }

    pub fn image_reference(&self, image: &ImageRecord) -> String {
        format!(
            "{}/img/{}/{}/{}",
            self.image_base.trim_end_matches('/'),
            image.website,
            image.category,
            image.image_id.to_hex()
        )
    }

    /// Builds the judge request for a pair, running the describer when needed.
    pub fn build_request(&self, pair: &PairContext) -> Result<ChatRequest, ScorerError> {
        match self.pipeline {
            Pipeline::Direct => {
                let prompt = render_prompt(self.template, pair, PromptMode::DirectImages)?;
                Ok(ChatRequest {
                    parts: vec![
                        ContentPart::Text(prompt),
                        ContentPart::Image { reference: self.image_reference(&pair.image_a) },
                        ContentPart::Image { reference: self.image_reference(&pair.image_b) },
                    ],
                })
            }
            Pipeline::TwoStep => {
                let described = match (&pair.description_a, &pair.description_b) {
                    (Some(_), Some(_)) => pair.clone(),
                    _ => {
                        let describer = self.describer.ok_or_else(|| {
                            ScorerError::Transport(TransportError::Config("two-step pipeline needs a describer".into()))
                        })?;
                        let a = describer.describe(&pair.image_a, &self.image_reference(&pair.image_a))?;
                        let b = describer.describe(&pair.image_b, &self.image_reference(&pair.image_b))?;
                        pair.clone().with_descriptions(a, b)
                    }
                };
                let prompt = render_prompt(self.template, &described, PromptMode::Descriptions)?;
                Ok(ChatRequest { parts: vec![ContentPart::Text(prompt)] })
            }
        }
    }

    pub fn score_llm(&self, pair: &PairContext) -> Result<LlmRating, ScorerError> {
        let request = self.build_request(pair)?;
        let attempts = self.max_attempts.max(1);
        let mut raw_responses = Vec::new();
        let mut last_error = RatingParseError::MissingTag;
        for attempt in 1..=attempts {
            let response = self.judge.complete(&request)?;
            raw_responses.push(response.clone());
            match parse_rating(&response) {
                Ok(rating) => return Ok(LlmRating { rating, attempts: attempt, raw_responses }),
                Err(e) => {
                    log::debug!("attempt {attempt}/{attempts} unparseable: {}", e.token());
                    last_error = e;
                }
            }
        }
        Err(ScorerError::RetriesExhausted { attempts, last: last_error })
    }
}

impl Scorer for LlmScorer<'_> {
    fn score(&self, pair: &PairContext) -> Result<Rating, ScorerError> {
        self.score_llm(pair).map(|r| r.rating)
    }
}

/// OpenAI-compatible `chat/completions` adapter.
///
/// Configured from `SEMCACHE_LLM_URL`, `SEMCACHE_LLM_API_KEY` (optional) and
/// `SEMCACHE_LLM_MODEL`.
#[derive(Debug, Clone)]
pub struct HttpChatTransport {
    url: String,
    api_key: Option<String>,
    model: String,
    client: reqwest::blocking::Client,
}

impl HttpChatTransport {
    pub fn new(url: impl Into<String>, api_key: Option<String>, model: impl Into<String>) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .expect("http client");
        HttpChatTransport { url: url.into(), api_key, model: model.into(), client }
    }

    /// Reads `{prefix}_URL`, `{prefix}_API_KEY` and `{prefix}_MODEL`.
    pub fn from_env(prefix: &str) -> Result<Self, TransportError> {
        let var = |name: &str| std::env::var(format!("{prefix}_{name}")).ok().filter(|v| !v.is_empty());
        let url = var("URL").ok_or_else(|| TransportError::Config(format!("{prefix}_URL")))?;
        let model = var("MODEL").ok_or_else(|| TransportError::Config(format!("{prefix}_MODEL")))?;
        Ok(Self::new(url, var("API_KEY"), model))
    }

    fn body(&self, request: &ChatRequest) -> serde_json::Value {
        let content: Vec<serde_json::Value> = request
            .parts
            .iter()
            .map(|p| match p {
                ContentPart::Text(t) => json!({ "type": "text", "text": t }),
                ContentPart::Image { reference } => json!({ "type": "image_url", "image_url": { "url": reference } }),
            })
            .collect();
        json!({ "model": self.model, "messages": [{ "role": "user", "content": content }] })
    }
}

impl ChatTransport for HttpChatTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut builder = self.client.post(&self.url).json(&self.body(request));
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let resp = builder.send().map_err(|e| TransportError::Unreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| TransportError::Unreachable(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(TransportError::Status { status, body: text });
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| TransportError::BadResponse(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| TransportError::BadResponse("choices[0].message.content missing".into()))
    }
}
