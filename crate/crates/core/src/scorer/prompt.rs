use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{PairContext, Rating, ScorerError};
use crate::types::Score;

const BASE: &str = include_str!("../../templates/base.txt");
const METRIC_DRIVEN: &str = include_str!("../../templates/metric_driven.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    /// Rating scale only.
    Base,
    /// Rating scale plus the four evaluation factors.
    MetricDriven,
}

impl Template {
    pub fn text(self) -> &'static str {
        match self {
            Template::Base => BASE,
            Template::MetricDriven => METRIC_DRIVEN,
        }
    }

    /// Substitutes the four `{{ slot }}` placeholders in one pass, so slot
    /// values are copied verbatim even if they contain placeholder syntax.
    pub fn instantiate(self, slots: &PromptSlots) -> String {
        let text = self.text();
        let mut out = String::with_capacity(text.len() + 256);
        let mut rest = text;
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let Some(end) = after.find("}}") else {
                out.push_str(&rest[start..]);
                rest = "";
                break;
            };
            match slots.get(after[..end].trim()) {
                Some(value) => out.push_str(value),
                None => out.push_str(&rest[start..start + 2 + end + 2]),
            }
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        out
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Template::Base => "base",
            Template::MetricDriven => "metric-driven",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptSlots {
    pub image_a: String,
    pub image_a_context: String,
    pub image_b: String,
    pub image_b_context: String,
}

impl PromptSlots {
    fn get(&self, name: &str) -> Option<&str> {
        match name {
            "image_a" => Some(&self.image_a),
            "image_a_context" => Some(&self.image_a_context),
            "image_b" => Some(&self.image_b),
            "image_b_context" => Some(&self.image_b_context),
            _ => None,
        }
    }
}

/// What fills the image slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptMode {
    /// Images travel as attachments; the slots name them.
    DirectImages,
    /// Text descriptions stand in for the images.
    Descriptions,
}

pub const IMAGE_A_MARKER: &str = "[Image A is attached]";
pub const IMAGE_B_MARKER: &str = "[Image B is attached]";

fn context_line(heading: &str, alt: Option<&str>) -> String {
    let alt = alt.filter(|a| !a.is_empty()).unwrap_or("not available");
    format!("Article heading: {heading}; Alt text: {alt}")
}

pub fn render_prompt(template: Template, pair: &PairContext, mode: PromptMode) -> Result<String, ScorerError> {
    let (image_a, image_b) = match mode {
        PromptMode::DirectImages => (IMAGE_A_MARKER.to_string(), IMAGE_B_MARKER.to_string()),
        PromptMode::Descriptions => match (&pair.description_a, &pair.description_b) {
            (Some(a), Some(b)) => (a.clone(), b.clone()),
            _ => return Err(ScorerError::MissingDescriptions),
        },
    };
    let slots = PromptSlots {
        image_a,
        image_a_context: context_line(&pair.image_a.heading, pair.image_a.alt_text.as_deref()),
        image_b,
        image_b_context: context_line(&pair.image_b.heading, pair.image_b.alt_text.as_deref()),
    };
    Ok(template.instantiate(&slots))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RatingParseError {
    #[error("MISSING_TAG: no <rating>...</rating> block")]
    MissingTag,
    #[error("NON_INTEGER: rating block holds {0:?}")]
    NonInteger(String),
    #[error("OUT_OF_RANGE: rating {0} outside 0..=4")]
    OutOfRange(i64),
}

impl RatingParseError {
    pub fn token(&self) -> &'static str {
        match self {
            RatingParseError::MissingTag => "MISSING_TAG",
            RatingParseError::NonInteger(_) => "NON_INTEGER",
            RatingParseError::OutOfRange(_) => "OUT_OF_RANGE",
        }
    }
}

fn tag_body<'a>(text: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = text.find(&open)? + open.len();
    let len = text[start..].find(&close)?;
    Some(&text[start..start + len])
}

/// Extracts the first number inside `<rating>` and the `<justification>` body.
pub fn parse_rating(response: &str) -> Result<Rating, RatingParseError> {
    let body = tag_body(response, "rating").ok_or(RatingParseError::MissingTag)?;
    let non_integer = || RatingParseError::NonInteger(body.trim().to_string());

    let start = body.find(|c: char| c.is_ascii_digit() || c == '-').ok_or_else(non_integer)?;
    let tail = &body[start..];
    let digits_from = usize::from(tail.starts_with('-'));
    let digits_len = tail[digits_from..].find(|c: char| !c.is_ascii_digit()).unwrap_or(tail.len() - digits_from);
    if digits_len == 0 {
        return Err(non_integer());
    }
    let end = digits_from + digits_len;
    if tail[end..].starts_with('.') && tail[end + 1..].starts_with(|c: char| c.is_ascii_digit()) {
        return Err(non_integer());
    }
    let value: i64 = tail[..end].parse().map_err(|_| non_integer())?;
    let score = u8::try_from(value)
        .ok()
        .and_then(Score::new)
        .ok_or(RatingParseError::OutOfRange(value))?;

    let justification = tag_body(response, "justification").map(str::trim).unwrap_or_default();
    Ok(Rating { score, justification: justification.to_string(), raw_response: response.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::tests::image;

    #[test]
    fn parses_well_formed() {
        let r = parse_rating("<rating>\n3\n</rating><justification>ok</justification>").unwrap();
        assert_eq!((r.score.get(), r.justification.as_str()), (3, "ok"));
        let r = parse_rating("Let me think...\nStep 1: topics match.\n<rating> [2] </rating>").unwrap();
        assert_eq!(r.score.get(), 2);
        assert_eq!(r.justification, "");
    }

    #[test]
    fn parse_errors_are_distinct() {
        assert_eq!(parse_rating("<rating>5</rating>").unwrap_err().token(), "OUT_OF_RANGE");
        assert_eq!(parse_rating("<rating>-1</rating>").unwrap_err().token(), "OUT_OF_RANGE");
        assert_eq!(parse_rating("rating: 3").unwrap_err().token(), "MISSING_TAG");
        assert_eq!(parse_rating("<rating>3").unwrap_err().token(), "MISSING_TAG");
        assert_eq!(parse_rating("<rating>high</rating>").unwrap_err().token(), "NON_INTEGER");
        assert_eq!(parse_rating("<rating>2.5</rating>").unwrap_err().token(), "NON_INTEGER");
        assert_eq!(parse_rating("<rating>-</rating>").unwrap_err().token(), "NON_INTEGER");
    }

    #[test]
    fn metric_driven_lists_factors() {
        let text = Template::MetricDriven.text();
        for line in [
            "1. Similarity of topics",
            "2. Specificity of information conveyed (e.g., specific people, places, etc.)",
            "3. Emotional tone or impact",
            "4. Potential for misinterpretation if swapped",
        ] {
            assert!(text.contains(line), "{line}");
        }
        assert!(!Template::Base.text().contains("Similarity of topics"));
    }

    #[test]
    fn render_places_headings_once() {
        let pair = PairContext::new(
            image(1, "x", "Debate night in Philadelphia", Some("Two candidates on stage")),
            image(2, "y", "Rally in Ohio", None),
        )
        .unwrap();
        for t in [Template::Base, Template::MetricDriven] {
            let p = render_prompt(t, &pair, PromptMode::DirectImages).unwrap();
            assert_eq!(p.matches("Debate night in Philadelphia").count(), 1);
            assert_eq!(p.matches("Rally in Ohio").count(), 1);
            assert!(p.contains("Alt text: not available"));
            assert!(p.contains(IMAGE_A_MARKER) && !p.contains("{{"));
        }
        assert!(matches!(
            render_prompt(Template::Base, &pair, PromptMode::Descriptions),
            Err(ScorerError::MissingDescriptions)
        ));
        let described = pair.with_descriptions("a crowd", "a podium");
        let p = render_prompt(Template::Base, &described, PromptMode::Descriptions).unwrap();
        assert!(p.contains("    a crowd\n</image_a>") && p.contains("    a podium\n</image_b>"));
    }

    #[test]
    fn slot_values_are_not_re_expanded() {
        let slots = PromptSlots { image_a: "{{ image_b }}".into(), image_b: "B".into(), ..Default::default() };
        let p = Template::Base.instantiate(&slots);
        assert!(p.contains("    {{ image_b }}\n</image_a>"));
        assert!(p.contains("    B\n</image_b>"));
    }
}
