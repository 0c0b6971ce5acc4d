use std::fmt;

use serde::{Deserialize, Serialize};

/// Category-scoped 16-bit image identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageId(pub u16);

impl ImageId {
    /// Four lowercase hex digits, zero padded.
    pub fn to_hex(self) -> String {
        format!("{:04x}", self.0)
    }

    /// Accepts exactly four hex digits (either case).
    pub fn from_hex(text: &str) -> Option<Self> {
        if text.len() != 4 || !text.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        u16::from_str_radix(text, 16).ok().map(ImageId)
    }
}

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Ordinal replaceability score, 0 (not replaceable) to 4 (completely replaceable).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Score(u8);

impl Score {
    pub const MAX: u8 = 4;
    pub const ZERO: Score = Score(0);
    pub const COMPLETE: Score = Score(4);

    pub fn new(value: u8) -> Option<Self> {
        (value <= Self::MAX).then_some(Score(value))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn meets(self, threshold: Threshold) -> bool {
        self.0 >= threshold.get()
    }

    pub fn label(self) -> &'static str {
        match self.0 {
            0 => "Not replaceable",
            1 => "Somewhat replaceable",
            2 => "Moderately replaceable",
            3 => "Very replaceable",
            _ => "Completely replaceable",
        }
    }
}

impl TryFrom<u8> for Score {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Score::new(value).ok_or_else(|| format!("score {value} outside 0..=4"))
    }
}

impl From<Score> for u8 {
    fn from(s: Score) -> u8 {
        s.0
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Minimum score a cached image needs before the origin authorizes reuse (1..=4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Threshold(u8);

impl Threshold {
    pub const ALL: [Threshold; 4] = [Threshold(1), Threshold(2), Threshold(3), Threshold(4)];

    pub fn new(value: u8) -> Option<Self> {
        (1..=4).contains(&value).then_some(Threshold(value))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Threshold {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Threshold::new(value).ok_or_else(|| format!("threshold {value} outside 1..=4"))
    }
}

impl From<Threshold> for u8 {
    fn from(t: Threshold) -> u8 {
        t.0
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// (website, category) pair; image ids are unique only inside one scope.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScopeKey {
    pub website: String,
    pub category: String,
}

impl ScopeKey {
    pub fn new(website: impl Into<String>, category: impl Into<String>) -> Self {
        ScopeKey { website: website.into(), category: category.into() }
    }
}

impl fmt::Display for ScopeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.website, self.category)
    }
}

/// One article image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub website: String,
    pub category: String,
    pub article_id: String,
    pub image_id: ImageId,
    pub byte_size: u64,
    pub alt_text: Option<String>,
    pub heading: String,
}

impl ImageRecord {
    pub fn scope(&self) -> ScopeKey {
        ScopeKey::new(self.website.clone(), self.category.clone())
    }

    /// Heading followed by the alt text, when present.
    pub fn context_text(&self) -> String {
        match &self.alt_text {
            Some(alt) if !alt.is_empty() => format!("{} {}", self.heading, alt),
            _ => self.heading.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_ids_are_four_lowercase_digits() {
        assert_eq!(ImageId(1).to_hex(), "0001");
        assert_eq!(ImageId(0xff).to_hex(), "00ff");
        assert_eq!(ImageId(0xABCD).to_hex(), "abcd");
        assert_eq!(ImageId::from_hex("00FF"), Some(ImageId(255)));
        assert_eq!(ImageId::from_hex("fff"), None);
        assert_eq!(ImageId::from_hex("+fff"), None);
        assert_eq!(ImageId::from_hex("0x01"), None);
    }

    #[test]
    fn score_and_threshold_ranges() {
        assert!(Score::new(4).is_some());
        assert!(Score::new(5).is_none());
        assert!(Threshold::new(0).is_none());
        assert!(Threshold::new(5).is_none());
        assert!(Score::new(3).unwrap().meets(Threshold::new(3).unwrap()));
        assert!(!Score::new(2).unwrap().meets(Threshold::new(3).unwrap()));
    }
}
