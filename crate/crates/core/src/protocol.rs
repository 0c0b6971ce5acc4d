//! Wire format of the semantic cache exchange.
//!
//! Request: `GET /img/{website}/{category}/{hex id}` with
//! `X-Sem-Cache-Ids: 0001,00ff` (omitted when the client holds nothing in the
//! scope) and `X-Sem-Cache-Threshold: 1..4`.
//!
//! Response: `200` with the image body, `204` with
//! `Reuse-Similar: <hex id>; score=<n>`, `404`, or `400` with an
//! `X-Sem-Cache-Error` reason token.
//!
//! Overhead accounting is decoupled from the textual encoding: every cached id
//! costs [`ID_OVERHEAD_BYTES`] regardless of how many bytes the header takes.

use std::collections::BTreeMap;
use std::fmt;

use percent_encoding::{percent_decode_str, utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use thiserror::Error;

use crate::dataset::has_duplicates;
use crate::types::{ImageId, Score, ScopeKey, Threshold};

pub const HEADER_CACHE_IDS: &str = "X-Sem-Cache-Ids";
pub const HEADER_THRESHOLD: &str = "X-Sem-Cache-Threshold";
pub const HEADER_REUSE_SIMILAR: &str = "Reuse-Similar";
pub const HEADER_ERROR: &str = "X-Sem-Cache-Error";

/// Bytes charged per cached id appended to a request.
pub const ID_OVERHEAD_BYTES: u64 = 2;

/// Header map with canonical names; lookups are case-insensitive.
pub type HeaderMap = BTreeMap<String, String>;

const SEGMENT: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'_').remove(b'.').remove(b'~');

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticRequest {
    pub scope: ScopeKey,
    pub requested_id: ImageId,
    pub cached_ids: Vec<ImageId>,
    pub threshold: Threshold,
}

impl SemanticRequest {
    /// Builds a request, enforcing the id-list invariants.
    pub fn new(
        scope: ScopeKey,
        requested_id: ImageId,
        cached_ids: Vec<ImageId>,
        threshold: Threshold,
    ) -> Result<Self, ProtocolError> {
        if has_duplicates(&cached_ids) {
            return Err(ProtocolError::DuplicateId);
        }
        if cached_ids.contains(&requested_id) {
            return Err(ProtocolError::RequestedInCache);
        }
        Ok(SemanticRequest { scope, requested_id, cached_ids, threshold })
    }

    pub fn path(&self) -> String {
        format!(
            "/img/{}/{}/{}",
            utf8_percent_encode(&self.scope.website, SEGMENT),
            utf8_percent_encode(&self.scope.category, SEGMENT),
            self.requested_id.to_hex()
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SemanticResponse {
    /// Display the named cached image instead of downloading.
    ReuseSimilar { id: ImageId, score: Score },
    FullImage { byte_size: u64, payload: Option<Vec<u8>> },
    NotFound,
}

/// Protocol violations; each maps to a `400` with its reason token.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("request path is not /img/{{website}}/{{category}}/{{hex id}}")]
    MalformedPath,
    #[error("image id is not four hex digits")]
    MalformedId,
    #[error("cached id list contains a duplicate")]
    DuplicateId,
    #[error("threshold header missing")]
    MissingThreshold,
    #[error("threshold is not an integer")]
    MalformedThreshold,
    #[error("threshold outside 1..=4")]
    ThresholdRange,
    #[error("requested id also listed as cached")]
    RequestedInCache,
    #[error("malformed Reuse-Similar directive")]
    MalformedDirective,
    #[error("unexpected response status {0}")]
    UnexpectedStatus(u16),
}

impl ProtocolError {
    pub fn token(&self) -> &'static str {
        match self {
            ProtocolError::MalformedPath => "MALFORMED_PATH",
            ProtocolError::MalformedId => "MALFORMED_ID",
            ProtocolError::DuplicateId => "DUPLICATE_ID",
            ProtocolError::MissingThreshold => "MISSING_THRESHOLD",
            ProtocolError::MalformedThreshold => "MALFORMED_THRESHOLD",
            ProtocolError::ThresholdRange => "THRESHOLD_RANGE",
            ProtocolError::RequestedInCache => "REQUESTED_IN_CACHE",
            ProtocolError::MalformedDirective => "MALFORMED_DIRECTIVE",
            ProtocolError::UnexpectedStatus(_) => "UNEXPECTED_STATUS",
        }
    }
}

impl fmt::Display for SemanticRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} t={} cached={}", self.path(), self.threshold, self.cached_ids.len())
    }
}

fn header<'a>(headers: &'a HeaderMap, name: &str) -> Option<&'a str> {
    headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(name))
        .map(|(_, v)| v.as_str())
}

pub fn encode_request(req: &SemanticRequest) -> HeaderMap {
    let mut headers = HeaderMap::new();
    if !req.cached_ids.is_empty() {
        let ids: Vec<String> = req.cached_ids.iter().map(|id| id.to_hex()).collect();
        headers.insert(HEADER_CACHE_IDS.to_string(), ids.join(","));
    }
    headers.insert(HEADER_THRESHOLD.to_string(), req.threshold.to_string());
    headers
}

pub fn decode_request(headers: &HeaderMap, path: &str) -> Result<SemanticRequest, ProtocolError> {
    let rest = path.strip_prefix("/img/").ok_or(ProtocolError::MalformedPath)?;
    let segments: Vec<&str> = rest.split('/').collect();
    let [website, category, id] = segments[..] else {
        return Err(ProtocolError::MalformedPath);
    };
    let decode = |s: &str| {
        percent_decode_str(s)
            .decode_utf8()
            .map(|c| c.into_owned())
            .map_err(|_| ProtocolError::MalformedPath)
    };
    let (website, category) = (decode(website)?, decode(category)?);
    if website.is_empty() || category.is_empty() {
        return Err(ProtocolError::MalformedPath);
    }
    let requested_id = ImageId::from_hex(id).ok_or(ProtocolError::MalformedId)?;

    let cached_ids = match header(headers, HEADER_CACHE_IDS).map(str::trim) {
        None | Some("") => Vec::new(),
        Some(list) => list
            .split(',')
            .map(|s| ImageId::from_hex(s.trim()).ok_or(ProtocolError::MalformedId))
            .collect::<Result<Vec<_>, _>>()?,
    };

    let raw = header(headers, HEADER_THRESHOLD).ok_or(ProtocolError::MissingThreshold)?;
    let value: i64 = raw.trim().parse().map_err(|_| ProtocolError::MalformedThreshold)?;
    let threshold = u8::try_from(value)
        .ok()
        .and_then(Threshold::new)
        .ok_or(ProtocolError::ThresholdRange)?;

    SemanticRequest::new(ScopeKey::new(website, category), requested_id, cached_ids, threshold)
}

/// Overhead charged for a request under the 2-bytes-per-id accounting model.
pub fn request_overhead_bytes(req: &SemanticRequest) -> u64 {
    ID_OVERHEAD_BYTES * req.cached_ids.len() as u64
}

/// Status, headers and body of an encoded response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireResponse {
    pub status: u16,
    pub headers: HeaderMap,
    pub body: Vec<u8>,
}

pub fn encode_response(resp: &SemanticResponse) -> WireResponse {
    let mut headers = HeaderMap::new();
    match resp {
        SemanticResponse::ReuseSimilar { id, score } => {
            headers.insert(HEADER_REUSE_SIMILAR.to_string(), format!("{}; score={}", id.to_hex(), score));
            WireResponse { status: 204, headers, body: Vec::new() }
        }
        SemanticResponse::FullImage { byte_size, payload } => {
            let body = payload.clone().unwrap_or_else(|| vec![0u8; *byte_size as usize]);
            headers.insert("Content-Type".to_string(), "application/octet-stream".to_string());
            WireResponse { status: 200, headers, body }
        }
        SemanticResponse::NotFound => WireResponse { status: 404, headers, body: Vec::new() },
    }
}

pub fn encode_error(err: &ProtocolError) -> WireResponse {
    let mut headers = HeaderMap::new();
    headers.insert(HEADER_ERROR.to_string(), err.token().to_string());
    WireResponse { status: 400, headers, body: err.to_string().into_bytes() }
}

/// Inverse of [`encode_response`]. A `200` body becomes the payload and its
/// length the byte size.
pub fn decode_response(status: u16, headers: &HeaderMap, body: Vec<u8>) -> Result<SemanticResponse, ProtocolError> {
    match status {
        200 => Ok(SemanticResponse::FullImage { byte_size: body.len() as u64, payload: Some(body) }),
        204 => {
            let raw = header(headers, HEADER_REUSE_SIMILAR).ok_or(ProtocolError::MalformedDirective)?;
            parse_reuse_similar(raw)
        }
        404 => Ok(SemanticResponse::NotFound),
        other => Err(ProtocolError::UnexpectedStatus(other)),
    }
}

fn parse_reuse_similar(raw: &str) -> Result<SemanticResponse, ProtocolError> {
    let (id, params) = raw.split_once(';').ok_or(ProtocolError::MalformedDirective)?;
    let id = ImageId::from_hex(id.trim()).ok_or(ProtocolError::MalformedDirective)?;
    let score = params
        .trim()
        .strip_prefix("score=")
        .and_then(|s| s.trim().parse::<u8>().ok())
        .and_then(Score::new)
        .ok_or(ProtocolError::MalformedDirective)?;
    Ok(SemanticResponse::ReuseSimilar { id, score })
}
