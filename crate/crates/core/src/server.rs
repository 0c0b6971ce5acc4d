//! Origin side: answers semantic requests from the replaceability matrices.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{HeaderMap as HttpHeaders, HeaderName, HeaderValue, Method, StatusCode, Uri};
use axum::response::Response;
use axum::Router;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{load_dataset, Dataset, DatasetError};
use crate::protocol::{
    decode_request, decode_response, encode_error, encode_request, encode_response, request_overhead_bytes,
    HeaderMap, ProtocolError, SemanticRequest, SemanticResponse, WireResponse, HEADER_ERROR,
};
use crate::types::{ImageId, ScopeKey};

#[derive(Debug, Error)]
pub enum ResolveError {
    #[error("unknown category {0}")]
    UnknownScope(ScopeKey),
}

impl ResolveError {
    pub fn token(&self) -> &'static str {
        "UNKNOWN_CATEGORY"
    }
}

/// Errors seen by a client talking to an origin.
#[derive(Debug, Error)]
pub enum OriginError {
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error("origin rejected request: {0}")]
    Rejected(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("transport: {0}")]
    Transport(String),
}

/// Anything that can answer a [`SemanticRequest`].
pub trait Origin {
    fn fetch(&self, req: &SemanticRequest) -> Result<SemanticResponse, OriginError>;
}

/// Server configuration file (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerConfig {
    pub dataset: PathBuf,
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default)]
    pub blob_root: Option<PathBuf>,
    #[serde(default)]
    pub log_path: Option<PathBuf>,
}

fn default_bind() -> String {
    "127.0.0.1:8080".to_string()
}

/// Immutable after construction; shared across handlers without locking.
#[derive(Debug, Clone)]
pub struct ServerState {
    dataset: Arc<Dataset>,
    blob_root: Option<PathBuf>,
}

impl ServerState {
    pub fn new(dataset: Dataset) -> Self {
        ServerState { dataset: Arc::new(dataset), blob_root: None }
    }

    pub fn from_shared(dataset: Arc<Dataset>) -> Self {
        ServerState { dataset, blob_root: None }
    }

    pub fn with_blob_root(mut self, root: impl Into<PathBuf>) -> Self {
        self.blob_root = Some(root.into());
        self
    }

    pub fn from_config(config: &ServerConfig) -> Result<Self, DatasetError> {
        let state = ServerState::new(load_dataset(&config.dataset)?);
        Ok(match &config.blob_root {
            Some(root) => state.with_blob_root(root),
            None => state,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    /// See [`resolve_in`].
    pub fn resolve(&self, req: &SemanticRequest) -> Result<SemanticResponse, ResolveError> {
        resolve_in(&self.dataset, req)
    }

    fn blob_path(&self, scope: &ScopeKey, id: ImageId) -> Option<PathBuf> {
        self.blob_root.as_deref().map(|root| blob_file(root, scope, id))
    }

    /// Full wire handling of one request: decode, resolve, attach payload, encode.
    pub fn handle(&self, headers: &HeaderMap, path: &str) -> WireResponse {
        let req = match decode_request(headers, path) {
            Ok(req) => req,
            Err(err) => {
                log::warn!(target: "semcache::access", "path={path} decision=error reason={}", err.token());
                return encode_error(&err);
            }
        };
        let overhead = request_overhead_bytes(&req);
        match self.resolve(&req) {
            Ok(resp) => {
                let resp = self.attach_payload(&req, resp);
                let wire = encode_response(&resp);
                let decision = match &resp {
                    SemanticResponse::ReuseSimilar { .. } => "reuse_similar",
                    SemanticResponse::FullImage { .. } => "full",
                    SemanticResponse::NotFound => "not_found",
                };
                log::info!(
                    target: "semcache::access",
                    "path={path} decision={decision} status={} bytes={} overhead={overhead} threshold={} cached={}",
                    wire.status,
                    wire.body.len(),
                    req.threshold,
                    req.cached_ids.len()
                );
                wire
            }
            Err(err) => {
                log::info!(target: "semcache::access", "path={path} decision=not_found reason={}", err.token());
                let mut headers = HeaderMap::new();
                headers.insert(HEADER_ERROR.to_string(), err.token().to_string());
                WireResponse { status: 404, headers, body: Vec::new() }
            }
        }
    }

    fn attach_payload(&self, req: &SemanticRequest, resp: SemanticResponse) -> SemanticResponse {
        match resp {
            SemanticResponse::FullImage { byte_size, payload: None } => {
                let payload = self
                    .blob_path(&req.scope, req.requested_id)
                    .and_then(|p| std::fs::read(p).ok());
                let byte_size = payload.as_ref().map_or(byte_size, |p| p.len() as u64);
                SemanticResponse::FullImage { byte_size, payload }
            }
            other => other,
        }
    }
}

/// Picks the best cached substitute for the requested image.
///
/// Cached ids unknown to the matrix are skipped. Among the highest-scoring
/// candidates the lowest image id wins, so the answer does not depend on the
/// order of `cached_ids`.
pub fn resolve_in(dataset: &Dataset, req: &SemanticRequest) -> Result<SemanticResponse, ResolveError> {
    let matrix = dataset
        .matrix(&req.scope)
        .ok_or_else(|| ResolveError::UnknownScope(req.scope.clone()))?;
    let Some(row) = matrix.index_of(req.requested_id) else {
        return Ok(SemanticResponse::NotFound);
    };

    let best = req
        .cached_ids
        .iter()
        .filter(|&&id| id != req.requested_id)
        .filter_map(|&id| matrix.index_of(id).map(|col| (id, matrix.score_at(row, col))))
        .max_by(|(id_a, s_a), (id_b, s_b)| s_a.cmp(s_b).then_with(|| id_b.cmp(id_a)));

    Ok(match best {
        Some((id, score)) if score.meets(req.threshold) => SemanticResponse::ReuseSimilar { id, score },
        _ => {
            let image = dataset.image(&req.scope, req.requested_id).expect("validated dataset");
            SemanticResponse::FullImage { byte_size: image.byte_size, payload: None }
        }
    })
}

impl Origin for ServerState {
    fn fetch(&self, req: &SemanticRequest) -> Result<SemanticResponse, OriginError> {
        Ok(self.resolve(req)?)
    }
}

/// Builds the HTTP router over a shared state.
pub fn router(state: Arc<ServerState>) -> Router {
    Router::new().fallback(move |method: Method, uri: Uri, headers: HttpHeaders| {
        let state = Arc::clone(&state);
        async move {
            if method != Method::GET {
                return status_only(StatusCode::METHOD_NOT_ALLOWED);
            }
            let headers = to_header_map(&headers);
            let wire = state.handle(&headers, uri.path());
            into_http(wire)
        }
    })
}

/// Binds `addr` and serves until the task is dropped.
pub async fn serve(state: Arc<ServerState>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    serve_on(state, listener).await
}

pub async fn serve_on(state: Arc<ServerState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    let local: SocketAddr = listener.local_addr()?;
    log::info!("serving semantic cache origin on http://{local}");
    axum::serve(listener, router(state)).await
}

fn to_header_map(headers: &HttpHeaders) -> HeaderMap {
    headers
        .iter()
        .filter_map(|(k, v)| v.to_str().ok().map(|v| (k.as_str().to_string(), v.to_string())))
        .collect()
}

fn status_only(status: StatusCode) -> Response {
    let mut resp = Response::new(Body::empty());
    *resp.status_mut() = status;
    resp
}

fn into_http(wire: WireResponse) -> Response {
    let mut resp = Response::new(Body::from(wire.body));
    *resp.status_mut() = StatusCode::from_u16(wire.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    for (k, v) in wire.headers {
        if let (Ok(name), Ok(value)) = (HeaderName::try_from(k), HeaderValue::try_from(v)) {
            resp.headers_mut().insert(name, value);
        }
    }
    resp
}

/// Client-side [`Origin`] speaking the wire protocol over HTTP.
#[derive(Debug, Clone)]
pub struct HttpOrigin {
    base_url: String,
    client: reqwest::blocking::Client,
}

impl HttpOrigin {
    pub fn new(base_url: impl Into<String>) -> Self {
        HttpOrigin {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl Origin for HttpOrigin {
    fn fetch(&self, req: &SemanticRequest) -> Result<SemanticResponse, OriginError> {
        let mut builder = self.client.get(format!("{}{}", self.base_url, req.path()));
        for (k, v) in encode_request(req) {
            builder = builder.header(k, v);
        }
        let resp = builder.send().map_err(|e| OriginError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let headers: HeaderMap = resp
            .headers()
            .iter()
            .filter_map(|(k, v)| v.to_str().ok().map(|v| (k.as_str().to_string(), v.to_string())))
            .collect();
        if status == 400 || (status == 404 && headers.keys().any(|k| k.eq_ignore_ascii_case(HEADER_ERROR))) {
            let token = headers
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(HEADER_ERROR))
                .map(|(_, v)| v.clone())
                .unwrap_or_default();
            return Err(OriginError::Rejected(token));
        }
        let body = resp.bytes().map_err(|e| OriginError::Transport(e.to_string()))?.to_vec();
        Ok(decode_response(status, &headers, body)?)
    }
}

/// Blob location for an image: `{root}/{website}/{category}/{hex id}.bin`.
pub fn blob_file(root: &Path, scope: &ScopeKey, id: ImageId) -> PathBuf {
    root.join(&scope.website).join(&scope.category).join(format!("{}.bin", id.to_hex()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ReplaceabilityMatrix;
    use crate::types::{ImageRecord, Score, Threshold};

    /// Image 1 is requested; 2, 3, 4 are candidates in other articles.
    fn state(scores_to_1: [i64; 3]) -> ServerState {
        let scope = ScopeKey::new("w", "c");
        let ids: Vec<ImageId> = (1..=4).map(ImageId).collect();
        let articles: Vec<String> = (1..=4).map(|i| format!("a{i}")).collect();
        let mut scores = vec![0i64; 16];
        for (k, s) in scores_to_1.iter().enumerate() {
            scores[k + 1] = *s;
            scores[(k + 1) * 4] = *s;
        }
        let m = ReplaceabilityMatrix::new(scope, ids.clone(), articles.clone(), scores).unwrap();
        let images = ids
            .iter()
            .zip(&articles)
            .map(|(&id, a)| ImageRecord {
                website: "w".into(),
                category: "c".into(),
                article_id: a.clone(),
                image_id: id,
                byte_size: 100 * id.0 as u64,
                alt_text: None,
                heading: String::new(),
            })
            .collect();
        ServerState::new(Dataset::new(images, [m]).unwrap())
    }

    fn req(cached: &[u16], t: u8) -> SemanticRequest {
        SemanticRequest::new(
            ScopeKey::new("w", "c"),
            ImageId(1),
            cached.iter().copied().map(ImageId).collect(),
            Threshold::new(t).unwrap(),
        )
        .unwrap()
    }

    fn reuse(id: u16, score: u8) -> SemanticResponse {
        SemanticResponse::ReuseSimilar { id: ImageId(id), score: Score::new(score).unwrap() }
    }

    #[test]
    fn picks_argmax_above_threshold() {
        let s = state([2, 3, 0]);
        assert_eq!(s.resolve(&req(&[2, 3], 3)).unwrap(), reuse(3, 3));
    }

    #[test]
    fn below_threshold_downloads() {
        let s = state([2, 2, 0]);
        assert_eq!(
            s.resolve(&req(&[2, 3], 3)).unwrap(),
            SemanticResponse::FullImage { byte_size: 100, payload: None }
        );
        assert!(matches!(s.resolve(&req(&[], 1)).unwrap(), SemanticResponse::FullImage { .. }));
    }

    #[test]
    fn ties_break_to_lowest_id() {
        let s = state([0, 4, 4]);
        assert_eq!(s.resolve(&req(&[4, 3], 1)).unwrap(), reuse(3, 4));
        assert_eq!(s.resolve(&req(&[3, 4], 1)).unwrap(), reuse(3, 4));
    }

    #[test]
    fn unknown_ids_are_skipped_and_unknown_scope_errors() {
        let s = state([0, 4, 0]);
        assert_eq!(s.resolve(&req(&[3, 999], 2)).unwrap(), reuse(3, 4));
        let mut r = req(&[], 1);
        r.requested_id = ImageId(77);
        assert_eq!(s.resolve(&r).unwrap(), SemanticResponse::NotFound);
        r.scope = ScopeKey::new("w", "other");
        assert!(matches!(s.resolve(&r), Err(ResolveError::UnknownScope(_))));
    }

    #[test]
    fn handle_maps_protocol_errors_to_400() {
        let s = state([0, 0, 0]);
        let mut h = HeaderMap::new();
        h.insert("X-Sem-Cache-Threshold".into(), "9".into());
        let wire = s.handle(&h, "/img/w/c/0001");
        assert_eq!(wire.status, 400);
        assert_eq!(wire.headers[HEADER_ERROR], "THRESHOLD_RANGE");
        let wire = s.handle(&encode_request(&req(&[], 1)), "/img/w/zzz/0001");
        assert_eq!(wire.status, 404);
    }

    #[test]
    fn blob_payload_replaces_filler() {
        let dir = tempfile::tempdir().unwrap();
        let scope = ScopeKey::new("w", "c");
        let path = blob_file(dir.path(), &scope, ImageId(1));
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, b"png!").unwrap();
        let s = state([0, 0, 0]).with_blob_root(dir.path());
        let wire = s.handle(&encode_request(&req(&[], 1)), "/img/w/c/0001");
        assert_eq!(wire.status, 200);
        assert_eq!(wire.body, b"png!");
    }
}
