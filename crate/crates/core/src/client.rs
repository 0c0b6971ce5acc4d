//! Client cache with exact and semantic modes, and the pseudo-client simulator.
//!
//! The simulator draws `FW` websites without replacement, then `AC` image
//! requests uniformly with replacement from those websites, and replays the same
//! sequence through a fresh exact cache and a fresh semantic cache.

use std::collections::{BTreeMap, HashMap};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dataset::Dataset;
use crate::protocol::{request_overhead_bytes, ProtocolError, SemanticRequest, SemanticResponse};
use crate::server::{resolve_in, Origin, OriginError};
use crate::types::{ImageId, ImageRecord, ScopeKey, Threshold};

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("{request}: {source}")]
    Origin { request: String, source: OriginError },
    #[error("{request}: origin does not know the image")]
    NotFound { request: String },
    #[error("{request}: origin suggested {suggested}, which is not cached")]
    BogusReuse { request: String, suggested: ImageId },
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config asks for {requested} websites but the dataset has {available}")]
    NotEnoughWebsites { requested: usize, available: usize },
    #[error("FW, AC and trials must all be at least 1")]
    EmptyConfig,
    #[error("selected websites contain no images")]
    NoImages,
    #[error(transparent)]
    Fetch(#[from] FetchError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CachePolicy {
    Unbounded,
    /// Evicts the least recently used entry once the total entry count exceeds the cap.
    LruCapped(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FetchMode {
    Exact,
    Semantic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchSource {
    ExactHit,
    SemanticHit(ImageId),
    Download,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FetchOutcome {
    pub source: FetchSource,
    pub bytes_charged: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheStats {
    pub bytes_downloaded: u64,
    pub overhead_bytes: u64,
    pub exact_hits: u64,
    pub semantic_hits: u64,
    pub misses: u64,
}

impl CacheStats {
    pub fn total_bytes(&self) -> u64 {
        self.bytes_downloaded + self.overhead_bytes
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    byte_size: u64,
    last_used: u64,
}

/// Per-scope image cache. Not meant for concurrent mutation.
#[derive(Debug, Clone)]
pub struct ClientCache {
    entries: HashMap<ScopeKey, BTreeMap<ImageId, Entry>>,
    policy: CachePolicy,
    include_overhead: bool,
    clock: u64,
    len: usize,
    stats: CacheStats,
}

impl ClientCache {
    pub fn new(policy: CachePolicy, include_overhead: bool) -> Self {
        ClientCache {
            entries: HashMap::new(),
            policy,
            include_overhead,
            clock: 0,
            len: 0,
            stats: CacheStats::default(),
        }
    }

    pub fn stats(&self) -> CacheStats {
        self.stats
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, scope: &ScopeKey, id: ImageId) -> bool {
        self.entries.get(scope).is_some_and(|m| m.contains_key(&id))
    }

    /// Cached ids of one scope, ascending.
    pub fn cached_ids(&self, scope: &ScopeKey) -> Vec<ImageId> {
        self.entries.get(scope).map(|m| m.keys().copied().collect()).unwrap_or_default()
    }

    /// Bytes held for one scope.
    pub fn scope_bytes(&self, scope: &ScopeKey) -> u64 {
        self.entries.get(scope).map_or(0, |m| m.values().map(|e| e.byte_size).sum())
    }

    fn touch(&mut self, scope: &ScopeKey, id: ImageId) {
        self.clock += 1;
        if let Some(e) = self.entries.get_mut(scope).and_then(|m| m.get_mut(&id)) {
            e.last_used = self.clock;
        }
    }

    fn insert(&mut self, scope: &ScopeKey, id: ImageId, byte_size: u64) {
        self.clock += 1;
        let entry = Entry { byte_size, last_used: self.clock };
        if self.entries.entry(scope.clone()).or_default().insert(id, entry).is_none() {
            self.len += 1;
        }
        if let CachePolicy::LruCapped(cap) = self.policy {
            while self.len > cap {
                self.evict_lru();
            }
        }
    }

    fn evict_lru(&mut self) {
        let victim = self
            .entries
            .iter()
            .flat_map(|(scope, m)| m.iter().map(move |(id, e)| (e.last_used, scope, *id)))
            .min_by_key(|(t, _, _)| *t)
            .map(|(_, scope, id)| (scope.clone(), id));
        if let Some((scope, id)) = victim {
            let m = self.entries.get_mut(&scope).expect("victim scope");
            m.remove(&id);
            if m.is_empty() {
                self.entries.remove(&scope);
            }
            self.len -= 1;
        }
    }

    /// Requests one image.
    ///
    /// Exact mode only hits on the same id. Semantic mode checks for an exact hit
    /// first, then sends every cached id of the scope to the origin. A reused
    /// substitute is not stored under the requested id.
    pub fn fetch(
        &mut self,
        origin: &dyn Origin,
        image: &ImageRecord,
        threshold: Threshold,
        mode: FetchMode,
    ) -> Result<FetchOutcome, FetchError> {
        let scope = image.scope();
        if self.contains(&scope, image.image_id) {
            self.touch(&scope, image.image_id);
            self.stats.exact_hits += 1;
            return Ok(FetchOutcome { source: FetchSource::ExactHit, bytes_charged: 0 });
        }

        if mode == FetchMode::Exact {
            self.stats.misses += 1;
            self.stats.bytes_downloaded += image.byte_size;
            self.insert(&scope, image.image_id, image.byte_size);
            return Ok(FetchOutcome { source: FetchSource::Download, bytes_charged: image.byte_size });
        }

        let req = SemanticRequest::new(scope.clone(), image.image_id, self.cached_ids(&scope), threshold)?;
        let overhead = if self.include_overhead { request_overhead_bytes(&req) } else { 0 };
        let response = origin
            .fetch(&req)
            .map_err(|source| FetchError::Origin { request: req.to_string(), source })?;
        self.stats.overhead_bytes += overhead;

        match response {
            SemanticResponse::ReuseSimilar { id, .. } => {
                if !self.contains(&scope, id) {
                    return Err(FetchError::BogusReuse { request: req.to_string(), suggested: id });
                }
                self.touch(&scope, id);
                self.stats.semantic_hits += 1;
                Ok(FetchOutcome { source: FetchSource::SemanticHit(id), bytes_charged: overhead })
            }
            SemanticResponse::FullImage { byte_size, .. } => {
                self.stats.misses += 1;
                self.stats.bytes_downloaded += byte_size;
                self.insert(&scope, image.image_id, byte_size);
                Ok(FetchOutcome { source: FetchSource::Download, bytes_charged: overhead + byte_size })
            }
            SemanticResponse::NotFound => Err(FetchError::NotFound { request: req.to_string() }),
        }
    }
}

/// In-process origin over a borrowed dataset.
#[derive(Debug, Clone, Copy)]
pub struct DatasetOrigin<'a>(pub &'a Dataset);

impl Origin for DatasetOrigin<'_> {
    fn fetch(&self, req: &SemanticRequest) -> Result<SemanticResponse, OriginError> {
        Ok(resolve_in(self.0, req)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimConfig {
    /// Frequented websites per pseudo-client.
    pub websites: usize,
    /// Image requests per pseudo-client (articles consumed).
    pub requests: usize,
    pub trials: usize,
    pub threshold: Threshold,
    pub include_overhead: bool,
    pub seed: u64,
    pub policy: CachePolicy,
}

impl SimConfig {
    pub fn new(websites: usize, requests: usize, threshold: Threshold, seed: u64) -> Self {
        SimConfig {
            websites,
            requests,
            trials: 100,
            threshold,
            include_overhead: false,
            seed,
            policy: CachePolicy::Unbounded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub exact_bytes: u64,
    pub semantic_bytes: u64,
    pub overhead_bytes: u64,
    pub semantic_hits: u64,
}

impl TrialRecord {
    /// Percentage of exact-caching bytes avoided by semantic caching.
    pub fn savings_pct(&self) -> f64 {
        if self.exact_bytes == 0 {
            return 0.0;
        }
        (self.exact_bytes as f64 - self.semantic_bytes as f64) / self.exact_bytes as f64 * 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub trials: Vec<TrialRecord>,
}

impl SimResult {
    pub fn mean_savings_pct(&self) -> f64 {
        self.trials.iter().map(TrialRecord::savings_pct).sum::<f64>() / self.trials.len().max(1) as f64
    }
}

/// Draws the request sequence of one pseudo-client.
pub fn draw_requests<'a>(dataset: &'a Dataset, config: &SimConfig, trial: usize) -> Result<Vec<&'a ImageRecord>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ trial as u64);
    let websites = dataset.websites();
    let chosen: Vec<&str> = websites.choose_multiple(&mut rng, config.websites).copied().collect();
    let pool: Vec<&ImageRecord> = dataset
        .images()
        .iter()
        .filter(|img| chosen.contains(&img.website.as_str()))
        .collect();
    if pool.is_empty() {
        return Err(SimError::NoImages);
    }
    Ok((0..config.requests)
        .map(|_| *pool.choose(&mut rng).expect("non-empty pool"))
        .collect())
}

/// Replays one request sequence through exact and semantic caches.
pub fn replay(
    origin: &dyn Origin,
    requests: &[&ImageRecord],
    config: &SimConfig,
    trial: usize,
) -> Result<TrialRecord, FetchError> {
    let mut exact = ClientCache::new(config.policy, config.include_overhead);
    let mut semantic = ClientCache::new(config.policy, config.include_overhead);
    for img in requests {
        exact.fetch(origin, img, config.threshold, FetchMode::Exact)?;
        semantic.fetch(origin, img, config.threshold, FetchMode::Semantic)?;
    }
    let s = semantic.stats();
    Ok(TrialRecord {
        trial,
        exact_bytes: exact.stats().total_bytes(),
        semantic_bytes: s.total_bytes(),
        overhead_bytes: s.overhead_bytes,
        semantic_hits: s.semantic_hits,
    })
}

/// Runs `config.trials` independent pseudo-clients; trial `i` is seeded with
/// `seed ^ i`, so results do not depend on thread scheduling.
pub fn run_simulation(dataset: &Dataset, config: &SimConfig) -> Result<SimResult, SimError> {
    if config.websites == 0 || config.requests == 0 || config.trials == 0 {
        return Err(SimError::EmptyConfig);
    }
    let available = dataset.websites().len();
    if config.websites > available {
        return Err(SimError::NotEnoughWebsites { requested: config.websites, available });
    }
    let origin = DatasetOrigin(dataset);
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let requests = draw_requests(dataset, config, trial)?;
            Ok(replay(&origin, &requests, config, trial)?)
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(SimResult { config: *config, trials })
}

/// Box-plot statistics of per-trial savings for one (FW, AC) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellSummary {
    pub fw: usize,
    pub ac: usize,
    pub trials: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile with linear interpolation between closest ranks.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(result: &SimResult) -> CellSummary {
    let mut pct: Vec<f64> = result.trials.iter().map(TrialRecord::savings_pct).collect();
    pct.sort_by(f64::total_cmp);
    CellSummary {
        fw: result.config.websites,
        ac: result.config.requests,
        trials: pct.len(),
        mean: result.mean_savings_pct(),
        min: pct[0],
        q1: quantile(&pct, 0.25),
        median: quantile(&pct, 0.5),
        q3: quantile(&pct, 0.75),
        max: pct[pct.len() - 1],
    }
}
