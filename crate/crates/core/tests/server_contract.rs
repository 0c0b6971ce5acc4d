mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semcache::client::{CachePolicy, ClientCache, FetchMode, FetchSource};
use semcache::protocol::{SemanticRequest, SemanticResponse};
use semcache::server::{blob_file, router, HttpOrigin, Origin, OriginError, ServerState};
use semcache::{Dataset, ImageId, ScopeKey, Threshold};

fn fixture() -> Dataset {
    common::random_dataset(&mut ChaCha8Rng::seed_from_u64(11), 3, 12)
}

fn request(ds: &Dataset, scope: &ScopeKey, req_idx: usize, cached: &[usize], t: u8) -> SemanticRequest {
    let ids = ds.matrix(scope).unwrap().ids();
    let cached = cached.iter().map(|&i| ids[i]).collect();
    SemanticRequest::new(scope.clone(), ids[req_idx], cached, Threshold::new(t).unwrap()).unwrap()
}

proptest! {
    #[test]
    fn resolve_respects_threshold_and_order(
        req_idx in 0usize..12,
        cached in prop::collection::hash_set(0usize..12, 0..11),
        t in 1u8..=4,
        shuffle_seed in any::<u64>(),
    ) {
        let ds = fixture();
        let state = ServerState::new(ds.clone());
        let scope = ScopeKey::new("site1", "news");
        let cached: Vec<usize> = cached.into_iter().filter(|&c| c != req_idx).collect();
        let req = request(&ds, &scope, req_idx, &cached, t);
        let resp = state.resolve(&req).unwrap();

        let m = ds.matrix(&scope).unwrap();
        let best = cached.iter().map(|&c| m.score_at(req_idx, c).get()).max();
        match &resp {
            SemanticResponse::ReuseSimilar { id, score } => {
                prop_assert!(score.get() >= t);
                prop_assert!(req.cached_ids.contains(id));
                prop_assert_eq!(Some(score.get()), best);
                prop_assert_eq!(m.replaceability(req.requested_id, *id).unwrap(), *score);
                let lowest = req.cached_ids.iter()
                    .filter(|&&c| m.replaceability(req.requested_id, c).unwrap() == *score)
                    .min().unwrap();
                prop_assert_eq!(id, lowest);
            }
            SemanticResponse::FullImage { byte_size, .. } => {
                prop_assert!(best.is_none_or(|b| b < t));
                prop_assert_eq!(*byte_size, ds.image(&scope, req.requested_id).unwrap().byte_size);
            }
            SemanticResponse::NotFound => prop_assert!(false, "known id reported missing"),
        }

        let mut shuffled = req.clone();
        shuffled.cached_ids.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        prop_assert_eq!(state.resolve(&shuffled).unwrap(), resp);
    }
}

#[test]
fn unknown_ids_are_skipped_and_unknown_requests_not_found() {
    let ds = fixture();
    let state = ServerState::new(ds.clone());
    let scope = ScopeKey::new("site0", "news");
    let known = request(&ds, &scope, 0, &[1, 2, 3], 1);
    let mut padded = known.clone();
    padded.cached_ids.extend([ImageId(0xfff0), ImageId(0xfff1)]);
    assert_eq!(state.resolve(&padded).unwrap(), state.resolve(&known).unwrap());

    let missing = SemanticRequest::new(scope, ImageId(0xeeee), vec![], Threshold::new(1).unwrap()).unwrap();
    assert_eq!(state.resolve(&missing).unwrap(), SemanticResponse::NotFound);

    let other = SemanticRequest::new(ScopeKey::new("nowhere", "news"), ImageId(1), vec![], Threshold::new(1).unwrap()).unwrap();
    assert_eq!(state.resolve(&other).unwrap_err().token(), "UNKNOWN_CATEGORY");
}

#[test]
fn concurrent_resolution_is_consistent() {
    let ds = fixture();
    let state = Arc::new(ServerState::new(ds.clone()));
    let scope = ScopeKey::new("site2", "news");
    let reqs: Vec<SemanticRequest> = (0..12).map(|i| request(&ds, &scope, i, &[(i + 1) % 12, (i + 5) % 12], 2)).collect();
    let serial: Vec<_> = reqs.iter().map(|r| state.resolve(r).unwrap()).collect();
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let state = Arc::clone(&state);
            let reqs = reqs.clone();
            std::thread::spawn(move || reqs.iter().map(|r| state.resolve(r).unwrap()).collect::<Vec<_>>())
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap(), serial);
    }
}

#[test]
fn http_round_trip_matches_in_process() {
    let ds = fixture();
    let blobs = tempfile::tempdir().unwrap();
    let scope = ScopeKey::new("site0", "news");
    let blob_id = ds.matrix(&scope).unwrap().ids()[4];
    let path = blob_file(blobs.path(), &scope, blob_id);
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(&path, b"actual image bytes").unwrap();

    let state = Arc::new(ServerState::new(ds.clone()).with_blob_root(blobs.path()));
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    let app = router(Arc::clone(&state));
    runtime.spawn(async move { axum::serve(listener, app).await.unwrap() });

    let origin = HttpOrigin::new(format!("http://{addr}/"));
    for t in 1..=4 {
        for i in 0..12 {
            let req = request(&ds, &scope, i, &[(i + 1) % 12, (i + 3) % 12, (i + 7) % 12], t);
            let over_http = origin.fetch(&req).unwrap();
            let local = state.fetch(&req).unwrap();
            match (&over_http, &local) {
                (SemanticResponse::FullImage { byte_size, payload }, SemanticResponse::FullImage { byte_size: local_size, .. }) => {
                    if req.requested_id == blob_id {
                        assert_eq!(payload.as_deref(), Some(&b"actual image bytes"[..]));
                        assert_eq!(*byte_size, 18);
                    } else {
                        assert_eq!(byte_size, local_size);
                    }
                }
                _ => assert_eq!(over_http, local),
            }
        }
    }

    let missing = SemanticRequest::new(ScopeKey::new("nowhere", "x"), ImageId(1), vec![], Threshold::new(1).unwrap()).unwrap();
    assert!(matches!(origin.fetch(&missing), Err(OriginError::Rejected(t)) if t == "UNKNOWN_CATEGORY"));

    let raw = reqwest::blocking::Client::new();
    let resp = raw.get(format!("http://{addr}/img/site0/news/zz")).header("X-Sem-Cache-Threshold", "1").send().unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    assert_eq!(resp.headers()["x-sem-cache-error"], "MALFORMED_ID");
    let resp = raw.post(format!("http://{addr}/img/site0/news/0100")).send().unwrap();
    assert_eq!(resp.status().as_u16(), 405);

    let mut cache = ClientCache::new(CachePolicy::Unbounded, true);
    let images = ds.scope_images(&scope);
    for img in &images {
        let out = cache.fetch(&origin, img, Threshold::new(1).unwrap(), FetchMode::Semantic).unwrap();
        if let FetchSource::SemanticHit(id) = out.source {
            assert!(cache.contains(&scope, id));
        }
    }
    assert!(cache.stats().semantic_hits > 0);
}
