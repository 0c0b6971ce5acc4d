//! Brute-force reference implementations and fixtures shared by the test targets.
#![allow(dead_code)]

use rand::Rng;
use semcache::dataset::ReplaceabilityMatrix;
use semcache::{Dataset, ImageId, ImageRecord, Rational, Score, ScopeKey};

/// Fraction of `cached`-subsets of `0..total` containing at least one of the
/// first `useful` elements, by enumerating bitmasks.
pub fn enumerate_hit_probability(total: u32, useful: u32, cached: u32) -> Rational {
    let useful_mask: u32 = (1u32 << useful) - 1;
    let (mut hits, mut all) = (0i64, 0i64);
    for subset in 0u32..(1u32 << total) {
        if subset.count_ones() != cached {
            continue;
        }
        all += 1;
        if subset & useful_mask != 0 {
            hits += 1;
        }
    }
    semcache::scalar::ratio(hits, all)
}

pub fn random_scores(rng: &mut impl Rng, len: usize) -> Vec<i64> {
    (0..len).map(|_| rng.random_range(0..=4)).collect()
}

/// Skewed towards 0 so zero-support classes show up.
pub fn skewed_scores(rng: &mut impl Rng, len: usize) -> Vec<i64> {
    (0..len)
        .map(|_| if rng.random_bool(0.6) { 0 } else { rng.random_range(0..=4) })
        .collect()
}

pub fn oracle_nrmse(pred: &[i64], truth: &[i64]) -> f64 {
    let mse = pred.iter().zip(truth).map(|(p, t)| ((p - t) * (p - t)) as f64).sum::<f64>() / pred.len() as f64;
    mse.sqrt() / 4.0
}

/// Kappa as `1 - mean pairwise weighted disagreement / mean cross-item
/// disagreement`, with no contingency table.
pub fn oracle_kappa(pred: &[i64], truth: &[i64], quadratic: bool) -> Option<f64> {
    let w = |a: i64, b: i64| {
        let d = (a - b).abs() as f64 / 4.0;
        if quadratic { d * d } else { d }
    };
    let n = pred.len() as f64;
    let observed: f64 = pred.iter().zip(truth).map(|(&p, &t)| w(p, t)).sum::<f64>() / n;
    let mut expected = 0.0;
    for &t in truth {
        for &p in pred {
            expected += w(p, t);
        }
    }
    expected /= n * n;
    (expected != 0.0).then(|| 1.0 - observed / expected)
}

/// (precision, recall, f1) from per-class scans.
pub fn oracle_prf(pred: &[i64], truth: &[i64]) -> (f64, f64, f64) {
    let n = truth.len() as f64;
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for class in 0..=4 {
        let support = truth.iter().filter(|&&t| t == class).count();
        if support == 0 {
            continue;
        }
        let mut tp = 0;
        let mut fp = 0;
        let mut fn_ = 0;
        for (&p, &t) in pred.iter().zip(truth) {
            match (p == class, t == class) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = tp as f64 / (tp + fn_) as f64;
        let f1 = if tp == 0 { 0.0 } else { 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64 };
        let weight = support as f64 / n;
        p_sum += weight * precision;
        r_sum += weight * recall;
        f_sum += weight * f1;
    }
    (p_sum, r_sum, f_sum)
}

/// Row-normalised confusion matrix, rows indexed by truth.
pub fn oracle_confusion(pred: &[i64], truth: &[i64]) -> [[f64; 5]; 5] {
    let mut out = [[0.0; 5]; 5];
    for r in 0..5 {
        let row: Vec<i64> = pred.iter().zip(truth).filter(|(_, &t)| t == r as i64).map(|(&p, _)| p).collect();
        for c in 0..5 {
            if !row.is_empty() {
                out[r][c] = row.iter().filter(|&&p| p == c as i64).count() as f64 / row.len() as f64;
            }
        }
    }
    out
}

/// Ordinal alpha from an explicit coincidence matrix.
pub fn oracle_alpha(a: &[i64], b: &[i64]) -> Option<f64> {
    let mut o = [[0.0f64; 5]; 5];
    for (&x, &y) in a.iter().zip(b) {
        o[x as usize][y as usize] += 1.0;
        o[y as usize][x as usize] += 1.0;
    }
    let n_c: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = n_c.iter().sum();
    let delta = |c: usize, k: usize| {
        if c == k {
            return 0.0;
        }
        let (lo, hi) = (c.min(k), c.max(k));
        let s: f64 = (lo..=hi).map(|g| n_c[g]).sum::<f64>() - (n_c[c] + n_c[k]) / 2.0;
        s * s
    };
    let (mut d_o, mut d_e) = (0.0, 0.0);
    for c in 0..5 {
        for k in 0..5 {
            d_o += o[c][k] * delta(c, k);
            d_e += n_c[c] * n_c[k] * delta(c, k);
        }
    }
    (d_e != 0.0).then(|| 1.0 - (n - 1.0) * d_o / d_e)
}

/// Pooled std with sample variances from pairwise squared differences.
pub fn oracle_pooled_std(groups: &[Vec<f64>]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for g in groups {
        let n = g.len() as f64;
        let mut pair_sq = 0.0;
        for i in 0..g.len() {
            for j in (i + 1)..g.len() {
                pair_sq += (g[i] - g[j]).powi(2);
            }
        }
        let var = pair_sq / (n * (n - 1.0));
        num += (n - 1.0) * var;
        den += n - 1.0;
    }
    (num / den).sqrt()
}

pub fn to_scores(v: &[i64]) -> Vec<Score> {
    v.iter().map(|&x| Score::new(x as u8).unwrap()).collect()
}

/// One category per website with `per_scope` images in distinct articles and
/// random symmetric scores.
pub fn random_dataset(rng: &mut impl Rng, websites: usize, per_scope: usize) -> Dataset {
    let mut images = Vec::new();
    let mut matrices = Vec::new();
    for w in 0..websites {
        let scope = ScopeKey::new(format!("site{w}"), "news");
        let ids: Vec<ImageId> = (0..per_scope).map(|i| ImageId(0x100 * (w as u16 + 1) + i as u16)).collect();
        let articles: Vec<String> = (0..per_scope).map(|i| format!("art{i}")).collect();
        let n = per_scope;
        let mut cells = vec![4i64; n * n];
        for r in 0..n {
            for c in (r + 1)..n {
                let v = rng.random_range(0..=4);
                cells[r * n + c] = v;
                cells[c * n + r] = v;
            }
        }
        for (i, &id) in ids.iter().enumerate() {
            images.push(ImageRecord {
                website: scope.website.clone(),
                category: scope.category.clone(),
                article_id: articles[i].clone(),
                image_id: id,
                byte_size: rng.random_range(1_000..50_000),
                alt_text: None,
                heading: format!("headline {i}"),
            });
        }
        matrices.push(ReplaceabilityMatrix::new(scope, ids, articles, cells).unwrap());
    }
    Dataset::new(images, matrices).unwrap()
}
