mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semcache::metrics::*;

const TOL: f64 = 1e-9;

fn check_series(pred: &[i64], truth: &[i64]) {
    let series = RatingSeries::from_ints(pred, truth).unwrap();

    assert!((nrmse::<f64>(&series) - oracle_nrmse(pred, truth)).abs() < TOL);

    for (weighting, quadratic) in [(Weighting::Linear, false), (Weighting::Quadratic, true)] {
        match (weighted_kappa::<f64>(&series, weighting), oracle_kappa(pred, truth, quadratic)) {
            (Ok(k), Some(o)) => assert!((k - o).abs() < TOL, "{weighting:?} {k} vs {o}"),
            (Err(MetricsError::Undefined(_)), None) => {}
            (got, want) => panic!("kappa {weighting:?}: {got:?} vs {want:?}"),
        }
    }

    let prf = weighted_prf::<f64>(&series);
    let (p, r, f) = oracle_prf(pred, truth);
    assert!((prf.precision - p).abs() < TOL);
    assert!((prf.recall - r).abs() < TOL);
    assert!((prf.f1 - f).abs() < TOL);

    let cm = confusion_matrix::<f64>(&series, Normalize::Row);
    let oracle = oracle_confusion(pred, truth);
    for r in 0..5 {
        for c in 0..5 {
            assert!((cm.values[r][c] - oracle[r][c]).abs() < TOL);
        }
        let empty = !truth.contains(&(r as i64));
        assert_eq!(cm.zero_support_rows.contains(&(r as u8)), empty);
    }

    match (krippendorff_alpha_ordinal::<f64>(&to_scores(pred), &to_scores(truth)), oracle_alpha(pred, truth)) {
        (Ok(a), Some(o)) => assert!((a - o).abs() < TOL, "alpha {a} vs {o}"),
        (Err(MetricsError::Undefined(_)), None) => {}
        (got, want) => panic!("alpha: {got:?} vs {want:?}"),
    }
}

#[test]
fn two_hundred_seeded_series_match_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..200 {
        let len = rng.random_range(1..=20);
        let (pred, truth) = if i % 2 == 0 {
            (random_scores(&mut rng, len), random_scores(&mut rng, len))
        } else {
            (skewed_scores(&mut rng, len), skewed_scores(&mut rng, len))
        };
        check_series(&pred, &truth);
    }
}

#[test]
fn pooled_std_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..200 {
        let groups: Vec<Vec<f64>> = (0..rng.random_range(1..=6))
            .map(|_| (0..rng.random_range(2..=10)).map(|_| rng.random_range(0..=4) as f64).collect())
            .collect();
        let got = pooled_std::<f64>(&groups).unwrap();
        assert!((got - oracle_pooled_std(&groups)).abs() < TOL);
    }
}

#[test]
fn perfect_agreement_edge_cases() {
    let v = [0, 1, 2, 3, 4, 2];
    let s = RatingSeries::from_ints(&v, &v).unwrap();
    assert_eq!(nrmse::<f64>(&s), 0.0);
    assert_eq!(weighted_kappa::<f64>(&s, Weighting::Linear).unwrap(), 1.0);
    assert_eq!(weighted_kappa::<f64>(&s, Weighting::Quadratic).unwrap(), 1.0);
    let prf = weighted_prf::<f64>(&s);
    assert_eq!((prf.precision, prf.recall, prf.f1), (1.0, 1.0, 1.0));
    let cm = confusion_matrix::<f64>(&s, Normalize::Row);
    for r in 0..5 {
        for c in 0..5 {
            assert_eq!(cm.values[r][c], if r == c { 1.0 } else { 0.0 });
        }
    }
    assert_eq!(krippendorff_alpha_ordinal::<f64>(&to_scores(&v), &to_scores(&v)).unwrap(), 1.0);
    assert_eq!(pooled_std::<f64>(&[vec![2.0, 2.0], vec![3.0, 3.0, 3.0]]).unwrap(), 0.0);
}

#[test]
fn constant_raters_are_undefined() {
    let s = RatingSeries::from_ints(&[2, 2, 2], &[2, 2, 2]).unwrap();
    assert!(matches!(weighted_kappa::<f64>(&s, Weighting::Linear), Err(MetricsError::Undefined(_))));
    let c = to_scores(&[1, 1]);
    assert!(matches!(krippendorff_alpha_ordinal::<f64>(&c, &c), Err(MetricsError::Undefined(_))));
}

#[test]
fn independent_raters_have_kappa_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 20_000;
    let pred = random_scores(&mut rng, n);
    let truth = random_scores(&mut rng, n);
    let s = RatingSeries::from_ints(&pred, &truth).unwrap();
    for w in [Weighting::Linear, Weighting::Quadratic] {
        let k = weighted_kappa::<f64>(&s, w).unwrap();
        assert!(k.abs() < 0.05, "{w:?}: {k}");
    }
}

#[test]
fn f32_agrees_with_f64() {
    let s = RatingSeries::from_ints(&[0, 1, 4, 3, 2, 0], &[0, 2, 4, 1, 2, 1]).unwrap();
    let k64 = weighted_kappa::<f64>(&s, Weighting::Quadratic).unwrap();
    let k32 = weighted_kappa::<f32>(&s, Weighting::Quadratic).unwrap();
    assert!((k64 - k32 as f64).abs() < 1e-5);
}

proptest! {
    #[test]
    fn any_series_matches_oracles(pairs in prop::collection::vec((0i64..=4, 0i64..=4), 1..=20)) {
        let (pred, truth): (Vec<i64>, Vec<i64>) = pairs.into_iter().unzip();
        check_series(&pred, &truth);
    }

    #[test]
    fn kappa_is_symmetric_in_raters(pairs in prop::collection::vec((0i64..=4, 0i64..=4), 2..=20)) {
        let (pred, truth): (Vec<i64>, Vec<i64>) = pairs.into_iter().unzip();
        let ab = weighted_kappa::<f64>(&RatingSeries::from_ints(&pred, &truth).unwrap(), Weighting::Quadratic);
        let ba = weighted_kappa::<f64>(&RatingSeries::from_ints(&truth, &pred).unwrap(), Weighting::Quadratic);
        match (ab, ba) {
            (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12),
            (Err(_), Err(_)) => {}
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn bounded_outputs(pairs in prop::collection::vec((0i64..=4, 0i64..=4), 1..=20)) {
        let (pred, truth): (Vec<i64>, Vec<i64>) = pairs.into_iter().unzip();
        let s = RatingSeries::from_ints(&pred, &truth).unwrap();
        let e = nrmse::<f64>(&s);
        prop_assert!((0.0..=1.0).contains(&e));
        let prf = weighted_prf::<f64>(&s);
        for v in [prf.precision, prf.recall, prf.f1] {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
        if let Ok(k) = weighted_kappa::<f64>(&s, Weighting::Linear) {
            prop_assert!(k <= 1.0 + 1e-12);
        }
    }
}
