mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semcache::synthetic::{generate, SynthConfig};
use semcache::{load_dataset, save_dataset, DatasetError};

fn assert_same(a: &semcache::Dataset, b: &semcache::Dataset) {
    let mut ia = a.images().to_vec();
    let mut ib = b.images().to_vec();
    ia.sort_by_key(|i| (i.scope(), i.image_id));
    ib.sort_by_key(|i| (i.scope(), i.image_id));
    assert_eq!(ia, ib);
    let ma: Vec<_> = a.matrices().collect();
    let mb: Vec<_> = b.matrices().collect();
    assert_eq!(ma, mb);
}

#[test]
fn synthetic_corpus_round_trips() {
    let cfg = SynthConfig { websites: 3, categories_per_website: 2, ..SynthConfig::default() };
    let ds = generate(&cfg);
    let dir = tempfile::tempdir().unwrap();
    let manifest = save_dataset(&ds, dir.path()).unwrap();
    assert_same(&ds, &load_dataset(&manifest).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_corpus_round_trips(seed in any::<u64>(), websites in 1usize..4, per_scope in 1usize..9) {
        let ds = common::random_dataset(&mut ChaCha8Rng::seed_from_u64(seed), websites, per_scope);
        let dir = tempfile::tempdir().unwrap();
        let manifest = save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(&manifest).unwrap();
        assert_same(&ds, &back);
    }
}

fn write_case(manifest: &str, matrix: &str) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.csv"), matrix).unwrap();
    let path = dir.path().join("manifest.json");
    std::fs::write(&path, manifest).unwrap();
    (dir, path)
}

const MANIFEST: &str = r#"{"websites":[{"name":"w","categories":[{"name":"c","matrix_file":"m.csv","images":[
  {"image_id":1,"article_id":"a","byte_size":10,"alt_text":null,"heading":"h"},
  {"image_id":2,"article_id":"b","byte_size":20,"alt_text":"x","heading":"h"},
  {"image_id":3,"article_id":"b","byte_size":30,"alt_text":null,"heading":"h"}]}]}]}"#;

#[test]
fn loader_accepts_valid_and_rejects_each_violation() {
    let good = "image_id,1,2,3\n1,4,2,1\n2,2,4,0\n3,1,0,4\n";
    let (_d, path) = write_case(MANIFEST, good);
    let ds = load_dataset(&path).unwrap();
    assert_eq!(ds.images().len(), 3);

    let cases = [
        ("image_id,1,2,3\n1,4,2,1\n2,3,4,0\n3,1,0,4\n", "Asymmetric"),
        ("image_id,1,2,3\n1,4,2,1\n2,2,4,1\n3,1,1,4\n", "SameArticleNonZero"),
        ("image_id,1,2,3\n1,4,7,1\n2,7,4,0\n3,1,0,4\n", "ScoreOutOfRange"),
        ("image_id,1,2,4\n1,4,2,1\n2,2,4,0\n4,1,0,4\n", "Dangling"),
    ];
    for (matrix, kind) in cases {
        let (_d, path) = write_case(MANIFEST, matrix);
        let err = load_dataset(&path).unwrap_err();
        let ok = match kind {
            "Asymmetric" => matches!(err, DatasetError::Asymmetric { .. }),
            "SameArticleNonZero" => {
                matches!(err, DatasetError::SameArticleNonZero { .. }) && err.to_string().contains("same-article pair must be 0")
            }
            "ScoreOutOfRange" => matches!(err, DatasetError::ScoreOutOfRange { .. }),
            _ => matches!(err, DatasetError::DanglingMatrixImage { .. } | DatasetError::ImageWithoutMatrix { .. }),
        };
        assert!(ok, "{kind}: {err}");
    }
    let (_d, path) = write_case(MANIFEST, "not,a,matrix\n");
    assert!(load_dataset(&path).is_err());
    assert!(matches!(load_dataset("/nonexistent/manifest.json"), Err(DatasetError::Io { .. })));
}
