//! Replaceability matrices, dataset validation and the on-disk manifest format.
//!
//! A dataset on disk is a JSON manifest listing websites, their categories and
//! the images of each category, plus one CSV matrix file per category. The CSV
//! header row and first column carry image ids; cells are integers 0..=4. The
//! diagonal is written as 4 and ignored on load.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ImageId, ImageRecord, Score, ScopeKey};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed manifest {path}: {source}")]
    Manifest { path: PathBuf, source: serde_json::Error },
    #[error("malformed matrix {path}: {reason}")]
    MatrixFile { path: PathBuf, reason: String },
    #[error("{scope}: duplicate image_id {id}")]
    DuplicateImage { scope: ScopeKey, id: ImageId },
    #[error("{scope}: duplicate category")]
    DuplicateScope { scope: ScopeKey },
    #[error("{scope}: cell ({row}, {col}) has value {value}, expected 0..=4")]
    ScoreOutOfRange { scope: ScopeKey, row: ImageId, col: ImageId, value: i64 },
    #[error("{scope}: asymmetric matrix, ({a}, {b}) = {ab} but ({b}, {a}) = {ba}")]
    Asymmetric { scope: ScopeKey, a: ImageId, b: ImageId, ab: u8, ba: u8 },
    #[error("{scope}: images {a} and {b} share article {article}; same-article pair must be 0, found {value}")]
    SameArticleNonZero { scope: ScopeKey, a: ImageId, b: ImageId, article: String, value: u8 },
    #[error("{scope}: matrix references image {id} which is not in the image list")]
    DanglingMatrixImage { scope: ScopeKey, id: ImageId },
    #[error("{scope}: image {id} has no row in the matrix")]
    ImageWithoutMatrix { scope: ScopeKey, id: ImageId },
    #[error("{scope}: no matrix for this category")]
    MissingMatrix { scope: ScopeKey },
    #[error("image {id} is not in {scope}")]
    UnknownImage { scope: ScopeKey, id: ImageId },
    #[error("unknown category {scope}")]
    UnknownScope { scope: ScopeKey },
    #[error("{scope}: image {id} compared with itself; identity is an exact hit, not a score")]
    SelfComparison { scope: ScopeKey, id: ImageId },
}

pub type Result<T, E = DatasetError> = std::result::Result<T, E>;

/// Symmetric N x N table of ordinal scores for one (website, category).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplaceabilityMatrix {
    scope: ScopeKey,
    ids: Vec<ImageId>,
    articles: Vec<String>,
    image_index: HashMap<ImageId, usize>,
    scores: Vec<u8>,
}

impl ReplaceabilityMatrix {
    /// Builds and validates a matrix. `ids[i]`/`articles[i]` label row and column
    /// `i`; `scores` is row-major with `ids.len()^2` entries. Diagonal cells are
    /// ignored and stored as 4.
    pub fn new(
        scope: ScopeKey,
        ids: Vec<ImageId>,
        articles: Vec<String>,
        scores: Vec<i64>,
    ) -> Result<Self> {
        let n = ids.len();
        assert_eq!(articles.len(), n, "one article per image");
        assert_eq!(scores.len(), n * n, "square score table");

        let mut image_index = HashMap::with_capacity(n);
        for (i, &id) in ids.iter().enumerate() {
            if image_index.insert(id, i).is_some() {
                return Err(DatasetError::DuplicateImage { scope, id });
            }
        }

        let mut cells = vec![Score::MAX; n * n];
        for r in 0..n {
            for c in 0..n {
                if r == c {
                    continue;
                }
                let value = scores[r * n + c];
                if !(0..=Score::MAX as i64).contains(&value) {
                    return Err(DatasetError::ScoreOutOfRange {
                        scope,
                        row: ids[r],
                        col: ids[c],
                        value,
                    });
                }
                cells[r * n + c] = value as u8;
            }
        }
        for r in 0..n {
            for c in (r + 1)..n {
                let (ab, ba) = (cells[r * n + c], cells[c * n + r]);
                if ab != ba {
                    return Err(DatasetError::Asymmetric { scope, a: ids[r], b: ids[c], ab, ba });
                }
                if articles[r] == articles[c] && ab != 0 {
                    return Err(DatasetError::SameArticleNonZero {
                        scope,
                        a: ids[r],
                        b: ids[c],
                        article: articles[r].clone(),
                        value: ab,
                    });
                }
            }
        }

        Ok(ReplaceabilityMatrix { scope, ids, articles, image_index, scores: cells })
    }

    pub fn scope(&self) -> &ScopeKey {
        &self.scope
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Image ids in row order.
    pub fn ids(&self) -> &[ImageId] {
        &self.ids
    }

    pub fn contains(&self, id: ImageId) -> bool {
        self.image_index.contains_key(&id)
    }

    pub fn article_of(&self, id: ImageId) -> Option<&str> {
        self.image_index.get(&id).map(|&i| self.articles[i].as_str())
    }

    pub fn index_of(&self, id: ImageId) -> Option<usize> {
        self.image_index.get(&id).copied()
    }

    /// Score by row/column position; the diagonal reads as 4.
    pub fn score_at(&self, row: usize, col: usize) -> Score {
        Score::new(self.scores[row * self.ids.len() + col]).expect("validated cell")
    }

    /// Replaceability of `a` by `b`; symmetric in its arguments.
    pub fn replaceability(&self, a: ImageId, b: ImageId) -> Result<Score> {
        let ia = self.lookup(a)?;
        let ib = self.lookup(b)?;
        if ia == ib {
            return Err(DatasetError::SelfComparison { scope: self.scope.clone(), id: a });
        }
        Ok(self.score_at(ia, ib))
    }

    /// Iterates unordered pairs of images from different articles with their score.
    pub fn inter_article_pairs(&self) -> impl Iterator<Item = (ImageId, ImageId, Score)> + '_ {
        let n = self.ids.len();
        (0..n).flat_map(move |r| {
            ((r + 1)..n)
                .filter(move |&c| self.articles[r] != self.articles[c])
                .map(move |c| (self.ids[r], self.ids[c], self.score_at(r, c)))
        })
    }

    fn lookup(&self, id: ImageId) -> Result<usize> {
        self.index_of(id)
            .ok_or_else(|| DatasetError::UnknownImage { scope: self.scope.clone(), id })
    }
}

/// Validated corpus: every image belongs to exactly one matrix and vice versa.
#[derive(Debug, Clone)]
pub struct Dataset {
    images: Vec<ImageRecord>,
    matrices: BTreeMap<ScopeKey, ReplaceabilityMatrix>,
    lookup: HashMap<ScopeKey, HashMap<ImageId, usize>>,
}

impl Dataset {
    pub fn new(
        images: Vec<ImageRecord>,
        matrices: impl IntoIterator<Item = ReplaceabilityMatrix>,
    ) -> Result<Self> {
        let mut by_scope: BTreeMap<ScopeKey, ReplaceabilityMatrix> = BTreeMap::new();
        for m in matrices {
            let scope = m.scope().clone();
            if by_scope.insert(scope.clone(), m).is_some() {
                return Err(DatasetError::DuplicateScope { scope });
            }
        }

        let mut lookup: HashMap<ScopeKey, HashMap<ImageId, usize>> = HashMap::new();
        for (i, img) in images.iter().enumerate() {
            let scope = img.scope();
            let matrix = by_scope
                .get(&scope)
                .ok_or_else(|| DatasetError::MissingMatrix { scope: scope.clone() })?;
            match matrix.article_of(img.image_id) {
                None => {
                    return Err(DatasetError::ImageWithoutMatrix { scope, id: img.image_id })
                }
                Some(article) if article != img.article_id => {
                    return Err(DatasetError::MatrixFile {
                        path: PathBuf::from(scope.to_string()),
                        reason: format!(
                            "image {} listed under article {} but matrix has {}",
                            img.image_id, img.article_id, article
                        ),
                    })
                }
                Some(_) => {}
            }
            if lookup.entry(scope.clone()).or_default().insert(img.image_id, i).is_some() {
                return Err(DatasetError::DuplicateImage { scope, id: img.image_id });
            }
        }
        for (scope, matrix) in &by_scope {
            let listed = lookup.get(scope);
            for &id in matrix.ids() {
                if !listed.is_some_and(|l| l.contains_key(&id)) {
                    return Err(DatasetError::DanglingMatrixImage { scope: scope.clone(), id });
                }
            }
        }

        Ok(Dataset { images, matrices: by_scope, lookup })
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn matrices(&self) -> impl Iterator<Item = &ReplaceabilityMatrix> {
        self.matrices.values()
    }

    pub fn matrix(&self, scope: &ScopeKey) -> Option<&ReplaceabilityMatrix> {
        self.matrices.get(scope)
    }

    pub fn image(&self, scope: &ScopeKey, id: ImageId) -> Option<&ImageRecord> {
        self.lookup.get(scope)?.get(&id).map(|&i| &self.images[i])
    }

    /// Images of one scope, in manifest order.
    pub fn scope_images(&self, scope: &ScopeKey) -> Vec<&ImageRecord> {
        self.images.iter().filter(|img| img.website == scope.website && img.category == scope.category).collect()
    }

    /// Distinct website names, sorted.
    pub fn websites(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.matrices.keys().map(|k| k.website.as_str()).collect();
        names.dedup();
        names
    }

    /// Convenience lookup by scope and ids.
    pub fn replaceability(&self, scope: &ScopeKey, a: ImageId, b: ImageId) -> Result<Score> {
        self.matrix(scope)
            .ok_or_else(|| DatasetError::UnknownScope { scope: scope.clone() })?
            .replaceability(a, b)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    websites: Vec<ManifestWebsite>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestWebsite {
    name: String,
    categories: Vec<ManifestCategory>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestCategory {
    name: String,
    images: Vec<ManifestImage>,
    matrix_file: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestImage {
    image_id: u16,
    article_id: String,
    byte_size: u64,
    #[serde(default)]
    alt_text: Option<String>,
    #[serde(default)]
    heading: String,
}

/// Loads and validates a dataset manifest. Matrix paths are relative to the
/// manifest's directory.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path)
        .map_err(|source| DatasetError::Io { path: manifest_path.to_owned(), source })?;
    let manifest: ManifestFile = serde_json::from_str(&text)
        .map_err(|source| DatasetError::Manifest { path: manifest_path.to_owned(), source })?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut images = Vec::new();
    let mut matrices = Vec::new();
    for site in manifest.websites {
        for cat in site.categories {
            let scope = ScopeKey::new(site.name.clone(), cat.name.clone());
            let mut articles: HashMap<ImageId, String> = HashMap::new();
            for img in &cat.images {
                let id = ImageId(img.image_id);
                if articles.insert(id, img.article_id.clone()).is_some() {
                    return Err(DatasetError::DuplicateImage { scope, id });
                }
                images.push(ImageRecord {
                    website: site.name.clone(),
                    category: cat.name.clone(),
                    article_id: img.article_id.clone(),
                    image_id: id,
                    byte_size: img.byte_size,
                    alt_text: img.alt_text.clone(),
                    heading: img.heading.clone(),
                });
            }
            let path = base.join(&cat.matrix_file);
            matrices.push(read_matrix_csv(&path, scope, &articles)?);
        }
    }
    Dataset::new(images, matrices)
}

fn read_matrix_csv(
    path: &Path,
    scope: ScopeKey,
    articles: &HashMap<ImageId, String>,
) -> Result<ReplaceabilityMatrix> {
    let bad = |reason: String| DatasetError::MatrixFile { path: path.to_owned(), reason };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let mut rows = reader.records();
    let header = rows.next().ok_or_else(|| bad("empty file".into()))?.map_err(|e| bad(e.to_string()))?;
    let parse_id = |s: &str| s.parse::<u16>().map(ImageId).map_err(|_| bad(format!("bad image id {s:?}")));
    let ids: Vec<ImageId> = header.iter().skip(1).map(parse_id).collect::<Result<_>>()?;
    let n = ids.len();

    let mut scores = Vec::with_capacity(n * n);
    let mut row_count = 0;
    for (r, rec) in rows.enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if r >= n {
            return Err(bad(format!("more than {n} data rows")));
        }
        if rec.len() != n + 1 {
            return Err(bad(format!("row {} has {} cells, expected {}", r + 1, rec.len(), n + 1)));
        }
        let row_id = parse_id(&rec[0])?;
        if row_id != ids[r] {
            return Err(bad(format!("row {} labelled {} but column order expects {}", r + 1, row_id, ids[r])));
        }
        for cell in rec.iter().skip(1) {
            let v: i64 = cell.parse().map_err(|_| bad(format!("row {row_id}: non-integer cell {cell:?}")))?;
            scores.push(v);
        }
        row_count += 1;
    }
    if row_count != n {
        return Err(bad(format!("{row_count} data rows for {n} columns")));
    }

    let mut row_articles = Vec::with_capacity(n);
    for &id in &ids {
        match articles.get(&id) {
            Some(a) => row_articles.push(a.clone()),
            None => return Err(DatasetError::DanglingMatrixImage { scope, id }),
        }
    }
    ReplaceabilityMatrix::new(scope, ids, row_articles, scores)
}

/// Writes `manifest.json` plus one CSV per category under `dir`. Returns the
/// manifest path.
pub fn save_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source| DatasetError::Io { path, source }
    };
    fs::create_dir_all(dir.join("matrices")).map_err(io(dir))?;

    let mut websites: Vec<ManifestWebsite> = Vec::new();
    for (idx, matrix) in dataset.matrices().enumerate() {
        let scope = matrix.scope();
        let file = format!("matrices/m{idx:04}_{}.csv", sanitize(&scope.to_string()));
        write_matrix_csv(matrix, &dir.join(&file))?;
        let images = matrix
            .ids()
            .iter()
            .map(|&id| {
                let img = dataset.image(scope, id).expect("validated dataset");
                ManifestImage {
                    image_id: id.0,
                    article_id: img.article_id.clone(),
                    byte_size: img.byte_size,
                    alt_text: img.alt_text.clone(),
                    heading: img.heading.clone(),
                }
            })
            .collect();
        let category = ManifestCategory { name: scope.category.clone(), images, matrix_file: file };
        match websites.last_mut() {
            Some(site) if site.name == scope.website => site.categories.push(category),
            _ => websites.push(ManifestWebsite { name: scope.website.clone(), categories: vec![category] }),
        }
    }

    let manifest_path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&ManifestFile { websites })
        .map_err(|source| DatasetError::Manifest { path: manifest_path.clone(), source })?;
    fs::write(&manifest_path, json).map_err(io(&manifest_path))?;
    Ok(manifest_path)
}

fn write_matrix_csv(matrix: &ReplaceabilityMatrix, path: &Path) -> Result<()> {
    let bad = |e: csv::Error| DatasetError::MatrixFile { path: path.to_owned(), reason: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(bad)?;
    let mut header = vec!["image_id".to_string()];
    header.extend(matrix.ids().iter().map(|id| id.to_string()));
    w.write_record(&header).map_err(bad)?;
    for (r, id) in matrix.ids().iter().enumerate() {
        let mut row = vec![id.to_string()];
        row.extend((0..matrix.len()).map(|c| matrix.score_at(r, c).to_string()));
        w.write_record(&row).map_err(bad)?;
    }
    w.flush().map_err(|source| DatasetError::Io { path: path.to_owned(), source })
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

/// Distinct-id check used by callers that assemble scopes by hand.
pub(crate) fn has_duplicates(ids: &[ImageId]) -> bool {
    let mut seen = HashSet::with_capacity(ids.len());
    !ids.iter().all(|id| seen.insert(*id))
}
