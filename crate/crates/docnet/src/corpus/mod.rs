//! Corpus data model and ingestion.
//!
//! Articles arrive as JSONL (one object per line) or as a CSV pair
//! (`articles.csv` plus `edges.csv` with `src,dst` columns). Records are
//! never dropped: missing fields get empty defaults and a counted warning,
//! and references that do not resolve inside the corpus are kept and flagged
//! external.

mod features;
mod porter;
mod preprocess;
mod stopwords;
mod vocab;

pub use features::{
    cohort_growth_ratios, impute_cumulative_citations, assemble_features, CohortRatios,
    FeatureBlock, FeatureConfig, FeatureMatrix, CITATION_COLUMNS,
};
pub use porter::porter_stem;
pub use preprocess::{
    build_preprocess_config, preprocess, preprocess_corpus, tokenize, PreprocessConfig, TokenList,
};
pub use stopwords::ENGLISH_STOPWORDS;
pub use vocab::{build_vocabulary, Vocabulary};

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One author affiliation: an organisation id and its country code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Affiliation {
    #[serde(default)]
    pub id: String,
    #[serde(default)]
    pub country: String,
}

/// One document with its text fields, authorship metadata, citation history
/// and outgoing references.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct Article {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(default, rename = "abstract")]
    pub abstract_text: String,
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub affiliations: Vec<Affiliation>,
    #[serde(default)]
    pub journal: String,
    /// Analysis-only field label; never used as a model feature.
    #[serde(default)]
    pub field_label: String,
    #[serde(default)]
    pub year: i32,
    #[serde(default)]
    pub subject_areas: Vec<String>,
    #[serde(default)]
    pub citations_per_year: BTreeMap<i32, u64>,
    #[serde(default)]
    pub total_citations: u64,
    #[serde(default)]
    pub references: Vec<String>,
}

/// Warnings accumulated while loading; records are repaired, not dropped.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LoadWarnings {
    pub missing_fields: usize,
    pub adjusted_years: usize,
    pub adjusted_total_citations: usize,
    pub mismatched_affiliations: usize,
    pub unknown_edge_sources: usize,
}

/// Id-indexed article collection with a dense index `0..n-1`.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    articles: Vec<Article>,
    index: HashMap<String, usize>,
    pub warnings: LoadWarnings,
}

impl Corpus {
    /// Build from articles, checking id uniqueness. `lines[i]` is the source
    /// line of article `i` and is only used for error messages.
    pub fn new(articles: Vec<Article>, lines: &[usize], mut warnings: LoadWarnings) -> Result<Self> {
        let mut index = HashMap::with_capacity(articles.len());
        for (i, article) in articles.iter().enumerate() {
            if let Some(&prev) = index.get(&article.id) {
                return Err(Error::DuplicateId {
                    id: article.id.clone(),
                    first: lines.get(prev).copied().unwrap_or(prev + 1),
                    second: lines.get(i).copied().unwrap_or(i + 1),
                });
            }
            index.insert(article.id.clone(), i);
        }
        let mut articles = articles;
        for article in &mut articles {
            repair(article, &mut warnings);
        }
        Ok(Self {
            articles,
            index,
            warnings,
        })
    }

    pub fn from_articles(articles: Vec<Article>) -> Result<Self> {
        let lines: Vec<usize> = (1..=articles.len()).collect();
        Self::new(articles, &lines, LoadWarnings::default())
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn article(&self, i: usize) -> &Article {
        &self.articles[i]
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn ids(&self) -> Vec<String> {
        self.articles.iter().map(|a| a.id.clone()).collect()
    }

    /// Directed reference edges that resolve inside the corpus
    /// (citing -> cited), deduplicated, self-references dropped.
    pub fn internal_reference_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for (i, article) in self.articles.iter().enumerate() {
            for r in &article.references {
                if let Some(j) = self.index_of(r) {
                    if j != i {
                        edges.push((i, j));
                    }
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// References that do not resolve to any article in the corpus.
    pub fn external_reference_count(&self) -> usize {
        self.articles
            .iter()
            .flat_map(|a| &a.references)
            .filter(|r| !self.index.contains_key(*r))
            .count()
    }

    /// Latest publication year present in the corpus.
    pub fn max_year(&self) -> Option<i32> {
        self.articles.iter().map(|a| a.year).max()
    }
}

fn current_year() -> i32 {
    // Days since the epoch, divided out; close enough for a validity cap.
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    1970 + (secs / 31_557_600) as i32
}

/// Enforce the article invariants in place, counting each adjustment.
fn repair(article: &mut Article, warnings: &mut LoadWarnings) {
    let cap = current_year();
    if article.year < 1900 || article.year > cap {
        article.year = article.year.clamp(1900, cap);
        warnings.adjusted_years += 1;
    }
    let cumulative: u64 = article.citations_per_year.values().sum();
    if article.total_citations < cumulative {
        article.total_citations = cumulative;
        warnings.adjusted_total_citations += 1;
    }
    if article.affiliations.len() != article.authors.len() {
        article
            .affiliations
            .resize(article.authors.len(), Affiliation::default());
        warnings.mismatched_affiliations += 1;
    }
}

/// Input format of [`load_corpus`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    CsvPair,
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jsonl" => Ok(Self::Jsonl),
            "csv-pair" | "csv" => Ok(Self::CsvPair),
            other => Err(Error::InvalidArgument(format!(
                "unknown corpus format `{other}` (expected jsonl or csv-pair)"
            ))),
        }
    }
}

/// Load a corpus from disk.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    match format {
        CorpusFormat::Jsonl => load_jsonl(path),
        CorpusFormat::CsvPair => load_csv_pair(path),
    }
}

/// JSONL loader: one article object per line, blank lines ignored.
pub fn load_jsonl(path: &Path) -> Result<Corpus> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut articles = Vec::new();
    let mut lines = Vec::new();
    let mut warnings = LoadWarnings::default();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: lineno,
                msg: e.to_string(),
            })?;
        warnings.missing_fields += count_missing_fields(&value);
        let article: Article = serde_json::from_value(value).map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        if article.id.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                msg: "article id is missing or empty".into(),
            });
        }
        articles.push(article);
        lines.push(lineno);
    }
    Corpus::new(articles, &lines, warnings)
}

const EXPECTED_FIELDS: [&str; 8] = [
    "title",
    "abstract",
    "keywords",
    "authors",
    "affiliations",
    "journal",
    "year",
    "references",
];

fn count_missing_fields(value: &serde_json::Value) -> usize {
    match value.as_object() {
        Some(map) => EXPECTED_FIELDS
            .iter()
            .filter(|f| !map.contains_key(**f))
            .count(),
        None => 0,
    }
}

/// CSV-pair loader. `path` is either `articles.csv` or a directory containing
/// it; a sibling `edges.csv` (columns `src,dst`) is appended to the articles'
/// reference lists when present.
///
/// List-valued cells are `|`-separated; affiliations use `id:country`
/// entries and the citation history uses `year:count` entries.
pub fn load_csv_pair(path: &Path) -> Result<Corpus> {
    let (articles_path, edges_path) = if path.is_dir() {
        (path.join("articles.csv"), path.join("edges.csv"))
    } else {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        (path.to_path_buf(), dir.join("edges.csv"))
    };

    let mut reader = csv::Reader::from_path(&articles_path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let idx_id = col("id").ok_or_else(|| Error::Parse {
        line: 1,
        msg: "articles.csv has no `id` column".into(),
    })?;

    let mut warnings = LoadWarnings::default();
    let mut articles = Vec::new();
    let mut lines = Vec::new();
    for (recno, record) in reader.records().enumerate() {
        let lineno = recno + 2; // header occupies line 1
        let record = record.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let cell = |idx: Option<usize>| idx.and_then(|i| record.get(i)).unwrap_or("").to_string();
        let list = |idx: Option<usize>| -> Vec<String> {
            let raw = cell(idx);
            raw.split('|')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect()
        };
        let id = cell(Some(idx_id));
        if id.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                msg: "article id is missing or empty".into(),
            });
        }
        for name in EXPECTED_FIELDS {
            if col(name).is_none() {
                warnings.missing_fields += 1;
            }
        }
        let affiliations = list(col("affiliations"))
            .into_iter()
            .map(|entry| {
                let (aff, country) = entry.split_once(':').unwrap_or((entry.as_str(), ""));
                Affiliation {
                    id: aff.trim().to_string(),
                    country: country.trim().to_string(),
                }
            })
            .collect();
        let citations_per_year = list(col("citations_per_year"))
            .into_iter()
            .filter_map(|entry| {
                let (y, c) = entry.split_once(':')?;
                Some((y.trim().parse().ok()?, c.trim().parse().ok()?))
            })
            .collect();
        articles.push(Article {
            id,
            title: cell(col("title")),
            abstract_text: cell(col("abstract")),
            keywords: list(col("keywords")),
            authors: list(col("authors")),
            affiliations,
            journal: cell(col("journal")),
            field_label: cell(col("field")),
            year: cell(col("year")).trim().parse().unwrap_or(0),
            subject_areas: list(col("subject_areas")),
            citations_per_year,
            total_citations: cell(col("total_citations")).trim().parse().unwrap_or(0),
            references: list(col("references")),
        });
        lines.push(lineno);
    }

    if edges_path.exists() {
        let mut by_id: HashMap<String, usize> = articles
            .iter()
            .enumerate()
            .map(|(i, a)| (a.id.clone(), i))
            .collect();
        for (src, dst) in read_edge_list(&edges_path)? {
            match by_id.get_mut(&src) {
                Some(&mut i) => {
                    if !articles[i].references.contains(&dst) {
                        articles[i].references.push(dst);
                    }
                }
                None => warnings.unknown_edge_sources += 1,
            }
        }
    }

    Corpus::new(articles, &lines, warnings)
}

/// Read a `src,dst` edge list CSV. A header row is optional.
pub fn read_edge_list(path: &Path) -> Result<Vec<(String, String)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut edges = Vec::new();
    for (recno, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: recno + 1,
            msg: e.to_string(),
        })?;
        let src = record.get(0).unwrap_or("").trim().to_string();
        let dst = record.get(1).unwrap_or("").trim().to_string();
        if recno == 0 && src == "src" && dst == "dst" {
            continue;
        }
        if src.is_empty() || dst.is_empty() {
            return Err(Error::Parse {
                line: recno + 1,
                msg: "edge rows need non-empty src and dst".into(),
            });
        }
        edges.push((src, dst));
    }
    Ok(edges)
}
