//! Feature-matrix assembly for the graph encoders.
//!
//! Blocks, in column order: first-author affiliation one-hot, first-author
//! one-hot, standardized publication year, subject-area dummies, topic
//! distribution, text embedding, and the 11-column cumulative-citation
//! vector. Any block can be dropped, which is what the ablation harness does.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::Range;

use super::{Article, Corpus};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Cumulative citations at one to ten years plus the total count.
pub const CITATION_COLUMNS: usize = 11;

/// Named feature blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureBlock {
    Affiliation,
    FirstAuthor,
    Year,
    SubjectArea,
    TopicDistribution,
    TextEmbedding,
    Citations,
}

impl FeatureBlock {
    pub const ALL: [FeatureBlock; 7] = [
        FeatureBlock::Affiliation,
        FeatureBlock::FirstAuthor,
        FeatureBlock::Year,
        FeatureBlock::SubjectArea,
        FeatureBlock::TopicDistribution,
        FeatureBlock::TextEmbedding,
        FeatureBlock::Citations,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureBlock::Affiliation => "affiliation",
            FeatureBlock::FirstAuthor => "first-author",
            FeatureBlock::Year => "year",
            FeatureBlock::SubjectArea => "subject-area",
            FeatureBlock::TopicDistribution => "topic-distribution",
            FeatureBlock::TextEmbedding => "text-embedding",
            FeatureBlock::Citations => "citations-1..10",
        }
    }
}

impl fmt::Display for FeatureBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FeatureBlock {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "affiliation" => Ok(FeatureBlock::Affiliation),
            "first-author" => Ok(FeatureBlock::FirstAuthor),
            "year" => Ok(FeatureBlock::Year),
            "subject-area" => Ok(FeatureBlock::SubjectArea),
            "topic-distribution" => Ok(FeatureBlock::TopicDistribution),
            "text-embedding" => Ok(FeatureBlock::TextEmbedding),
            "citations-1..10" | "citations" => Ok(FeatureBlock::Citations),
            other => Err(Error::UnknownFeatureGroup(other.to_string())),
        }
    }
}

/// Assembly options.
#[derive(Debug, Clone)]
pub struct FeatureConfig {
    /// Keep this many distinct first-author affiliation ids; the rest share
    /// an `other` bucket.
    pub top_n_affiliations: usize,
    /// Same, for first-author ids.
    pub top_n_authors: usize,
    /// Observation horizon for citation histories; defaults to the latest
    /// publication year in the corpus.
    pub horizon: Option<i32>,
    /// Blocks to include.
    pub blocks: BTreeSet<FeatureBlock>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            top_n_affiliations: 1000,
            top_n_authors: 1000,
            horizon: None,
            blocks: FeatureBlock::ALL.into_iter().collect(),
        }
    }
}

impl FeatureConfig {
    pub fn without(mut self, block: FeatureBlock) -> Self {
        self.blocks.remove(&block);
        self
    }
}

/// Mean year-over-year growth of cumulative citations, per year offset.
#[derive(Debug, Clone)]
pub struct CohortRatios {
    pub ratios: [f64; 10],
}

fn cumulative_at(article: &Article, t: i32) -> u64 {
    let cutoff = article.year + t;
    article
        .citations_per_year
        .iter()
        .filter(|(&y, _)| y <= cutoff)
        .map(|(_, &c)| c)
        .sum()
}

fn observable(article: &Article, t: i32, horizon: i32) -> bool {
    article.year + t <= horizon
}

/// Mean of `c(t)/c(t-1)` over articles whose year `t` is observed, zero
/// denominators skipped. Offsets with no usable article default to 1.0.
pub fn cohort_growth_ratios(corpus: &Corpus, horizon: i32) -> CohortRatios {
    let mut ratios = [1.0f64; 10];
    for t in 1..=10i32 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for article in corpus.articles() {
            if !observable(article, t, horizon) {
                continue;
            }
            let prev = cumulative_at(article, t - 1);
            if prev == 0 {
                continue;
            }
            sum += cumulative_at(article, t) as f64 / prev as f64;
            count += 1;
        }
        if count > 0 {
            ratios[(t - 1) as usize] = sum / count as f64;
        } else {
            log::warn!("no observed cohort for year offset {t}; growth ratio defaults to 1.0");
        }
    }
    CohortRatios { ratios }
}

fn round_half_up(x: f64) -> u64 {
    (x + 0.5).floor().max(0.0) as u64
}

/// Cumulative citations at one to ten years plus the total. Years beyond the
/// horizon are imputed multiplicatively from the previous year and the
/// cohort growth ratio, rounded half-up.
pub fn impute_cumulative_citations(
    article: &Article,
    horizon: i32,
    ratios: &CohortRatios,
) -> [u64; CITATION_COLUMNS] {
    let mut out = [0u64; CITATION_COLUMNS];
    let mut prev = cumulative_at(article, 0);
    for t in 1..=10i32 {
        let value = if observable(article, t, horizon) {
            cumulative_at(article, t)
        } else {
            round_half_up(prev as f64 * ratios.ratios[(t - 1) as usize])
        };
        out[(t - 1) as usize] = value;
        prev = value;
    }
    out[10] = article.total_citations;
    out
}

/// Dense feature matrix with named, non-overlapping column blocks.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    data: DenseMatrix<f64>,
    blocks: Vec<(FeatureBlock, Range<usize>)>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    pub fn width(&self) -> usize {
        self.data.cols()
    }

    pub fn data(&self) -> &DenseMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DenseMatrix<f64> {
        self.data
    }

    pub fn blocks(&self) -> &[(FeatureBlock, Range<usize>)] {
        &self.blocks
    }

    pub fn block_width(&self, block: FeatureBlock) -> Option<usize> {
        self.blocks
            .iter()
            .find(|(b, _)| *b == block)
            .map(|(_, r)| r.len())
    }

    /// Copy of the matrix with the given blocks' columns removed.
    pub fn without_blocks(&self, drop: &[FeatureBlock]) -> FeatureMatrix {
        let keep: Vec<&(FeatureBlock, Range<usize>)> = self
            .blocks
            .iter()
            .filter(|(b, _)| !drop.contains(b))
            .collect();
        let width: usize = keep.iter().map(|(_, r)| r.len()).sum();
        let mut data = DenseMatrix::zeros(self.rows(), width);
        let mut blocks = Vec::with_capacity(keep.len());
        let mut cursor = 0usize;
        for (block, range) in keep {
            for i in 0..self.rows() {
                for (offset, j) in range.clone().enumerate() {
                    data.set(i, cursor + offset, self.data.get(i, j));
                }
            }
            blocks.push((*block, cursor..cursor + range.len()));
            cursor += range.len();
        }
        FeatureMatrix { data, blocks }
    }
}

/// Top-N category list by descending frequency, ties broken by name. Returns
/// the category order; everything else maps to the trailing `other` column.
fn top_categories<'a, I: Iterator<Item = &'a str>>(values: I, top_n: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values {
        if !v.is_empty() {
            *counts.entry(v).or_insert(0) += 1;
        }
    }
    let mut order: Vec<(&str, usize)> = counts.into_iter().collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    order
        .into_iter()
        .take(top_n)
        .map(|(v, _)| v.to_string())
        .collect()
}

fn first_affiliation(article: &Article) -> &str {
    article.affiliations.first().map_or("", |a| a.id.as_str())
}

fn first_author(article: &Article) -> &str {
    article.authors.first().map_or("", |a| a.as_str())
}

/// Concatenate the configured feature blocks for every article.
///
/// `text` and `topics` carry one row per article in corpus order; they are
/// only consulted when the corresponding block is enabled.
pub fn assemble_features(
    corpus: &Corpus,
    text: Option<&DenseMatrix<f64>>,
    topics: Option<&DenseMatrix<f64>>,
    cfg: &FeatureConfig,
) -> Result<FeatureMatrix> {
    let n = corpus.len();
    for (name, input) in [("text-embedding", text), ("topic-distribution", topics)] {
        if let Some(m) = input {
            if m.rows() != n {
                return Err(Error::BlockDimension {
                    block: name.to_string(),
                    expected: n,
                    got: m.rows(),
                });
            }
        }
    }

    // Column generators per block, evaluated lazily in block order.
    let mut columns: Vec<(FeatureBlock, Vec<Vec<f64>>)> = Vec::new();

    if cfg.blocks.contains(&FeatureBlock::Affiliation) {
        let cats = top_categories(
            corpus.articles().iter().map(first_affiliation),
            cfg.top_n_affiliations,
        );
        columns.push((
            FeatureBlock::Affiliation,
            one_hot_rows(corpus, &cats, first_affiliation),
        ));
    }
    if cfg.blocks.contains(&FeatureBlock::FirstAuthor) {
        let cats = top_categories(
            corpus.articles().iter().map(first_author),
            cfg.top_n_authors,
        );
        columns.push((
            FeatureBlock::FirstAuthor,
            one_hot_rows(corpus, &cats, first_author),
        ));
    }
    if cfg.blocks.contains(&FeatureBlock::Year) {
        let years: Vec<f64> = corpus.articles().iter().map(|a| a.year as f64).collect();
        let mean = years.iter().sum::<f64>() / n.max(1) as f64;
        let var = years.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n.max(1) as f64;
        let sd = var.sqrt();
        let rows = years
            .iter()
            .map(|y| vec![if sd > 0.0 { (y - mean) / sd } else { 0.0 }])
            .collect();
        columns.push((FeatureBlock::Year, rows));
    }
    if cfg.blocks.contains(&FeatureBlock::SubjectArea) {
        let mut areas: BTreeSet<&str> = BTreeSet::new();
        for article in corpus.articles() {
            areas.extend(article.subject_areas.iter().map(String::as_str));
        }
        let areas: Vec<&str> = areas.into_iter().collect();
        let rows = corpus
            .articles()
            .iter()
            .map(|article| {
                areas
                    .iter()
                    .map(|area| {
                        if article.subject_areas.iter().any(|s| s == area) {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        columns.push((FeatureBlock::SubjectArea, rows));
    }
    if cfg.blocks.contains(&FeatureBlock::TopicDistribution) {
        match topics {
            Some(m) => columns.push((
                FeatureBlock::TopicDistribution,
                (0..n).map(|i| m.row(i).to_vec()).collect(),
            )),
            None => log::warn!("topic-distribution block enabled but no topic matrix given; skipping"),
        }
    }
    if cfg.blocks.contains(&FeatureBlock::TextEmbedding) {
        match text {
            Some(m) => columns.push((
                FeatureBlock::TextEmbedding,
                (0..n).map(|i| m.row(i).to_vec()).collect(),
            )),
            None => log::warn!("text-embedding block enabled but no text matrix given; skipping"),
        }
    }
    if cfg.blocks.contains(&FeatureBlock::Citations) {
        let horizon = cfg
            .horizon
            .or_else(|| corpus.max_year())
            .unwrap_or(1900);
        let ratios = cohort_growth_ratios(corpus, horizon);
        let rows = corpus
            .articles()
            .iter()
            .map(|article| {
                impute_cumulative_citations(article, horizon, &ratios)
                    .into_iter()
                    .map(|c| c as f64)
                    .collect()
            })
            .collect();
        columns.push((FeatureBlock::Citations, rows));
    }

    let width: usize = columns
        .iter()
        .map(|(_, rows)| rows.first().map_or(0, Vec::len))
        .sum();
    let mut data = DenseMatrix::zeros(n, width);
    let mut blocks = Vec::with_capacity(columns.len());
    let mut cursor = 0usize;
    for (block, rows) in columns {
        let w = rows.first().map_or(0, Vec::len);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                data.set(i, cursor + j, v);
            }
        }
        blocks.push((block, cursor..cursor + w));
        cursor += w;
    }
    if !data.is_finite() {
        return Err(Error::InvalidArgument(
            "feature matrix contains non-finite values".into(),
        ));
    }
    Ok(FeatureMatrix { data, blocks })
}

fn one_hot_rows(
    corpus: &Corpus,
    categories: &[String],
    value: impl Fn(&Article) -> &str,
) -> Vec<Vec<f64>> {
    let index: BTreeMap<&str, usize> = categories
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let width = categories.len() + 1; // trailing `other`
    corpus
        .articles()
        .iter()
        .map(|article| {
            let mut row = vec![0.0; width];
            let v = value(article);
            match index.get(v) {
                Some(&i) if !v.is_empty() => row[i] = 1.0,
                _ => row[width - 1] = 1.0,
            }
            row
        })
        .collect()
}
