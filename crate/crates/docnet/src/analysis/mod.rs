//! Embedding analysis: group similarity, collaboration classes, citation
//! quartile norms, hierarchical (mean-vector) aggregation, and pivot-axis
//! projection.

use std::collections::BTreeMap;
use std::fmt;

use crate::corpus::Article;
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// Cosine similarity of two non-zero vectors.
pub fn cosine<S: Scalar>(u: &[S], v: &[S]) -> Result<S> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch {
            op: "cosine",
            details: format!("{} vs {}", u.len(), v.len()),
        });
    }
    let dot: S = u.iter().zip(v).map(|(&a, &b)| a * b).sum();
    let nu: S = u.iter().map(|&a| a * a).sum::<S>().sqrt();
    let nv: S = v.iter().map(|&a| a * a).sum::<S>().sqrt();
    if nu == S::zero() || nv == S::zero() {
        return Err(Error::ZeroVector);
    }
    Ok(dot / (nu * nv))
}

/// Collaboration class of an article, by first-author metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CollaborationClass {
    /// Single author.
    A,
    /// Several authors, one institution.
    B,
    /// Several institutions, one country.
    C,
    /// Several countries.
    D,
    /// Affiliation data missing; excluded from tables.
    Unknown,
}

impl fmt::Display for CollaborationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CollaborationClass::A => "A",
            CollaborationClass::B => "B",
            CollaborationClass::C => "C",
            CollaborationClass::D => "D",
            CollaborationClass::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

/// Classify an article's collaboration pattern.
pub fn collaboration_class(article: &Article) -> CollaborationClass {
    if article.authors.len() == 1 {
        return CollaborationClass::A;
    }
    if article.authors.is_empty() {
        return CollaborationClass::Unknown;
    }
    let mut institutions: Vec<&str> = article
        .affiliations
        .iter()
        .map(|a| a.id.as_str())
        .filter(|s| !s.is_empty())
        .collect();
    institutions.sort_unstable();
    institutions.dedup();
    if institutions.is_empty() {
        return CollaborationClass::Unknown;
    }
    let mut countries: Vec<&str> = article
        .affiliations
        .iter()
        .map(|a| a.country.as_str())
        .filter(|s| !s.is_empty())
        .collect();
    countries.sort_unstable();
    countries.dedup();
    if countries.len() >= 2 {
        CollaborationClass::D
    } else if institutions.len() >= 2 {
        CollaborationClass::C
    } else {
        CollaborationClass::B
    }
}

/// Mean pairwise cosine between groups of rows. The diagonal case (same
/// group on both sides) excludes self-pairs; a singleton group therefore has
/// no within-group value.
pub fn group_mean_cosine<S: Scalar>(
    embedding: &DenseMatrix<S>,
    row_groups: &[Vec<usize>],
    col_groups: &[Vec<usize>],
) -> Result<Vec<Vec<Option<S>>>> {
    for group in row_groups.iter().chain(col_groups) {
        if group.is_empty() {
            return Err(Error::EmptyGroup("group with no members".into()));
        }
    }
    let mut out = Vec::with_capacity(row_groups.len());
    for g in row_groups {
        let mut row = Vec::with_capacity(col_groups.len());
        for h in col_groups {
            let mut sum = S::zero();
            let mut count = 0usize;
            for &i in g {
                for &j in h {
                    if i == j {
                        continue;
                    }
                    sum += cosine(embedding.row(i), embedding.row(j))?;
                    count += 1;
                }
            }
            row.push(if count == 0 {
                None
            } else {
                Some(sum / S::from_f64_lossy(count as f64))
            });
        }
        out.push(row);
    }
    Ok(out)
}

/// One row of the citation-group norm table.
#[derive(Debug, Clone, PartialEq)]
pub struct CitationGroupRow {
    pub name: &'static str,
    pub count: usize,
    pub mean_norm: Option<f64>,
}

pub const CITATION_GROUP_NAMES: [&str; 5] = ["zero", "lower", "mid-low", "mid-high", "high"];

/// Type-7 (linear interpolation) quantile of sorted values.
fn quantile_sorted(sorted: &[u64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0] as f64;
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] as f64 * (1.0 - frac) + sorted[hi] as f64 * frac
}

/// Mean embedding-row norm per citation group: the zero-citation group plus
/// the quartiles of the non-zero distribution. Boundary ties fall to the
/// lower group.
pub fn frobenius_by_citation_group<S: Scalar>(
    embedding: &DenseMatrix<S>,
    total_citations: &[u64],
) -> Result<Vec<CitationGroupRow>> {
    if embedding.rows() != total_citations.len() {
        return Err(Error::ShapeMismatch {
            op: "frobenius_by_citation_group",
            details: format!(
                "{} rows vs {} citation counts",
                embedding.rows(),
                total_citations.len()
            ),
        });
    }
    let mut nonzero: Vec<u64> = total_citations.iter().copied().filter(|&c| c > 0).collect();
    nonzero.sort_unstable();
    let assign = |c: u64| -> usize {
        if c == 0 || nonzero.is_empty() {
            return 0;
        }
        let q25 = quantile_sorted(&nonzero, 0.25);
        let q50 = quantile_sorted(&nonzero, 0.50);
        let q75 = quantile_sorted(&nonzero, 0.75);
        let v = c as f64;
        if v <= q25 {
            1
        } else if v <= q50 {
            2
        } else if v <= q75 {
            3
        } else {
            4
        }
    };
    let mut sums = [0f64; 5];
    let mut counts = [0usize; 5];
    for (i, &c) in total_citations.iter().enumerate() {
        let g = assign(c);
        sums[g] += embedding.row_norm(i).as_f64();
        counts[g] += 1;
    }
    let rows = CITATION_GROUP_NAMES
        .iter()
        .enumerate()
        .map(|(g, name)| CitationGroupRow {
            name,
            count: counts[g],
            mean_norm: (counts[g] > 0).then(|| sums[g] / counts[g] as f64),
        })
        .collect();
    Ok(rows)
}

/// Mean vector per label, with member counts. Rows labeled `unknown` are
/// excluded.
#[derive(Debug, Clone)]
pub struct GroupEmbedding<S: Scalar> {
    labels: Vec<String>,
    means: DenseMatrix<S>,
    counts: Vec<usize>,
}

impl<S: Scalar> GroupEmbedding<S> {
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn means(&self) -> &DenseMatrix<S> {
        &self.means
    }

    pub fn count(&self, g: usize) -> usize {
        self.counts[g]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn vector_of(&self, label: &str) -> Option<&[S]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|g| self.means.row(g))
    }
}

/// Arithmetic mean of the rows sharing each label, in sorted label order.
pub fn aggregate_embedding<S: Scalar>(
    embedding: &DenseMatrix<S>,
    labels: &[String],
) -> Result<GroupEmbedding<S>> {
    if embedding.rows() != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "aggregate_embedding",
            details: format!("{} rows vs {} labels", embedding.rows(), labels.len()),
        });
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, label) in labels.iter().enumerate() {
        if label != "unknown" && !label.is_empty() {
            members.entry(label).or_default().push(i);
        }
    }
    if members.is_empty() {
        return Err(Error::EmptyGroup("no labeled rows".into()));
    }
    let d = embedding.cols();
    let mut means = DenseMatrix::zeros(members.len(), d);
    let mut out_labels = Vec::with_capacity(members.len());
    let mut counts = Vec::with_capacity(members.len());
    for (g, (label, idx)) in members.into_iter().enumerate() {
        let inv = S::from_f64_lossy(1.0 / idx.len() as f64);
        for &i in &idx {
            let src = embedding.row(i);
            let dst = means.row_mut(g);
            for (dv, &sv) in dst.iter_mut().zip(src) {
                *dv += sv * inv;
            }
        }
        out_labels.push(label.to_string());
        counts.push(idx.len());
    }
    Ok(GroupEmbedding {
        labels: out_labels,
        means,
        counts,
    })
}

/// For each label, the mean cosine similarity to every other label's vector.
/// Labels with a zero mean vector are skipped with a warning.
pub fn mean_similarity_to_others<S: Scalar>(
    groups: &GroupEmbedding<S>,
) -> Result<Vec<(String, S)>> {
    if groups.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two groups to compare".into(),
        ));
    }
    let usable: Vec<usize> = (0..groups.len())
        .filter(|&g| {
            let ok = groups.means.row(g).iter().any(|&x| x != S::zero());
            if !ok {
                log::warn!("group `{}` has a zero mean vector; skipped", groups.labels[g]);
            }
            ok
        })
        .collect();
    let mut out = Vec::with_capacity(usable.len());
    for &g in &usable {
        let mut sum = S::zero();
        let mut count = 0usize;
        for &h in &usable {
            if g == h {
                continue;
            }
            sum += cosine(groups.means.row(g), groups.means.row(h))?;
            count += 1;
        }
        if count > 0 {
            out.push((groups.labels[g].clone(), sum / S::from_f64_lossy(count as f64)));
        }
    }
    Ok(out)
}

/// Project every group onto the axis from pivot `b` to pivot `a`: the cosine
/// of each group vector with `v_a - v_b`. Positive values sit at the `a`
/// end.
pub fn pivot_axis_projection<S: Scalar>(
    groups: &GroupEmbedding<S>,
    pivot_a: &str,
    pivot_b: &str,
) -> Result<Vec<(String, S)>> {
    if pivot_a == pivot_b {
        return Err(Error::IdenticalPivots);
    }
    let va = groups
        .vector_of(pivot_a)
        .ok_or_else(|| Error::UnknownLabel(pivot_a.to_string()))?;
    let vb = groups
        .vector_of(pivot_b)
        .ok_or_else(|| Error::UnknownLabel(pivot_b.to_string()))?;
    let axis: Vec<S> = va.iter().zip(vb).map(|(&a, &b)| a - b).collect();
    if axis.iter().all(|&x| x == S::zero()) {
        return Err(Error::ZeroVector);
    }
    let mut out = Vec::with_capacity(groups.len());
    for (g, label) in groups.labels.iter().enumerate() {
        out.push((label.clone(), cosine(groups.means.row(g), &axis)?));
    }
    Ok(out)
}
