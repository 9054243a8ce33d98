//! Document-term matrix with binary, count, or tf-idf weighting.
//!
//! tf-idf is `tf(i,j) * ln(n / df(j))` with raw term counts, no smoothing
//! and no row normalization, so expected values in tests are exact.

use crate::corpus::{TokenList, Vocabulary};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Binary,
    Count,
    TfIdf,
}

/// Sparse documents-by-vocabulary matrix.
#[derive(Debug, Clone)]
pub struct DocumentTermMatrix {
    pub matrix: CsrMatrix<f64>,
    pub weighting: Weighting,
}

impl DocumentTermMatrix {
    pub fn n_documents(&self) -> usize {
        self.matrix.rows()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.matrix.cols()
    }
}

/// Build the DTM for preprocessed documents over a fixed vocabulary.
pub fn build_dtm(
    documents: &[TokenList],
    vocab: &Vocabulary,
    weighting: Weighting,
) -> DocumentTermMatrix {
    let n = documents.len();
    let mut triplets = Vec::new();
    for (d, doc) in documents.iter().enumerate() {
        let mut counts: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
        for token in doc {
            if let Some(j) = vocab.id(token) {
                *counts.entry(j).or_insert(0) += 1;
            }
        }
        for (j, count) in counts {
            let value = match weighting {
                Weighting::Binary => 1.0,
                Weighting::Count => count as f64,
                Weighting::TfIdf => {
                    let df = vocab.document_frequency(j) as f64;
                    count as f64 * (n as f64 / df).ln()
                }
            };
            triplets.push((d, j, value));
        }
    }
    DocumentTermMatrix {
        matrix: CsrMatrix::from_triplets(n, vocab.len(), triplets),
        weighting,
    }
}
