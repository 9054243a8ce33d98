//! Vocabulary with document-frequency bounds.

use std::collections::BTreeMap;

use super::preprocess::TokenList;
use crate::error::{Error, Result};

/// Token vocabulary: dense ids in lexicographic order plus per-token
/// document frequencies.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: BTreeMap<String, usize>,
    document_frequency: Vec<usize>,
    pub n_documents: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn document_frequency(&self, id: usize) -> usize {
        self.document_frequency[id]
    }
}

/// Keep tokens appearing in at least `min_df` documents and at most
/// `max_df * n` documents. Ids are dense and lexicographically ordered.
pub fn build_vocabulary(documents: &[TokenList], min_df: usize, max_df: f64) -> Result<Vocabulary> {
    if !(0.0 < max_df && max_df <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "max_df must be in (0, 1], got {max_df}"
        )));
    }
    if min_df < 1 {
        return Err(Error::InvalidArgument("min_df must be at least 1".into()));
    }
    let n = documents.len();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in documents {
        let mut seen: Vec<&str> = doc.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for token in seen {
            *df.entry(token).or_insert(0) += 1;
        }
    }
    let cap = max_df * n as f64;
    let mut tokens = Vec::new();
    let mut document_frequency = Vec::new();
    for (token, count) in df {
        if count >= min_df && count as f64 <= cap {
            tokens.push(token.to_string());
            document_frequency.push(count);
        }
    }
    if tokens.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let ids = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Ok(Vocabulary {
        tokens,
        ids,
        document_frequency,
        n_documents: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs_with_token_in(k: usize, n: usize, token: &str) -> Vec<TokenList> {
        (0..n)
            .map(|i| {
                let mut doc = vec![format!("filler{i}"), "common".to_string()];
                if i < k {
                    doc.push(token.to_string());
                }
                doc
            })
            .collect()
    }

    #[test]
    fn token_below_min_df_is_excluded() {
        let docs = docs_with_token_in(4, 100, "rare");
        let vocab = build_vocabulary(&docs, 5, 1.0).unwrap();
        assert!(vocab.id("rare").is_none());
    }

    #[test]
    fn no_op_bounds_keep_every_token() {
        let docs = vec![
            vec!["a".to_string(), "b".to_string()],
            vec!["b".to_string(), "c".to_string()],
        ];
        let vocab = build_vocabulary(&docs, 1, 1.0).unwrap();
        assert_eq!(vocab.len(), 3);
        assert_eq!(vocab.token(0), "a");
        assert_eq!(vocab.token(2), "c");
    }

    #[test]
    fn token_above_max_df_is_excluded() {
        let docs = docs_with_token_in(70, 100, "everywhere");
        let vocab = build_vocabulary(&docs, 1, 0.65).unwrap();
        assert!(vocab.id("everywhere").is_none());
        // 65 of 100 documents sits exactly on the cap and stays.
        let docs = docs_with_token_in(65, 100, "borderline");
        let vocab = build_vocabulary(&docs, 1, 0.65).unwrap();
        assert!(vocab.id("borderline").is_some());
    }

    #[test]
    fn df_bounds_hold_for_every_retained_token() {
        let docs = docs_with_token_in(30, 60, "medium");
        let vocab = build_vocabulary(&docs, 2, 0.6).unwrap();
        for id in 0..vocab.len() {
            let df = vocab.document_frequency(id);
            assert!(df >= 2, "token {} df {df}", vocab.token(id));
            assert!(df as f64 <= 0.6 * 60.0);
        }
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        let docs = vec![vec!["solo".to_string()]];
        assert!(matches!(
            build_vocabulary(&docs, 2, 1.0),
            Err(Error::EmptyVocabulary)
        ));
    }
}
