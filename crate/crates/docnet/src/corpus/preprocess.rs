//! Text preprocessing.
//!
//! The model text of an article is the title three times, each keyword three
//! times, and the abstract once. The token pipeline is: lowercase, drop
//! stopwords, replace all-digit tokens by the literal `num`, stem, then
//! replace each stem by the most frequent surface form of that stem across
//! the whole corpus.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::porter::porter_stem;
use super::stopwords::ENGLISH_STOPWORDS;
use super::{Article, Corpus};

/// The digit placeholder token.
pub const NUMBER_TOKEN: &str = "num";

/// Normalized token sequence of one article.
pub type TokenList = Vec<String>;

/// Stopword list, trademark scrub list, and the corpus-wide stem table.
#[derive(Debug, Clone)]
pub struct PreprocessConfig {
    pub stopwords: HashSet<String>,
    /// Journal boilerplate phrases removed from raw text before tokenizing.
    pub trademarks: Vec<String>,
    /// stem -> most frequent surface form with that stem.
    pub stem_table: HashMap<String, String>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            stopwords: ENGLISH_STOPWORDS.iter().map(|s| s.to_string()).collect(),
            trademarks: Vec::new(),
            stem_table: HashMap::new(),
        }
    }
}

/// Lowercase and split into alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn scrub_trademarks(text: &str, trademarks: &[String]) -> String {
    let mut out = text.to_string();
    for phrase in trademarks {
        if phrase.is_empty() {
            continue;
        }
        let lower = out.to_lowercase();
        let needle = phrase.to_lowercase();
        let mut scrubbed = String::with_capacity(out.len());
        let mut cursor = 0;
        while let Some(pos) = lower[cursor..].find(&needle) {
            let start = cursor + pos;
            scrubbed.push_str(&out[cursor..start]);
            scrubbed.push(' ');
            cursor = start + needle.len();
        }
        scrubbed.push_str(&out[cursor..]);
        out = scrubbed;
    }
    out
}

/// Tokens surviving stopword removal and digit replacement, before stemming.
fn surface_tokens(text: &str, cfg: &PreprocessConfig) -> Vec<String> {
    tokenize(&scrub_trademarks(text, &cfg.trademarks))
        .into_iter()
        .filter(|t| !cfg.stopwords.contains(t))
        .map(|t| {
            if t.bytes().all(|b| b.is_ascii_digit()) {
                NUMBER_TOKEN.to_string()
            } else {
                t
            }
        })
        .collect()
}

/// The weighted raw text of an article: 3x title, 3x each keyword, abstract.
fn weighted_sections(article: &Article) -> Vec<(&str, usize)> {
    let mut sections = vec![(article.title.as_str(), 3)];
    for kw in &article.keywords {
        sections.push((kw.as_str(), 3));
    }
    sections.push((article.abstract_text.as_str(), 1));
    sections
}

/// Count surface forms per stem over the whole corpus and keep the most
/// frequent one (ties broken lexicographically). Counts use the same
/// triplication weighting the models see.
pub fn build_stem_table(corpus: &Corpus, cfg: &PreprocessConfig) -> HashMap<String, String> {
    let mut per_stem: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for article in corpus.articles() {
        for (text, weight) in weighted_sections(article) {
            for token in surface_tokens(text, cfg) {
                let stem = porter_stem(&token);
                *per_stem.entry(stem).or_default().entry(token).or_insert(0) += weight;
            }
        }
    }
    per_stem
        .into_iter()
        .map(|(stem, forms)| {
            let best = forms
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                .map(|(form, _)| form)
                .expect("stem seen at least once");
            (stem, best)
        })
        .collect()
}

/// Build the full preprocessing configuration for a corpus, including the
/// stem table.
pub fn build_preprocess_config(corpus: &Corpus, trademarks: Vec<String>) -> PreprocessConfig {
    let mut cfg = PreprocessConfig {
        trademarks,
        ..PreprocessConfig::default()
    };
    cfg.stem_table = build_stem_table(corpus, &cfg);
    cfg
}

fn normalize_token(token: String, cfg: &PreprocessConfig) -> String {
    let stem = porter_stem(&token);
    cfg.stem_table.get(&stem).cloned().unwrap_or(token)
}

/// Produce the normalized token sequence of one article.
pub fn preprocess(article: &Article, cfg: &PreprocessConfig) -> TokenList {
    let mut tokens = Vec::new();
    for (text, repeats) in weighted_sections(article) {
        let section: Vec<String> = surface_tokens(text, cfg)
            .into_iter()
            .map(|t| normalize_token(t, cfg))
            .collect();
        for _ in 0..repeats {
            tokens.extend(section.iter().cloned());
        }
    }
    tokens
}

/// Preprocess every article; returns token lists in corpus index order.
pub fn preprocess_corpus(corpus: &Corpus, cfg: &PreprocessConfig) -> Vec<TokenList> {
    corpus.articles().iter().map(|a| preprocess(a, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;

    fn article(id: &str, title: &str, keywords: &[&str], abstract_text: &str) -> Article {
        Article {
            id: id.to_string(),
            title: title.to_string(),
            keywords: keywords.iter().map(|s| s.to_string()).collect(),
            abstract_text: abstract_text.to_string(),
            year: 2010,
            ..Article::default()
        }
    }

    fn toy_corpus(extra_abstract: &str) -> Corpus {
        Corpus::from_articles(vec![
            article("A1", "Citation Analysis", &["science"], "We study 5 journals."),
            article("A2", "", &[], extra_abstract),
        ])
        .unwrap()
    }

    #[test]
    fn triplication_and_pipeline() {
        // "journal" outnumbers "journals" corpus-wide.
        let corpus = toy_corpus("journal journal journal");
        let cfg = build_preprocess_config(&corpus, vec![]);
        let tokens = preprocess(corpus.article(0), &cfg);
        let expect: Vec<String> = ["citation", "analysis"]
            .repeat(3)
            .into_iter()
            .chain(["science"].repeat(3))
            .chain(["study", "num", "journal"])
            .map(str::to_string)
            .collect();
        assert_eq!(tokens, expect);
    }

    #[test]
    fn stem_table_follows_corpus_majority() {
        // Same input, but now "journals" dominates.
        let corpus = toy_corpus("journals journals journals");
        let cfg = build_preprocess_config(&corpus, vec![]);
        let tokens = preprocess(corpus.article(0), &cfg);
        assert_eq!(tokens.last().map(String::as_str), Some("journals"));
    }

    #[test]
    fn all_stopword_abstract_leaves_title_and_keywords() {
        let corpus = Corpus::from_articles(vec![article(
            "A1",
            "Citation Analysis",
            &["science"],
            "the of and is",
        )])
        .unwrap();
        let cfg = build_preprocess_config(&corpus, vec![]);
        let tokens = preprocess(corpus.article(0), &cfg);
        assert_eq!(tokens.len(), 9);
        assert!(tokens.iter().all(|t| t != "the"));
    }

    #[test]
    fn empty_text_yields_empty_list() {
        let corpus = Corpus::from_articles(vec![article("A1", "", &[], "")]).unwrap();
        let cfg = build_preprocess_config(&corpus, vec![]);
        assert!(preprocess(corpus.article(0), &cfg).is_empty());
    }

    #[test]
    fn trademark_phrases_are_scrubbed() {
        let mut a = article("A1", "Science Mapping", &[], "Copyright Acme Press. We map.");
        a.keywords.clear();
        let corpus = Corpus::from_articles(vec![a]).unwrap();
        let cfg = build_preprocess_config(&corpus, vec!["Copyright Acme Press".into()]);
        let tokens = preprocess(corpus.article(0), &cfg);
        assert!(!tokens.contains(&"acme".to_string()));
        assert!(!tokens.contains(&"copyright".to_string()));
        // "map" shares a stem with the triplicated title token "mapping",
        // which wins the surface-form vote.
        assert!(tokens.contains(&"mapping".to_string()));
    }

    #[test]
    fn title_tokens_appear_exactly_three_times() {
        let corpus = toy_corpus("journal journal journal");
        let cfg = build_preprocess_config(&corpus, vec![]);
        let tokens = preprocess(corpus.article(0), &cfg);
        let count = tokens.iter().filter(|t| *t == "citation").count();
        assert_eq!(count, 3);
    }

    #[test]
    fn preprocess_is_idempotent_on_its_output() {
        let corpus = toy_corpus("journal journal journals");
        let cfg = build_preprocess_config(&corpus, vec![]);
        let first = preprocess(corpus.article(0), &cfg);
        let rejoined = article("B1", "", &[], &first.join(" "));
        let second = preprocess(&rejoined, &cfg);
        assert_eq!(first, second);
    }
}
