//! Corpus data model: documents, queries, benchmarks, the synonym
//! vocabulary and its embedding space, tokenization and keyword
//! extraction.

mod generate;
mod jsonl;
mod lexicon;

pub use generate::{generate_benchmark, target_encoder_from, BenchSpec, GeneratedBench};
pub use jsonl::{
    atomic_write_bytes, load_benchmark, load_embeddings, load_synonyms, save_benchmark,
    BenchManifest, BENCH_SCHEMA_VERSION,
};

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};

/// Fixed stopword list, version `stopwords/v1`. Keyword extraction and
/// substitution-position eligibility both depend on it, so it is pinned
/// in-repo rather than configurable.
pub const STOPWORDS: [&str; 50] = [
    "a", "an", "and", "are", "as", "at", "be", "because", "but", "by", "can", "do", "for", "from",
    "had", "has", "have", "how", "if", "in", "into", "is", "it", "its", "many", "more", "most",
    "not", "of", "on", "or", "over", "people", "should", "so", "some", "that", "the", "their",
    "there", "they", "this", "to", "view", "was", "were", "what", "when", "which", "with",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Lowercase, strip punctuation, split on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Which question-answering scenario a benchmark models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Factual,
    Stance,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scenario::Factual => write!(f, "factual"),
            Scenario::Stance => write!(f, "stance"),
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "factual" => Ok(Scenario::Factual),
            "stance" => Ok(Scenario::Stance),
            other => Err(Error::InvalidArgument(format!(
                "unknown scenario {other:?}"
            ))),
        }
    }
}

/// A corpus record.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Document {
            id: id.into(),
            text,
            tokens,
        }
    }
}

/// A benchmark query together with the adversary's goal for it.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
    /// Query keywords K_q (stopwords removed, ranked by idf).
    pub keywords: Vec<String>,
    pub gold_answer: String,
    /// The answer the adversary wants the system to produce.
    pub desired_answer: String,
    pub scenario: Scenario,
}

/// Inverse document frequencies over a corpus. Unseen tokens get the
/// maximum idf, `ln(N)`.
#[derive(Debug, Clone)]
pub struct Idf {
    values: HashMap<String, f64>,
    max_idf: f64,
}

impl Idf {
    pub fn from_documents(docs: &[Document]) -> Self {
        let n = docs.len().max(1) as f64;
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in docs {
            let uniq: HashSet<&String> = doc.tokens.iter().collect();
            for t in uniq {
                *df.entry(t.clone()).or_insert(0) += 1;
            }
        }
        let values = df
            .into_iter()
            .map(|(t, count)| (t, (n / count as f64).ln()))
            .collect();
        Idf {
            values,
            max_idf: n.ln(),
        }
    }

    pub fn get(&self, token: &str) -> f64 {
        self.values.get(token).copied().unwrap_or(self.max_idf)
    }
}

/// Top-`limit` non-stopword query tokens ranked by idf (ties broken
/// lexicographically).
pub fn extract_keywords(tokens: &[String], idf: &Idf, limit: usize) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut scored: Vec<(&String, f64)> = tokens
        .iter()
        .filter(|t| !is_stopword(t) && seen.insert(t.as_str()))
        .map(|t| (t, idf.get(t)))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(b.0)));
    scored
        .into_iter()
        .take(limit)
        .map(|(t, _)| t.clone())
        .collect()
}

/// A generated or loaded benchmark: corpus, queries and the per-query
/// target documents the adversary will perturb.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub scenario: Scenario,
    pub corpus: Vec<Document>,
    pub queries: Vec<Query>,
    /// query id -> target document id.
    pub target_doc_ids: BTreeMap<String, String>,
}

impl Benchmark {
    pub fn doc_index(&self) -> HashMap<&str, usize> {
        self.corpus
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.as_str(), i))
            .collect()
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.corpus.iter().find(|d| d.id == id)
    }

    pub fn target_doc(&self, query_id: &str) -> Option<&Document> {
        self.target_doc_ids
            .get(query_id)
            .and_then(|id| self.document(id))
    }

    /// Structural invariants: unique ids, targets exist, keywords are
    /// non-stopword query tokens.
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for d in &self.corpus {
            if !ids.insert(&d.id) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate document id {:?}",
                    d.id
                )));
            }
            if d.tokens.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "document {:?} has no tokens",
                    d.id
                )));
            }
        }
        let mut qids = HashSet::new();
        for q in &self.queries {
            if !qids.insert(&q.id) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate query id {:?}",
                    q.id
                )));
            }
            let target = self.target_doc_ids.get(&q.id).ok_or_else(|| {
                Error::InvalidArgument(format!("query {:?} has no target document", q.id))
            })?;
            if self.document(target).is_none() {
                return Err(Error::InvalidArgument(format!(
                    "target document {target:?} for query {:?} is not in the corpus",
                    q.id
                )));
            }
            if q.scenario != self.scenario {
                return Err(Error::InvalidArgument(format!(
                    "query {:?} scenario differs from benchmark scenario",
                    q.id
                )));
            }
            if q.desired_answer == q.gold_answer {
                return Err(Error::InvalidArgument(format!(
                    "query {:?}: desired answer equals gold answer",
                    q.id
                )));
            }
            let token_set: HashSet<&String> = q.tokens.iter().collect();
            for kw in &q.keywords {
                if is_stopword(kw) || !token_set.contains(kw) {
                    return Err(Error::InvalidArgument(format!(
                        "query {:?}: keyword {kw:?} is not a non-stopword query token",
                        q.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Word vectors backing the synonym vocabulary.
#[derive(Debug, Clone)]
pub struct WordEmbeddings {
    dim: usize,
    vecs: BTreeMap<String, Vec<f64>>,
}

impl WordEmbeddings {
    pub fn new(dim: usize) -> Self {
        WordEmbeddings {
            dim,
            vecs: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vecs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vecs.is_empty()
    }

    pub fn insert(&mut self, word: impl Into<String>, vec: Vec<f64>) -> Result<()> {
        if vec.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: vec.len(),
                context: "word embedding",
            });
        }
        self.vecs.insert(word.into(), vec);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vecs.get(word).map(Vec::as_slice)
    }

    pub fn words(&self) -> impl Iterator<Item = &String> {
        self.vecs.keys()
    }

    pub fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        let (va, vb) = (self.get(a)?, self.get(b)?);
        Some(cosine(va, vb))
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Per-word substitution candidates: neighbors sorted by descending
/// similarity, self-entries excluded, similarities clamped to [0, 1].
#[derive(Debug, Clone, Default)]
pub struct SynonymTable {
    entries: BTreeMap<String, Vec<(String, f64)>>,
}

impl SynonymTable {
    /// Build from an embedding space, keeping neighbor pairs with cosine
    /// at or above `floor`.
    pub fn from_embeddings(emb: &WordEmbeddings, floor: f64) -> Self {
        let words: Vec<&String> = emb.words().collect();
        let mut entries: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
        for (i, a) in words.iter().enumerate() {
            let mut neighbors = Vec::new();
            for (j, b) in words.iter().enumerate() {
                if i == j {
                    continue;
                }
                let sim = emb.cosine(a, b).unwrap_or(0.0);
                if sim >= floor {
                    neighbors.push(((*b).clone(), sim.clamp(0.0, 1.0)));
                }
            }
            neighbors.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then_with(|| x.0.cmp(&y.0)));
            if !neighbors.is_empty() {
                entries.insert((*a).clone(), neighbors);
            }
        }
        SynonymTable { entries }
    }

    pub fn insert(&mut self, head: impl Into<String>, mut neighbors: Vec<(String, f64)>) {
        neighbors.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then_with(|| x.0.cmp(&y.0)));
        self.entries.insert(head.into(), neighbors);
    }

    pub fn neighbors(&self, word: &str) -> &[(String, f64)] {
        self.entries.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Similarity of `b` as a neighbor of `a`; 0 when not listed.
    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        self.neighbors(a)
            .iter()
            .find(|(w, _)| w == b)
            .map(|(_, s)| *s)
            .unwrap_or(0.0)
    }

    pub fn heads(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn validate(&self) -> Result<()> {
        for (head, neighbors) in &self.entries {
            let mut last = f64::INFINITY;
            for (w, s) in neighbors {
                if w == head {
                    return Err(Error::InvalidArgument(format!("self-entry under {head:?}")));
                }
                if !(0.0..=1.0).contains(s) {
                    return Err(Error::InvalidArgument(format!(
                        "similarity {s} for {head:?}->{w:?} outside [0, 1]"
                    )));
                }
                if *s > last {
                    return Err(Error::InvalidArgument(format!(
                        "neighbors of {head:?} are not sorted descending"
                    )));
                }
                last = *s;
            }
        }
        Ok(())
    }
}

/// True when `span` (already tokenized) occurs as a contiguous
/// subsequence of `tokens`. Empty spans never match.
pub fn contains_span(tokens: &[String], span: &[String]) -> bool {
    !span.is_empty() && tokens.windows(span.len()).any(|w| w == span)
}

/// First position at which `span` occurs, if any.
pub fn find_span(tokens: &[String], span: &[String]) -> Option<usize> {
    if span.is_empty() || tokens.len() < span.len() {
        return None;
    }
    tokens.windows(span.len()).position(|w| w == span)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stopword_list_is_sorted_and_sized() {
        let mut sorted = STOPWORDS;
        sorted.sort_unstable();
        assert_eq!(sorted, STOPWORDS, "binary_search requires sorted order");
        assert_eq!(STOPWORDS.len(), 50);
        assert!(is_stopword("the"));
        assert!(!is_stopword("capital"));
    }

    #[test]
    fn tokenize_definition_cases() {
        assert_eq!(tokenize("The Cat."), vec!["the", "cat"]);
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_round_trip_is_stable() {
        let tokens = tokenize("some words without punctuation here");
        assert_eq!(tokenize(&tokens.join(" ")), tokens);
    }

    #[test]
    fn keyword_extraction_drops_stopwords() {
        let docs = vec![Document::new("d1", "capital france paris")];
        let idf = Idf::from_documents(&docs);
        let q = tokenize("what is the capital of france");
        assert_eq!(extract_keywords(&q, &idf, 8), vec!["capital", "france"]);
    }

    #[test]
    fn keyword_extraction_all_stopwords_is_empty() {
        let docs = vec![Document::new("d1", "xyz")];
        let idf = Idf::from_documents(&docs);
        let q = tokenize("what is the of");
        assert!(extract_keywords(&q, &idf, 8).is_empty());
    }

    #[test]
    fn idf_ranking_matches_hand_computed_oracle() {
        // 3 docs: "alpha" in 1 doc, "beta" in 2, "gamma" in 3.
        let docs = vec![
            Document::new("d1", "alpha beta gamma"),
            Document::new("d2", "beta gamma filler"),
            Document::new("d3", "gamma filler2 filler3"),
        ];
        let idf = Idf::from_documents(&docs);
        assert!((idf.get("alpha") - (3.0f64).ln()).abs() < 1e-12);
        assert!((idf.get("beta") - (1.5f64).ln()).abs() < 1e-12);
        assert!((idf.get("gamma") - 0.0).abs() < 1e-12);
        // Unseen tokens get max idf = ln(3).
        assert!((idf.get("unseen") - (3.0f64).ln()).abs() < 1e-12);
        let q = tokenize("gamma beta alpha");
        assert_eq!(extract_keywords(&q, &idf, 2), vec!["alpha", "beta"]);
    }

    #[test]
    fn synonym_table_from_embeddings_sorted_no_self() {
        let mut emb = WordEmbeddings::new(2);
        emb.insert("a", vec![1.0, 0.0]).unwrap();
        emb.insert("b", vec![0.9, 0.1]).unwrap();
        emb.insert("c", vec![0.0, 1.0]).unwrap();
        let table = SynonymTable::from_embeddings(&emb, 0.3);
        table.validate().unwrap();
        let n = table.neighbors("a");
        assert_eq!(n.len(), 1);
        assert_eq!(n[0].0, "b");
        assert!(table.similarity("a", "c") == 0.0);
    }

    #[test]
    fn span_matching() {
        let tokens = tokenize("the answer is forty two exactly");
        assert!(contains_span(&tokens, &tokenize("forty two")));
        assert!(!contains_span(&tokens, &tokenize("two forty")));
        assert!(!contains_span(&tokens, &[]));
        assert_eq!(find_span(&tokens, &tokenize("answer")), Some(1));
    }
}
