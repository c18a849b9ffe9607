//! Substitution-candidate construction.
//!
//! Candidates for the word at the chosen position come from two sources:
//! query keywords (always admissible, rank score weighted by `beta`) and
//! the general synonym vocabulary (admissible only above the similarity
//! floor and only when the candidate is more similar to the query than
//! the original word). The original word is always kept so the policy can
//! decline to substitute.

use crate::corpus::SynonymTable;
use crate::error::{Error, Result};
use crate::retriever::{dot, DualEncoder};

/// One substitution option with its ranking features.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub word: String,
    /// Ranking score: synonym similarity, beta-weighted for keywords.
    pub rank_score: f64,
    /// Raw similarity to the original word.
    pub sim_to_original: f64,
    pub is_keyword: bool,
    pub is_original: bool,
}

/// The candidate set at one position. The original word is entry 0.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub position: usize,
    pub original: String,
    pub candidates: Vec<Candidate>,
}

/// Build the candidate set for `original` at `position`.
///
/// `q_enc` is the encoded query; word-to-query similarity is the encoder
/// relevance of the word as a one-token document.
#[allow(clippy::too_many_arguments)]
pub fn build_candidates(
    original: &str,
    position: usize,
    keywords: &[String],
    synonyms: &SynonymTable,
    enc: &DualEncoder,
    q_enc: &[f64],
    m: usize,
    beta: f64,
    sim_floor: f64,
) -> Result<CandidateSet> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "candidate set size m = {m} must be >= 2"
        )));
    }
    let word_query_sim = |w: &str| {
        dot(
            q_enc,
            &enc.encode_doc_tokens(std::slice::from_ref(&w.to_string())),
        )
    };
    let original_query_sim = word_query_sim(original);

    let mut pool: Vec<Candidate> = Vec::new();
    for kw in keywords {
        if kw == original {
            continue;
        }
        pool.push(Candidate {
            word: kw.clone(),
            rank_score: beta * synonyms.similarity(original, kw),
            sim_to_original: synonyms.similarity(original, kw),
            is_keyword: true,
            is_original: false,
        });
    }
    for (w, sim) in synonyms.neighbors(original) {
        if keywords.contains(w) {
            continue; // already pooled through the keyword branch
        }
        if *sim <= sim_floor {
            break; // neighbors are sorted descending
        }
        if word_query_sim(w) <= original_query_sim {
            continue;
        }
        pool.push(Candidate {
            word: w.clone(),
            rank_score: *sim,
            sim_to_original: *sim,
            is_keyword: false,
            is_original: false,
        });
    }
    pool.sort_by(|a, b| {
        b.rank_score
            .partial_cmp(&a.rank_score)
            .unwrap()
            .then_with(|| a.word.cmp(&b.word))
    });
    pool.truncate(m - 1);

    let mut candidates = Vec::with_capacity(pool.len() + 1);
    candidates.push(Candidate {
        word: original.to_string(),
        rank_score: 0.0,
        sim_to_original: 1.0,
        is_keyword: keywords.iter().any(|k| k == original),
        is_original: true,
    });
    candidates.extend(pool);
    Ok(CandidateSet {
        position,
        original: original.to_string(),
        candidates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::WordEmbeddings;
    use crate::rng::RngStream;

    fn encoder() -> DualEncoder {
        let mut emb = WordEmbeddings::new(2);
        emb.insert("query", vec![1.0, 0.0]).unwrap();
        emb.insert("orig", vec![0.6, 0.8]).unwrap();
        emb.insert("near", vec![0.9, 0.435889894354]).unwrap();
        emb.insert("far", vec![0.0, 1.0]).unwrap();
        emb.insert("kwword", vec![0.95, 0.3122498999]).unwrap();
        DualEncoder::surrogate(&emb, &[], 2, 4, &mut RngStream::new(4)).unwrap()
    }

    fn table(entries: &[(&str, &[(&str, f64)])]) -> SynonymTable {
        let mut t = SynonymTable::default();
        for (head, neighbors) in entries {
            t.insert(
                head.to_string(),
                neighbors.iter().map(|(w, s)| (w.to_string(), *s)).collect(),
            );
        }
        t
    }

    #[test]
    fn m_boundary() {
        let enc = encoder();
        let syn = table(&[]);
        let q_enc = enc.encode_query_tokens(&["query".to_string()]);
        assert!(build_candidates("orig", 0, &[], &syn, &enc, &q_enc, 1, 1.1, 0.7).is_err());
        let set = build_candidates("orig", 0, &[], &syn, &enc, &q_enc, 2, 1.1, 0.7).unwrap();
        assert_eq!(set.candidates.len(), 1); // only the original, empty pool
        assert!(set.candidates[0].is_original);
    }

    #[test]
    fn low_similarity_vocab_filtered_out() {
        let enc = encoder();
        // All neighbors at or below the 0.7 floor, no keywords.
        let syn = table(&[("orig", &[("near", 0.7), ("far", 0.4)])]);
        let q_enc = enc.encode_query_tokens(&["query".to_string()]);
        let set = build_candidates("orig", 0, &[], &syn, &enc, &q_enc, 8, 1.1, 0.7).unwrap();
        assert_eq!(set.candidates.len(), 1);
        assert_eq!(set.candidates[0].word, "orig");
    }

    #[test]
    fn keyword_beta_outranks_plain_vocab() {
        // Keyword raw 0.65 at beta 1.1 scores 0.715, beating a 0.70 vocab
        // word (which the floor excludes anyway at > 0.7 semantics).
        let enc = encoder();
        let syn = table(&[("orig", &[("kwword", 0.65), ("near", 0.704)])]);
        let q_enc = enc.encode_query_tokens(&["query".to_string()]);
        let kws = vec!["kwword".to_string()];
        let set = build_candidates("orig", 3, &kws, &syn, &enc, &q_enc, 8, 1.1, 0.7).unwrap();
        assert_eq!(set.position, 3);
        assert!(set.candidates[0].is_original);
        let ranked: Vec<&str> = set.candidates[1..]
            .iter()
            .map(|c| c.word.as_str())
            .collect();
        assert_eq!(ranked[0], "kwword");
        let kw = &set.candidates[1];
        assert!((kw.rank_score - 0.715).abs() < 1e-12);
        assert!(kw.is_keyword);
    }

    #[test]
    fn vocab_needs_higher_query_similarity_than_original() {
        let enc = encoder();
        let syn = table(&[("orig", &[("near", 0.9), ("far", 0.9)])]);
        let q_enc = enc.encode_query_tokens(&["query".to_string()]);
        let set = build_candidates("orig", 0, &[], &syn, &enc, &q_enc, 8, 1.1, 0.7).unwrap();
        let words: Vec<&str> = set.candidates.iter().map(|c| c.word.as_str()).collect();
        // Exactly the neighbors whose word-query relevance beats the
        // original's may enter.
        let wq = |w: &str| dot(&q_enc, &enc.encode_doc_tokens(&[w.to_string()]));
        for w in ["near", "far"] {
            assert_eq!(
                words.contains(&w),
                wq(w) > wq("orig"),
                "{w}: query-sim {} vs original {}",
                wq(w),
                wq("orig")
            );
        }
    }

    #[test]
    fn original_always_included_and_no_duplicates() {
        let enc = encoder();
        let syn = table(&[("orig", &[("near", 0.95), ("kwword", 0.9)])]);
        let q_enc = enc.encode_query_tokens(&["query".to_string()]);
        let kws = vec!["kwword".to_string()];
        let set = build_candidates("orig", 0, &kws, &syn, &enc, &q_enc, 8, 1.1, 0.7).unwrap();
        let mut words: Vec<&str> = set.candidates.iter().map(|c| c.word.as_str()).collect();
        assert!(words.contains(&"orig"));
        let before = words.len();
        words.sort_unstable();
        words.dedup();
        assert_eq!(before, words.len());
        assert!(set.candidates.len() <= 8);
    }
}
