//! Vulnerability localization: which position to perturb next.

use super::{AttackState, PositionParams, PositionStats};
use crate::corpus::{Document, Query};
use crate::error::{Error, Result};
use crate::retriever::{dot, DualEncoder};
use crate::rng::RngStream;

/// Absolute relevance change from deleting token `j`.
pub fn word_importance(enc: &DualEncoder, q: &Query, d: &Document, j: usize) -> Result<f64> {
    if d.tokens.len() < 2 {
        return Err(Error::AttackPrecondition(
            "cannot delete from a single-token document".into(),
        ));
    }
    if j >= d.tokens.len() {
        return Err(Error::InvalidArgument(format!(
            "position {j} out of range for a {}-token document",
            d.tokens.len()
        )));
    }
    let q_enc = enc.encode_query_tokens(&q.tokens);
    let base = dot(&q_enc, &enc.encode_doc_tokens(&d.tokens));
    let mut removed = d.tokens.clone();
    removed.remove(j);
    let without = dot(&q_enc, &enc.encode_doc_tokens(&removed));
    Ok((base - without).abs())
}

/// History score: success rate and average reward with an exploration
/// term decaying in the attempt count.
pub fn position_history_score(stats: &PositionStats, params: &PositionParams) -> f64 {
    params.alpha[0] * stats.success_rate()
        + params.alpha[1] * stats.average_reward()
        + params.alpha[2] / (1.0 + f64::from(stats.attempts))
}

/// Pick the next position to perturb: weighted word importance, history
/// score and per-position Gaussian noise, argmax with ties to the lowest
/// index. Noise is drawn per eligible position per call, in index order.
pub fn select_position(
    enc: &DualEncoder,
    q_enc: &[f64],
    state: &AttackState,
    params: &PositionParams,
    rng: &mut RngStream,
) -> Result<usize> {
    params.validate()?;
    if state.current.len() < 2 {
        return Err(Error::NoEligiblePositions);
    }
    // Importance scores are raw relevance deltas, orders of magnitude
    // below the history scores; normalize by the per-document maximum so
    // the lambda weights mix commensurable quantities.
    let mut importance = importance_scores(enc, q_enc, &state.current);
    let max_imp = importance.iter().cloned().fold(0.0f64, f64::max);
    if max_imp > 0.0 {
        for s in &mut importance {
            *s /= max_imp;
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for (j, &ok) in state.eligible.iter().enumerate() {
        if !ok {
            continue;
        }
        let noise = if params.sigma > 0.0 {
            rng.gaussian_scaled(params.sigma)
        } else {
            0.0
        };
        let score = params.lambda[0] * importance[j]
            + params.lambda[1] * position_history_score(&state.stats[j], params)
            + params.lambda[2] * noise;
        if best.map(|(_, s)| score > s).unwrap_or(true) {
            best = Some((j, score));
        }
    }
    best.map(|(j, _)| j).ok_or(Error::NoEligiblePositions)
}

/// `|R(q, d) - R(q, d_without_j)|` for every position, sharing the token
/// sum so the scan is linear in document length.
fn importance_scores(enc: &DualEncoder, q_enc: &[f64], tokens: &[String]) -> Vec<f64> {
    let dim = enc.dim();
    let ids: Vec<Option<usize>> = tokens.iter().map(|t| enc.vocab().id(t)).collect();
    let known: Vec<usize> = ids.iter().flatten().copied().collect();
    let pooled = enc.pool_ids(&known);
    let base = dot(q_enc, &enc.doc_proj().infer(&pooled).expect("dim matches"));
    let n = known.len();
    let mut out = vec![0.0; tokens.len()];
    if n < 2 {
        return out;
    }
    let sum: Vec<f64> = pooled.iter().map(|p| p * n as f64).collect();
    for (j, id) in ids.iter().enumerate() {
        let Some(id) = id else { continue }; // unknown tokens pool to nothing
        let mut reduced = vec![0.0; dim];
        let inv = 1.0 / (n - 1) as f64;
        for (slot, (s, e)) in reduced
            .iter_mut()
            .zip(sum.iter().zip(enc.embedding_row(*id)))
        {
            *slot = (s - e) * inv;
        }
        let score = dot(q_enc, &enc.doc_proj().infer(&reduced).expect("dim matches"));
        out[j] = (base - score).abs();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize, Scenario, WordEmbeddings};
    use approx::assert_relative_eq;

    fn encoder() -> DualEncoder {
        let mut emb = WordEmbeddings::new(2);
        emb.insert("aaa", vec![1.0, 0.0]).unwrap();
        emb.insert("bbb", vec![0.0, 1.0]).unwrap();
        emb.insert("ccc", vec![0.8, 0.6]).unwrap();
        DualEncoder::surrogate(&emb, &[], 4, 8, &mut RngStream::new(2)).unwrap()
    }

    fn query(text: &str) -> Query {
        Query {
            id: "q".into(),
            text: text.into(),
            tokens: tokenize(text),
            keywords: vec![],
            gold_answer: "x".into(),
            desired_answer: "zzz".into(),
            scenario: Scenario::Factual,
        }
    }

    #[test]
    fn duplicate_token_deletion_is_neutral_under_mean_pooling() {
        let enc = encoder();
        let q = query("aaa");
        let d = Document::new("d", "bbb bbb");
        // Removing one of two identical tokens leaves the mean unchanged.
        assert_relative_eq!(word_importance(&enc, &q, &d, 0).unwrap(), 0.0);
        assert_relative_eq!(word_importance(&enc, &q, &d, 1).unwrap(), 0.0);
    }

    #[test]
    fn importance_matches_full_recomputation() {
        let enc = encoder();
        let q = query("aaa ccc");
        let d = Document::new("d", "aaa bbb ccc aaa");
        let q_enc = enc.encode_query_tokens(&q.tokens);
        let fast = importance_scores(&enc, &q_enc, &d.tokens);
        for j in 0..d.tokens.len() {
            let slow = word_importance(&enc, &q, &d, j).unwrap();
            assert_relative_eq!(fast[j], slow, max_relative = 1e-10);
        }
    }

    #[test]
    fn importance_is_nonnegative_by_definition() {
        let enc = encoder();
        let q = query("bbb");
        let d = Document::new("d", "aaa ccc");
        for j in 0..2 {
            assert!(word_importance(&enc, &q, &d, j).unwrap() >= 0.0);
        }
    }

    #[test]
    fn single_token_document_is_rejected() {
        let enc = encoder();
        let q = query("aaa");
        let d = Document::new("d", "aaa");
        assert!(word_importance(&enc, &q, &d, 0).is_err());
    }

    #[test]
    fn history_score_cases() {
        let params = PositionParams {
            alpha: [1.0, 1.0, 1.0],
            lambda: [1.0, 0.0, 0.0],
            sigma: 0.0,
        };
        let fresh = PositionStats::default();
        assert_relative_eq!(position_history_score(&fresh, &params), 1.0);
        let seasoned = PositionStats {
            successes: 1,
            attempts: 2,
            cumulative_reward: 0.4,
        };
        // 0.5 + 0.2 + 1/3
        assert_relative_eq!(
            position_history_score(&seasoned, &params),
            0.5 + 0.2 + 1.0 / 3.0
        );
        // More attempts strictly lower the exploration term.
        let more = PositionStats {
            successes: 1,
            attempts: 3,
            cumulative_reward: 0.6,
        };
        assert!(
            position_history_score(&more, &params) < position_history_score(&seasoned, &params)
        );
    }

    #[test]
    fn select_position_degenerate_weights() {
        let enc = encoder();
        let q = query("aaa");
        let d = Document::new("d", "bbb aaa bbb");
        let state = AttackState::new(&d, &q, &enc).unwrap();
        let q_enc = enc.encode_query_tokens(&q.tokens);
        // Importance only: the aaa position matters most for an aaa query.
        let p = PositionParams {
            alpha: [1.0, 1.0, 1.0],
            lambda: [1.0, 0.0, 0.0],
            sigma: 0.0,
        };
        let j = select_position(&enc, &q_enc, &state, &p, &mut RngStream::new(0)).unwrap();
        assert_eq!(j, 1);
        // History only with equal stats: lowest eligible index.
        let p = PositionParams {
            alpha: [1.0, 1.0, 1.0],
            lambda: [0.0, 1.0, 0.0],
            sigma: 0.0,
        };
        let j = select_position(&enc, &q_enc, &state, &p, &mut RngStream::new(0)).unwrap();
        assert_eq!(j, 0);
    }

    #[test]
    fn select_position_is_replayable_with_noise() {
        let enc = encoder();
        let q = query("aaa ccc");
        let d = Document::new("d", "aaa bbb ccc bbb aaa");
        let state = AttackState::new(&d, &q, &enc).unwrap();
        let q_enc = enc.encode_query_tokens(&q.tokens);
        let p = PositionParams {
            alpha: [0.4, 0.4, 0.2],
            lambda: [0.4, 0.5, 0.1],
            sigma: 0.5,
        };
        let picks_a: Vec<usize> = {
            let mut rng = RngStream::new(42);
            (0..10)
                .map(|_| select_position(&enc, &q_enc, &state, &p, &mut rng).unwrap())
                .collect()
        };
        let picks_b: Vec<usize> = {
            let mut rng = RngStream::new(42);
            (0..10)
                .map(|_| select_position(&enc, &q_enc, &state, &p, &mut rng).unwrap())
                .collect()
        };
        assert_eq!(picks_a, picks_b);
    }

    #[test]
    fn no_eligible_positions_signals_termination() {
        let enc = encoder();
        let q = query("aaa");
        // Both tokens are stopwords.
        let d = Document::new("d", "the of");
        let state = AttackState::new(&d, &q, &enc).unwrap();
        let q_enc = enc.encode_query_tokens(&q.tokens);
        let p = PositionParams::default();
        assert!(matches!(
            select_position(&enc, &q_enc, &state, &p, &mut RngStream::new(0)),
            Err(Error::NoEligiblePositions)
        ));
    }
}
