//! Two-stage surrogate training: sample construction, hard-negative
//! mining and the epoch loop.

use super::{
    coarse_loss, fine_loss, top_k, CoarseSample, DualEncoder, FineSample, MarginSet,
    RetrievalResult,
};
use crate::corpus::{Benchmark, Document, Query};
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Coarse,
    Fine,
}

impl std::str::FromStr for Stage {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarse" => Ok(Stage::Coarse),
            "fine" => Ok(Stage::Fine),
            other => Err(Error::InvalidArgument(format!("unknown stage {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainHyper {
    pub epochs: usize,
    pub lr: f64,
    /// Shuffle sample order each epoch (from the training stream).
    pub shuffle: bool,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            epochs: 60,
            lr: 0.5,
            shuffle: true,
        }
    }
}

/// Per-epoch mean losses from a training run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TrainLog {
    pub stage: String,
    pub epoch_losses: Vec<f64>,
}

/// Hard negatives: documents the surrogate ranks in its top `hard_k` that
/// the target's top-k excludes, in surrogate rank order.
pub fn mine_hard_negatives(
    surrogate: &DualEncoder,
    target_topk: &RetrievalResult,
    q: &Query,
    corpus: &[Document],
    hard_k: usize,
) -> Vec<String> {
    let k = hard_k.min(corpus.len());
    if k == 0 {
        return Vec::new();
    }
    let surrogate_top = top_k(surrogate, q, corpus, k).expect("k clamped to corpus size");
    surrogate_top
        .ids()
        .filter(|id| !target_topk.contains(id))
        .map(str::to_string)
        .collect()
}

/// Coarse samples: each document of the target's top-k becomes a positive
/// paired with `n_negatives` random non-top-k documents.
pub fn build_coarse_samples(
    bench: &Benchmark,
    target: &DualEncoder,
    k: usize,
    n_negatives: usize,
    rng: &mut RngStream,
) -> Result<Vec<CoarseSample>> {
    let mut samples = Vec::new();
    for q in &bench.queries {
        let topk = top_k(target, q, &bench.corpus, k)?;
        let top_ids: Vec<&str> = topk.ids().collect();
        let pool: Vec<&Document> = bench
            .corpus
            .iter()
            .filter(|d| !top_ids.contains(&d.id.as_str()))
            .collect();
        if pool.len() < n_negatives {
            return Err(Error::InvalidArgument(format!(
                "corpus too small for {n_negatives} negatives per sample"
            )));
        }
        let mut qrng = rng.derive(&format!("coarse-samples/{}", q.id));
        for (id, _) in topk.entries() {
            let positive = bench.document(id).expect("top-k ids exist");
            let picks = qrng.sample_indices(pool.len(), n_negatives);
            let sample = CoarseSample {
                query_id: q.id.clone(),
                query_tokens: q.tokens.clone(),
                positive_id: positive.id.clone(),
                positive_tokens: positive.tokens.clone(),
                negative_ids: picks.iter().map(|&i| pool[i].id.clone()).collect(),
                negative_tokens: picks.iter().map(|&i| pool[i].tokens.clone()).collect(),
            };
            sample.validate()?;
            samples.push(sample);
        }
    }
    Ok(samples)
}

/// Fine samples for (at most) the first `limit` queries: the target's
/// top-k ordering, mined hard negatives and random easy negatives.
#[allow(clippy::too_many_arguments)]
pub fn build_fine_samples(
    bench: &Benchmark,
    surrogate: &DualEncoder,
    target: &DualEncoder,
    k: usize,
    hard_k: usize,
    n_easy: usize,
    margins: &MarginSet,
    limit: usize,
    rng: &mut RngStream,
) -> Result<Vec<FineSample>> {
    let mut samples = Vec::new();
    for q in bench.queries.iter().take(limit) {
        let topk = top_k(target, q, &bench.corpus, k)?;
        let hard_ids = mine_hard_negatives(surrogate, &topk, q, &bench.corpus, hard_k);
        let excluded: Vec<&str> = topk
            .ids()
            .chain(hard_ids.iter().map(String::as_str))
            .collect();
        let pool: Vec<&Document> = bench
            .corpus
            .iter()
            .filter(|d| !excluded.contains(&d.id.as_str()))
            .collect();
        let n_easy = n_easy.min(pool.len());
        if n_easy == 0 && !hard_ids.is_empty() {
            return Err(Error::InvalidArgument(
                "no easy negatives available for a query with hard negatives".into(),
            ));
        }
        let mut qrng = rng.derive(&format!("fine-samples/{}", q.id));
        let picks = qrng.sample_indices(pool.len(), n_easy);
        let fetch = |id: &str| -> (String, Vec<String>) {
            let d = bench.document(id).expect("mined ids exist");
            (d.id.clone(), d.tokens.clone())
        };
        let sample = FineSample {
            query_id: q.id.clone(),
            query_tokens: q.tokens.clone(),
            ranked: topk.ids().map(fetch).collect(),
            hard: hard_ids.iter().map(|id| fetch(id)).collect(),
            easy: picks
                .iter()
                .map(|&i| (pool[i].id.clone(), pool[i].tokens.clone()))
                .collect(),
            margins: MarginSet {
                within: margins.within[..k - 1].to_vec(),
                hard: margins.hard,
                easy: margins.easy,
            },
        };
        sample.validate()?;
        samples.push(sample);
    }
    Ok(samples)
}

/// Training data for [`train_surrogate`].
pub enum TrainData {
    Coarse(Vec<CoarseSample>),
    Fine(Vec<FineSample>),
}

/// Run SGD epochs of the stage loss over the samples.
///
/// Deterministic under a fixed stream. If a loss goes non-finite the
/// encoder is rolled back to the start of the failing epoch and an error
/// is returned, so the last finished epoch acts as the kept checkpoint.
pub fn train_surrogate(
    enc: &mut DualEncoder,
    data: &TrainData,
    hyper: &TrainHyper,
    rng: &mut RngStream,
) -> Result<TrainLog> {
    let n = match data {
        TrainData::Coarse(s) => s.len(),
        TrainData::Fine(s) => s.len(),
    };
    let stage = match data {
        TrainData::Coarse(_) => "coarse",
        TrainData::Fine(_) => "fine",
    };
    if n == 0 && hyper.epochs > 0 {
        return Err(Error::EmptyInput("training sample set"));
    }
    let mut log = TrainLog {
        stage: stage.into(),
        epoch_losses: Vec::new(),
    };
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..hyper.epochs {
        let snapshot = enc.clone();
        if hyper.shuffle {
            let mut erng = rng.derive(&format!("train/{stage}/epoch/{epoch}"));
            erng.shuffle(&mut order);
        }
        let mut total = 0.0;
        let mut failed = None;
        for &i in &order {
            let step = match data {
                TrainData::Coarse(s) => coarse_loss(enc, &s[i]),
                TrainData::Fine(s) => fine_loss(enc, &s[i]),
            };
            let (loss, grads) = match step {
                Ok(v) => v,
                Err(e) => {
                    failed = Some(e);
                    break;
                }
            };
            if !loss.is_finite() {
                failed = Some(Error::NonFinite(format!("{stage} loss at epoch {epoch}")));
                break;
            }
            total += loss;
            if let Err(e) = enc.apply_grads(&grads, hyper.lr) {
                failed = Some(e);
                break;
            }
        }
        if let Some(e) = failed {
            *enc = snapshot;
            return Err(e);
        }
        log.epoch_losses.push(total / n.max(1) as f64);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_benchmark, BenchSpec, Scenario};

    fn small_bench() -> (Benchmark, DualEncoder, DualEncoder) {
        let spec = BenchSpec {
            n_queries: 4,
            corpus_size: 40,
            ..BenchSpec::default()
        };
        let mut rng = RngStream::new(77);
        let done = generate_benchmark(&spec, Scenario::Factual, &mut rng).unwrap();
        let target = done.target_encoder(&spec).unwrap();
        let surrogate =
            DualEncoder::surrogate(&done.embeddings, &[], 8, 16, &mut RngStream::new(5)).unwrap();
        (done.benchmark, target, surrogate)
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let (bench, target, mut surrogate) = small_bench();
        let before = surrogate.clone();
        let samples = build_coarse_samples(&bench, &target, 3, 4, &mut RngStream::new(1)).unwrap();
        let hyper = TrainHyper {
            epochs: 0,
            ..TrainHyper::default()
        };
        train_surrogate(
            &mut surrogate,
            &TrainData::Coarse(samples),
            &hyper,
            &mut RngStream::new(2),
        )
        .unwrap();
        for i in 0..before.num_params() {
            assert_eq!(before.param(i).to_bits(), surrogate.param(i).to_bits());
        }
    }

    #[test]
    fn training_is_seed_deterministic() {
        let (bench, target, surrogate) = small_bench();
        let samples = build_coarse_samples(&bench, &target, 3, 4, &mut RngStream::new(1)).unwrap();
        let hyper = TrainHyper {
            epochs: 3,
            lr: 0.2,
            shuffle: true,
        };
        let mut a = surrogate.clone();
        let mut b = surrogate.clone();
        train_surrogate(
            &mut a,
            &TrainData::Coarse(samples.clone()),
            &hyper,
            &mut RngStream::new(9),
        )
        .unwrap();
        train_surrogate(
            &mut b,
            &TrainData::Coarse(samples),
            &hyper,
            &mut RngStream::new(9),
        )
        .unwrap();
        for i in 0..a.num_params() {
            assert_eq!(a.param(i).to_bits(), b.param(i).to_bits());
        }
    }

    #[test]
    fn coarse_training_reduces_loss_on_separable_data() {
        let (bench, target, mut surrogate) = small_bench();
        let samples = build_coarse_samples(&bench, &target, 3, 4, &mut RngStream::new(1)).unwrap();
        let hyper = TrainHyper {
            epochs: 200,
            lr: 0.5,
            shuffle: true,
        };
        let log = train_surrogate(
            &mut surrogate,
            &TrainData::Coarse(samples),
            &hyper,
            &mut RngStream::new(3),
        )
        .unwrap();
        let last = *log.epoch_losses.last().unwrap();
        assert!(
            last < 0.1,
            "coarse loss should drop below 0.1 within 200 epochs, got {last}"
        );
    }

    #[test]
    fn hard_negative_mining_set_difference() {
        let (bench, target, surrogate) = small_bench();
        let q = &bench.queries[0];
        let topk = top_k(&target, q, &bench.corpus, 3).unwrap();
        let hard = mine_hard_negatives(&surrogate, &topk, q, &bench.corpus, 20);
        // Surrogate top-20 minus target top-3 keeps at least 17 entries.
        assert!(hard.len() >= 17, "got {}", hard.len());
        for id in &hard {
            assert!(!topk.contains(id));
        }
        // Brute-force oracle: recompute both rankings by full sort.
        let mut scored: Vec<(String, f64)> = bench
            .corpus
            .iter()
            .map(|d| (d.id.clone(), surrogate.relevance(q, d)))
            .collect();
        scored.sort_by(super::super::rank_order);
        let expect: Vec<String> = scored
            .iter()
            .take(20)
            .filter(|(id, _)| !topk.contains(id))
            .map(|(id, _)| id.clone())
            .collect();
        assert_eq!(hard, expect);
    }
}
