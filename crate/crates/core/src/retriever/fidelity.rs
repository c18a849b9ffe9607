//! Surrogate fidelity metrics: how closely a surrogate's top-k matches
//! the target retriever's, treating the target's list as gold.

use super::{top_k, DualEncoder};
use crate::corpus::Benchmark;
use crate::error::Result;

/// MRR@k / NDCG@k / F1@k, all percentages.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Fidelity {
    pub mrr: f64,
    pub ndcg: f64,
    pub f1: f64,
}

/// Evaluate `surrogate` against `target` over every benchmark query.
///
/// MRR@k scores the rank at which the surrogate places the target's
/// rank-1 document; NDCG@k uses binary gains on target top-k membership;
/// F1@k is the top-k set overlap.
pub fn surrogate_fidelity(
    surrogate: &DualEncoder,
    target: &DualEncoder,
    bench: &Benchmark,
    k: usize,
) -> Result<Fidelity> {
    let mut mrr = 0.0;
    let mut ndcg = 0.0;
    let mut f1 = 0.0;
    let n = bench.queries.len().max(1) as f64;
    for q in &bench.queries {
        let gold = top_k(target, q, &bench.corpus, k)?;
        let got = top_k(surrogate, q, &bench.corpus, k)?;
        let gold_ids: Vec<&str> = gold.ids().collect();
        let got_ids: Vec<&str> = got.ids().collect();

        let best = gold_ids[0];
        if let Some(rank) = got_ids.iter().position(|id| *id == best) {
            mrr += 1.0 / (rank + 1) as f64;
        }

        let dcg: f64 = got_ids
            .iter()
            .enumerate()
            .filter(|(_, id)| gold_ids.contains(id))
            .map(|(i, _)| 1.0 / ((i + 2) as f64).log2())
            .sum();
        let idcg: f64 = (0..k).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
        ndcg += dcg / idcg;

        let overlap = got_ids.iter().filter(|id| gold_ids.contains(id)).count();
        f1 += overlap as f64 / k as f64;
    }
    Ok(Fidelity {
        mrr: 100.0 * mrr / n,
        ndcg: 100.0 * ndcg / n,
        f1: 100.0 * f1 / n,
    })
}
