//! Attack success and naturalness metrics.

use serde::{Deserialize, Serialize};

use crate::attack::AttackResult;
use crate::error::{Error, Result};

/// Aggregate attack metrics, all percentages.
///
/// `asr_g` is success conditional on retrieval success and is therefore
/// undefined (serialized as null) when nothing was retrieved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackMetrics {
    pub asr: f64,
    pub asr_r: f64,
    pub asr_g: Option<f64>,
    pub apr: f64,
    pub adsp: f64,
    pub n_total: usize,
    pub n_retrieval_success: usize,
    pub n_full_success: usize,
}

/// Aggregate a result list.
///
/// Queries whose pre-attack answer already matched the desired answer
/// must be excluded upstream; their presence here is an error.
pub fn compute_metrics(results: &[AttackResult]) -> Result<AttackMetrics> {
    if results.is_empty() {
        return Err(Error::EmptyInput("attack results"));
    }
    if let Some(r) = results.iter().find(|r| r.pre_attack_hit) {
        return Err(Error::InvalidArgument(format!(
            "query {} was already answered with the desired answer; exclude it upstream",
            r.query_id
        )));
    }
    let n_total = results.len();
    let n_retrieval_success = results.iter().filter(|r| r.retrieval_success).count();
    let n_full_success = results.iter().filter(|r| r.full_success()).count();
    let apr = 100.0 * results.iter().map(|r| r.perturbation_rate).sum::<f64>() / n_total as f64;
    let adsp = 100.0 * results.iter().map(|r| r.final_doc_sim).sum::<f64>() / n_total as f64;
    Ok(AttackMetrics {
        asr: 100.0 * n_full_success as f64 / n_total as f64,
        asr_r: 100.0 * n_retrieval_success as f64 / n_total as f64,
        asr_g: if n_retrieval_success == 0 {
            None
        } else {
            Some(100.0 * n_full_success as f64 / n_retrieval_success as f64)
        },
        apr,
        adsp,
        n_total,
        n_retrieval_success,
        n_full_success,
    })
}

/// Metrics from bare counts (APR and ADSP have no meaning here and are
/// reported as 0 and 100).
pub fn metrics_from_counts(
    n_full_success: usize,
    n_retrieval_success: usize,
    n_total: usize,
) -> Result<AttackMetrics> {
    if n_total == 0 {
        return Err(Error::EmptyInput("attack results"));
    }
    if n_full_success > n_retrieval_success || n_retrieval_success > n_total {
        return Err(Error::InvalidArgument(
            "counts must satisfy full <= retrieval <= total".into(),
        ));
    }
    Ok(AttackMetrics {
        asr: 100.0 * n_full_success as f64 / n_total as f64,
        asr_r: 100.0 * n_retrieval_success as f64 / n_total as f64,
        asr_g: if n_retrieval_success == 0 {
            None
        } else {
            Some(100.0 * n_full_success as f64 / n_retrieval_success as f64)
        },
        apr: 0.0,
        adsp: 100.0,
        n_total,
        n_retrieval_success,
        n_full_success,
    })
}

#[cfg(test)]
pub(crate) fn synthetic_result(
    query_id: &str,
    retrieval: bool,
    generation: bool,
    perturbation_rate: f64,
    final_doc_sim: f64,
) -> AttackResult {
    AttackResult {
        query_id: query_id.into(),
        method: "test".into(),
        pre_attack_hit: false,
        retrieval_success: retrieval,
        generation_success: generation,
        steps: 1,
        substitutions: vec![],
        perturbed_text: String::new(),
        original_len: 100,
        final_doc_sim,
        perturbation_rate,
        mean_gen_reward: 0.0,
        final_reward: 0.0,
        log: vec![],
        error: None,
    }
}
