//! Relevance-generation-naturalness reward and discounted returns.

use super::{RewardParams, Variant};

/// Step reward.
///
/// Base term: `lambda_r * delta + r_gen` (the generation term is ablated
/// to zero for [`Variant::NoGenerationReward`]). A negative relevance
/// delta incurs an extra `neg_penalty * |delta|`, and a document
/// similarity below `tau` incurs the flat penalty `p`.
pub fn compute_reward(
    delta_relevance: f64,
    r_gen: f64,
    doc_sim: f64,
    params: &RewardParams,
    variant: Variant,
) -> f64 {
    let gen_term = if variant.uses_generation_reward() {
        r_gen
    } else {
        0.0
    };
    let mut reward = params.lambda_r * delta_relevance + gen_term;
    if delta_relevance < 0.0 {
        reward -= params.neg_penalty * delta_relevance.abs();
    }
    if doc_sim < params.tau {
        reward -= params.penalty;
    }
    reward
}

/// Discounted returns by backward recursion: `R_t = r_t + gamma * R_{t+1}`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut returns = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (slot, &r) in returns.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *slot = acc;
    }
    returns
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(lambda_r: f64, tau: f64, penalty: f64, neg: f64) -> RewardParams {
        RewardParams {
            lambda_r,
            tau,
            penalty,
            neg_penalty: neg,
        }
    }

    #[test]
    fn reward_case_split() {
        let p = params(1.0, 0.97, 1.0, 0.0);
        // Similarity above the floor.
        assert_relative_eq!(compute_reward(0.2, 0.5, 0.99, &p, Variant::Full), 0.7);
        // Similarity below the floor subtracts the penalty.
        assert_relative_eq!(compute_reward(0.2, 0.5, 0.90, &p, Variant::Full), -0.3);
    }

    #[test]
    fn negative_delta_penalty() {
        let p = params(1.0, 0.5, 1.0, 2.0);
        // -0.1 * 1.0 + 0.0 - 2.0 * 0.1
        assert_relative_eq!(compute_reward(-0.1, 0.0, 0.9, &p, Variant::Full), -0.3);
    }

    #[test]
    fn generation_ablation_zeroes_the_term() {
        let p = params(1.0, 0.5, 1.0, 0.0);
        assert_relative_eq!(
            compute_reward(0.1, 0.9, 0.99, &p, Variant::NoGenerationReward),
            0.1
        );
        // The ablated reward is invariant to r_gen.
        for r_gen in [0.0, 0.25, 1.0] {
            assert_relative_eq!(
                compute_reward(0.1, r_gen, 0.99, &p, Variant::NoGenerationReward),
                0.1
            );
        }
    }

    #[test]
    fn returns_closed_form_cases() {
        assert_eq!(
            discounted_returns(&[1.0, 1.0, 1.0], 0.5),
            vec![1.75, 1.5, 1.0]
        );
        assert_eq!(
            discounted_returns(&[0.3, -0.7, 2.0], 0.0),
            vec![0.3, -0.7, 2.0]
        );
        assert_eq!(
            discounted_returns(&[1.0, 2.0, 3.0], 1.0),
            vec![6.0, 5.0, 3.0]
        );
    }

    #[test]
    fn backward_recursion_equals_direct_sum() {
        let mut rng = crate::rng::RngStream::new(8);
        for _ in 0..20 {
            let n = 1 + rng.below(12);
            let rewards: Vec<f64> = (0..n).map(|_| rng.uniform() * 4.0 - 2.0).collect();
            let gamma = rng.uniform();
            let fast = discounted_returns(&rewards, gamma);
            for t in 0..n {
                let direct: f64 = (t..n)
                    .map(|k| gamma.powi((k - t) as i32) * rewards[k])
                    .sum();
                assert!(
                    (fast[t] - direct).abs() <= 1e-12,
                    "t={t}: {} vs {direct}",
                    fast[t]
                );
            }
        }
    }
}
