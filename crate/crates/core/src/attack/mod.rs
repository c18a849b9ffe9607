//! The reinforcement-learning word-substitution agent.
//!
//! One attack episode walks a loop of: locate a vulnerable position,
//! build substitution candidates, let the policy network pick one, gate
//! the substitution on relevance gain and semantic similarity, score the
//! step with a relevance-generation-naturalness reward, and periodically
//! update the policy with clipped-surrogate policy optimization.

mod candidates;
pub(crate) mod episode;
mod policy;
mod position;
mod ppo;
mod reward;

pub use candidates::{build_candidates, Candidate, CandidateSet};
pub use episode::{
    run_attack, AttackEnv, AttackResult, StepLog, SubstitutionRecord, METHOD_GREEDY, METHOD_REGENT,
    METHOD_REGENT_NG, METHOD_REGENT_NR,
};
pub use policy::{
    candidate_feature_len, candidate_features, encode_state, policy_select, state_feature_len,
    AgentNets, PolicyNet, SelectMode, ValueNet,
};
pub use position::{position_history_score, select_position, word_importance};
pub use ppo::{
    ppo_gradients, ppo_losses, ppo_update, returns_and_advantages, PpoDiagnostics, PpoGrads,
    Trajectory, TrajectoryStep,
};
pub use reward::{compute_reward, discounted_returns};

use crate::corpus::{find_span, is_stopword, tokenize, Document, Query};
use crate::error::{Error, Result};
use crate::retriever::DualEncoder;

/// Attack variants: the full agent, or one of its two ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Full reward, fine-trained surrogate.
    Full,
    /// Relevance signals come from the coarse-stage surrogate only.
    CoarseRetriever,
    /// Generation reward ablated to zero.
    NoGenerationReward,
}

impl Variant {
    pub fn uses_generation_reward(self) -> bool {
        !matches!(self, Variant::NoGenerationReward)
    }
}

/// Vulnerability-localization weights.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PositionParams {
    /// History weights: success rate, average reward, exploration decay.
    pub alpha: [f64; 3],
    /// Score weights: word importance, history, Gaussian noise.
    pub lambda: [f64; 3],
    /// Noise standard deviation.
    pub sigma: f64,
}

impl Default for PositionParams {
    fn default() -> Self {
        PositionParams {
            alpha: [0.4, 0.4, 0.2],
            lambda: [0.4, 0.5, 0.1],
            sigma: 0.05,
        }
    }
}

impl PositionParams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha.iter().chain(&self.lambda).any(|x| *x < 0.0) || self.sigma < 0.0 {
            return Err(Error::InvalidArgument(
                "position weights must be non-negative".into(),
            ));
        }
        if self.lambda.iter().all(|x| *x == 0.0) {
            return Err(Error::InvalidArgument(
                "position score weights are all zero".into(),
            ));
        }
        Ok(())
    }
}

/// Reward shaping parameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RewardParams {
    /// Weight of the relevance delta against the generation reward.
    pub lambda_r: f64,
    /// Similarity floor below which the naturalness penalty fires.
    pub tau: f64,
    /// Naturalness penalty.
    pub penalty: f64,
    /// Extra penalty weight on negative relevance deltas.
    pub neg_penalty: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams {
            lambda_r: 10.0,
            tau: 0.97,
            penalty: 5.0,
            neg_penalty: 1.0,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "tau {} outside (0, 1]",
                self.tau
            )));
        }
        if self.penalty <= 0.0 {
            return Err(Error::InvalidArgument("penalty must be positive".into()));
        }
        if self.neg_penalty < 0.0 {
            return Err(Error::InvalidArgument(
                "neg_penalty must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Policy-optimization parameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PpoParams {
    pub gamma: f64,
    /// Clip radius epsilon.
    pub clip: f64,
    /// Value-loss coefficient eta.
    pub value_coef: f64,
    pub epochs: usize,
    pub lr: f64,
}

impl Default for PpoParams {
    fn default() -> Self {
        PpoParams {
            gamma: 0.95,
            clip: 0.2,
            value_coef: 0.5,
            epochs: 4,
            lr: 0.01,
        }
    }
}

impl PpoParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidArgument(format!(
                "gamma {} outside [0, 1]",
                self.gamma
            )));
        }
        if self.clip <= 0.0 {
            return Err(Error::InvalidArgument(
                "clip radius must be positive".into(),
            ));
        }
        if self.value_coef < 0.0 {
            return Err(Error::InvalidArgument(
                "value coefficient must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Full attack configuration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AttackParams {
    pub position: PositionParams,
    pub reward: RewardParams,
    pub ppo: PpoParams,
    /// Episode step budget.
    pub budget: usize,
    /// Policy update cadence in steps.
    pub update_interval: usize,
    /// Candidate set size.
    pub m: usize,
    /// Keyword priority factor.
    pub beta: f64,
    /// Minimum relative relevance gain for a substitution to commit.
    pub min_gain: f64,
    /// Similarity floor for general-vocabulary candidates.
    pub candidate_sim_floor: f64,
    /// Cap on committed substitutions as a fraction of document length.
    pub max_sub_fraction: f64,
}

impl Default for AttackParams {
    fn default() -> Self {
        AttackParams {
            position: PositionParams::default(),
            reward: RewardParams::default(),
            ppo: PpoParams::default(),
            budget: 30,
            update_interval: 5,
            m: 8,
            beta: 1.1,
            min_gain: 0.0005,
            candidate_sim_floor: 0.7,
            max_sub_fraction: 0.08,
        }
    }
}

impl AttackParams {
    pub fn validate(&self) -> Result<()> {
        self.position.validate()?;
        self.reward.validate()?;
        self.ppo.validate()?;
        if self.budget == 0 {
            return Err(Error::AttackPrecondition(
                "budget must be at least 1".into(),
            ));
        }
        if self.m < 2 {
            return Err(Error::InvalidArgument(
                "candidate set size m must be at least 2".into(),
            ));
        }
        if self.beta <= 1.0 {
            return Err(Error::InvalidArgument("beta must exceed 1".into()));
        }
        Ok(())
    }
}

/// Per-position attack history.
#[derive(Debug, Clone, Copy, Default)]
pub struct PositionStats {
    pub successes: u32,
    pub attempts: u32,
    pub cumulative_reward: f64,
}

impl PositionStats {
    pub fn success_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            f64::from(self.successes) / f64::from(self.attempts)
        }
    }

    pub fn average_reward(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.cumulative_reward / f64::from(self.attempts)
        }
    }
}

/// Mutable attack state for one episode.
#[derive(Debug, Clone)]
pub struct AttackState {
    /// Original tokens d^0.
    pub original: Vec<String>,
    /// Current tokens d^t.
    pub current: Vec<String>,
    /// Committed action count.
    pub step: usize,
    pub stats: Vec<PositionStats>,
    /// Positions open to substitution: non-stopword and outside the
    /// desired-answer span occurrences.
    pub eligible: Vec<bool>,
    /// Positions already substituted.
    pub substituted: Vec<bool>,
    /// Surrogate relevance of the current document.
    pub current_relevance: f64,
}

impl AttackState {
    pub fn new(doc: &Document, q: &Query, surrogate: &DualEncoder) -> Result<Self> {
        if doc.tokens.len() < 2 {
            return Err(Error::AttackPrecondition(format!(
                "target document {} has fewer than two tokens",
                doc.id
            )));
        }
        let mut eligible: Vec<bool> = doc.tokens.iter().map(|t| !is_stopword(t)).collect();
        let span = tokenize(&q.desired_answer);
        if !span.is_empty() {
            let mut offset = 0;
            while let Some(at) = find_span(&doc.tokens[offset..], &span) {
                for slot in eligible.iter_mut().skip(offset + at).take(span.len()) {
                    *slot = false;
                }
                offset += at + 1;
                if offset >= doc.tokens.len() {
                    break;
                }
            }
        }
        let current_relevance = surrogate.relevance(q, doc);
        Ok(AttackState {
            original: doc.tokens.clone(),
            current: doc.tokens.clone(),
            step: 0,
            stats: vec![PositionStats::default(); doc.tokens.len()],
            eligible,
            substituted: vec![false; doc.tokens.len()],
            current_relevance,
        })
    }

    pub fn substitutions_committed(&self) -> usize {
        self.substituted.iter().filter(|s| **s).count()
    }
}
