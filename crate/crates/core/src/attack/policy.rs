//! Policy and value networks.
//!
//! The policy scores each candidate with a head over the concatenated
//! state and candidate encodings, `z_i = f_p([f_s(s); f_c(c_i)])`, and
//! turns the scores into a distribution with softmax. The value network
//! maps the state features to a scalar return estimate.

use super::{AttackState, Candidate};
use crate::corpus::{cosine, Query};
use crate::error::{Error, Result};
use crate::nn::{softmax, Activation, DenseNet, ForwardCache, Mode};
use crate::retriever::DualEncoder;
use crate::rng::RngStream;

/// State-feature length for an encoder of dimension `d`: pooled document,
/// pooled query, relevance, document self-similarity, step fraction.
pub fn state_feature_len(encoder_dim: usize) -> usize {
    2 * encoder_dim + 3
}

/// Candidate-feature length: word embedding plus three scalars.
pub fn candidate_feature_len(encoder_dim: usize) -> usize {
    encoder_dim + 3
}

/// Fixed-length state features, versioned `state-features/v1`:
/// `[pool(d^t) | pool(q) | R_s(q, d^t) | cos(f_d(d^t), f_d(d^0)) | t/budget]`.
pub fn encode_state(
    state: &AttackState,
    enc: &DualEncoder,
    q: &Query,
    step: usize,
    budget: usize,
) -> Vec<f64> {
    let mut feats = enc.pool_tokens(&state.current);
    feats.extend(enc.pool_tokens(&q.tokens));
    feats.push(state.current_relevance);
    let now = enc.encode_doc_tokens(&state.current);
    let orig = enc.encode_doc_tokens(&state.original);
    feats.push(cosine(&now, &orig));
    feats.push(step as f64 / budget.max(1) as f64);
    feats
}

/// Candidate features: the encoder's embedding row for the word (zeros
/// when out of vocabulary) plus similarity-to-original, keyword and
/// no-op flags.
pub fn candidate_features(cand: &Candidate, enc: &DualEncoder) -> Vec<f64> {
    let mut feats = match enc.vocab().id(&cand.word) {
        Some(id) => enc.embedding_row(id).to_vec(),
        None => vec![0.0; enc.dim()],
    };
    feats.push(cand.sim_to_original);
    feats.push(f64::from(u8::from(cand.is_keyword)));
    feats.push(f64::from(u8::from(cand.is_original)));
    feats
}

/// The three-component policy network.
#[derive(Debug, Clone)]
pub struct PolicyNet {
    pub state_enc: DenseNet,
    pub cand_enc: DenseNet,
    pub head: DenseNet,
}

/// Forward records for one policy evaluation, kept for backprop.
pub(crate) struct PolicyTrace {
    pub state_out: Vec<f64>,
    pub state_cache: ForwardCache,
    pub cand_caches: Vec<ForwardCache>,
    pub head_caches: Vec<ForwardCache>,
}

impl PolicyNet {
    pub fn new(state_dim: usize, cand_dim: usize, rng: &mut RngStream) -> Result<Self> {
        let acts = [Activation::Relu, Activation::Identity];
        Ok(PolicyNet {
            state_enc: DenseNet::random(
                &[state_dim, 64, 32],
                &acts,
                0.0,
                &mut rng.derive("policy/state"),
            )?,
            cand_enc: DenseNet::random(
                &[cand_dim, 64, 32],
                &acts,
                0.0,
                &mut rng.derive("policy/candidate"),
            )?,
            head: DenseNet::random(&[64, 32, 1], &acts, 0.0, &mut rng.derive("policy/head"))?,
        })
    }

    /// Candidate scores `z_i` with the traces needed for backprop.
    pub(crate) fn logits_traced(
        &self,
        state_feats: &[f64],
        cand_feats: &[Vec<f64>],
    ) -> Result<(Vec<f64>, PolicyTrace)> {
        if cand_feats.is_empty() {
            return Err(Error::EmptyInput("candidate features"));
        }
        let mut rng = RngStream::new(0);
        let (state_out, state_cache) = self.state_enc.forward(state_feats, Mode::Eval, &mut rng)?;
        let mut logits = Vec::with_capacity(cand_feats.len());
        let mut cand_caches = Vec::with_capacity(cand_feats.len());
        let mut head_caches = Vec::with_capacity(cand_feats.len());
        for feats in cand_feats {
            let (cand_out, cand_cache) = self.cand_enc.forward(feats, Mode::Eval, &mut rng)?;
            let mut joint = state_out.clone();
            joint.extend_from_slice(&cand_out);
            let (z, head_cache) = self.head.forward(&joint, Mode::Eval, &mut rng)?;
            if !z[0].is_finite() {
                return Err(Error::NonFinite("policy logit".into()));
            }
            logits.push(z[0]);
            cand_caches.push(cand_cache);
            head_caches.push(head_cache);
        }
        Ok((
            logits,
            PolicyTrace {
                state_out,
                state_cache,
                cand_caches,
                head_caches,
            },
        ))
    }

    pub fn logits(&self, state_feats: &[f64], cand_feats: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self.logits_traced(state_feats, cand_feats)?.0)
    }

    /// Log-probability of `action` under the current policy.
    pub fn log_prob(
        &self,
        state_feats: &[f64],
        cand_feats: &[Vec<f64>],
        action: usize,
    ) -> Result<f64> {
        let logits = self.logits(state_feats, cand_feats)?;
        Ok(logits[action] - crate::nn::log_sum_exp(&logits))
    }
}

/// Scalar return estimator over state features.
#[derive(Debug, Clone)]
pub struct ValueNet {
    pub net: DenseNet,
}

impl ValueNet {
    pub fn new(state_dim: usize, rng: &mut RngStream) -> Result<Self> {
        Ok(ValueNet {
            net: DenseNet::random(
                &[state_dim, 64, 1],
                &[Activation::Relu, Activation::Identity],
                0.0,
                &mut rng.derive("value"),
            )?,
        })
    }

    pub fn value(&self, state_feats: &[f64]) -> Result<f64> {
        Ok(self.net.infer(state_feats)?[0])
    }
}

/// Policy and value networks for one agent.
#[derive(Debug, Clone)]
pub struct AgentNets {
    pub policy: PolicyNet,
    pub value: ValueNet,
}

impl AgentNets {
    pub fn new(state_dim: usize, cand_dim: usize, rng: &mut RngStream) -> Result<Self> {
        Ok(AgentNets {
            policy: PolicyNet::new(state_dim, cand_dim, rng)?,
            value: ValueNet::new(state_dim, rng)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectMode {
    /// Sample from the policy distribution (training).
    Sample,
    /// Argmax with ties to the lowest index (evaluation).
    Greedy,
}

/// Choose a candidate. Returns the action index and its natural-log
/// probability under the policy.
pub fn policy_select(
    policy: &PolicyNet,
    state_feats: &[f64],
    cand_feats: &[Vec<f64>],
    rng: &mut RngStream,
    mode: SelectMode,
) -> Result<(usize, f64)> {
    let logits = policy.logits(state_feats, cand_feats)?;
    let probs = softmax(&logits)?;
    let action = match mode {
        SelectMode::Greedy => {
            let mut best = 0;
            for (i, p) in probs.iter().enumerate() {
                if *p > probs[best] {
                    best = i;
                }
            }
            best
        }
        SelectMode::Sample => {
            let draw = rng.uniform();
            let mut acc = 0.0;
            let mut chosen = probs.len() - 1;
            for (i, p) in probs.iter().enumerate() {
                acc += p;
                if draw < acc {
                    chosen = i;
                    break;
                }
            }
            chosen
        }
    };
    Ok((action, probs[action].ln()))
}
