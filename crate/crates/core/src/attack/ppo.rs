//! Clipped-surrogate policy optimization.
//!
//! Advantages are computed once per update from the value estimates
//! recorded at collection time (`A_t = R_t - V(s_t)`), normalized per
//! batch, and held fixed across epochs; the clipped surrogate
//! `min(ratio * A, clip(ratio) * A)` is maximized while the value net
//! regresses onto the discounted returns.

use super::policy::{PolicyNet, ValueNet};
use super::reward::discounted_returns;
use super::PpoParams;
use crate::error::{Error, Result};
use crate::nn::{log_sum_exp, softmax, GradientSet, Mode};
use crate::rng::RngStream;

/// One recorded step: everything needed to re-evaluate the policy and
/// value on that state later.
#[derive(Debug, Clone)]
pub struct TrajectoryStep {
    pub state_feats: Vec<f64>,
    pub cand_feats: Vec<Vec<f64>>,
    pub action: usize,
    pub reward: f64,
    /// Natural-log probability of `action` under the collecting policy.
    pub old_logp: f64,
    /// Value estimate at collection time.
    pub value_estimate: f64,
}

/// An ordered episode segment.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::EmptyInput("trajectory"));
        }
        for (t, s) in self.steps.iter().enumerate() {
            if !s.reward.is_finite() {
                return Err(Error::NonFinite(format!("reward at step {t}")));
            }
            if s.action >= s.cand_feats.len() {
                return Err(Error::InvalidArgument(format!(
                    "action {} out of range at step {t}",
                    s.action
                )));
            }
        }
        Ok(())
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }
}

/// Returns and batch-normalized advantages from recorded estimates.
pub fn returns_and_advantages(traj: &Trajectory, gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let returns = discounted_returns(&traj.rewards(), gamma);
    let mut advs: Vec<f64> = returns
        .iter()
        .zip(&traj.steps)
        .map(|(r, s)| r - s.value_estimate)
        .collect();
    let n = advs.len() as f64;
    let mean = advs.iter().sum::<f64>() / n;
    let var = advs.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std > 1e-8 {
        for a in &mut advs {
            *a = (*a - mean) / std;
        }
    }
    (returns, advs)
}

/// Losses only (no gradients); the finite-difference oracle target.
pub fn ppo_losses(
    policy: &PolicyNet,
    value: &ValueNet,
    traj: &Trajectory,
    params: &PpoParams,
) -> Result<(f64, f64)> {
    traj.validate()?;
    let (returns, advs) = returns_and_advantages(traj, params.gamma);
    let t_count = traj.steps.len() as f64;
    let mut surr_sum = 0.0;
    let mut value_sum = 0.0;
    for ((step, adv), ret) in traj.steps.iter().zip(&advs).zip(&returns) {
        let logits = policy.logits(&step.state_feats, &step.cand_feats)?;
        let logp = logits[step.action] - log_sum_exp(&logits);
        let ratio = (logp - step.old_logp).exp();
        let clipped = ratio.clamp(1.0 - params.clip, 1.0 + params.clip);
        surr_sum += (ratio * adv).min(clipped * adv);
        let v = value.value(&step.state_feats)?;
        value_sum += (ret - v) * (ret - v);
    }
    Ok((-surr_sum / t_count, params.value_coef * value_sum / t_count))
}

/// Gradient evaluation of the PPO loss at the current parameters, used
/// by update epochs and by finite-difference checks.
pub struct PpoGrads {
    pub state: GradientSet,
    pub cand: GradientSet,
    pub head: GradientSet,
    pub value: GradientSet,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub mean_ratio: f64,
}

/// One full-batch gradient evaluation of the PPO loss.
pub fn ppo_gradients(
    policy: &PolicyNet,
    value: &ValueNet,
    traj: &Trajectory,
    params: &PpoParams,
    returns: &[f64],
    advs: &[f64],
) -> Result<PpoGrads> {
    let t_count = traj.steps.len() as f64;
    let mut grads = PpoGrads {
        state: GradientSet::zeros_like(&policy.state_enc),
        cand: GradientSet::zeros_like(&policy.cand_enc),
        head: GradientSet::zeros_like(&policy.head),
        value: GradientSet::zeros_like(&value.net),
        policy_loss: 0.0,
        value_loss: 0.0,
        mean_ratio: 0.0,
    };
    let mut rng = RngStream::new(0);
    for ((step, &adv), &ret) in traj.steps.iter().zip(advs).zip(returns) {
        let (logits, trace) = policy.logits_traced(&step.state_feats, &step.cand_feats)?;
        let probs = softmax(&logits)?;
        let logp = logits[step.action] - log_sum_exp(&logits);
        let ratio = (logp - step.old_logp).exp();
        let clipped = ratio.clamp(1.0 - params.clip, 1.0 + params.clip);
        let unclipped_term = ratio * adv;
        let clipped_term = clipped * adv;
        grads.policy_loss -= unclipped_term.min(clipped_term) / t_count;
        grads.mean_ratio += ratio / t_count;
        // d surr / d logp is ratio * adv on the unclipped branch and zero
        // once the clip binds; loss is the negated mean.
        let dlogp = if unclipped_term <= clipped_term {
            -(adv * ratio) / t_count
        } else {
            0.0
        };
        if dlogp != 0.0 {
            let mut state_out_grad = vec![0.0; trace.state_out.len()];
            for i in 0..step.cand_feats.len() {
                let indicator = f64::from(u8::from(i == step.action));
                let dz = dlogp * (indicator - probs[i]);
                if dz == 0.0 {
                    continue;
                }
                let head_back = policy.head.backward(&trace.head_caches[i], &[dz])?;
                let split = trace.state_out.len();
                for (g, h) in state_out_grad
                    .iter_mut()
                    .zip(&head_back.input_grad[..split])
                {
                    *g += h;
                }
                let cand_back = policy
                    .cand_enc
                    .backward(&trace.cand_caches[i], &head_back.input_grad[split..])?;
                grads.cand.accumulate(&cand_back);
                grads.head.accumulate(&head_back);
            }
            let state_back = policy
                .state_enc
                .backward(&trace.state_cache, &state_out_grad)?;
            grads.state.accumulate(&state_back);
        }
        // Value regression toward the return.
        let (v, vcache) = value.net.forward(&step.state_feats, Mode::Eval, &mut rng)?;
        let err = v[0] - ret;
        grads.value_loss += params.value_coef * err * err / t_count;
        let dv = params.value_coef * 2.0 * err / t_count;
        let value_back = value.net.backward(&vcache, &[dv])?;
        grads.value.accumulate(&value_back);
    }
    Ok(grads)
}

/// Update diagnostics: final losses and the mean probability ratio of the
/// last epoch.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PpoDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub mean_ratio: f64,
}

/// Run `epochs` full-batch gradient steps on the policy and value nets.
///
/// A non-finite loss or gradient aborts the update and restores the
/// parameters that were in place when the call started.
pub fn ppo_update(
    policy: &mut PolicyNet,
    value: &mut ValueNet,
    traj: &Trajectory,
    params: &PpoParams,
) -> Result<PpoDiagnostics> {
    params.validate()?;
    traj.validate()?;
    let (returns, advs) = returns_and_advantages(traj, params.gamma);
    let snapshot = (policy.clone(), value.clone());
    let mut last = PpoDiagnostics {
        policy_loss: 0.0,
        value_loss: 0.0,
        mean_ratio: 1.0,
    };
    for _ in 0..params.epochs {
        let step = ppo_gradients(policy, value, traj, params, &returns, &advs).and_then(|g| {
            if !(g.policy_loss.is_finite() && g.value_loss.is_finite()) {
                return Err(Error::NonFinite("ppo loss".into()));
            }
            policy.state_enc.optimizer_step(&g.state, params.lr)?;
            policy.cand_enc.optimizer_step(&g.cand, params.lr)?;
            policy.head.optimizer_step(&g.head, params.lr)?;
            value.net.optimizer_step(&g.value, params.lr)?;
            Ok(PpoDiagnostics {
                policy_loss: g.policy_loss,
                value_loss: g.value_loss,
                mean_ratio: g.mean_ratio,
            })
        });
        match step {
            Ok(diag) => last = diag,
            Err(e) => {
                *policy = snapshot.0;
                *value = snapshot.1;
                return Err(e);
            }
        }
    }
    Ok(last)
}
