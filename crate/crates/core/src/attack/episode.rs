//! Attack episodes: the select-substitute-reward-update loop against a
//! black-box target retriever and generator.

use serde::{Deserialize, Serialize};

use super::policy::{candidate_features, encode_state, policy_select, AgentNets, SelectMode};
use super::position::select_position;
use super::ppo::{ppo_update, Trajectory, TrajectoryStep};
use super::reward::compute_reward;
use super::{build_candidates, AttackParams, AttackState, Variant};
use crate::corpus::{cosine, tokenize, Benchmark, Document, Idf, Query, SynonymTable};
use crate::error::{Error, Result};
use crate::ragenv::{answer, answer_changed, GeneratorConfig, RagAnswer};
use crate::retriever::{dot, top_k_cached, CorpusIndex, DualEncoder};
use crate::rng::RngStream;

pub const METHOD_REGENT: &str = "regent";
pub const METHOD_REGENT_NR: &str = "regent-nr";
pub const METHOD_REGENT_NG: &str = "regent-ng";
pub const METHOD_GREEDY: &str = "greedy";

pub fn method_name(variant: Variant) -> &'static str {
    match variant {
        Variant::Full => METHOD_REGENT,
        Variant::CoarseRetriever => METHOD_REGENT_NR,
        Variant::NoGenerationReward => METHOD_REGENT_NG,
    }
}

/// Everything an attack episode needs from the outside world. The target
/// encoder and the generator are consumed strictly through their
/// observable interfaces (top-k lists and answers).
pub struct AttackEnv<'a> {
    pub surrogate: &'a DualEncoder,
    pub target: &'a DualEncoder,
    pub benchmark: &'a Benchmark,
    pub synonyms: &'a SynonymTable,
    pub idf: &'a Idf,
    pub gen_cfg: &'a GeneratorConfig,
    pub k: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubstitutionRecord {
    pub step: usize,
    pub position: usize,
    pub from: String,
    pub to: String,
}

/// One attack step, serialized into per-query log files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepLog {
    pub t: usize,
    pub j_star: usize,
    pub w_t: String,
    pub w_star: String,
    pub committed: bool,
    pub delta_r_s: f64,
    pub r_gen: f64,
    pub doc_sim: f64,
    pub reward: f64,
}

/// Episode outcome summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackResult {
    pub query_id: String,
    pub method: String,
    /// The unattacked system already produced the desired answer; such
    /// queries are excluded from metric denominators upstream.
    pub pre_attack_hit: bool,
    pub retrieval_success: bool,
    pub generation_success: bool,
    pub steps: usize,
    pub substitutions: Vec<SubstitutionRecord>,
    pub perturbed_text: String,
    pub original_len: usize,
    /// Document similarity between the emitted and original document.
    pub final_doc_sim: f64,
    /// Fraction of original tokens substituted, in [0, 1].
    pub perturbation_rate: f64,
    /// Mean generation reward observed over the episode.
    pub mean_gen_reward: f64,
    /// Reward of the final step (0 when no steps ran).
    pub final_reward: f64,
    pub log: Vec<StepLog>,
    /// Populated when the episode aborted with an error; such entries
    /// count as failures.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl AttackResult {
    /// Placeholder result for a query whose episode crashed; the suite
    /// records these and keeps going.
    pub fn failed(query_id: &str, method: &str, error: String) -> Self {
        AttackResult {
            query_id: query_id.to_string(),
            method: method.to_string(),
            pre_attack_hit: false,
            retrieval_success: false,
            generation_success: false,
            steps: 0,
            substitutions: vec![],
            perturbed_text: String::new(),
            original_len: 1,
            final_doc_sim: 1.0,
            perturbation_rate: 0.0,
            mean_gen_reward: 0.0,
            final_reward: 0.0,
            log: vec![],
            error: Some(error),
        }
    }
}

impl AttackResult {
    pub fn full_success(&self) -> bool {
        self.retrieval_success && self.generation_success
    }
}

pub(crate) struct StepApplication {
    pub committed: bool,
    pub delta: f64,
    pub doc_sim: f64,
    pub r_gen: f64,
}

/// Shared episode machinery for the RL agent and the greedy baseline.
pub(crate) struct Episode<'a> {
    pub env: &'a AttackEnv<'a>,
    pub q: &'a Query,
    pub doc_id: String,
    pub state: AttackState,
    pub sq_enc: Vec<f64>,
    tq_enc: Vec<f64>,
    target_index: CorpusIndex,
    orig_doc_enc: Vec<f64>,
    pre_answer: RagAnswer,
    pub pre_attack_hit: bool,
    pub max_subs: usize,
    tau: f64,
    min_gain: f64,
    pub retrieval_success: bool,
    pub generation_success: bool,
    substitutions: Vec<SubstitutionRecord>,
    logs: Vec<StepLog>,
}

impl<'a> Episode<'a> {
    pub fn new(env: &'a AttackEnv<'a>, q: &'a Query, params: &AttackParams) -> Result<Self> {
        params.validate()?;
        if env.gen_cfg.k != env.k {
            return Err(Error::InvalidArgument(format!(
                "generator k = {} does not match retrieval k = {}",
                env.gen_cfg.k, env.k
            )));
        }
        let doc = env
            .benchmark
            .target_doc(&q.id)
            .ok_or_else(|| Error::AttackPrecondition(format!("no target document for {}", q.id)))?;
        let target_index = CorpusIndex::build(env.target, &env.benchmark.corpus);
        let tq_enc = env.target.encode_query_tokens(&q.tokens);
        let pre_topk = top_k_cached(&tq_enc, &target_index, env.k)?;
        if pre_topk.contains(&doc.id) {
            return Err(Error::AttackPrecondition(format!(
                "target document {} is already in the top-{} for {}",
                doc.id, env.k, q.id
            )));
        }
        let context = resolve_context(env.benchmark, pre_topk.ids(), None, &doc.id);
        let context_refs: Vec<&Document> = context.iter().collect();
        let pre_answer = answer(env.gen_cfg, q, &context_refs, env.idf)?;
        let norm = |s: &str| tokenize(s).join(" ");
        let pre_attack_hit = norm(&pre_answer.label) == norm(&q.desired_answer);
        let state = AttackState::new(doc, q, env.surrogate)?;
        let max_subs = ((params.max_sub_fraction * doc.tokens.len() as f64).ceil() as usize).max(1);
        Ok(Episode {
            env,
            q,
            doc_id: doc.id.clone(),
            sq_enc: env.surrogate.encode_query_tokens(&q.tokens),
            tq_enc,
            target_index,
            orig_doc_enc: env.surrogate.encode_doc_tokens(&doc.tokens),
            pre_answer,
            pre_attack_hit,
            state,
            max_subs,
            tau: params.reward.tau,
            min_gain: params.min_gain,
            retrieval_success: false,
            generation_success: false,
            substitutions: Vec::new(),
            logs: Vec::new(),
        })
    }

    /// Surrogate relevance delta if position `j` were substituted with `w`.
    pub fn tentative_delta(&self, j: usize, w: &str) -> f64 {
        if self.state.current[j] == w {
            return 0.0;
        }
        let mut tokens = self.state.current.clone();
        tokens[j] = w.to_string();
        let rel = dot(&self.sq_enc, &self.env.surrogate.encode_doc_tokens(&tokens));
        rel - self.state.current_relevance
    }

    /// Evaluate the action at (`j`, `w`), commit it if it passes the
    /// relevance-gain gate and the similarity floor, and record attempt
    /// statistics. The reward components are computed from the tentative
    /// document either way so the policy sees what the action would do.
    pub fn apply_action(&mut self, j: usize, w: &str, variant: Variant) -> Result<StepApplication> {
        let no_op = self.state.current[j] == w;
        let (tent_tokens, rel_new) = if no_op {
            (self.state.current.clone(), self.state.current_relevance)
        } else {
            let mut tokens = self.state.current.clone();
            tokens[j] = w.to_string();
            let rel = dot(&self.sq_enc, &self.env.surrogate.encode_doc_tokens(&tokens));
            (tokens, rel)
        };
        let delta = rel_new - self.state.current_relevance;
        let doc_sim = cosine(
            &self.env.surrogate.encode_doc_tokens(&tent_tokens),
            &self.orig_doc_enc,
        );
        let r_gen = if variant.uses_generation_reward() {
            self.generation_reward(&tent_tokens)?
        } else {
            0.0
        };
        let rel_gain = delta / self.state.current_relevance.abs().max(1e-12);
        let committed = !no_op
            && rel_gain >= self.min_gain
            && doc_sim >= self.tau
            && self.state.substitutions_committed() < self.max_subs;
        self.state.stats[j].attempts += 1;
        if committed {
            self.state.stats[j].successes += 1;
            self.state.step += 1;
            self.substitutions.push(SubstitutionRecord {
                step: self.state.step,
                position: j,
                from: self.state.current[j].clone(),
                to: w.to_string(),
            });
            self.state.current = tent_tokens;
            self.state.current_relevance = rel_new;
            self.state.substituted[j] = true;
            // A position holding a query keyword has nothing better left;
            // keep the budget away from it.
            if self.q.keywords.iter().any(|k| k == w) {
                self.state.eligible[j] = false;
            }
            self.target_index
                .update_doc(self.env.target, &self.doc_id, &self.state.current);
        }
        Ok(StepApplication {
            committed,
            delta,
            doc_sim,
            r_gen,
        })
    }

    /// Reference weight the generator would give the tentative document
    /// if it entered the context: the document joins the current top-k
    /// (displacing the last entry when it is not already ranked).
    fn generation_reward(&self, tent_tokens: &[String]) -> Result<f64> {
        let topk = top_k_cached(&self.tq_enc, &self.target_index, self.env.k)?;
        let context = resolve_context(
            self.env.benchmark,
            topk.ids(),
            Some(tent_tokens),
            &self.doc_id,
        );
        let context_refs: Vec<&Document> = context.iter().collect();
        let generated = answer(self.env.gen_cfg, self.q, &context_refs, self.env.idf)?;
        let tent_doc = context
            .iter()
            .find(|d| d.id == self.doc_id)
            .expect("context always carries the target document");
        Ok(crate::ragenv::reference_score(
            self.q,
            &generated,
            tent_doc,
            self.env.idf,
        ))
    }

    /// Reference weight of the unmodified target document if it entered
    /// the context now; used for reward calibration.
    pub fn probe_generation_reward(&self) -> Result<f64> {
        let tokens = self.state.current.clone();
        self.generation_reward(&tokens)
    }

    pub fn record_step(
        &mut self,
        t: usize,
        j: usize,
        w_t: &str,
        w_star: &str,
        app: &StepApplication,
        reward: f64,
    ) {
        self.state.stats[j].cumulative_reward += reward;
        self.logs.push(StepLog {
            t,
            j_star: j,
            w_t: w_t.to_string(),
            w_star: w_star.to_string(),
            committed: app.committed,
            delta_r_s: app.delta,
            r_gen: app.r_gen,
            doc_sim: app.doc_sim,
            reward,
        });
    }

    /// Query the real target retriever and generator with the committed
    /// document and update the success flags.
    pub fn success_check(&mut self) -> Result<()> {
        let topk = top_k_cached(&self.tq_enc, &self.target_index, self.env.k)?;
        if !topk.contains(&self.doc_id) {
            return Ok(());
        }
        self.retrieval_success = true;
        let context = resolve_context(
            self.env.benchmark,
            topk.ids(),
            Some(&self.state.current),
            &self.doc_id,
        );
        let context_refs: Vec<&Document> = context.iter().collect();
        let generated = answer(self.env.gen_cfg, self.q, &context_refs, self.env.idf)?;
        if answer_changed(&self.pre_answer, &generated, &self.q.desired_answer) {
            self.generation_success = true;
        }
        Ok(())
    }

    pub fn finish(self, method: &str, steps: usize) -> AttackResult {
        let final_doc_sim = cosine(
            &self.env.surrogate.encode_doc_tokens(&self.state.current),
            &self.orig_doc_enc,
        );
        // A result below the similarity floor is never reported a success.
        let admissible = final_doc_sim >= self.tau;
        let n = self.state.original.len().max(1);
        let gen_rewards: Vec<f64> = self.logs.iter().map(|l| l.r_gen).collect();
        // Perturbation rate counts positions that differ from the
        // original, not substitution events (a position can be rewritten
        // more than once on the way to its final word).
        let changed = self
            .state
            .current
            .iter()
            .zip(&self.state.original)
            .filter(|(a, b)| a != b)
            .count();
        AttackResult {
            query_id: self.q.id.clone(),
            method: method.to_string(),
            pre_attack_hit: self.pre_attack_hit,
            retrieval_success: self.retrieval_success && admissible,
            generation_success: self.generation_success && admissible,
            steps,
            perturbation_rate: changed as f64 / n as f64,
            substitutions: self.substitutions,
            perturbed_text: self.state.current.join(" "),
            original_len: n,
            final_doc_sim,
            mean_gen_reward: if gen_rewards.is_empty() {
                0.0
            } else {
                gen_rewards.iter().sum::<f64>() / gen_rewards.len() as f64
            },
            final_reward: self.logs.last().map(|l| l.reward).unwrap_or(0.0),
            log: self.logs,
            error: None,
        }
    }
}

/// Materialize context documents for the generator, substituting the
/// current perturbed target text and forcing the target document into
/// the context when `override_target` asks for a hypothetical entry.
fn resolve_context(
    bench: &Benchmark,
    topk_ids: impl Iterator<Item = impl AsRef<str>>,
    override_target: Option<&[String]>,
    target_id: &str,
) -> Vec<Document> {
    let mut docs: Vec<Document> = topk_ids
        .map(|id| {
            bench
                .document(id.as_ref())
                .expect("retrieved ids exist")
                .clone()
        })
        .collect();
    if let Some(tokens) = override_target {
        let doc = Document {
            id: target_id.to_string(),
            text: tokens.join(" "),
            tokens: tokens.to_vec(),
        };
        match docs.iter().position(|d| d.id == target_id) {
            Some(i) => docs[i] = doc,
            None => {
                let last = docs.len() - 1;
                docs[last] = doc;
            }
        }
    }
    docs
}

/// Run one attack episode.
///
/// The agent nets are taken by mutable reference so callers can choose
/// per-query resets (the default) or persistence across queries.
pub fn run_attack(
    env: &AttackEnv,
    q: &Query,
    params: &AttackParams,
    variant: Variant,
    nets: &mut AgentNets,
    rng: &mut RngStream,
) -> Result<AttackResult> {
    let mut ep = Episode::new(env, q, params)?;
    if ep.pre_attack_hit {
        return Ok(ep.finish(method_name(variant), 0));
    }
    let mut buffer: Vec<TrajectoryStep> = Vec::new();
    let mut steps_used = 0;
    for t in 1..=params.budget {
        let j = match select_position(env.surrogate, &ep.sq_enc, &ep.state, &params.position, rng) {
            Ok(j) => j,
            Err(Error::NoEligiblePositions) => break,
            Err(e) => return Err(e),
        };
        let w_t = ep.state.current[j].clone();
        let cand_set = build_candidates(
            &w_t,
            j,
            &q.keywords,
            env.synonyms,
            env.surrogate,
            &ep.sq_enc,
            params.m,
            params.beta,
            params.candidate_sim_floor,
        )?;
        let state_feats = encode_state(&ep.state, env.surrogate, q, t - 1, params.budget);
        let cand_feats: Vec<Vec<f64>> = cand_set
            .candidates
            .iter()
            .map(|c| candidate_features(c, env.surrogate))
            .collect();
        let (action, logp) = policy_select(
            &nets.policy,
            &state_feats,
            &cand_feats,
            rng,
            SelectMode::Sample,
        )?;
        let w_star = cand_set.candidates[action].word.clone();
        let app = ep.apply_action(j, &w_star, variant)?;
        let reward = compute_reward(app.delta, app.r_gen, app.doc_sim, &params.reward, variant);
        ep.record_step(t, j, &w_t, &w_star, &app, reward);
        let value_estimate = nets.value.value(&state_feats)?;
        buffer.push(TrajectoryStep {
            state_feats,
            cand_feats,
            action,
            reward,
            old_logp: logp,
            value_estimate,
        });
        steps_used = t;
        ep.success_check()?;
        if ep.retrieval_success && ep.generation_success {
            break;
        }
        if t % params.update_interval == 0 {
            let traj = Trajectory {
                steps: std::mem::take(&mut buffer),
            };
            // A failed update keeps the previous parameters and the
            // episode continues.
            let _ = ppo_update(&mut nets.policy, &mut nets.value, &traj, &params.ppo);
        }
        if ep.state.substitutions_committed() >= ep.max_subs {
            break;
        }
    }
    if !buffer.is_empty() {
        let traj = Trajectory { steps: buffer };
        let _ = ppo_update(&mut nets.policy, &mut nets.value, &traj, &params.ppo);
    }
    Ok(ep.finish(method_name(variant), steps_used))
}
