//! The evaluation suite: run every configured method over every eligible
//! query and assemble the report.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::attack::{
    candidate_feature_len, run_attack, state_feature_len, AgentNets, AttackEnv, AttackParams,
    AttackResult, Variant, METHOD_GREEDY, METHOD_REGENT, METHOD_REGENT_NG, METHOD_REGENT_NR,
};
use crate::corpus::{Benchmark, Idf, Query, SynonymTable};
use crate::error::{Error, Result};
use crate::evalbench::baselines::{
    greedy_substitution_baseline, naive_attack, prompt_injection_attack, run_injection_attack,
    InjectionFlavor, METHOD_NAIVE, METHOD_PROMPT_HIJACK, METHOD_PROMPT_NAIVE,
};
use crate::evalbench::report::{benchmark_id, FidelityBlock, MethodReport, QuerySummary, Report};
use crate::evalbench::{compute_metrics, REPORT_SCHEMA_VERSION};
use crate::ragenv::GeneratorConfig;
use crate::retriever::DualEncoder;
use crate::rng::{RngStream, RNG_ALGORITHM};

/// Suite configuration.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub methods: Vec<String>,
    pub attack: AttackParams,
    pub gen_cfg: GeneratorConfig,
    pub k: usize,
    /// Worker cap for the per-query fan-out.
    pub jobs: usize,
    pub seed: u64,
    /// Keep one policy across a method's queries instead of resetting.
    pub persist_policy: bool,
    /// Retrieval-reward weight; `None` calibrates it from the benchmark.
    pub lambda_r: Option<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            methods: vec![
                METHOD_REGENT.into(),
                METHOD_REGENT_NR.into(),
                METHOD_REGENT_NG.into(),
                METHOD_GREEDY.into(),
                METHOD_NAIVE.into(),
                METHOD_PROMPT_NAIVE.into(),
                METHOD_PROMPT_HIJACK.into(),
            ],
            attack: AttackParams::default(),
            gen_cfg: GeneratorConfig::default(),
            k: 3,
            jobs: 1,
            seed: 0,
            persist_policy: false,
            lambda_r: None,
        }
    }
}

/// Report plus the full per-query results (with step logs) per method.
pub struct SuiteOutput {
    pub report: Report,
    pub results: BTreeMap<String, Vec<AttackResult>>,
}

/// Pick the retrieval-reward weight so the relevance and generation
/// reward terms share an order of magnitude: probe the best single
/// substitution delta and the entry reference weight on a few queries.
pub fn calibrate_lambda_r(
    bench: &Benchmark,
    surrogate: &DualEncoder,
    synonyms: &SynonymTable,
    idf: &Idf,
    gen_cfg: &GeneratorConfig,
    target: &DualEncoder,
    k: usize,
    attack: &AttackParams,
) -> f64 {
    let env = AttackEnv {
        surrogate,
        target,
        benchmark: bench,
        synonyms,
        idf,
        gen_cfg,
        k,
    };
    let mut deltas = Vec::new();
    let mut gen_scales = Vec::new();
    for q in bench.queries.iter().take(5) {
        let Ok(ep) = crate::attack::episode::Episode::new(&env, q, attack) else {
            continue;
        };
        let mut best = 0.0f64;
        for j in 0..ep.state.current.len() {
            if !ep.state.eligible[j] {
                continue;
            }
            let Ok(cands) = crate::attack::build_candidates(
                &ep.state.current[j],
                j,
                &q.keywords,
                synonyms,
                surrogate,
                &ep.sq_enc,
                attack.m,
                attack.beta,
                attack.candidate_sim_floor,
            ) else {
                continue;
            };
            for c in &cands.candidates {
                if !c.is_original {
                    best = best.max(ep.tentative_delta(j, &c.word).abs());
                }
            }
        }
        if best > 0.0 {
            deltas.push(best);
        }
        // Reference weight the target document would get if it entered
        // the context unmodified.
        if let Ok(r) = ep.probe_generation_reward() {
            gen_scales.push(r);
        }
    }
    if deltas.is_empty() {
        return 10.0;
    }
    let mean_delta = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let mean_gen = if gen_scales.is_empty() {
        0.5
    } else {
        (gen_scales.iter().sum::<f64>() / gen_scales.len() as f64).max(0.05)
    };
    (mean_gen / mean_delta.max(1e-9)).clamp(0.1, 1e4)
}

#[allow(clippy::too_many_arguments)]
pub fn run_suite(
    bench: &Benchmark,
    coarse: &DualEncoder,
    fine: &DualEncoder,
    target: &DualEncoder,
    synonyms: &SynonymTable,
    cfg: &SuiteConfig,
    fidelity: Option<FidelityBlock>,
    config_snapshot: serde_json::Value,
) -> Result<SuiteOutput> {
    cfg.attack.validate()?;
    let idf = Idf::from_documents(&bench.corpus);
    let mut attack = cfg.attack.clone();
    attack.reward.lambda_r = match cfg.lambda_r {
        Some(v) => v,
        None => calibrate_lambda_r(
            bench,
            fine,
            synonyms,
            &idf,
            &cfg.gen_cfg,
            target,
            cfg.k,
            &cfg.attack,
        ),
    };
    let root = RngStream::new(cfg.seed);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;

    let mut results: BTreeMap<String, Vec<AttackResult>> = BTreeMap::new();
    for method in &cfg.methods {
        let surrogate = if method == METHOD_REGENT_NR {
            coarse
        } else {
            fine
        };
        let env = AttackEnv {
            surrogate,
            target,
            benchmark: bench,
            synonyms,
            idf: &idf,
            gen_cfg: &cfg.gen_cfg,
            k: cfg.k,
        };
        let run_query = |q: &Query| -> AttackResult {
            let mut rng = root.derive(&format!("attack/{method}/{}", q.id));
            let outcome = run_method(method, &env, q, &attack, &mut rng);
            outcome.unwrap_or_else(|e| AttackResult::failed(&q.id, method, e.to_string()))
        };
        let method_results: Vec<AttackResult> = if cfg.persist_policy && is_agent_method(method) {
            // Shared policy forces sequential order.
            let mut nets = fresh_nets(surrogate, &root, method)?;
            bench
                .queries
                .iter()
                .map(|q| {
                    let mut rng = root.derive(&format!("attack/{method}/{}", q.id));
                    run_attack(
                        &env,
                        q,
                        &attack,
                        variant_of(method).unwrap(),
                        &mut nets,
                        &mut rng,
                    )
                    .unwrap_or_else(|e| AttackResult::failed(&q.id, method, e.to_string()))
                })
                .collect()
        } else {
            pool.install(|| bench.queries.par_iter().map(run_query).collect())
        };
        results.insert(method.clone(), method_results);
    }

    // Exclusions are per query, decided by the unattacked system, so the
    // set is identical across methods; collect from the first.
    let excluded: Vec<String> = results
        .values()
        .next()
        .map(|rs| {
            rs.iter()
                .filter(|r| r.pre_attack_hit)
                .map(|r| r.query_id.clone())
                .collect()
        })
        .unwrap_or_default();

    let mut methods = BTreeMap::new();
    for (method, rs) in &results {
        let eligible: Vec<AttackResult> =
            rs.iter().filter(|r| !r.pre_attack_hit).cloned().collect();
        let metrics = compute_metrics(&eligible)?;
        methods.insert(
            method.clone(),
            MethodReport {
                metrics,
                per_query: eligible.iter().map(QuerySummary::from_result).collect(),
            },
        );
    }

    let report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        benchmark_id: benchmark_id(bench, cfg.seed),
        seed: cfg.seed,
        rng_algorithm: RNG_ALGORITHM.into(),
        config: config_snapshot,
        lambda_r_used: attack.reward.lambda_r,
        fidelity,
        methods,
        excluded_queries: excluded,
    };
    Ok(SuiteOutput { report, results })
}

fn is_agent_method(method: &str) -> bool {
    variant_of(method).is_some()
}

fn variant_of(method: &str) -> Option<Variant> {
    match method {
        METHOD_REGENT => Some(Variant::Full),
        METHOD_REGENT_NR => Some(Variant::CoarseRetriever),
        METHOD_REGENT_NG => Some(Variant::NoGenerationReward),
        _ => None,
    }
}

fn fresh_nets(surrogate: &DualEncoder, root: &RngStream, label: &str) -> Result<AgentNets> {
    AgentNets::new(
        state_feature_len(surrogate.dim()),
        candidate_feature_len(surrogate.dim()),
        &mut root.derive(&format!("nets/{label}")),
    )
}

fn run_method(
    method: &str,
    env: &AttackEnv,
    q: &Query,
    attack: &AttackParams,
    rng: &mut RngStream,
) -> Result<AttackResult> {
    match method {
        METHOD_GREEDY => greedy_substitution_baseline(env, q, attack),
        METHOD_NAIVE => run_injection_attack(env, q, naive_attack(q), METHOD_NAIVE),
        METHOD_PROMPT_NAIVE => run_injection_attack(
            env,
            q,
            prompt_injection_attack(q, InjectionFlavor::Naive),
            METHOD_PROMPT_NAIVE,
        ),
        METHOD_PROMPT_HIJACK => run_injection_attack(
            env,
            q,
            prompt_injection_attack(q, InjectionFlavor::Hijack),
            METHOD_PROMPT_HIJACK,
        ),
        _ => {
            let variant = variant_of(method).ok_or_else(|| {
                Error::InvalidArgument(format!("unknown attack method {method:?}"))
            })?;
            let mut nets = AgentNets::new(
                state_feature_len(env.surrogate.dim()),
                candidate_feature_len(env.surrogate.dim()),
                &mut rng.derive("nets"),
            )?;
            run_attack(env, q, attack, variant, &mut nets, rng)
        }
    }
}
