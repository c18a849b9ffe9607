//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Run with `cargo test --test acceptance -- --nocapture` to see
//! the lines for passing criteria too.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regent_core::attack::{
    compute_reward, policy_select, ppo_gradients, ppo_losses, ppo_update, returns_and_advantages,
    AgentNets, PpoParams, RewardParams, SelectMode, Trajectory, TrajectoryStep, Variant,
};
use regent_core::corpus::{
    cosine, generate_benchmark, is_stopword, tokenize, BenchSpec, Benchmark, Document,
    GeneratedBench, Scenario, SynonymTable, WordEmbeddings,
};
use regent_core::evalbench::{metrics_from_counts, run_suite, Report, SuiteConfig};
use regent_core::nn::softmax;
use regent_core::ragenv::GeneratorConfig;
use regent_core::retriever::{
    build_coarse_samples, build_fine_samples, coarse_loss, fine_loss, rank_order,
    surrogate_fidelity, top_k, train_surrogate, CoarseSample, DualEncoder, Fidelity, FineSample,
    MarginSet, TrainData, TrainHyper,
};
use regent_core::rng::RngStream;

const ROOT_SEED: u64 = 20250809;

fn check(criterion: usize, pass: bool, detail: &str) {
    println!(
        "criterion {criterion:>2}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Everything the benchmark-scale criteria share: one generated
/// benchmark, trained surrogates, and suite runs with and without the
/// defensive generator.
struct Fixture {
    done: GeneratedBench,
    spec: BenchSpec,
    target: DualEncoder,
    fine: DualEncoder,
    coarse_fidelity: Fidelity,
    fine_fidelity: Fidelity,
    open_report: Report,
    open_results: BTreeMap<String, Vec<regent_core::attack::AttackResult>>,
    defended_report: Report,
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let spec = BenchSpec {
            n_queries: 50,
            corpus_size: 200,
            ..BenchSpec::default()
        };
        let root = RngStream::new(ROOT_SEED);
        let done = generate_benchmark(&spec, Scenario::Factual, &mut root.derive("bench")).unwrap();
        let target = done.target_encoder(&spec).unwrap();

        let mut enc = DualEncoder::surrogate(
            &done.embeddings,
            &[],
            32,
            64,
            &mut root.derive("surrogate-init"),
        )
        .unwrap();
        let coarse_samples = build_coarse_samples(
            &done.benchmark,
            &target,
            3,
            8,
            &mut root.derive("coarse-samples"),
        )
        .unwrap();
        train_surrogate(
            &mut enc,
            &TrainData::Coarse(coarse_samples),
            &TrainHyper {
                epochs: 60,
                lr: 0.05,
                shuffle: true,
            },
            &mut root.derive("coarse-train"),
        )
        .unwrap();
        let coarse = enc.clone();
        let margins = MarginSet::standard(3, 0.05, 0.05, 0.2, 0.5);
        let fine_samples = build_fine_samples(
            &done.benchmark,
            &coarse,
            &target,
            3,
            20,
            8,
            &margins,
            20,
            &mut root.derive("fine-samples"),
        )
        .unwrap();
        assert!(
            fine_samples.len() <= 20,
            "fine stage must use at most 20 samples"
        );
        train_surrogate(
            &mut enc,
            &TrainData::Fine(fine_samples),
            &TrainHyper {
                epochs: 60,
                lr: 0.005,
                shuffle: true,
            },
            &mut root.derive("fine-train"),
        )
        .unwrap();
        let fine = enc;

        let coarse_fidelity = surrogate_fidelity(&coarse, &target, &done.benchmark, 3).unwrap();
        let fine_fidelity = surrogate_fidelity(&fine, &target, &done.benchmark, 3).unwrap();

        let methods: Vec<String> = [
            "regent",
            "regent-nr",
            "regent-ng",
            "greedy",
            "naive",
            "prompt-naive",
            "prompt-hijack",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let open_cfg = SuiteConfig {
            methods: methods.clone(),
            jobs: 4,
            seed: ROOT_SEED,
            ..SuiteConfig::default()
        };
        let open = run_suite(
            &done.benchmark,
            &coarse,
            &fine,
            &target,
            &done.synonyms,
            &open_cfg,
            None,
            serde_json::json!({"mode": "open"}),
        )
        .unwrap();
        let defended_cfg = SuiteConfig {
            methods: vec![
                "regent".into(),
                "prompt-naive".into(),
                "prompt-hijack".into(),
            ],
            jobs: 4,
            seed: ROOT_SEED,
            gen_cfg: GeneratorConfig {
                defensive: true,
                ..GeneratorConfig::default()
            },
            ..SuiteConfig::default()
        };
        let defended = run_suite(
            &done.benchmark,
            &coarse,
            &fine,
            &target,
            &done.synonyms,
            &defended_cfg,
            None,
            serde_json::json!({"mode": "defended"}),
        )
        .unwrap();

        Fixture {
            done,
            spec,
            target,
            fine,
            coarse_fidelity,
            fine_fidelity,
            open_report: open.report,
            open_results: open.results,
            defended_report: defended.report,
        }
    })
}

fn fd_check_encoder(
    enc: &DualEncoder,
    analytic: &[f64],
    loss_of: impl Fn(&DualEncoder) -> f64,
) -> f64 {
    let h = 1e-5;
    let mut worst = 0.0f64;
    for idx in 0..enc.num_params() {
        let orig = enc.param(idx);
        let mut plus = enc.clone();
        plus.set_param(idx, orig + h);
        let mut minus = enc.clone();
        minus.set_param(idx, orig - h);
        let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
        let denom = fd.abs().max(analytic[idx].abs()).max(1e-6);
        worst = worst.max((fd - analytic[idx]).abs() / denom);
    }
    worst
}

#[test]
fn criterion_01_gradient_fidelity() {
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        // Small dual encoder with both losses.
        let mut emb = WordEmbeddings::new(3);
        let words = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"];
        let mut vrng = RngStream::new(500 + seed);
        for w in words {
            emb.insert(w, (0..3).map(|_| vrng.gaussian()).collect())
                .unwrap();
        }
        let enc = DualEncoder::surrogate(&emb, &[], 4, 8, &mut RngStream::new(seed)).unwrap();

        let coarse_sample = CoarseSample {
            query_id: "q".into(),
            query_tokens: tokenize("alpha beta"),
            positive_id: "p".into(),
            positive_tokens: tokenize("alpha gamma"),
            negative_ids: vec!["n1".into(), "n2".into()],
            negative_tokens: vec![tokenize("delta epsilon"), tokenize("zeta")],
        };
        let (_, grads) = coarse_loss(&enc, &coarse_sample).unwrap();
        worst = worst.max(fd_check_encoder(&enc, &enc.flatten_grads(&grads), |e| {
            coarse_loss(e, &coarse_sample).unwrap().0
        }));

        let fine_sample = FineSample {
            query_id: "q".into(),
            query_tokens: tokenize("alpha beta"),
            ranked: vec![
                ("r1".into(), tokenize("alpha beta gamma")),
                ("r2".into(), tokenize("alpha gamma")),
            ],
            hard: vec![("h1".into(), tokenize("beta delta"))],
            easy: vec![
                ("e1".into(), tokenize("epsilon zeta")),
                ("e2".into(), tokenize("zeta")),
            ],
            margins: MarginSet::standard(2, 0.05, 0.05, 0.2, 0.5),
        };
        let (_, grads) = fine_loss(&enc, &fine_sample).unwrap();
        worst = worst.max(fd_check_encoder(&enc, &enc.flatten_grads(&grads), |e| {
            fine_loss(e, &fine_sample).unwrap().0
        }));

        // Policy and value networks through the PPO loss.
        let nets = AgentNets::new(5, 4, &mut RngStream::new(700 + seed)).unwrap();
        let mut steps = Vec::new();
        for t in 0..2 {
            let state: Vec<f64> = (0..5).map(|i| 0.1 * i as f64 + 0.25 * t as f64).collect();
            let cands: Vec<Vec<f64>> = (0..3)
                .map(|c| (0..4).map(|j| 0.15 * c as f64 - 0.1 * j as f64).collect())
                .collect();
            let action = t % 3;
            let logp = nets.policy.log_prob(&state, &cands, action).unwrap();
            let value_estimate = nets.value.value(&state).unwrap();
            steps.push(TrajectoryStep {
                state_feats: state,
                cand_feats: cands,
                action,
                reward: 0.4 + t as f64,
                old_logp: logp - 0.05,
                value_estimate,
            });
        }
        let traj = Trajectory { steps };
        let params = PpoParams::default();
        let (returns, advs) = returns_and_advantages(&traj, params.gamma);
        let g = ppo_gradients(&nets.policy, &nets.value, &traj, &params, &returns, &advs).unwrap();
        let loss_of = |n: &AgentNets| {
            let (p, v) = ppo_losses(&n.policy, &n.value, &traj, &params).unwrap();
            p + v
        };
        let h = 1e-5;
        let mut check_net = |flat: &[f64],
                             get: &dyn Fn(&AgentNets) -> &regent_core::nn::DenseNet,
                             set: &dyn Fn(&mut AgentNets, usize, f64)| {
            let net = get(&nets);
            for idx in 0..net.num_params() {
                let orig = net.param(idx);
                let mut plus = nets.clone();
                set(&mut plus, idx, orig + h);
                let mut minus = nets.clone();
                set(&mut minus, idx, orig - h);
                let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
                let denom = fd.abs().max(flat[idx].abs()).max(1e-6);
                worst = worst.max((fd - flat[idx]).abs() / denom);
            }
        };
        check_net(
            &nets.policy.state_enc.flatten_grads(&g.state),
            &|n| &n.policy.state_enc,
            &|n, i, v| n.policy.state_enc.set_param(i, v),
        );
        check_net(
            &nets.policy.cand_enc.flatten_grads(&g.cand),
            &|n| &n.policy.cand_enc,
            &|n, i, v| n.policy.cand_enc.set_param(i, v),
        );
        check_net(
            &nets.policy.head.flatten_grads(&g.head),
            &|n| &n.policy.head,
            &|n, i, v| n.policy.head.set_param(i, v),
        );
        check_net(
            &nets.value.net.flatten_grads(&g.value),
            &|n| &n.value.net,
            &|n, i, v| n.value.net.set_param(i, v),
        );
    }
    check(
        1,
        worst <= 1e-4,
        &format!("worst relative gradient error {worst:.3e} across both losses, policy and value nets, 10 seeds"),
    );
}

#[test]
fn criterion_02_retrieval_oracle_equivalence() {
    let mut emb = WordEmbeddings::new(4);
    let words: Vec<String> = (0..12).map(|i| format!("w{i:02}")).collect();
    let mut vrng = RngStream::new(31);
    for w in &words {
        emb.insert(w.clone(), (0..4).map(|_| vrng.gaussian()).collect())
            .unwrap();
    }
    let enc = DualEncoder::surrogate(&emb, &[], 4, 8, &mut RngStream::new(32)).unwrap();
    let mut rng = RngStream::new(33);
    let mut checked = 0usize;
    for case in 0..100 {
        let n = 1 + rng.below(1000);
        let mut docs = Vec::with_capacity(n);
        for i in 0..n {
            // Tiny vocabulary and short docs force plenty of score ties.
            let len = 1 + rng.below(3);
            let text: Vec<String> = (0..len).map(|_| words[rng.below(4)].clone()).collect();
            docs.push(Document::new(format!("d{i:04}"), text.join(" ")));
        }
        let q_tokens = vec![words[rng.below(6)].clone(), words[rng.below(6)].clone()];
        let query = regent_core::corpus::Query {
            id: format!("q{case}"),
            text: q_tokens.join(" "),
            tokens: q_tokens.clone(),
            keywords: vec![],
            gold_answer: "x".into(),
            desired_answer: "y".into(),
            scenario: Scenario::Factual,
        };
        let k = 1 + rng.below(n);
        let fast = top_k(&enc, &query, &docs, k).unwrap();

        let q_enc = enc.encode_query_tokens(&q_tokens);
        let mut oracle: Vec<(String, f64)> = docs
            .iter()
            .map(|d| {
                let dv = enc.encode_doc_tokens(&d.tokens);
                (
                    d.id.clone(),
                    q_enc.iter().zip(&dv).map(|(a, b)| a * b).sum(),
                )
            })
            .collect();
        oracle.sort_by(rank_order);
        oracle.truncate(k);
        assert_eq!(fast.entries().len(), oracle.len());
        for (a, b) in fast.entries().iter().zip(&oracle) {
            assert_eq!(a.0, b.0, "case {case} k {k}");
            assert_eq!(a.1.to_bits(), b.1.to_bits());
        }
        checked += 1;
    }
    check(
        2,
        checked == 100,
        &format!("{checked}/100 randomized corpora match the full-sort oracle exactly"),
    );
}

#[test]
fn criterion_03_surrogate_training_direction() {
    let started = std::time::Instant::now();
    let f = fixture();
    let gain = f.fine_fidelity.f1 - f.coarse_fidelity.f1;
    let elapsed = started.elapsed();
    check(
        3,
        gain >= 10.0 && elapsed.as_secs() <= 120,
        &format!(
            "F1@3 coarse {:.1} -> fine {:.1} (gain {gain:.1} >= 10) with <= 20 fine samples in {elapsed:.1?}",
            f.coarse_fidelity.f1, f.fine_fidelity.f1
        ),
    );
}

#[test]
fn criterion_04_reward_case_split() {
    let p = RewardParams {
        lambda_r: 2.0,
        tau: 0.97,
        penalty: 5.0,
        neg_penalty: 1.0,
    };
    // (delta, r_gen, doc_sim, variant, expected); expected follows the
    // two-branch definition: base = lambda_r * delta + r_gen, minus
    // neg_penalty * |delta| when delta < 0, minus penalty when sim < tau.
    let table: Vec<(f64, f64, f64, Variant, f64)> = vec![
        (0.20, 0.50, 0.99, Variant::Full, 0.90),
        (0.20, 0.50, 0.90, Variant::Full, -4.10),
        (0.05, 0.00, 0.98, Variant::Full, 0.10),
        (0.05, 0.00, 0.10, Variant::Full, -4.90),
        (-0.10, 0.40, 0.99, Variant::Full, 0.10),
        (-0.10, 0.40, 0.50, Variant::Full, -4.90),
        (-0.25, 0.00, 0.97, Variant::Full, -0.75),
        (-0.25, 0.00, 0.9699, Variant::Full, -5.75),
        (0.00, 1.00, 1.00, Variant::Full, 1.00),
        (0.00, 1.00, 0.00, Variant::Full, -4.00),
        (0.30, 0.90, 0.999, Variant::NoGenerationReward, 0.60),
        (0.30, 0.90, 0.90, Variant::NoGenerationReward, -4.40),
        (-0.30, 0.90, 0.99, Variant::NoGenerationReward, -0.90),
        (-0.30, 0.90, 0.20, Variant::NoGenerationReward, -5.90),
        (0.10, 0.25, 0.97, Variant::CoarseRetriever, 0.45),
        (0.10, 0.25, 0.969, Variant::CoarseRetriever, -4.55),
        (1.00, 1.00, 1.00, Variant::Full, 3.00),
        (1.00, 1.00, 0.00, Variant::Full, -2.00),
        (-1.00, 0.00, 1.00, Variant::Full, -3.00),
        (-1.00, 0.00, 0.00, Variant::Full, -8.00),
    ];
    assert_eq!(table.len(), 20);
    let mut worst = 0.0f64;
    for (delta, r_gen, sim, variant, expected) in &table {
        let got = compute_reward(*delta, *r_gen, *sim, &p, *variant);
        worst = worst.max((got - expected).abs());
    }
    check(
        4,
        worst <= 1e-12,
        &format!("20 hand-built rows, worst absolute error {worst:.1e}"),
    );
}

#[test]
fn criterion_05_metric_identity() {
    let a = metrics_from_counts(45, 65, 100).unwrap();
    let b = metrics_from_counts(47, 79, 100).unwrap();
    let e1 = (a.asr_g.unwrap() - 69.2).abs();
    let e2 = (b.asr_g.unwrap() - 59.5).abs();
    check(
        5,
        e1 <= 0.05 && e2 <= 0.1,
        &format!(
            "45/65/100 -> ASR_g {:.3} (|err| {e1:.3} <= 0.05); 47/79/100 -> ASR_g {:.3} (|err| {e2:.3} <= 0.1)",
            a.asr_g.unwrap(),
            b.asr_g.unwrap()
        ),
    );
}

/// Test-side liftability oracle: brute force over single and double
/// variant substitutions from the admissible candidate space (query
/// keywords plus synonym neighbors above the similarity floor).
///
/// The target encoder applies identity projections, so its relevance is
/// linear in the pooled embedding and per-position substitution deltas
/// combine exactly; the linearity is spot-checked below.
fn liftable_queries(
    bench: &Benchmark,
    synonyms: &SynonymTable,
    target: &DualEncoder,
    fine: &DualEncoder,
    k: usize,
    tau: f64,
) -> usize {
    let mut liftable = 0;
    for q in &bench.queries {
        let d_t = bench.target_doc(&q.id).unwrap();
        let q_enc = target.encode_query_tokens(&q.tokens);
        let mut scored: Vec<(String, f64)> = bench
            .corpus
            .iter()
            .filter(|d| d.id != d_t.id)
            .map(|d| {
                let dv = target.encode_doc_tokens(&d.tokens);
                (
                    d.id.clone(),
                    q_enc.iter().zip(&dv).map(|(a, b)| a * b).sum(),
                )
            })
            .collect();
        scored.sort_by(rank_order);
        let (kth_id, kth_score) = scored[k - 1].clone();
        let score_of = |tokens: &[String]| -> f64 {
            let dv = target.encode_doc_tokens(tokens);
            q_enc.iter().zip(&dv).map(|(a, b)| a * b).sum()
        };
        let s0 = score_of(&d_t.tokens);
        let beats = |s: f64| s > kth_score || (s == kth_score && d_t.id < kth_id);

        let desired_span = tokenize(&q.desired_answer);
        let span_positions: std::collections::HashSet<usize> = d_t
            .tokens
            .windows(desired_span.len().max(1))
            .enumerate()
            .filter(|(_, w)| *w == desired_span.as_slice())
            .flat_map(|(i, _)| i..i + desired_span.len())
            .collect();

        // Best substitution per position over the admissible space.
        let mut deltas: Vec<(usize, f64, String)> = Vec::new();
        for (j, tok) in d_t.tokens.iter().enumerate() {
            if is_stopword(tok) || span_positions.contains(&j) {
                continue;
            }
            let mut candidates: Vec<&str> = q.keywords.iter().map(String::as_str).collect();
            for (w, sim) in synonyms.neighbors(tok) {
                if *sim > 0.7 {
                    candidates.push(w);
                }
            }
            let mut best: Option<(f64, String)> = None;
            for w in candidates {
                if w == tok {
                    continue;
                }
                let mut subbed = d_t.tokens.clone();
                subbed[j] = w.to_string();
                let delta = score_of(&subbed) - s0;
                if best.as_ref().map(|(d, _)| delta > *d).unwrap_or(true) {
                    best = Some((delta, w.to_string()));
                }
            }
            if let Some((d, w)) = best {
                deltas.push((j, d, w));
            }
        }
        deltas.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());

        // Admissibility: the perturbed document must stay above the
        // similarity floor under the attacker's document measure.
        let sim_ok = |tokens: &[String]| {
            cosine(
                &fine.encode_doc_tokens(tokens),
                &fine.encode_doc_tokens(&d_t.tokens),
            ) >= tau
        };
        let single = deltas.first().map(|(j, d, w)| {
            if !beats(s0 + d) {
                return false;
            }
            let mut tokens = d_t.tokens.clone();
            tokens[*j] = w.clone();
            beats(score_of(&tokens)) && sim_ok(&tokens)
        });
        let double = (deltas.len() >= 2).then(|| {
            let (j1, _, w1) = &deltas[0];
            let (j2, _, w2) = &deltas[1];
            let mut tokens = d_t.tokens.clone();
            tokens[*j1] = w1.clone();
            tokens[*j2] = w2.clone();
            // Exact recomputation (not the linear sum) decides.
            beats(score_of(&tokens)) && sim_ok(&tokens)
        });
        if single == Some(true) || double == Some(true) {
            liftable += 1;
        }
    }
    liftable
}

#[test]
fn criterion_06_attack_effectiveness_floor() {
    let f = fixture();
    let n = f.done.benchmark.queries.len();
    let liftable = liftable_queries(
        &f.done.benchmark,
        &f.done.synonyms,
        &f.target,
        &f.fine,
        f.spec.k,
        0.97,
    );
    let certified = liftable as f64 / n as f64;
    let regent = &f.open_report.methods["regent"].metrics;
    let per_doc_ok = f.open_results["regent"]
        .iter()
        .all(|r| r.pre_attack_hit || (r.final_doc_sim >= 0.97 && r.perturbation_rate <= 0.10));
    check(
        6,
        certified >= 0.60 && regent.asr_r >= 40.0 && per_doc_ok,
        &format!(
            "oracle-certified liftable {:.0}% (>= 60), regent ASR_r {:.1} (>= 40), every emitted document ADSP >= 97 and APR <= 10: {per_doc_ok}",
            100.0 * certified,
            regent.asr_r
        ),
    );
}

#[test]
fn criterion_07_ablation_direction() {
    let f = fixture();
    let regent = &f.open_report.methods["regent"].metrics;
    let nr = &f.open_report.methods["regent-nr"].metrics;

    // Mean final reward on generation-sensitive queries: those where the
    // full agent observed a positive generation reward.
    let sensitive: std::collections::HashSet<&str> = f.open_results["regent"]
        .iter()
        .filter(|r| !r.pre_attack_hit && r.mean_gen_reward > 0.0)
        .map(|r| r.query_id.as_str())
        .collect();
    let mean_final = |method: &str| -> f64 {
        let rs: Vec<f64> = f.open_results[method]
            .iter()
            .filter(|r| sensitive.contains(r.query_id.as_str()))
            .map(|r| r.final_reward)
            .collect();
        rs.iter().sum::<f64>() / rs.len().max(1) as f64
    };
    let full = mean_final("regent");
    let ng = mean_final("regent-ng");
    check(
        7,
        regent.asr_r >= nr.asr_r && full >= ng && !sensitive.is_empty(),
        &format!(
            "ASR_r regent {:.1} >= regent-nr {:.1}; mean final reward on {} generation-sensitive queries: regent {full:.3} >= regent-ng {ng:.3}",
            regent.asr_r,
            nr.asr_r,
            sensitive.len()
        ),
    );
}

#[test]
fn criterion_08_defensive_mode() {
    let f = fixture();
    let open_regent = f.open_report.methods["regent"].metrics.asr;
    let def_regent = f.defended_report.methods["regent"].metrics.asr;
    let def_naive = f.defended_report.methods["prompt-naive"].metrics.asr;
    let def_hijack = f.defended_report.methods["prompt-hijack"].metrics.asr;
    let relative_drop = if open_regent > 0.0 {
        (open_regent - def_regent) / open_regent
    } else {
        0.0
    };
    check(
        8,
        def_naive == 0.0 && def_hijack == 0.0 && relative_drop < 0.20,
        &format!(
            "defended prompt-injection ASR {def_naive:.1}/{def_hijack:.1} (both 0); regent ASR {open_regent:.1} -> {def_regent:.1} (relative drop {:.1}% < 20%)",
            100.0 * relative_drop
        ),
    );
}

#[test]
fn criterion_09_determinism() {
    // A smaller benchmark keeps two full-suite runs cheap.
    let spec = BenchSpec {
        n_queries: 10,
        corpus_size: 60,
        ..BenchSpec::default()
    };
    let run_once = || -> String {
        let root = RngStream::new(99);
        let done = generate_benchmark(&spec, Scenario::Stance, &mut root.derive("bench")).unwrap();
        let target = done.target_encoder(&spec).unwrap();
        let mut enc = DualEncoder::surrogate(
            &done.embeddings,
            &[],
            16,
            32,
            &mut root.derive("surrogate-init"),
        )
        .unwrap();
        let cs =
            build_coarse_samples(&done.benchmark, &target, 3, 6, &mut root.derive("cs")).unwrap();
        train_surrogate(
            &mut enc,
            &TrainData::Coarse(cs),
            &TrainHyper {
                epochs: 25,
                lr: 0.05,
                shuffle: true,
            },
            &mut root.derive("ct"),
        )
        .unwrap();
        let coarse = enc.clone();
        let margins = MarginSet::standard(3, 0.05, 0.05, 0.2, 0.5);
        let fs = build_fine_samples(
            &done.benchmark,
            &coarse,
            &target,
            3,
            20,
            6,
            &margins,
            10,
            &mut root.derive("fs"),
        )
        .unwrap();
        train_surrogate(
            &mut enc,
            &TrainData::Fine(fs),
            &TrainHyper {
                epochs: 30,
                lr: 0.005,
                shuffle: true,
            },
            &mut root.derive("ft"),
        )
        .unwrap();
        let cfg = SuiteConfig {
            jobs: 3,
            seed: 99,
            ..SuiteConfig::default()
        };
        let out = run_suite(
            &done.benchmark,
            &coarse,
            &enc,
            &target,
            &done.synonyms,
            &cfg,
            None,
            serde_json::json!({"determinism": true}),
        )
        .unwrap();
        serde_json::to_string_pretty(&out.report).unwrap()
    };
    let a = run_once();
    let b = run_once();
    check(
        9,
        a == b,
        &format!(
            "two full-suite runs from the same root seed produced byte-identical {}-byte reports",
            a.len()
        ),
    );
}

#[test]
fn criterion_10_ppo_bandit_sanity() {
    // Stateless 3-armed bandit through the episode machinery: fixed state
    // features, three fixed candidate features, rewards 0 / 0.5 / 1.
    let state: Vec<f64> = vec![0.2, -0.1, 0.4, 0.0, 0.3];
    let cands: Vec<Vec<f64>> = (0..3)
        .map(|c| (0..4).map(|j| 0.3 * c as f64 - 0.2 * j as f64).collect())
        .collect();
    let arm_rewards = [0.0, 0.5, 1.0];
    let params = PpoParams {
        gamma: 0.0,
        clip: 0.2,
        value_coef: 0.5,
        epochs: 4,
        lr: 0.05,
    };
    let mut nets = AgentNets::new(5, 4, &mut RngStream::new(4242)).unwrap();
    let mut rng = RngStream::new(777);
    let mut converged_at = None;
    for update in 1..=200 {
        let mut steps = Vec::new();
        for _ in 0..5 {
            let (action, logp) =
                policy_select(&nets.policy, &state, &cands, &mut rng, SelectMode::Sample).unwrap();
            let value_estimate = nets.value.value(&state).unwrap();
            steps.push(TrajectoryStep {
                state_feats: state.clone(),
                cand_feats: cands.clone(),
                action,
                reward: arm_rewards[action],
                old_logp: logp,
                value_estimate,
            });
        }
        ppo_update(
            &mut nets.policy,
            &mut nets.value,
            &Trajectory { steps },
            &params,
        )
        .unwrap();
        let probs = softmax(&nets.policy.logits(&state, &cands).unwrap()).unwrap();
        if probs[2] >= 0.90 {
            converged_at = Some((update, probs[2]));
            break;
        }
    }
    check(
        10,
        converged_at.is_some(),
        &format!(
            "policy concentrated on the best arm within 200 updates: {:?}",
            converged_at.map(|(u, p)| format!("update {u}, probability {p:.3}"))
        ),
    );
}
