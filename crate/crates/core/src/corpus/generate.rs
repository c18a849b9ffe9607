//! Synthetic benchmark generation.
//!
//! Documents are assembled from parameterized sentence templates over a
//! concept-family vocabulary, so vocabulary overlap with the query (and
//! therefore retrieval difficulty) is controlled and seed-stable.
//!
//! Each query gets a family of relevant documents built from the
//! canonical forms of its concepts, and one planted target document that
//! uses distant variants of those concepts. The planter measures actual
//! target-retriever scores and walks a strength ladder until the target
//! document sits outside the top-k but within reach of one or two
//! variant-to-canonical substitutions.

use std::collections::BTreeMap;

use super::lexicon::{ConceptFamily, Lexicon, LexiconSpec};
use crate::corpus::{
    extract_keywords, Benchmark, Document, Idf, Query, Scenario, SynonymTable, WordEmbeddings,
};
use crate::error::{Error, Result};
use crate::retriever::{rank_order, DualEncoder};
use crate::rng::RngStream;

/// Generation parameters.
#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub n_queries: usize,
    pub corpus_size: usize,
    /// Top-k size of the attacked system.
    pub k: usize,
    /// Relevant documents per query.
    pub family_size: usize,
    pub keyword_limit: usize,
    /// Per-word Gaussian noise scale of the target encoder's embedding
    /// table relative to the shared word vectors.
    pub target_noise: f64,
    /// Minimum cosine kept in the synonym table.
    pub synonym_floor: f64,
    /// Ladder attempts before giving up on planting a target document.
    pub max_plant_retries: usize,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            n_queries: 100,
            corpus_size: 500,
            k: 3,
            family_size: 3,
            keyword_limit: 8,
            target_noise: 0.35,
            synonym_floor: 0.3,
            max_plant_retries: 400,
        }
    }
}

/// A generated benchmark plus the vocabulary artifacts it references.
#[derive(Debug, Clone)]
pub struct GeneratedBench {
    pub benchmark: Benchmark,
    pub synonyms: SynonymTable,
    pub embeddings: WordEmbeddings,
    /// Root seed of the stream the benchmark was generated from.
    pub seed: u64,
    /// Substitutions needed to lift each target into the top-k, as
    /// measured against the target retriever at generation time.
    pub lift_subs: BTreeMap<String, usize>,
}

impl GeneratedBench {
    /// Rebuild the target ("black-box") retriever this benchmark was
    /// planted against. Reconstruction only needs the seed, the noise
    /// scale and the embedding file, so any later stage can re-derive it.
    pub fn target_encoder(&self, spec: &BenchSpec) -> Result<DualEncoder> {
        target_encoder_from(&self.embeddings, spec.target_noise, self.seed)
    }
}

/// Derive the target encoder for a benchmark seed.
pub fn target_encoder_from(
    embeddings: &WordEmbeddings,
    target_noise: f64,
    seed: u64,
) -> Result<DualEncoder> {
    DualEncoder::target(
        embeddings,
        &[],
        target_noise,
        &mut RngStream::new(seed).derive("target-encoder"),
    )
}

struct QueryPlan {
    id: String,
    text: String,
    gold: String,
    desired: String,
    /// Concept families the query mentions canonically.
    concepts: Vec<ConceptFamily>,
    family_docs: Vec<Document>,
}

/// Generate a benchmark. The stream `rng` must be dedicated to this call;
/// its seed is recorded so the target encoder can be re-derived.
pub fn generate_benchmark(
    spec: &BenchSpec,
    scenario: Scenario,
    rng: &mut RngStream,
) -> Result<GeneratedBench> {
    if spec.corpus_size < 10 * spec.k {
        return Err(Error::InvalidArgument(format!(
            "corpus_size {} is below 10 * k = {}",
            spec.corpus_size,
            10 * spec.k
        )));
    }
    let per_query = spec.family_size + 1;
    if spec.corpus_size < spec.n_queries * per_query {
        return Err(Error::InvalidArgument(format!(
            "corpus_size {} cannot hold {} queries with {} documents each",
            spec.corpus_size, spec.n_queries, per_query
        )));
    }
    if spec.k > spec.family_size + 1 {
        return Err(Error::InvalidArgument(
            "family_size must be at least k - 1 so relevant documents can fill the top-k".into(),
        ));
    }

    let lex_spec = LexiconSpec {
        n_concepts: 2 * spec.n_queries + 24,
        n_answers: 2 * spec.n_queries + 8,
        n_fillers: (spec.corpus_size / 2).max(120),
        ..LexiconSpec::default()
    };
    let lexicon = Lexicon::build(&lex_spec, &mut rng.derive("lexicon"));
    let target = target_encoder_from(&lexicon.embeddings, spec.target_noise, rng.seed())?;

    // Per-query concepts, query text and relevant-document families.
    // Concept assignment skips families whose variants all score higher
    // than their canonical under the noisy target encoder; those would
    // leave the planted document unliftable.
    let mut plans = Vec::with_capacity(spec.n_queries);
    let mut concept_cursor = 0;
    for qi in 0..spec.n_queries {
        plans.push(build_query_plan(
            spec,
            scenario,
            &lexicon,
            &target,
            qi,
            &mut concept_cursor,
            rng,
        )?);
    }

    // Background filler documents.
    let n_filler = spec.corpus_size - spec.n_queries * per_query;
    let mut filler_docs = Vec::with_capacity(n_filler);
    for fi in 0..n_filler {
        let mut frng = rng.derive(&format!("filler-doc/{fi}"));
        let len = doc_length(scenario, &mut frng);
        let tokens = filler_tokens(&lexicon, len, &mut frng);
        filler_docs.push(Document::new(format!("fill-{fi:04}"), tokens.join(" ")));
    }

    // Plant each target against the fixed competitor set (every family
    // plus the filler). Planted targets score at filler level for foreign
    // queries, so leaving them out keeps thresholds stable; a repair pass
    // below re-checks against the full corpus.
    let fixed_competitors: Vec<&Document> = plans
        .iter()
        .flat_map(|p| p.family_docs.iter())
        .chain(filler_docs.iter())
        .collect();
    let mut planted: Vec<Document> = Vec::with_capacity(spec.n_queries);
    let mut lift_subs: BTreeMap<String, usize> = BTreeMap::new();
    for (qi, plan) in plans.iter().enumerate() {
        let (doc, subs) = plant_target(
            spec,
            scenario,
            &lexicon,
            &target,
            plan,
            &fixed_competitors,
            qi,
            rng,
        )?;
        lift_subs.insert(plan.id.clone(), subs);
        planted.push(doc);
    }

    // Repair pass: re-verify each plant with every other target present
    // and replant the few that drifted out of the liftable band.
    for qi in 0..plans.len() {
        let plan = &plans[qi];
        let others: Vec<&Document> = fixed_competitors
            .iter()
            .copied()
            .chain(
                planted
                    .iter()
                    .enumerate()
                    .filter(|(oi, _)| *oi != qi)
                    .map(|(_, d)| d),
            )
            .collect();
        let ok = PlantCheck::new(&target, plan, &others, spec.k)
            .and_then(|c| c.check(&planted[qi].id, &planted[qi].tokens));
        match ok {
            Some(subs) => {
                lift_subs.insert(plan.id.clone(), subs);
            }
            None => {
                let mut rerng = rng.derive(&format!("replant/{qi}"));
                let (doc, subs) = plant_target(
                    spec, scenario, &lexicon, &target, plan, &others, qi, &mut rerng,
                )?;
                lift_subs.insert(plan.id.clone(), subs);
                planted[qi] = doc;
            }
        }
    }

    // Late replants can still push an earlier target into its query's
    // top-k when a foreign document sat near the threshold. Iterate
    // hard-violation repairs (in-top-k only, liftability is settled) to a
    // fixed point; the coupling is weak, so this terminates in a pass or
    // two.
    for round in 0..8 {
        let mut violations = Vec::new();
        for qi in 0..plans.len() {
            let plan = &plans[qi];
            let others: Vec<&Document> = fixed_competitors
                .iter()
                .copied()
                .chain(
                    planted
                        .iter()
                        .enumerate()
                        .filter(|(oi, _)| *oi != qi)
                        .map(|(_, d)| d),
                )
                .collect();
            if let Some(check) = PlantCheck::new(&target, plan, &others, spec.k) {
                let s0 = check.score(&planted[qi].tokens);
                if check.enters_top_k(&planted[qi].id, s0) {
                    violations.push(qi);
                }
            }
        }
        if violations.is_empty() {
            break;
        }
        if round == 7 {
            return Err(Error::BenchmarkGeneration {
                query_id: plans[violations[0]].id.clone(),
                reason: "planted targets kept re-entering the top-k across repair rounds".into(),
            });
        }
        for qi in violations {
            let plan = &plans[qi];
            let others: Vec<&Document> = fixed_competitors
                .iter()
                .copied()
                .chain(
                    planted
                        .iter()
                        .enumerate()
                        .filter(|(oi, _)| *oi != qi)
                        .map(|(_, d)| d),
                )
                .collect();
            let mut rerng = rng.derive(&format!("replant/{qi}/round/{round}"));
            let (doc, subs) =
                plant_target(spec, scenario, &lexicon, &target, plan, &others, qi, &mut rerng)?;
            lift_subs.insert(plan.id.clone(), subs);
            planted[qi] = doc;
        }
    }

    // Assemble the corpus: families, targets, filler.
    let mut corpus = Vec::with_capacity(spec.corpus_size);
    let mut target_doc_ids = BTreeMap::new();
    for (qi, plan) in plans.iter().enumerate() {
        corpus.extend(plan.family_docs.iter().cloned());
        let doc = planted[qi].clone();
        target_doc_ids.insert(plan.id.clone(), doc.id.clone());
        corpus.push(doc);
    }
    corpus.extend(filler_docs);

    let idf = Idf::from_documents(&corpus);
    let queries = plans
        .iter()
        .map(|plan| {
            let tokens = crate::corpus::tokenize(&plan.text);
            let keywords = extract_keywords(&tokens, &idf, spec.keyword_limit);
            Query {
                id: plan.id.clone(),
                text: plan.text.clone(),
                tokens,
                keywords,
                gold_answer: plan.gold.clone(),
                desired_answer: plan.desired.clone(),
                scenario,
            }
        })
        .collect();

    let benchmark = Benchmark {
        scenario,
        corpus,
        queries,
        target_doc_ids,
    };
    benchmark.validate()?;

    // Post-hoc check: every target must sit outside the target retriever's
    // top-k of the final corpus.
    for q in &benchmark.queries {
        let topk = crate::retriever::top_k(&target, q, &benchmark.corpus, spec.k)?;
        let tid = &benchmark.target_doc_ids[&q.id];
        if topk.contains(tid) {
            return Err(Error::BenchmarkGeneration {
                query_id: q.id.clone(),
                reason: "planted target ended up inside the top-k".into(),
            });
        }
    }

    let synonyms = SynonymTable::from_embeddings(&lexicon.embeddings, spec.synonym_floor);
    synonyms.validate()?;
    Ok(GeneratedBench {
        benchmark,
        synonyms,
        embeddings: lexicon.embeddings,
        seed: rng.seed(),
        lift_subs,
    })
}

/// Best per-occurrence target-space gain a variant-to-canonical
/// substitution can achieve for this concept under the given query.
fn concept_gain(target: &DualEncoder, q_enc: &[f64], fam: &ConceptFamily) -> f64 {
    let contribution = |w: &str| {
        let one = [w.to_string()];
        crate::retriever::dot(q_enc, &target.encode_doc_tokens(&one))
    };
    let canonical = contribution(&fam.canonical);
    fam.variants
        .iter()
        .map(|v| canonical - contribution(v))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Pull the next `want` concept families off the cursor such that at
/// least one of them has a usable substitution gain for the query text
/// produced by `text_of`.
fn take_usable_concepts(
    lexicon: &Lexicon,
    target: &DualEncoder,
    cursor: &mut usize,
    want: usize,
    query_id: &str,
    text_of: &dyn Fn(&[ConceptFamily]) -> String,
) -> Result<Vec<ConceptFamily>> {
    loop {
        if *cursor + want > lexicon.concepts.len() {
            return Err(Error::BenchmarkGeneration {
                query_id: query_id.to_string(),
                reason: "ran out of concept families with usable substitution gains".into(),
            });
        }
        let picked: Vec<ConceptFamily> = lexicon.concepts[*cursor..*cursor + want].to_vec();
        *cursor += want;
        let q_enc = target.encode_query_tokens(&crate::corpus::tokenize(&text_of(&picked)));
        if picked
            .iter()
            .any(|fam| concept_gain(target, &q_enc, fam) > 1e-4)
        {
            return Ok(picked);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_query_plan(
    spec: &BenchSpec,
    scenario: Scenario,
    lexicon: &Lexicon,
    target: &DualEncoder,
    qi: usize,
    concept_cursor: &mut usize,
    rng: &mut RngStream,
) -> Result<QueryPlan> {
    let id = format!("q{qi:04}");
    let qrng = rng.derive(&format!("query/{qi}"));
    match scenario {
        Scenario::Factual => {
            let picked = take_usable_concepts(
                lexicon,
                target,
                concept_cursor,
                2,
                &id,
                &|fams: &[ConceptFamily]| {
                    format!(
                        "what is the {} of the {}",
                        fams[0].canonical, fams[1].canonical
                    )
                },
            )?;
            let attr = picked[0].clone();
            let entity = picked[1].clone();
            let gold = lexicon.answers[2 * qi].clone();
            let desired = lexicon.answers[2 * qi + 1].clone();
            let text = format!("what is the {} of the {}", attr.canonical, entity.canonical);
            let mut family_docs = Vec::with_capacity(spec.family_size);
            for fj in 0..spec.family_size {
                let mut drng = qrng.derive(&format!("family/{fj}"));
                let len = family_doc_length(scenario, &mut drng);
                // Occurrence counts descend with family rank so the top-k
                // has an unambiguous order.
                let mentions = 4 - (fj % 3).min(1);
                let mut tokens = vec![
                    "the".into(),
                    attr.canonical.clone(),
                    "of".into(),
                    "the".into(),
                    entity.canonical.clone(),
                    "is".into(),
                    gold.clone(),
                ];
                for _ in 0..mentions {
                    tokens.extend([
                        "the".to_string(),
                        entity.canonical.clone(),
                        "has".into(),
                        "a".into(),
                        attr.canonical.clone(),
                    ]);
                }
                pad_with_filler(lexicon, &mut tokens, len, &mut drng);
                family_docs.push(Document::new(format!("{id}-rel{fj}"), tokens.join(" ")));
            }
            Ok(QueryPlan {
                id,
                text,
                gold,
                desired,
                concepts: vec![attr, entity],
                family_docs,
            })
        }
        Scenario::Stance => {
            let picked = take_usable_concepts(
                lexicon,
                target,
                concept_cursor,
                1,
                &id,
                &|fams: &[ConceptFamily]| format!("how do people view the {}", fams[0].canonical),
            )?;
            let topic = picked[0].clone();
            let pro = lexicon.answers[2 * qi].clone();
            let con = lexicon.answers[2 * qi + 1].clone();
            let text = format!("how do people view the {}", topic.canonical);
            let mut family_docs = Vec::with_capacity(spec.family_size);
            for fj in 0..spec.family_size {
                let mut drng = qrng.derive(&format!("family/{fj}"));
                let len = family_doc_length(scenario, &mut drng);
                let mentions = 3 - (fj % 3).min(1);
                let mut tokens = vec![
                    "most".to_string(),
                    "people".into(),
                    pro.clone(),
                    "the".into(),
                    topic.canonical.clone(),
                ];
                for _ in 0..mentions {
                    tokens.extend([
                        "the".to_string(),
                        topic.canonical.clone(),
                        "is".into(),
                        pro.clone(),
                        "because".into(),
                        "of".into(),
                        "this".into(),
                    ]);
                }
                pad_with_filler(lexicon, &mut tokens, len, &mut drng);
                family_docs.push(Document::new(format!("{id}-rel{fj}"), tokens.join(" ")));
            }
            Ok(QueryPlan {
                id,
                text,
                gold: pro,
                desired: con,
                concepts: vec![topic],
                family_docs,
            })
        }
    }
}

/// Compose a target-document token list using the given variant word per
/// concept. Returns the tokens and the signal-prefix length (the part the
/// nudging loop must never remove).
fn target_doc_tokens(
    scenario: Scenario,
    plan: &QueryPlan,
    variants: &[String],
    occurrences: usize,
    len: usize,
    lexicon: &Lexicon,
    rng: &mut RngStream,
) -> (Vec<String>, usize) {
    let mut tokens: Vec<String> = Vec::new();
    match scenario {
        Scenario::Factual => {
            let attr = variants[0].clone();
            let entity = variants[1].clone();
            tokens.extend([
                "the".to_string(),
                attr.clone(),
                "of".into(),
                "the".into(),
                entity.clone(),
                "is".into(),
                plan.desired.clone(),
            ]);
            for _ in 1..occurrences {
                tokens.extend([
                    "the".to_string(),
                    entity.clone(),
                    "has".into(),
                    "a".into(),
                    attr.clone(),
                ]);
            }
        }
        Scenario::Stance => {
            let topic = variants[0].clone();
            tokens.extend([
                "some".to_string(),
                "people".into(),
                plan.desired.clone(),
                "the".into(),
                topic.clone(),
            ]);
            for _ in 1..occurrences {
                tokens.extend([
                    "the".to_string(),
                    topic.clone(),
                    "is".into(),
                    "not".into(),
                    "what".into(),
                    "it".into(),
                    "was".into(),
                ]);
            }
        }
    }
    let signal_len = tokens.len();
    pad_with_filler(lexicon, &mut tokens, len, rng);
    (tokens, signal_len)
}

/// Score context for planting one query's target document: the query
/// encoding and the score of the current k-th ranked competitor.
struct PlantCheck<'a> {
    target: &'a DualEncoder,
    plan: &'a QueryPlan,
    q_enc: Vec<f64>,
    kth_id: String,
    kth_score: f64,
}

impl<'a> PlantCheck<'a> {
    fn new(
        target: &'a DualEncoder,
        plan: &'a QueryPlan,
        others: &[&Document],
        k: usize,
    ) -> Option<Self> {
        let q_tokens = crate::corpus::tokenize(&plan.text);
        let q_enc = target.encode_query_tokens(&q_tokens);
        let mut scored: Vec<(String, f64)> = others
            .iter()
            .map(|d| {
                (
                    d.id.clone(),
                    crate::retriever::dot(&q_enc, &target.encode_doc_tokens(&d.tokens)),
                )
            })
            .collect();
        scored.sort_by(rank_order);
        let (kth_id, kth_score) = scored.get(k - 1)?.clone();
        Some(PlantCheck {
            target,
            plan,
            q_enc,
            kth_id,
            kth_score,
        })
    }

    fn score(&self, tokens: &[String]) -> f64 {
        crate::retriever::dot(&self.q_enc, &self.target.encode_doc_tokens(tokens))
    }

    fn enters_top_k(&self, id: &str, score: f64) -> bool {
        score > self.kth_score || (score == self.kth_score && *id < *self.kth_id)
    }

    /// Best variant-to-canonical substitution gains, one entry per
    /// substitutable position, descending.
    fn gains(&self, tokens: &[String], s0: f64) -> Vec<f64> {
        let mut gains = Vec::new();
        for (pos, tok) in tokens.iter().enumerate() {
            for fam in &self.plan.concepts {
                if fam.variants.iter().any(|v| v == tok) {
                    let mut subbed = tokens.to_vec();
                    subbed[pos] = fam.canonical.clone();
                    gains.push(self.score(&subbed) - s0);
                }
            }
        }
        gains.sort_by(|a, b| b.partial_cmp(a).unwrap());
        gains
    }

    /// `Some(substitutions)` when the document sits outside the top-k and
    /// one or two substitutions can lift it in, `None` otherwise.
    fn check(&self, id: &str, tokens: &[String]) -> Option<usize> {
        let s0 = self.score(tokens);
        if self.enters_top_k(id, s0) {
            return None;
        }
        let gains = self.gains(tokens, s0);
        let needed = (self.kth_score - s0) * 1.05 + 1e-9;
        if gains.first().copied().unwrap_or(0.0) > needed {
            Some(1)
        } else if gains.len() >= 2 && gains[0] + gains[1] > needed {
            Some(2)
        } else {
            None
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn plant_target(
    spec: &BenchSpec,
    scenario: Scenario,
    lexicon: &Lexicon,
    target: &DualEncoder,
    plan: &QueryPlan,
    others: &[&Document],
    qi: usize,
    rng: &mut RngStream,
) -> Result<(Document, usize)> {
    let check = PlantCheck::new(target, plan, others, spec.k).ok_or_else(|| {
        Error::BenchmarkGeneration {
            query_id: plan.id.clone(),
            reason: "not enough competitor documents to define a top-k".into(),
        }
    })?;
    let id = format!("{}-tgt", plan.id);

    // The target encoder carries per-word noise, so a variant-to-canonical
    // substitution is not guaranteed to raise the target-space score. Pick
    // each concept's variant by its measured per-occurrence gain.
    let chosen: Vec<String> = plan
        .concepts
        .iter()
        .map(|fam| {
            let canonical = token_contribution(check.target, &check.q_enc, &fam.canonical);
            fam.variants
                .iter()
                .map(|v| {
                    (
                        v,
                        canonical - token_contribution(check.target, &check.q_enc, v),
                    )
                })
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .map(|(v, _)| v.clone())
                .expect("concept families have variants")
        })
        .collect();
    let best_gain = plan
        .concepts
        .iter()
        .zip(&chosen)
        .map(|(fam, v)| {
            token_contribution(check.target, &check.q_enc, &fam.canonical)
                - token_contribution(check.target, &check.q_enc, v)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    if best_gain <= 1e-4 {
        return Err(Error::BenchmarkGeneration {
            query_id: plan.id.clone(),
            reason: "no concept variant improves the target-space score when substituted".into(),
        });
    }

    // Each rung recomposes the document (fresh filler draw, varying
    // mention count) and then steers its score into the liftable band one
    // filler token at a time.
    let ladder: &[usize] = &[3, 2, 4];
    let mut attempts = 0;
    let mut contributions: std::collections::HashMap<String, f64> =
        std::collections::HashMap::new();
    let mut contribution = |w: &str| -> f64 {
        *contributions
            .entry(w.to_string())
            .or_insert_with(|| token_contribution(check.target, &check.q_enc, w))
    };
    for draw in 0..5 {
        for &occurrences in ladder {
            let mut drng = rng.derive(&format!("target-doc/{qi}/rung/{occurrences}/{draw}"));
            let len = doc_length(scenario, &mut drng);
            let (mut tokens, signal_len) = target_doc_tokens(
                scenario,
                plan,
                &chosen,
                occurrences,
                len,
                lexicon,
                &mut drng,
            );
            for _ in 0..120 {
                if attempts >= spec.max_plant_retries {
                    return Err(Error::BenchmarkGeneration {
                        query_id: plan.id.clone(),
                        reason: format!(
                            "no liftable out-of-top-{} placement found in {attempts} attempts",
                            spec.k
                        ),
                    });
                }
                attempts += 1;
                if let Some(subs) = check.check(&id, &tokens) {
                    return Ok((Document::new(id, tokens.join(" ")), subs));
                }
                let s0 = check.score(&tokens);
                if check.kth_score <= s0 {
                    // Too strong: append the filler token that dilutes hardest.
                    let pick = best_filler(lexicon, &check.q_enc, check.target, &mut drng);
                    tokens.push(pick);
                } else {
                    // Too weak: drop the filler token hurting the mean most.
                    if tokens.len() <= signal_len + 2 {
                        break; // next rung
                    }
                    let mut worst = None;
                    for i in signal_len..tokens.len() {
                        let c = contribution(&tokens[i]);
                        if worst.map(|(_, wc)| c < wc).unwrap_or(true) {
                            worst = Some((i, c));
                        }
                    }
                    match worst {
                        Some((i, _)) => {
                            tokens.remove(i);
                        }
                        None => break,
                    }
                }
            }
        }
    }
    Err(Error::BenchmarkGeneration {
        query_id: plan.id.clone(),
        reason: "strength ladder exhausted without a liftable placement".into(),
    })
}

/// Contribution of one token's embedding to the query dot product.
fn token_contribution(target: &DualEncoder, q_enc: &[f64], token: &str) -> f64 {
    let one = [token.to_string()];
    crate::retriever::dot(q_enc, &target.encode_doc_tokens(&one))
}

/// Sample a handful of filler words and keep the one with the smallest
/// query contribution (the strongest diluter).
fn best_filler(
    lexicon: &Lexicon,
    q_enc: &[f64],
    target: &DualEncoder,
    rng: &mut RngStream,
) -> String {
    let mut best: Option<(String, f64)> = None;
    for _ in 0..8 {
        let fam = &lexicon.fillers[rng.below(lexicon.fillers.len())];
        let pick = rng.below(fam.variants.len() + 1);
        let word = if pick == 0 {
            fam.canonical.clone()
        } else {
            fam.variants[pick - 1].clone()
        };
        let c = token_contribution(target, q_enc, &word);
        if best.as_ref().map(|(_, bc)| c < *bc).unwrap_or(true) {
            best = Some((word, c));
        }
    }
    best.expect("filler families are non-empty").0
}

fn doc_length(scenario: Scenario, rng: &mut RngStream) -> usize {
    let (lo, hi) = match scenario {
        Scenario::Factual => (60usize, 170usize),
        Scenario::Stance => (70, 180),
    };
    lo + rng.below(hi - lo + 1)
}

/// Relevant documents skew shorter so their per-token signal strength
/// keeps them firmly at the top of their query's ranking.
fn family_doc_length(scenario: Scenario, rng: &mut RngStream) -> usize {
    let (lo, hi) = match scenario {
        Scenario::Factual => (70usize, 130usize),
        Scenario::Stance => (80, 140),
    };
    lo + rng.below(hi - lo + 1)
}

fn pad_with_filler(lexicon: &Lexicon, tokens: &mut Vec<String>, len: usize, rng: &mut RngStream) {
    let templates: &[&[&str]] = &[
        &["the", "{}", "of", "the", "{}", "was", "{}"],
        &["some", "{}", "are", "{}", "and", "{}"],
        &[
            "a", "{}", "can", "be", "{}", "when", "the", "{}", "is", "{}",
        ],
        &["{}", "and", "{}", "were", "in", "the", "{}"],
    ];
    while tokens.len() < len {
        let template = templates[rng.below(templates.len())];
        for part in template {
            if *part == "{}" {
                let fam = &lexicon.fillers[rng.below(lexicon.fillers.len())];
                let pick = rng.below(fam.variants.len() + 1);
                let word = if pick == 0 {
                    &fam.canonical
                } else {
                    &fam.variants[pick - 1]
                };
                tokens.push(word.clone());
            } else {
                tokens.push(part.to_string());
            }
        }
    }
}

fn filler_tokens(lexicon: &Lexicon, len: usize, rng: &mut RngStream) -> Vec<String> {
    let mut tokens = Vec::new();
    pad_with_filler(lexicon, &mut tokens, len, rng);
    tokens
}
