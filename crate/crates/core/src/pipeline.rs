//! High-level pipeline steps shared by the command-line driver and the
//! Python bindings: benchmark generation, staged surrogate training,
//! attack runs and report emission, all file-backed.

use std::path::{Path, PathBuf};

use crate::attack::AttackResult;
use crate::config::RunConfig;
use crate::corpus::{
    atomic_write_bytes, generate_benchmark, load_benchmark, save_benchmark, target_encoder_from,
    BenchManifest, Benchmark, SynonymTable, WordEmbeddings, BENCH_SCHEMA_VERSION,
};
use crate::error::{Error, Result};
use crate::evalbench::{
    benchmark_id, run_suite, save_report, save_results, text_table, FidelityBlock, Report,
    ResultsFile, SuiteOutput, REPORT_SCHEMA_VERSION,
};
use crate::retriever::{
    build_coarse_samples, build_fine_samples, surrogate_fidelity, train_surrogate, DualEncoder,
    Fidelity, Stage, TrainData, TrainLog,
};
use crate::rng::{RngStream, RNG_ALGORITHM};

/// Outcome summary of a benchmark generation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct GenBenchSummary {
    pub out_dir: PathBuf,
    pub n_queries: usize,
    pub corpus_size: usize,
    /// Targets liftable with one / two substitutions at generation time.
    pub liftable_one: usize,
    pub liftable_two: usize,
}

/// Generate a benchmark directory from the configuration.
pub fn gen_bench(config: &RunConfig, out_dir: &Path) -> Result<GenBenchSummary> {
    config.validate()?;
    let spec = config.bench_spec();
    let mut stream = RngStream::new(config.seed).derive("bench");
    let done = generate_benchmark(&spec, config.scenario, &mut stream)?;
    let manifest = BenchManifest {
        schema_version: BENCH_SCHEMA_VERSION,
        seed: done.seed,
        scenario: config.scenario,
        n_queries: spec.n_queries,
        corpus_size: spec.corpus_size,
        k: spec.k,
        keyword_limit: spec.keyword_limit,
        target_noise: spec.target_noise,
        rng_algorithm: RNG_ALGORITHM.into(),
    };
    save_benchmark(
        out_dir,
        &done.benchmark,
        &done.synonyms,
        &done.embeddings,
        &manifest,
    )?;
    let liftable_one = done.lift_subs.values().filter(|s| **s == 1).count();
    Ok(GenBenchSummary {
        out_dir: out_dir.to_path_buf(),
        n_queries: done.benchmark.queries.len(),
        corpus_size: done.benchmark.corpus.len(),
        liftable_one,
        liftable_two: done.lift_subs.len() - liftable_one,
    })
}

/// A benchmark directory loaded back into memory, with the target
/// retriever re-derived from the manifest.
pub struct LoadedBench {
    pub bench: Benchmark,
    pub synonyms: SynonymTable,
    pub embeddings: WordEmbeddings,
    pub manifest: BenchManifest,
    pub target: DualEncoder,
}

pub fn load_bench(config: &RunConfig, bench_dir: Option<PathBuf>) -> Result<LoadedBench> {
    let dir = bench_dir.unwrap_or_else(|| config.paths.bench_dir.clone());
    let (bench, synonyms, embeddings, manifest) = load_benchmark(&dir)?;
    let target = target_encoder_from(&embeddings, manifest.target_noise, manifest.seed)?;
    Ok(LoadedBench {
        bench,
        synonyms,
        embeddings,
        manifest,
        target,
    })
}

pub fn checkpoint_path(config: &RunConfig, explicit: Option<PathBuf>, stage: Stage) -> PathBuf {
    explicit.unwrap_or_else(|| {
        config.paths.checkpoint_dir.join(match stage {
            Stage::Coarse => "coarse.ckpt",
            Stage::Fine => "fine.ckpt",
        })
    })
}

pub fn load_encoder(path: &Path) -> Result<DualEncoder> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::io(format!("reading checkpoint {}", path.display()), e))?;
    DualEncoder::load(&mut bytes.as_slice())
}

pub fn save_encoder(path: &Path, enc: &DualEncoder) -> Result<()> {
    let mut buf = Vec::new();
    enc.save(&mut buf)?;
    atomic_write_bytes(path, &buf)
}

/// Train one surrogate stage and write the checkpoint plus a JSON train
/// log. Returns the checkpoint path, the post-training fidelity and the
/// per-epoch losses.
pub fn train_stage(
    config: &RunConfig,
    stage: Stage,
    bench_dir: Option<PathBuf>,
    coarse_checkpoint: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<(PathBuf, Fidelity, TrainLog)> {
    config.validate()?;
    let loaded = load_bench(config, bench_dir)?;
    let root = RngStream::new(config.seed);
    let k = loaded.manifest.k;
    let (mut encoder, label) = match stage {
        Stage::Coarse => (
            DualEncoder::surrogate(
                &loaded.embeddings,
                &[],
                config.encoder.dim,
                config.encoder.hidden,
                &mut root.derive("surrogate-init"),
            )?,
            "coarse",
        ),
        Stage::Fine => {
            let coarse_path = checkpoint_path(config, coarse_checkpoint, Stage::Coarse);
            if !coarse_path.exists() {
                return Err(Error::InvalidArgument(format!(
                    "fine stage needs a coarse checkpoint; {} does not exist",
                    coarse_path.display()
                )));
            }
            (load_encoder(&coarse_path)?, "fine")
        }
    };
    let data = match stage {
        Stage::Coarse => TrainData::Coarse(build_coarse_samples(
            &loaded.bench,
            &loaded.target,
            k,
            config.train.negatives,
            &mut root.derive("coarse-samples"),
        )?),
        Stage::Fine => TrainData::Fine(build_fine_samples(
            &loaded.bench,
            &encoder,
            &loaded.target,
            k,
            config.train.hard_k,
            config.train.easy_negatives,
            &config.margins(),
            config.train.fine_samples,
            &mut root.derive("fine-samples"),
        )?),
    };
    let hyper = config.train_hyper(stage);
    let log = train_surrogate(
        &mut encoder,
        &data,
        &hyper,
        &mut root.derive(&format!("{label}-train")),
    )?;
    let fidelity = surrogate_fidelity(&encoder, &loaded.target, &loaded.bench, k)?;
    let out_path = checkpoint_path(config, out, stage);
    save_encoder(&out_path, &encoder)?;
    let train_log = serde_json::json!({
        "stage": label,
        "epoch_losses": log.epoch_losses,
        "fidelity": fidelity,
        "config": config.snapshot(),
    });
    atomic_write_bytes(
        &config.paths.log_dir.join(format!("train-{label}.json")),
        serde_json::to_string_pretty(&train_log)
            .map_err(|e| Error::json("train log", e))?
            .as_bytes(),
    )?;
    Ok((out_path, fidelity, log))
}

/// Load checkpoints and run the given methods over the benchmark.
pub fn run_methods(
    config: &RunConfig,
    loaded: &LoadedBench,
    coarse_checkpoint: Option<PathBuf>,
    fine_checkpoint: Option<PathBuf>,
    methods: Vec<String>,
) -> Result<SuiteOutput> {
    let coarse_path = checkpoint_path(config, coarse_checkpoint, Stage::Coarse);
    let fine_path = checkpoint_path(config, fine_checkpoint, Stage::Fine);
    let needs_coarse = methods.iter().any(|m| m == "regent-nr");
    let coarse = if coarse_path.exists() {
        load_encoder(&coarse_path)?
    } else if needs_coarse {
        return Err(Error::InvalidArgument(format!(
            "method regent-nr needs the coarse checkpoint {}",
            coarse_path.display()
        )));
    } else {
        load_encoder(&fine_path)?
    };
    let fine = load_encoder(&fine_path)?;
    let mut suite = config.suite_config();
    suite.methods = methods;
    suite.k = loaded.manifest.k;
    suite.gen_cfg.k = loaded.manifest.k;
    let fidelity = FidelityBlock {
        coarse: surrogate_fidelity(&coarse, &loaded.target, &loaded.bench, suite.k)?,
        fine: surrogate_fidelity(&fine, &loaded.target, &loaded.bench, suite.k)?,
        k: suite.k,
    };
    run_suite(
        &loaded.bench,
        &coarse,
        &fine,
        &loaded.target,
        &loaded.synonyms,
        &suite,
        Some(fidelity),
        config.snapshot(),
    )
}

/// Write per-query step logs: one JSONL file per query with a summary
/// object appended at the end.
pub fn write_step_logs(log_dir: &Path, method: &str, results: &[AttackResult]) -> Result<()> {
    for r in results {
        let mut lines = String::new();
        for step in &r.log {
            lines.push_str(&serde_json::to_string(step).map_err(|e| Error::json("step log", e))?);
            lines.push('\n');
        }
        let summary = serde_json::json!({ "summary": r });
        lines.push_str(&serde_json::to_string(&summary).map_err(|e| Error::json("summary", e))?);
        lines.push('\n');
        atomic_write_bytes(
            &log_dir.join(method).join(format!("{}.jsonl", r.query_id)),
            lines.as_bytes(),
        )?;
    }
    Ok(())
}

/// Write a method's results file.
pub fn write_results_file(
    config: &RunConfig,
    bench: &Benchmark,
    method: &str,
    excluded: &[String],
    results: &[AttackResult],
    path: &Path,
) -> Result<()> {
    let file = ResultsFile {
        schema_version: REPORT_SCHEMA_VERSION,
        method: method.to_string(),
        benchmark_id: benchmark_id(bench, config.seed),
        seed: config.seed,
        config: config.snapshot(),
        excluded_queries: excluded.to_vec(),
        results: results.to_vec(),
    };
    save_results(path, &file)
}

/// Run the configured method list and write results files, step logs and
/// the report (JSON plus text table) under `out_dir`.
pub fn eval_and_write(
    config: &RunConfig,
    bench_dir: Option<PathBuf>,
    coarse_checkpoint: Option<PathBuf>,
    fine_checkpoint: Option<PathBuf>,
    methods: Option<Vec<String>>,
    out_dir: Option<PathBuf>,
) -> Result<Report> {
    config.validate()?;
    let loaded = load_bench(config, bench_dir)?;
    let methods = methods.unwrap_or_else(|| config.suite.methods.clone());
    let suite_out = run_methods(config, &loaded, coarse_checkpoint, fine_checkpoint, methods)?;
    let dir = out_dir.unwrap_or_else(|| config.paths.report_dir.clone());
    for (method, results) in &suite_out.results {
        write_results_file(
            config,
            &loaded.bench,
            method,
            &suite_out.report.excluded_queries,
            results,
            &dir.join(format!("results-{method}.json")),
        )?;
        write_step_logs(&config.paths.log_dir, method, results)?;
    }
    save_report(&dir.join("report.json"), &suite_out.report)?;
    atomic_write_bytes(
        &dir.join("report.txt"),
        text_table(&suite_out.report).as_bytes(),
    )?;
    Ok(suite_out.report)
}
