//! `regent-lab`: benchmark generation, surrogate training, attacks,
//! evaluation and report aggregation.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 runtime error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use regent_core::config::RunConfig;
use regent_core::corpus::atomic_write_bytes;
use regent_core::error::Error;
use regent_core::evalbench::{
    compute_metrics, load_results, save_report, text_table, MethodReport, QuerySummary, Report,
    REPORT_SCHEMA_VERSION,
};
use regent_core::pipeline;
use regent_core::retriever::Stage;
use regent_core::rng::RNG_ALGORITHM;

#[derive(Parser)]
#[command(
    name = "regent-lab",
    version,
    about = "Word-substitution attack laboratory for RAG pipelines"
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Config file (TOML); falls back to $REGENT_LAB_CONFIG, then defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Scenario override: factual or stance.
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Top-k override.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Attack step budget override.
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Worker cap for per-query fan-out.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Validate the configuration and exit.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark directory (corpus, queries, synonyms,
    /// embeddings, manifest).
    GenBench {
        #[arg(long)]
        n_queries: Option<usize>,
        #[arg(long)]
        corpus_size: Option<usize>,
        /// Output directory; defaults to paths.bench_dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Train the surrogate retriever (coarse stage, then fine stage).
    TrainSurrogate {
        /// coarse or fine.
        #[arg(long)]
        stage: String,
        #[arg(long)]
        bench_dir: Option<PathBuf>,
        /// Coarse checkpoint to start the fine stage from.
        #[arg(long)]
        coarse_checkpoint: Option<PathBuf>,
        /// Checkpoint output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one attack method over the benchmark.
    Attack {
        /// regent, regent-nr, regent-ng, greedy, naive, prompt-naive or
        /// prompt-hijack.
        #[arg(long)]
        method: String,
        #[arg(long)]
        bench_dir: Option<PathBuf>,
        #[arg(long)]
        coarse_checkpoint: Option<PathBuf>,
        #[arg(long)]
        fine_checkpoint: Option<PathBuf>,
        /// Results file output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-query step-log directory; defaults to paths.log_dir.
        #[arg(long)]
        log_dir: Option<PathBuf>,
    },
    /// Run the configured method list and emit the full report.
    Eval {
        #[arg(long)]
        bench_dir: Option<PathBuf>,
        #[arg(long)]
        coarse_checkpoint: Option<PathBuf>,
        #[arg(long)]
        fine_checkpoint: Option<PathBuf>,
        /// Comma-separated method list override.
        #[arg(long)]
        methods: Option<String>,
        /// Report output directory; defaults to paths.report_dir.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Aggregate one or more results files into a report.
    Report {
        /// Report output path (JSON; a .txt table is written alongside).
        #[arg(long)]
        out: PathBuf,
        /// Results files produced by the attack or eval commands.
        #[arg(required = true)]
        results: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successes, everything else is usage.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let config = match load_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if cli.common.dry_run {
        println!(
            "config ok (seed {}, scenario {})",
            config.seed, config.scenario
        );
        return ExitCode::SUCCESS;
    }
    match run(cli.command, config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, Error> {
    let path = common
        .config
        .clone()
        .or_else(|| std::env::var_os("REGENT_LAB_CONFIG").map(PathBuf::from));
    let mut config = match path {
        Some(p) => RunConfig::load(&p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(scenario) = &common.scenario {
        config.scenario = scenario.parse()?;
    }
    if let Some(k) = common.k {
        config.k = k;
    }
    if let Some(budget) = common.budget {
        config.attack.budget = budget;
    }
    if let Some(jobs) = common.jobs {
        config.jobs = jobs;
    }
    config.validate()?;
    Ok(config)
}

fn run(command: Command, config: RunConfig) -> Result<(), Error> {
    match command {
        Command::GenBench {
            n_queries,
            corpus_size,
            out_dir,
        } => {
            let mut config = config;
            if let Some(n) = n_queries {
                config.bench.n_queries = n;
            }
            if let Some(c) = corpus_size {
                config.bench.corpus_size = c;
            }
            let out = out_dir.unwrap_or_else(|| config.paths.bench_dir.clone());
            let summary = pipeline::gen_bench(&config, &out)?;
            println!(
                "benchmark written to {} ({} queries, {} documents; {} targets liftable with one substitution, {} with two)",
                summary.out_dir.display(),
                summary.n_queries,
                summary.corpus_size,
                summary.liftable_one,
                summary.liftable_two,
            );
            Ok(())
        }
        Command::TrainSurrogate {
            stage,
            bench_dir,
            coarse_checkpoint,
            out,
        } => {
            let stage: Stage = stage.parse()?;
            let (path, fidelity, _log) =
                pipeline::train_stage(&config, stage, bench_dir, coarse_checkpoint, out)?;
            let label = match stage {
                Stage::Coarse => "coarse",
                Stage::Fine => "fine",
            };
            println!(
                "{label} checkpoint written to {} (MRR {:.2}, NDCG {:.2}, F1 {:.2})",
                path.display(),
                fidelity.mrr,
                fidelity.ndcg,
                fidelity.f1
            );
            Ok(())
        }
        Command::Attack {
            method,
            bench_dir,
            coarse_checkpoint,
            fine_checkpoint,
            out,
            log_dir,
        } => {
            let known = [
                "regent",
                "regent-nr",
                "regent-ng",
                "greedy",
                "naive",
                "prompt-naive",
                "prompt-hijack",
            ];
            if !known.contains(&method.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "unknown method {method:?}; expected one of {known:?}"
                )));
            }
            let loaded = pipeline::load_bench(&config, bench_dir)?;
            let suite_out = pipeline::run_methods(
                &config,
                &loaded,
                coarse_checkpoint,
                fine_checkpoint,
                vec![method.clone()],
            )?;
            let results = &suite_out.results[&method];
            let out_path = out.unwrap_or_else(|| {
                config
                    .paths
                    .report_dir
                    .join(format!("results-{method}.json"))
            });
            pipeline::write_results_file(
                &config,
                &loaded.bench,
                &method,
                &suite_out.report.excluded_queries,
                results,
                &out_path,
            )?;
            pipeline::write_step_logs(
                &log_dir.unwrap_or_else(|| config.paths.log_dir.clone()),
                &method,
                results,
            )?;
            let metrics = &suite_out.report.methods[&method].metrics;
            println!(
                "{method}: ASR {:.1} ASR_r {:.1} APR {:.2} ADSP {:.2} -> {}",
                metrics.asr,
                metrics.asr_r,
                metrics.apr,
                metrics.adsp,
                out_path.display()
            );
            Ok(())
        }
        Command::Eval {
            bench_dir,
            coarse_checkpoint,
            fine_checkpoint,
            methods,
            out_dir,
        } => {
            let methods = methods.map(|s| {
                s.split(',')
                    .map(|m| m.trim().to_string())
                    .filter(|m| !m.is_empty())
                    .collect()
            });
            let out = out_dir.unwrap_or_else(|| config.paths.report_dir.clone());
            let report = pipeline::eval_and_write(
                &config,
                bench_dir,
                coarse_checkpoint,
                fine_checkpoint,
                methods,
                Some(out.clone()),
            )?;
            print!("{}", text_table(&report));
            println!("report written to {}", out.join("report.json").display());
            Ok(())
        }
        Command::Report { out, results } => cmd_report(&config, out, results),
    }
}

fn cmd_report(config: &RunConfig, out: PathBuf, result_paths: Vec<PathBuf>) -> Result<(), Error> {
    if result_paths.is_empty() {
        return Err(Error::InvalidArgument(
            "report needs at least one results file".into(),
        ));
    }
    let mut methods = std::collections::BTreeMap::new();
    let mut benchmark_id: Option<String> = None;
    let mut seed = None;
    let mut excluded = Vec::new();
    let mut snapshot = None;
    for path in &result_paths {
        let file = load_results(path)?;
        match &benchmark_id {
            None => {
                benchmark_id = Some(file.benchmark_id.clone());
                seed = Some(file.seed);
                excluded = file.excluded_queries.clone();
                snapshot = Some(file.config.clone());
            }
            Some(id) if *id != file.benchmark_id => {
                return Err(Error::InvalidArgument(format!(
                    "results files span different benchmarks: {} has {:?}, expected {id:?}",
                    path.display(),
                    file.benchmark_id
                )));
            }
            _ => {}
        }
        let eligible: Vec<_> = file
            .results
            .iter()
            .filter(|r| !r.pre_attack_hit)
            .cloned()
            .collect();
        let metrics = compute_metrics(&eligible)?;
        methods.insert(
            file.method.clone(),
            MethodReport {
                metrics,
                per_query: eligible.iter().map(QuerySummary::from_result).collect(),
            },
        );
    }
    let report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        benchmark_id: benchmark_id.expect("at least one file"),
        seed: seed.expect("at least one file"),
        rng_algorithm: RNG_ALGORITHM.into(),
        config: snapshot.unwrap_or_else(|| config.snapshot()),
        lambda_r_used: config.attack.lambda_r.unwrap_or(0.0),
        fidelity: None,
        methods,
        excluded_queries: excluded,
    };
    save_report(&out, &report)?;
    let table = text_table(&report);
    atomic_write_bytes(&out.with_extension("txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}
