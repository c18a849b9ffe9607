//! Report and results-file schemas plus the human-readable summary table.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attack::AttackResult;
use crate::corpus::Benchmark;
use crate::error::{Error, Result};
use crate::evalbench::AttackMetrics;
use crate::retriever::Fidelity;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Surrogate fidelity before and after fine-grained training.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityBlock {
    pub coarse: Fidelity,
    pub fine: Fidelity,
    pub k: usize,
}

/// One per-query line inside a method block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuerySummary {
    pub query_id: String,
    pub retrieval_success: bool,
    pub generation_success: bool,
    pub steps: usize,
    pub substitutions: usize,
    pub perturbation_rate: f64,
    pub final_doc_sim: f64,
    pub final_reward: f64,
    pub mean_gen_reward: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl QuerySummary {
    pub fn from_result(r: &AttackResult) -> Self {
        QuerySummary {
            query_id: r.query_id.clone(),
            retrieval_success: r.retrieval_success,
            generation_success: r.generation_success,
            steps: r.steps,
            substitutions: r.substitutions.len(),
            perturbation_rate: r.perturbation_rate,
            final_doc_sim: r.final_doc_sim,
            final_reward: r.final_reward,
            mean_gen_reward: r.mean_gen_reward,
            error: r.error.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodReport {
    pub metrics: AttackMetrics,
    pub per_query: Vec<QuerySummary>,
}

/// The run report: self-contained (the embedded config snapshot plus the
/// seed reproduce it).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub benchmark_id: String,
    pub seed: u64,
    pub rng_algorithm: String,
    /// Effective configuration snapshot.
    pub config: serde_json::Value,
    pub lambda_r_used: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<FidelityBlock>,
    pub methods: BTreeMap<String, MethodReport>,
    /// Queries excluded because the unattacked system already produced
    /// the desired answer.
    pub excluded_queries: Vec<String>,
}

/// Stable identifier for a benchmark instance.
pub fn benchmark_id(bench: &Benchmark, seed: u64) -> String {
    format!(
        "{}-s{}-q{}-d{}",
        bench.scenario,
        seed,
        bench.queries.len(),
        bench.corpus.len()
    )
}

/// Per-method results file written by the attack command and consumed by
/// the report command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultsFile {
    pub schema_version: u32,
    pub method: String,
    pub benchmark_id: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub excluded_queries: Vec<String>,
    pub results: Vec<AttackResult>,
}

pub fn save_results(path: &Path, file: &ResultsFile) -> Result<()> {
    let json = serde_json::to_string_pretty(file)
        .map_err(|e| Error::json(path.display().to_string(), e))?;
    crate::corpus::atomic_write_bytes(path, json.as_bytes())
}

pub fn load_results(path: &Path) -> Result<ResultsFile> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let file: ResultsFile =
        serde_json::from_str(&raw).map_err(|e| Error::json(path.display().to_string(), e))?;
    if file.schema_version != REPORT_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            path: path.to_path_buf(),
            expected: REPORT_SCHEMA_VERSION,
            got: file.schema_version,
        });
    }
    Ok(file)
}

pub fn save_report(path: &Path, report: &Report) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::json(path.display().to_string(), e))?;
    crate::corpus::atomic_write_bytes(path, json.as_bytes())
}

pub fn load_report(path: &Path) -> Result<Report> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let report: Report =
        serde_json::from_str(&raw).map_err(|e| Error::json(path.display().to_string(), e))?;
    if report.schema_version != REPORT_SCHEMA_VERSION {
        return Err(Error::SchemaVersion {
            path: path.to_path_buf(),
            expected: REPORT_SCHEMA_VERSION,
            got: report.schema_version,
        });
    }
    Ok(report)
}

/// Plain-text summary: one row per method, columns ASR / ASR_r / ASR_g /
/// APR / ADSP.
pub fn text_table(report: &Report) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "benchmark {}  seed {}  lambda_r {:.4}\n",
        report.benchmark_id, report.seed, report.lambda_r_used
    ));
    if let Some(f) = &report.fidelity {
        out.push_str(&format!(
            "surrogate fidelity @{}: coarse MRR {:.2} NDCG {:.2} F1 {:.2} | fine MRR {:.2} NDCG {:.2} F1 {:.2}\n",
            f.k, f.coarse.mrr, f.coarse.ndcg, f.coarse.f1, f.fine.mrr, f.fine.ndcg, f.fine.f1
        ));
    }
    if !report.excluded_queries.is_empty() {
        out.push_str(&format!(
            "excluded (pre-attack desired answer): {}\n",
            report.excluded_queries.len()
        ));
    }
    out.push_str(&format!(
        "{:<16} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
        "method", "ASR", "ASR_r", "ASR_g", "APR", "ADSP"
    ));
    for (method, block) in &report.methods {
        let m = &block.metrics;
        let asr_g = m
            .asr_g
            .map(|v| format!("{v:.1}"))
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<16} {:>8.1} {:>8.1} {:>8} {:>8.2} {:>8.2}\n",
            method, m.asr, m.asr_r, asr_g, m.apr, m.adsp
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalbench::metrics::synthetic_result;

    fn sample_report() -> Report {
        let results = vec![
            synthetic_result("q1", true, true, 0.03, 0.995),
            synthetic_result("q2", false, false, 0.0, 1.0),
        ];
        let metrics = crate::evalbench::compute_metrics(&results).unwrap();
        let mut methods = BTreeMap::new();
        methods.insert(
            "regent".to_string(),
            MethodReport {
                metrics,
                per_query: results.iter().map(QuerySummary::from_result).collect(),
            },
        );
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            benchmark_id: "factual-s1-q2-d20".into(),
            seed: 1,
            rng_algorithm: crate::rng::RNG_ALGORITHM.into(),
            config: serde_json::json!({"k": 3}),
            lambda_r_used: 10.0,
            fidelity: None,
            methods,
            excluded_queries: vec![],
        }
    }

    #[test]
    fn report_round_trip_and_schema_check() {
        let dir = std::env::temp_dir().join(format!("regent-report-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("report.json");
        let report = sample_report();
        save_report(&path, &report).unwrap();
        let back = load_report(&path).unwrap();
        assert_eq!(
            serde_json::to_string(&report).unwrap(),
            serde_json::to_string(&back).unwrap()
        );

        // Schema mismatch is rejected with the offending path.
        let mut wrong = report.clone();
        wrong.schema_version = 99;
        let bad = dir.join("bad.json");
        std::fs::write(&bad, serde_json::to_string(&wrong).unwrap()).unwrap();
        assert!(matches!(
            load_report(&bad),
            Err(Error::SchemaVersion { .. })
        ));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn table_lists_every_method_row() {
        let report = sample_report();
        let table = text_table(&report);
        assert!(table.contains("regent"));
        assert!(table.contains("ASR_r"));
    }
}
