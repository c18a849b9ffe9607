//! Attack-effectiveness metrics, baseline attacks, the evaluation suite
//! and report emission.

mod baselines;
mod metrics;
mod report;
mod suite;

pub use baselines::{
    greedy_substitution_baseline, naive_attack, prompt_injection_attack, run_injection_attack,
    InjectionFlavor, METHOD_NAIVE, METHOD_PROMPT_HIJACK, METHOD_PROMPT_NAIVE,
};
pub use metrics::{compute_metrics, metrics_from_counts, AttackMetrics};
pub use report::{
    benchmark_id, load_report, load_results, save_report, save_results, text_table, FidelityBlock,
    MethodReport, QuerySummary, Report, ResultsFile, REPORT_SCHEMA_VERSION,
};
pub use suite::{calibrate_lambda_r, run_suite, SuiteConfig, SuiteOutput};
