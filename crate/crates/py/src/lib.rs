//! Python bindings: the main laboratory operations behind one module.
//!
//! Structured results cross the boundary as JSON strings so the Python
//! side can `json.loads` them without extra conversion machinery.

use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use regent_core::attack::Variant;
use regent_core::config::RunConfig;
use regent_core::error::Error;
use regent_core::evalbench::metrics_from_counts;
use regent_core::pipeline;
use regent_core::retriever::Stage;

fn py_err(e: Error) -> PyErr {
    if e.is_usage() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Lowercased, punctuation-stripped word tokens.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    regent_core::corpus::tokenize(text)
}

/// Numerically stabilized softmax.
#[pyfunction]
fn softmax(logits: Vec<f64>) -> PyResult<Vec<f64>> {
    regent_core::nn::softmax(&logits).map_err(py_err)
}

/// Discounted returns by backward recursion.
#[pyfunction]
fn discounted_returns(rewards: Vec<f64>, gamma: f64) -> Vec<f64> {
    regent_core::attack::discounted_returns(&rewards, gamma)
}

/// Relevance-generation-naturalness step reward.
///
/// `variant` is one of "regent", "regent-nr", "regent-ng".
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn compute_reward(
    delta_relevance: f64,
    r_gen: f64,
    doc_sim: f64,
    lambda_r: f64,
    tau: f64,
    penalty: f64,
    neg_penalty: f64,
    variant: &str,
) -> PyResult<f64> {
    let variant = match variant {
        "regent" => Variant::Full,
        "regent-nr" => Variant::CoarseRetriever,
        "regent-ng" => Variant::NoGenerationReward,
        other => return Err(PyValueError::new_err(format!("unknown variant {other:?}"))),
    };
    let params = regent_core::attack::RewardParams {
        lambda_r,
        tau,
        penalty,
        neg_penalty,
    };
    params.validate().map_err(py_err)?;
    Ok(regent_core::attack::compute_reward(
        delta_relevance,
        r_gen,
        doc_sim,
        &params,
        variant,
    ))
}

/// Attack metrics from bare success counts, as a JSON string.
#[pyfunction]
fn metrics_from_counts_json(
    n_full_success: usize,
    n_retrieval_success: usize,
    n_total: usize,
) -> PyResult<String> {
    let m = metrics_from_counts(n_full_success, n_retrieval_success, n_total).map_err(py_err)?;
    to_json(&m)
}

/// The default configuration as TOML text.
#[pyfunction]
fn default_config_toml() -> PyResult<String> {
    toml::to_string_pretty(&RunConfig::default())
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// The laboratory driver: holds one run configuration and exposes the
/// file-backed pipeline steps.
#[pyclass]
struct Lab {
    config: RunConfig,
}

#[pymethods]
impl Lab {
    /// Build from TOML text; `None` uses the defaults.
    #[new]
    #[pyo3(signature = (config_toml=None))]
    fn new(config_toml: Option<&str>) -> PyResult<Self> {
        let config = match config_toml {
            Some(text) => {
                let cfg: RunConfig = toml::from_str(text)
                    .map_err(|e| PyValueError::new_err(format!("config: {e}")))?;
                cfg.validate().map_err(py_err)?;
                cfg
            }
            None => RunConfig::default(),
        };
        Ok(Lab { config })
    }

    /// Load the configuration from a TOML file.
    #[staticmethod]
    fn from_path(path: PathBuf) -> PyResult<Self> {
        Ok(Lab {
            config: RunConfig::load(&path).map_err(py_err)?,
        })
    }

    fn seed(&self) -> u64 {
        self.config.seed
    }

    fn set_seed(&mut self, seed: u64) {
        self.config.seed = seed;
    }

    fn set_scenario(&mut self, scenario: &str) -> PyResult<()> {
        self.config.scenario = scenario.parse().map_err(py_err)?;
        Ok(())
    }

    /// The effective configuration as a JSON string.
    fn config_json(&self) -> PyResult<String> {
        to_json(&self.config)
    }

    /// Generate the benchmark directory; returns a summary JSON string.
    #[pyo3(signature = (out_dir=None))]
    fn gen_bench(&self, out_dir: Option<PathBuf>) -> PyResult<String> {
        let out = out_dir.unwrap_or_else(|| self.config.paths.bench_dir.clone());
        let summary = pipeline::gen_bench(&self.config, &out).map_err(py_err)?;
        to_json(&summary)
    }

    /// Train one surrogate stage ("coarse" or "fine"); returns
    /// `{checkpoint, fidelity, epoch_losses}` as JSON.
    #[pyo3(signature = (stage, bench_dir=None, coarse_checkpoint=None, out=None))]
    fn train_surrogate(
        &self,
        stage: &str,
        bench_dir: Option<PathBuf>,
        coarse_checkpoint: Option<PathBuf>,
        out: Option<PathBuf>,
    ) -> PyResult<String> {
        let stage: Stage = stage.parse().map_err(py_err)?;
        let (path, fidelity, log) =
            pipeline::train_stage(&self.config, stage, bench_dir, coarse_checkpoint, out)
                .map_err(py_err)?;
        to_json(&serde_json::json!({
            "checkpoint": path,
            "fidelity": fidelity,
            "epoch_losses": log.epoch_losses,
        }))
    }

    /// Run the configured (or given) methods and write results files,
    /// step logs and the report; returns the report as JSON.
    #[pyo3(signature = (bench_dir=None, coarse_checkpoint=None, fine_checkpoint=None, methods=None, out_dir=None))]
    fn evaluate(
        &self,
        bench_dir: Option<PathBuf>,
        coarse_checkpoint: Option<PathBuf>,
        fine_checkpoint: Option<PathBuf>,
        methods: Option<Vec<String>>,
        out_dir: Option<PathBuf>,
    ) -> PyResult<String> {
        let report = pipeline::eval_and_write(
            &self.config,
            bench_dir,
            coarse_checkpoint,
            fine_checkpoint,
            methods,
            out_dir,
        )
        .map_err(py_err)?;
        to_json(&report)
    }
}

#[pymodule]
fn regent_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Lab>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(discounted_returns, m)?)?;
    m.add_function(wrap_pyfunction!(compute_reward, m)?)?;
    m.add_function(wrap_pyfunction!(metrics_from_counts_json, m)?)?;
    m.add_function(wrap_pyfunction!(default_config_toml, m)?)?;
    m.add("RNG_ALGORITHM", regent_core::rng::RNG_ALGORITHM)?;
    Ok(())
}
