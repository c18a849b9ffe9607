//! Wire-protocol adapter for an external generator.
//!
//! Protocol: `POST {endpoint}/generate` with UTF-8 JSON body
//! `{"query": string, "documents": [{"id", "text"}], "defensive": bool}`;
//! expected response `{"text": string, "label": string,
//! "weights": {id: number}}`. Any non-200 status, schema violation or
//! weight-distribution violation is an error; attack runs treat those as
//! episode aborts, never as success.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Query};
use crate::error::{Error, Result};
use crate::ragenv::RagAnswer;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalConfig {
    /// Base URL, e.g. `http://127.0.0.1:8080`.
    pub endpoint: String,
    pub timeout_ms: u64,
    /// Additional attempts after the first on transport errors.
    pub retries: u32,
}

impl Default for ExternalConfig {
    fn default() -> Self {
        ExternalConfig {
            endpoint: "http://127.0.0.1:8080".into(),
            timeout_ms: 2000,
            retries: 1,
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    query: &'a str,
    documents: Vec<WireDoc<'a>>,
    defensive: bool,
}

#[derive(Serialize)]
struct WireDoc<'a> {
    id: &'a str,
    text: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
    label: String,
    weights: BTreeMap<String, f64>,
}

/// Call the external generator and validate its answer against the
/// context documents.
pub fn external_generate(
    cfg: &ExternalConfig,
    q: &Query,
    docs: &[&Document],
    defensive: bool,
) -> Result<RagAnswer> {
    if docs.is_empty() {
        return Err(Error::EmptyInput("generator context"));
    }
    let body = WireRequest {
        query: &q.text,
        documents: docs
            .iter()
            .map(|d| WireDoc {
                id: &d.id,
                text: &d.text,
            })
            .collect(),
        defensive,
    };
    let url = format!("{}/generate", cfg.endpoint.trim_end_matches('/'));
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
        .build()
        .into();

    let mut last_err = None;
    for _ in 0..=cfg.retries {
        match agent.post(&url).send_json(&body) {
            Ok(mut resp) => {
                if resp.status() != 200 {
                    return Err(Error::Transport(format!(
                        "generator returned status {}",
                        resp.status()
                    )));
                }
                let wire: WireResponse = resp
                    .body_mut()
                    .read_json()
                    .map_err(|e| Error::Validation(format!("malformed response: {e}")))?;
                return finish(wire, docs);
            }
            Err(ureq::Error::StatusCode(code)) => {
                return Err(Error::Transport(format!(
                    "generator returned status {code}"
                )));
            }
            Err(e) => last_err = Some(Error::Transport(e.to_string())),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Transport("no attempts made".into())))
}

fn finish(wire: WireResponse, docs: &[&Document]) -> Result<RagAnswer> {
    let mut cited: Vec<(String, f64)> = wire
        .weights
        .iter()
        .filter(|(_, w)| **w > 0.0)
        .map(|(id, w)| (id.clone(), *w))
        .collect();
    cited.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    let answer = RagAnswer {
        text: wire.text,
        label: wire.label,
        cited_doc_ids: cited.into_iter().map(|(id, _)| id).collect(),
        per_doc_weight: wire.weights,
    };
    let ids: Vec<&str> = docs.iter().map(|d| d.id.as_str()).collect();
    answer.validate(&ids)?;
    Ok(answer)
}
