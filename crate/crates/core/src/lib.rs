//! Desk-scale laboratory for studying word-substitution attacks against
//! retrieval-augmented generation (RAG) pipelines.
//!
//! The crate wires together five subsystems:
//!
//! * [`nn`] — a minimal feed-forward substrate (dense layers, analytic
//!   gradients, SGD) shared by every learned component,
//! * [`corpus`] — synthetic benchmark generation, tokenization and the
//!   synonym vocabulary,
//! * [`retriever`] — the dual-encoder relevance model, exact top-k search
//!   and the two-stage surrogate training pipeline,
//! * [`ragenv`] — a deterministic mock generator with a reference scorer,
//!   a defensive mode and a wire-protocol adapter for external generators,
//! * [`attack`] — the reinforcement-learning substitution agent and its
//!   ablation variants,
//! * [`evalbench`] — baselines, attack metrics and report emission.
//!
//! Everything is seed-deterministic: a root seed plus labelled stream
//! derivation reproduces benchmarks, training runs and attack logs byte
//! for byte. [`pipeline`] ties the subsystems into file-backed steps and
//! [`config`] holds the one TOML schema they all share.

pub mod attack;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evalbench;
pub mod nn;
pub mod pipeline;
pub mod ragenv;
pub mod retriever;
pub mod rng;

pub use error::{Error, Result};
