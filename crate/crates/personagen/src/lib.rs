//! Persona-conditioned synthetic emotion-text generation and evaluation.
//!
//! The crate implements a four-stage pipeline — base persona sampling,
//! socio-cultural background enrichment, scenario/style conditioning, and
//! LLM-backed text generation — plus the quantitative evaluation suite used
//! to score the resulting corpora: diversity metrics (MCD, CE, CD),
//! golden-corpus similarity metrics (FID, PRD-Fβ, KL, HC), and a downstream
//! emotion-classification harness.
//!
//! Every stage is deterministic given a run seed: LLM and embedding
//! backends sit behind trait contracts with seeded mock implementations, so
//! full runs are byte-reproducible offline.

pub mod classify;
pub mod distribution;
pub mod embedding;
pub mod error;
pub mod exec;
pub mod gateway;
pub mod metrics;
pub mod persona;
pub mod pipeline;
pub mod rng;
pub mod scenario;
pub mod store;

pub use error::{Error, Result};
