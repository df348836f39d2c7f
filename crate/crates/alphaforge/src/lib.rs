//! Formulaic alpha mining engine.
//!
//! The crate turns trading ideas into validated alpha expressions over panel
//! market data and keeps them honest end to end:
//!
//! - [`dsl`] — the 19-operator expression language (tokenizer, parser, printer).
//! - [`semantics`] — the invalid-alpha rule base: unit inference, domain rules,
//!   and semantic checking on a fixed mock panel.
//! - [`engine`] — vectorized batch and incremental streaming evaluation with a
//!   strict batch/stream equivalence contract.
//! - [`data`] — panel loading, synthesis, and forward-return labels.
//! - [`metrics`] — IC series, summaries, and a quantile long-short backtest.
//! - [`gp`] — genetic-programming search scored by the Information Coefficient.
//! - [`pool`] — the persistent alpha store with decorrelation and LSH prefilter.
//! - [`decompiler`] — LLM response parsing and the iterative correction loop.
//! - [`bench`] — the evaluation benchmark harness.

pub mod bench;
pub mod config;
pub mod data;
pub mod decompiler;
pub mod dsl;
pub mod engine;
pub mod error;
pub mod gp;
pub mod matrix;
pub mod metrics;
pub mod pool;
pub mod rng;
pub mod semantics;

pub use error::{Error, Result};
