//! Benchmark generator and evaluation harness for value questions and bet
//! questions posed to multiple-choice scorers.
//!
//! The pipeline is: [`catalog`] items are paired and rendered by
//! [`templates`] into three-choice instances, [`oracle`] attaches exact
//! expected-gain ground truths, [`scoring`] turns prompt/choice pairs into
//! normalized scores, [`predict`] applies the standard or threshold
//! predicting function, and [`metrics`] / [`stats`] compute accuracies,
//! belief conditioned accuracy and one-sided z-tests.

pub mod catalog;
pub mod cli;
pub mod dataset;
pub mod error;
mod hashing;
pub mod metrics;
pub mod oracle;
pub mod predict;
pub mod scoring;
pub mod stats;
pub mod templates;

pub use error::{Error, Result};
