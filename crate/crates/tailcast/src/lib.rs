//! Correlation-spectrum tail-risk pipeline for daily asset panels.
//!
//! The crate turns a panel of daily closes into rolling correlation
//! matrices, extracts spectral and graph-topology features alongside a
//! traditional indicator block, trains random-forest rally/crash
//! classifiers under a gapped walk-forward protocol, and feeds the
//! out-of-sample probabilities into a risk-on/risk-off overlay with an
//! ensemble parameter search. Everything is deterministic for a fixed
//! seed: reruns reproduce artifacts byte for byte.

pub mod artifacts;
pub mod correlation;
pub mod error;
pub mod exec;
pub mod features;
pub mod labels;
pub mod learner;
pub mod metrics;
pub mod panel;
pub mod run;
pub mod spectral;
pub mod stats;
pub mod strategy;
pub mod synthetic;
pub mod traditional;
pub mod walkforward;

pub use error::{Error, Result};
