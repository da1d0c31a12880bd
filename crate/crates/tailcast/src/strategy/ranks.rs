//! Rolling percentile ranks of the out-of-sample probabilities.

use crate::error::{Error, Result};

pub const RANK_WINDOW: usize = 126;

/// Per-date rally and crash ranks, starting `offset` days into the score
/// series once the trailing window is full.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalRanks {
    /// Score-series index of the first emitted rank.
    pub offset: usize,
    pub rally: Vec<f64>,
    pub crash: Vec<f64>,
}

impl SignalRanks {
    pub fn len(&self) -> usize {
        self.rally.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rally.is_empty()
    }
}

/// Trailing percentile rank: share of the window (current value included)
/// at or below the current value. Warm-up dates emit nothing.
pub fn percentile_rank(series: &[f64], window: usize) -> Vec<f64> {
    if series.len() < window {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(series.len() - window + 1);
    for t in window - 1..series.len() {
        let cur = series[t];
        let count = series[t + 1 - window..=t].iter().filter(|v| **v <= cur).count();
        out.push(count as f64 / window as f64);
    }
    out
}

pub fn signal_ranks(rally_scores: &[f64], crash_scores: &[f64]) -> Result<SignalRanks> {
    if rally_scores.len() != crash_scores.len() {
        return Err(Error::Data(format!(
            "rally and crash score series differ in length: {} vs {}",
            rally_scores.len(),
            crash_scores.len()
        )));
    }
    if rally_scores.len() < RANK_WINDOW {
        return Err(Error::InsufficientHistory {
            rows: rally_scores.len(),
            need: RANK_WINDOW,
        });
    }
    Ok(SignalRanks {
        offset: RANK_WINDOW - 1,
        rally: percentile_rank(rally_scores, RANK_WINDOW),
        crash: percentile_rank(crash_scores, RANK_WINDOW),
    })
}
