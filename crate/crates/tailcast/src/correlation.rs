//! Three parallel correlation estimates per evaluation date: 60- and 120-day
//! trailing Pearson windows and an exponentially weighted estimator with a
//! 30-day half-life. All snapshots are symmetrised, clipped to [-1, 1] and
//! carry an exact unit diagonal.

use chrono::NaiveDate;
use ndarray::{Array1, Array2, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::PricePanel;

/// Decay half-life of the EWM estimator, in trading days.
pub const EWM_HALF_LIFE: f64 = 30.0;

/// Warm-up observations required before an EWM snapshot is emitted; also its
/// effective T for the Marchenko-Pastur bound.
pub const EWM_WARMUP: usize = 60;

/// Gram-diagonal threshold below which an asset counts as zero-variance.
const DEGENERATE_VAR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Estimator {
    Roll60,
    Roll120,
    Ewm30,
}

impl Estimator {
    pub fn all() -> [Estimator; 3] {
        [Estimator::Roll60, Estimator::Roll120, Estimator::Ewm30]
    }

    /// Short name used as a feature-name prefix and in manifests.
    pub fn label(&self) -> &'static str {
        match self {
            Estimator::Roll60 => "roll60",
            Estimator::Roll120 => "roll120",
            Estimator::Ewm30 => "ewm30",
        }
    }

    /// Sample length used for the Marchenko-Pastur bulk edge.
    pub fn effective_t(&self) -> usize {
        match self {
            Estimator::Roll60 => 60,
            Estimator::Roll120 => 120,
            Estimator::Ewm30 => EWM_WARMUP,
        }
    }

    /// Trailing rows needed before this estimator can be evaluated.
    pub fn min_history(&self) -> usize {
        match self {
            Estimator::Roll60 => 60,
            Estimator::Roll120 => 120,
            Estimator::Ewm30 => EWM_WARMUP,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorrelationSnapshot {
    pub estimator: Estimator,
    pub as_of: NaiveDate,
    pub matrix: Array2<f64>,
    pub effective_t: usize,
    /// Column indices whose window variance was degenerate (correlations
    /// with them forced to 0).
    pub degenerate: Vec<usize>,
}

impl CorrelationSnapshot {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Correlation snapshot at return-row index `end` (inclusive) of the panel.
pub fn correlation_at(
    panel: &PricePanel,
    estimator: Estimator,
    end: usize,
) -> Result<CorrelationSnapshot> {
    let need = estimator.min_history();
    if end + 1 < need || end >= panel.n_returns() {
        return Err(Error::Data(format!(
            "window unavailable: {} needs {} rows, {} available",
            estimator.label(),
            need,
            end.min(panel.n_returns()) + 1
        )));
    }
    let (matrix, degenerate) = match estimator {
        Estimator::Roll60 => pearson(panel.returns_window(end, 60).expect("checked")),
        Estimator::Roll120 => pearson(panel.returns_window(end, 120).expect("checked")),
        Estimator::Ewm30 => ewm(panel.returns_until(end), EWM_HALF_LIFE),
    };
    Ok(CorrelationSnapshot {
        estimator,
        as_of: panel.return_dates()[end],
        matrix,
        effective_t: estimator.effective_t(),
        degenerate,
    })
}

/// Pearson correlation with window means, symmetrised and clipped.
pub fn pearson(window: ArrayView2<'_, f64>) -> (Array2<f64>, Vec<usize>) {
    let rows = window.nrows();
    let n = window.ncols();
    let mut demeaned = window.to_owned();
    for mut col in demeaned.columns_mut() {
        let mean = col.sum() / rows as f64;
        col.mapv_inplace(|v| v - mean);
    }
    let gram = demeaned.t().dot(&demeaned);
    finalize(&gram, n)
}

/// Per-lag decay weight: `lambda^lag` with `lambda = 2^(-1/half_life)`, so
/// the weight halves every `half_life` lags.
pub fn ewm_weight(half_life: f64, lag: usize) -> f64 {
    (2.0f64).powf(-(lag as f64) / half_life)
}

/// Lags beyond this contribute weights below 1e-15 and are truncated.
fn ewm_max_lags(half_life: f64) -> usize {
    (half_life * (1e15f64).log2()).ceil() as usize + 1
}

/// Exponentially weighted correlation over the full available history
/// (rows ordered oldest to newest), demeaned with exponentially weighted
/// means. History is truncated where weights fall below 1e-15.
pub fn ewm(history: ArrayView2<'_, f64>, half_life: f64) -> (Array2<f64>, Vec<usize>) {
    let total = history.nrows();
    let n = history.ncols();
    let used = total.min(ewm_max_lags(half_life));
    let window = history.slice(ndarray::s![total - used.., ..]);

    // Row k (oldest first) carries lag used-1-k.
    let weights: Array1<f64> =
        (0..used).map(|k| ewm_weight(half_life, used - 1 - k)).collect();
    let wsum = weights.sum();

    let mut means = Array1::<f64>::zeros(n);
    for (k, row) in window.rows().into_iter().enumerate() {
        let w = weights[k];
        for a in 0..n {
            means[a] += w * row[a];
        }
    }
    means.mapv_inplace(|v| v / wsum);

    // Scale demeaned rows by sqrt(w) so the Gram matrix gives weighted
    // second moments directly.
    let mut scaled = window.to_owned();
    for (k, mut row) in scaled.rows_mut().into_iter().enumerate() {
        let sw = weights[k].sqrt();
        for a in 0..n {
            row[a] = (row[a] - means[a]) * sw;
        }
    }
    let gram = scaled.t().dot(&scaled);
    finalize(&gram, n)
}

/// Convert a Gram matrix of (weighted) demeaned columns into a correlation
/// matrix: normalise, zero out degenerate assets, symmetrise, clip, unit
/// diagonal.
fn finalize(gram: &Array2<f64>, n: usize) -> (Array2<f64>, Vec<usize>) {
    let mut degenerate = Vec::new();
    let mut scale = Vec::with_capacity(n);
    for i in 0..n {
        let var = gram[[i, i]];
        if var <= DEGENERATE_VAR {
            degenerate.push(i);
            scale.push(0.0);
        } else {
            scale.push(1.0 / var.sqrt());
        }
    }
    let mut corr = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let mut c = gram[[i, j]] * scale[i] * scale[j];
            c = c.clamp(-1.0, 1.0);
            corr[[i, j]] = c;
            corr[[j, i]] = c;
        }
        corr[[i, i]] = 1.0;
    }
    (corr, degenerate)
}
