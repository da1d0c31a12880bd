//! Temporal dynamics of the key spectral quantities: rates of change,
//! differences, rolling z-scores, acceleration and trailing percentile
//! ranks, all strictly causal.

use crate::stats::STD_FLOOR;

/// The tracked quantities, sourced from the 60-day estimator each date.
/// `var_share` and `ar1` are analytically identical for a correlation
/// matrix (trace = n); both are tracked as named.
pub const QUANTITIES: [&str; 8] = [
    "lambda1",
    "var_share",
    "ar1",
    "entropy",
    "eff_rank",
    "mean_abs_corr",
    "edge_density_t50",
    "clustering_t50",
];

pub const HORIZONS: [usize; 3] = [5, 10, 20];
pub const PCT_WINDOW: usize = 252;

/// Derived features per quantity: 3 ROC + 3 diff + 3 z + accel + pct rank.
pub const PER_QUANTITY: usize = 11;

/// Guard below which a ROC denominator counts as zero.
const ROC_FLOOR: f64 = 1e-12;

/// Append-only history of the key quantities, one value per evaluation
/// date in order.
#[derive(Debug, Clone, Default)]
pub struct DynamicsState {
    buffers: Vec<Vec<f64>>,
}

impl DynamicsState {
    pub fn new() -> Self {
        DynamicsState { buffers: vec![Vec::new(); QUANTITIES.len()] }
    }

    pub fn push(&mut self, values: [f64; 8]) {
        for (buf, v) in self.buffers.iter_mut().zip(values) {
            buf.push(v);
        }
    }

    pub fn len(&self) -> usize {
        self.buffers[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn series(&self, quantity: usize) -> &[f64] {
        &self.buffers[quantity]
    }
}

pub fn dynamics_feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(QUANTITIES.len() * PER_QUANTITY);
    for q in QUANTITIES {
        for h in HORIZONS {
            names.push(format!("dyn_{q}_roc_{h}"));
        }
        for h in HORIZONS {
            names.push(format!("dyn_{q}_diff_{h}"));
        }
        for h in HORIZONS {
            names.push(format!("dyn_{q}_z_{h}"));
        }
        names.push(format!("dyn_{q}_accel"));
        names.push(format!("dyn_{q}_pct{PCT_WINDOW}"));
    }
    names
}

fn quantity_features(series: &[f64], out: &mut Vec<f64>) {
    let t = series.len() - 1;
    let cur = series[t];
    for h in HORIZONS {
        let v = if t >= h {
            let past = series[t - h];
            if past.abs() <= ROC_FLOOR { 0.0 } else { cur / past - 1.0 }
        } else {
            0.0
        };
        out.push(v);
    }
    for h in HORIZONS {
        out.push(if t >= h { cur - series[t - h] } else { 0.0 });
    }
    for h in HORIZONS {
        let w = 2 * h;
        let v = if t + 1 >= w {
            let window = &series[t + 1 - w..=t];
            let mean = crate::stats::mean(window);
            let std = crate::stats::population_std(window);
            if std < STD_FLOOR { 0.0 } else { (cur - mean) / std }
        } else {
            0.0
        };
        out.push(v);
    }
    out.push(if t >= 2 { cur - 2.0 * series[t - 1] + series[t - 2] } else { 0.0 });
    let pct = if t + 1 >= PCT_WINDOW {
        let window = &series[t + 1 - PCT_WINDOW..=t];
        window.iter().filter(|&&x| x <= cur).count() as f64 / PCT_WINDOW as f64
    } else {
        0.0
    };
    out.push(pct);
}

/// The 88 dynamics features at the latest appended date. Values with
/// insufficient history are emitted as 0.
pub fn dynamics_feature_values(state: &DynamicsState) -> Vec<f64> {
    assert!(!state.is_empty(), "dynamics on empty state");
    let mut out = Vec::with_capacity(QUANTITIES.len() * PER_QUANTITY);
    for q in 0..QUANTITIES.len() {
        quantity_features(state.series(q), &mut out);
    }
    out
}
