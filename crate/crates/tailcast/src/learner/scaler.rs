//! Median/IQR feature scaling, fit on training rows only.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

const IQR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustScaler {
    pub medians: Vec<f64>,
    /// Per-column divisor; 1 where the IQR was below the floor.
    pub scales: Vec<f64>,
}

impl RobustScaler {
    pub fn fit(x: ArrayView2<'_, f64>) -> Result<Self> {
        if x.nrows() < 2 {
            return Err(Error::InsufficientHistory { rows: x.nrows(), need: 2 });
        }
        let mut medians = Vec::with_capacity(x.ncols());
        let mut scales = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mut v: Vec<f64> =
                col.iter().map(|&v| if v.is_finite() { v } else { 0.0 }).collect();
            v.sort_by(f64::total_cmp);
            medians.push(stats::median_sorted(&v));
            let iqr = stats::quantile_sorted(&v, 0.75) - stats::quantile_sorted(&v, 0.25);
            scales.push(if iqr < IQR_FLOOR { 1.0 } else { iqr });
        }
        Ok(RobustScaler { medians, scales })
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), x.ncols()));
        for ((i, j), v) in x.indexed_iter() {
            let v = if v.is_finite() { *v } else { 0.0 };
            let s = (v - self.medians[j]) / self.scales[j];
            out[[i, j]] = if s.is_finite() { s } else { 0.0 };
        }
        out
    }
}
