//! Feature assembly: per-date correlation snapshots feed the spectral,
//! topological and dynamics extractors; the index price series feeds the
//! traditional indicator block. Rows are evaluated for every date where all
//! three estimators and a 10-day label look-ahead are available.
//!
//! Per-date extraction is independent and runs data-parallel; the dynamics
//! state is folded sequentially afterwards so its trailing windows see
//! exactly the snapshots up to each row's date.

use chrono::NaiveDate;
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::correlation::{correlation_at, Estimator};
use crate::error::{Error, Result};
use crate::exec;
use crate::panel::PricePanel;
use crate::spectral::dynamics::{dynamics_feature_names, DynamicsState};
use crate::spectral::{
    assemble_spectral_row, estimator_block, estimator_block_names, EstimatorBlock,
};
use crate::traditional::{self, IndicatorConfig};

/// Days of forward prices a label consumes; the last rows of the panel
/// cannot be evaluated because their outcome is still open.
pub const LABEL_LOOKAHEAD: usize = 10;
/// First return-row index with full Roll120 history.
pub const FIRST_EVAL_ROW: usize = 119;
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Spectral,
    Dynamics,
    Traditional,
}

impl Family {
    pub fn label(&self) -> &'static str {
        match self {
            Family::Spectral => "spectral",
            Family::Dynamics => "dynamics",
            Family::Traditional => "traditional",
        }
    }

    pub fn from_label(label: &str) -> Option<Family> {
        match label {
            "spectral" => Some(Family::Spectral),
            "dynamics" => Some(Family::Dynamics),
            "traditional" => Some(Family::Traditional),
            _ => None,
        }
    }
}

/// Column subset used for the ablation runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    Traditional,
    Spectral,
    #[default]
    Combined,
}

impl FeatureSubset {
    pub fn all() -> [FeatureSubset; 3] {
        [FeatureSubset::Traditional, FeatureSubset::Spectral, FeatureSubset::Combined]
    }

    pub fn label(&self) -> &'static str {
        match self {
            FeatureSubset::Traditional => "traditional",
            FeatureSubset::Spectral => "spectral",
            FeatureSubset::Combined => "combined",
        }
    }

    pub fn from_label(label: &str) -> Option<FeatureSubset> {
        match label {
            "traditional" => Some(FeatureSubset::Traditional),
            "spectral" => Some(FeatureSubset::Spectral),
            "combined" => Some(FeatureSubset::Combined),
            _ => None,
        }
    }

    fn includes(&self, family: Family) -> bool {
        match self {
            FeatureSubset::Traditional => family == Family::Traditional,
            FeatureSubset::Spectral => {
                family == Family::Spectral || family == Family::Dynamics
            }
            FeatureSubset::Combined => true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    /// Return date of each row.
    pub dates: Vec<NaiveDate>,
    /// Return-row index in the source panel of each row.
    pub return_indices: Vec<usize>,
    pub names: Vec<String>,
    pub families: Vec<Family>,
    pub values: Array2<f64>,
    pub manifest_version: u32,
    /// Cells that came out non-finite and were replaced with 0.
    pub zero_filled: usize,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn columns_for(&self, subset: FeatureSubset) -> Vec<usize> {
        self.families
            .iter()
            .enumerate()
            .filter(|(_, f)| subset.includes(**f))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Full column manifest: three estimator blocks, dynamics, traditional.
pub fn feature_manifest(cfg: &IndicatorConfig) -> (Vec<String>, Vec<Family>) {
    let mut names = Vec::new();
    let mut families = Vec::new();
    for est in Estimator::all() {
        let block = estimator_block_names(est);
        families.extend(std::iter::repeat(Family::Spectral).take(block.len()));
        names.extend(block);
    }
    let dyn_names = dynamics_feature_names();
    families.extend(std::iter::repeat(Family::Dynamics).take(dyn_names.len()));
    names.extend(dyn_names);
    let trad_names = cfg.feature_names();
    families.extend(std::iter::repeat(Family::Traditional).take(trad_names.len()));
    names.extend(trad_names);
    (names, families)
}

pub fn build_features(
    panel: &PricePanel,
    index_symbol: &str,
    cfg: &IndicatorConfig,
) -> Result<FeatureMatrix> {
    let n_ret = panel.n_returns();
    if n_ret < FIRST_EVAL_ROW + LABEL_LOOKAHEAD + 1 {
        return Err(Error::InsufficientHistory {
            rows: panel.n_dates(),
            need: FIRST_EVAL_ROW + LABEL_LOOKAHEAD + 2,
        });
    }
    let last_eval = n_ret - 1 - LABEL_LOOKAHEAD;
    let trad = traditional::prepare(panel, index_symbol, cfg)?;

    // Dynamics trailing windows start as soon as the 60-day estimator exists.
    let warm_start = Estimator::Roll60.min_history() - 1;
    let warm_rows: Vec<usize> = (warm_start..FIRST_EVAL_ROW).collect();
    let warm: Vec<Result<[f64; 8]>> = exec::par_map(&warm_rows, |&t| {
        let snap = correlation_at(panel, Estimator::Roll60, t)?;
        Ok(estimator_block(&snap)?.key_quantities)
    });
    let warm: Vec<[f64; 8]> = warm.into_iter().collect::<Result<_>>()?;

    let eval_rows: Vec<usize> = (FIRST_EVAL_ROW..=last_eval).collect();
    let blocks: Vec<Result<[EstimatorBlock; 3]>> = exec::par_map(&eval_rows, |&t| {
        let mut out = Vec::with_capacity(3);
        for est in Estimator::all() {
            out.push(estimator_block(&correlation_at(panel, est, t)?)?);
        }
        Ok(out.try_into().expect("three estimators"))
    });
    let blocks: Vec<[EstimatorBlock; 3]> = blocks.into_iter().collect::<Result<_>>()?;

    let (names, families) = feature_manifest(cfg);
    let n_features = names.len();
    let mut values = Array2::zeros((eval_rows.len(), n_features));
    let mut zero_filled = 0usize;
    let mut state = DynamicsState::new();
    for q in warm {
        state.push(q);
    }
    for (i, (&t, block)) in eval_rows.iter().zip(&blocks).enumerate() {
        state.push(block[0].key_quantities);
        let mut row = assemble_spectral_row(block, &state);
        row.extend(trad.row(t));
        debug_assert_eq!(row.len(), n_features);
        for (j, v) in row.into_iter().enumerate() {
            if v.is_finite() {
                values[[i, j]] = v;
            } else {
                values[[i, j]] = 0.0;
                zero_filled += 1;
            }
        }
    }
    if zero_filled > 0 {
        log::warn!("replaced {zero_filled} non-finite feature cells with 0");
    }

    let dates = eval_rows.iter().map(|&t| panel.return_dates()[t]).collect();
    Ok(FeatureMatrix {
        dates,
        return_indices: eval_rows,
        names,
        families,
        values,
        manifest_version: MANIFEST_VERSION,
        zero_filled,
    })
}
