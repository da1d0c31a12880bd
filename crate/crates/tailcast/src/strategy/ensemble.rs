//! Walk-forward ensemble selection over the exposure-parameter grid.
//!
//! Pass 1 scores every parameter combination by Sharpe on the inner 55% of
//! strategy days. Pass 2 reruns the top combinations over the full history
//! and averages their exposure and defensive-allocation paths into a single
//! ensemble ledger. The final 45% is the out-of-sample segment.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;

use super::backtest::{
    backtest, ledger_core, performance_stats, BacktestLedger, MarketReturns,
    PerformanceStats,
};
use super::exposure::{exposure_series, ExposureParams};
use super::ranks::SignalRanks;

pub const DEFAULT_TOP_N: usize = 20;
pub const INNER_FRACTION: f64 = 0.55;

/// Candidate values per exposure parameter. The cross product is swept in
/// nested order: entry, exit, crash exit, caution, base, leverage, hold,
/// bounce (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rally_entry: Vec<f64>,
    pub rally_exit: Vec<f64>,
    pub crash_exit: Vec<f64>,
    pub crash_caution: Vec<f64>,
    pub base: Vec<f64>,
    pub max_leverage: Vec<f64>,
    pub min_hold: Vec<usize>,
    pub bounce: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            rally_entry: vec![0.70, 0.72, 0.74, 0.76, 0.78, 0.80, 0.82, 0.84],
            rally_exit: vec![0.85, 0.87, 0.89, 0.91, 0.93, 0.95],
            crash_exit: vec![0.50, 0.54, 0.58, 0.62, 0.66, 0.70],
            crash_caution: vec![0.30, 0.35, 0.40, 0.45, 0.50],
            base: vec![0.8, 1.0, 1.2],
            max_leverage: vec![1.2, 1.5],
            min_hold: vec![5, 8, 13],
            bounce: vec![0.8, 1.0],
        }
    }
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.rally_entry.len()
            * self.rally_exit.len()
            * self.crash_exit.len()
            * self.crash_caution.len()
            * self.base.len()
            * self.max_leverage.len()
            * self.min_hold.len()
            * self.bounce.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn combinations(&self) -> Vec<ExposureParams> {
        let mut out = Vec::with_capacity(self.len());
        for &rally_entry in &self.rally_entry {
            for &rally_exit in &self.rally_exit {
                for &crash_exit in &self.crash_exit {
                    for &crash_caution in &self.crash_caution {
                        for &base in &self.base {
                            for &max_leverage in &self.max_leverage {
                                for &min_hold in &self.min_hold {
                                    for &bounce in &self.bounce {
                                        out.push(ExposureParams {
                                            rally_entry,
                                            rally_exit,
                                            crash_exit,
                                            crash_caution,
                                            base,
                                            max_leverage,
                                            min_hold,
                                            bounce,
                                            ..ExposureParams::default()
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub grid_index: usize,
    pub params: ExposureParams,
    pub inner_sharpe: f64,
    /// Sharpe of this member alone over the out-of-sample segment; NaN when
    /// undefined there.
    pub oos_sharpe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub members: Vec<EnsembleMember>,
    pub feasible: usize,
    pub inner_end: usize,
    pub ledger: BacktestLedger,
    pub inner_stats: PerformanceStats,
    pub oos_stats: PerformanceStats,
}

fn slice_ranks(ranks: &SignalRanks, end: usize) -> SignalRanks {
    SignalRanks {
        offset: ranks.offset,
        rally: ranks.rally[..end].to_vec(),
        crash: ranks.crash[..end].to_vec(),
    }
}

/// Average aligned series. Days where every member agrees bitwise pass
/// through unchanged, so an ensemble of identical members reproduces the
/// single-member path exactly.
fn mean_series(series: &[Vec<f64>]) -> Vec<f64> {
    let n = series[0].len();
    let m = series.len() as f64;
    (0..n)
        .map(|t| {
            let first = series[0][t];
            if series.iter().all(|s| s[t].to_bits() == first.to_bits()) {
                first
            } else {
                series.iter().map(|s| s[t]).sum::<f64>() / m
            }
        })
        .collect()
}

/// Run the two-pass ensemble walk-forward optimization.
pub fn ensemble_wfo(
    ranks: &SignalRanks,
    market: &MarketReturns,
    grid: &GridSpec,
    top_n: usize,
) -> Result<EnsembleReport> {
    if ranks.len() != market.len() {
        return Err(Error::Data(format!(
            "rank series ({}) and market returns ({}) must cover the same days",
            ranks.len(),
            market.len()
        )));
    }
    if top_n == 0 {
        return Err(Error::Config("ensemble size must be positive".into()));
    }
    let n = ranks.len();
    let inner_end = (INNER_FRACTION * n as f64).floor() as usize;
    if inner_end < 2 || n - inner_end < 2 {
        return Err(Error::InsufficientHistory { rows: n, need: 4 });
    }
    let combos = grid.combinations();
    if combos.is_empty() {
        return Err(Error::Config("parameter grid is empty".into()));
    }

    let inner_ranks = slice_ranks(ranks, inner_end);
    let inner_market = market.slice(0..inner_end);
    let inner_sharpes: Vec<Option<f64>> = exec::par_map(&combos, |params| {
        let ledger = backtest(&inner_ranks, &inner_market, params);
        match performance_stats(&ledger.net_return) {
            Ok(stats) if stats.sharpe.is_finite() => Some(stats.sharpe),
            _ => None,
        }
    });

    let mut feasible: Vec<(usize, f64)> = inner_sharpes
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.map(|v| (i, v)))
        .collect();
    if feasible.is_empty() {
        return Err(Error::Numerical(
            "no feasible parameter combination on the inner segment".into(),
        ));
    }
    feasible.sort_by(|a, b| {
        b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0))
    });
    let n_feasible = feasible.len();
    if n_feasible < top_n {
        warn!(
            "only {n_feasible} of {} combinations were feasible; using all of them",
            combos.len()
        );
    }
    let selected: Vec<(usize, f64)> =
        feasible.into_iter().take(top_n.min(n_feasible)).collect();

    let paths: Vec<(Vec<f64>, Vec<f64>, Vec<super::exposure::Regime>)> =
        exec::par_map(&selected, |&(idx, _)| {
            let params = &combos[idx];
            let (exposure, regimes) = exposure_series(ranks, params);
            let defensive: Vec<f64> = exposure
                .iter()
                .map(|w| (1.0 - w).max(0.0) * params.bounce)
                .collect();
            (exposure, defensive, regimes)
        });

    let exposures: Vec<Vec<f64>> = paths.iter().map(|p| p.0.clone()).collect();
    let defensives: Vec<Vec<f64>> = paths.iter().map(|p| p.1.clone()).collect();
    let mean_exposure = mean_series(&exposures);
    let mean_defensive = mean_series(&defensives);
    let regimes = paths[0].2.clone();
    let ledger = ledger_core(&mean_exposure, &mean_defensive, &regimes, market);

    let inner_stats = performance_stats(&ledger.net_return[..inner_end])?;
    let oos_stats = performance_stats(&ledger.net_return[inner_end..])?;

    let members: Vec<EnsembleMember> = selected
        .iter()
        .enumerate()
        .map(|(rank, &(idx, inner_sharpe))| {
            let member_ledger =
                ledger_core(&exposures[rank], &defensives[rank], &paths[rank].2, market);
            let oos_sharpe = performance_stats(&member_ledger.net_return[inner_end..])
                .map(|s| s.sharpe)
                .unwrap_or(f64::NAN);
            EnsembleMember {
                grid_index: idx,
                params: combos[idx].clone(),
                inner_sharpe,
                oos_sharpe,
            }
        })
        .collect();

    Ok(EnsembleReport {
        members,
        feasible: n_feasible,
        inner_end,
        ledger,
        inner_stats,
        oos_stats,
    })
}
