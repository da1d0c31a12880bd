//! Regime-overlay strategy: percentile ranks, exposure mapping, daily
//! ledger, and ensemble parameter selection.

pub mod backtest;
pub mod ensemble;
pub mod exposure;
pub mod ranks;

pub use backtest::{
    backtest as run_backtest, ledger_core, market_returns, performance_stats,
    BacktestLedger, MarketReturns, PerformanceStats, DEFENSIVE_WEIGHTS,
    LEVERAGE_COST_ANNUAL, RISK_FREE_ANNUAL, TRADING_DAYS, TRANSACTION_COST,
};
pub use ensemble::{ensemble_wfo, EnsembleMember, EnsembleReport, GridSpec, DEFAULT_TOP_N};
pub use exposure::{exposure_map, exposure_series, ExposureParams, Regime};
pub use ranks::{percentile_rank, signal_ranks, SignalRanks, RANK_WINDOW};
