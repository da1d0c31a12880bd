//! Daily strategy ledger with transaction and leverage costs, plus
//! performance statistics.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::PricePanel;
use crate::stats;

use super::exposure::{exposure_series, ExposureParams, Regime};
use super::ranks::SignalRanks;

/// 5 bps per unit of position change.
pub const TRANSACTION_COST: f64 = 0.0005;
/// 50 bps annually on exposure above 1x.
pub const LEVERAGE_COST_ANNUAL: f64 = 0.005;
pub const RISK_FREE_ANNUAL: f64 = 0.04;
pub const TRADING_DAYS: f64 = 252.0;
pub const DEFENSIVE_WEIGHTS: [(&str, f64); 3] = [("GLD", 0.5), ("IEF", 0.3), ("UUP", 0.2)];

/// Equity and defensive-basket returns over the ledger dates.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketReturns {
    pub dates: Vec<NaiveDate>,
    pub equity: Vec<f64>,
    pub defensive: Vec<f64>,
}

impl MarketReturns {
    pub fn len(&self) -> usize {
        self.equity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equity.is_empty()
    }

    /// Restrict to a sub-range of days.
    pub fn slice(&self, range: std::ops::Range<usize>) -> MarketReturns {
        MarketReturns {
            dates: self.dates[range.clone()].to_vec(),
            equity: self.equity[range.clone()].to_vec(),
            defensive: self.defensive[range].to_vec(),
        }
    }
}

/// Gather index and defensive returns for the given return-row indices.
/// Missing defensive symbols are fatal.
pub fn market_returns(
    panel: &PricePanel,
    index_symbol: &str,
    rows: &[usize],
) -> Result<MarketReturns> {
    let equity_col = panel.symbol_index(index_symbol)?;
    let mut defensive_cols = Vec::with_capacity(DEFENSIVE_WEIGHTS.len());
    for (symbol, weight) in DEFENSIVE_WEIGHTS {
        defensive_cols.push((panel.symbol_index(symbol)?, weight));
    }
    let returns = panel.returns();
    let mut dates = Vec::with_capacity(rows.len());
    let mut equity = Vec::with_capacity(rows.len());
    let mut defensive = Vec::with_capacity(rows.len());
    for &t in rows {
        dates.push(panel.return_dates()[t]);
        equity.push(returns[[t, equity_col]]);
        defensive.push(
            defensive_cols.iter().map(|&(c, w)| w * returns[[t, c]]).sum::<f64>(),
        );
    }
    Ok(MarketReturns { dates, equity, defensive })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestLedger {
    pub dates: Vec<NaiveDate>,
    pub exposure: Vec<f64>,
    pub regimes: Vec<Regime>,
    /// Defensive allocation actually held: max(0, 1 - w) times bounce.
    pub defensive_alloc: Vec<f64>,
    pub equity_return: Vec<f64>,
    pub defensive_return: Vec<f64>,
    pub transaction_cost: Vec<f64>,
    pub leverage_cost: Vec<f64>,
    pub net_return: Vec<f64>,
    pub wealth: Vec<f64>,
}

impl BacktestLedger {
    pub fn len(&self) -> usize {
        self.net_return.len()
    }

    pub fn is_empty(&self) -> bool {
        self.net_return.is_empty()
    }
}

/// Build the daily ledger from exposure and defensive-allocation series.
/// The first day pays no transaction cost; every later day pays 5 bps per
/// unit of exposure change, and days above 1x pay the daily leverage fee.
pub fn ledger_core(
    exposure: &[f64],
    defensive_alloc: &[f64],
    regimes: &[Regime],
    market: &MarketReturns,
) -> BacktestLedger {
    assert_eq!(exposure.len(), market.len(), "exposure and market must align");
    assert_eq!(defensive_alloc.len(), market.len());
    assert_eq!(regimes.len(), market.len());
    let n = exposure.len();
    let mut transaction_cost = Vec::with_capacity(n);
    let mut leverage_cost = Vec::with_capacity(n);
    let mut net_return = Vec::with_capacity(n);
    let mut wealth = Vec::with_capacity(n);
    let mut prev_w = 0.0;
    let mut cum = 1.0;
    for t in 0..n {
        let w = exposure[t];
        let d = defensive_alloc[t];
        let tc = if t == 0 { 0.0 } else { TRANSACTION_COST * (w - prev_w).abs() };
        let lc = (LEVERAGE_COST_ANNUAL / TRADING_DAYS) * (w - 1.0).max(0.0);
        let net = w * market.equity[t] + d * market.defensive[t] - tc - lc;
        cum *= 1.0 + net;
        transaction_cost.push(tc);
        leverage_cost.push(lc);
        net_return.push(net);
        wealth.push(cum);
        prev_w = w;
    }
    BacktestLedger {
        dates: market.dates.clone(),
        exposure: exposure.to_vec(),
        regimes: regimes.to_vec(),
        defensive_alloc: defensive_alloc.to_vec(),
        equity_return: market.equity.clone(),
        defensive_return: market.defensive.clone(),
        transaction_cost,
        leverage_cost,
        net_return,
        wealth,
    }
}

/// Ledger for one parameter set: run the hold machine over the ranks, then
/// price the resulting exposure path.
pub fn backtest(
    ranks: &SignalRanks,
    market: &MarketReturns,
    params: &ExposureParams,
) -> BacktestLedger {
    let (exposure, regimes) = exposure_series(ranks, params);
    let defensive: Vec<f64> =
        exposure.iter().map(|w| (1.0 - w).max(0.0) * params.bounce).collect();
    ledger_core(&exposure, &defensive, &regimes, market)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceStats {
    pub sharpe: f64,
    pub cagr: f64,
    pub max_drawdown: f64,
    /// `f64::INFINITY` when the wealth path never draws down
    /// (serialized as null).
    pub calmar: f64,
}

/// Annualized statistics over a net-return series.
pub fn performance_stats(net: &[f64]) -> Result<PerformanceStats> {
    if net.is_empty() {
        return Err(Error::Data("performance stats need a non-empty ledger".into()));
    }
    let rf_daily = RISK_FREE_ANNUAL / TRADING_DAYS;
    let excess: Vec<f64> = net.iter().map(|r| r - rf_daily).collect();
    let mean_excess = stats::mean(&excess);
    let sd = stats::sample_std(net);
    let sharpe = if sd < 1e-12 {
        if mean_excess.abs() < 1e-12 {
            0.0
        } else {
            return Err(Error::Numerical(
                "Sharpe undefined: zero volatility with nonzero excess return".into(),
            ));
        }
    } else {
        mean_excess / sd * TRADING_DAYS.sqrt()
    };
    let mut wealth = 1.0f64;
    let mut peak = 1.0f64;
    let mut max_dd = 0.0f64;
    for r in net {
        wealth *= 1.0 + r;
        peak = peak.max(wealth);
        max_dd = max_dd.min(wealth / peak - 1.0);
    }
    let cagr = wealth.powf(TRADING_DAYS / net.len() as f64) - 1.0;
    let calmar = if max_dd == 0.0 { f64::INFINITY } else { cagr / max_dd.abs() };
    Ok(PerformanceStats { sharpe, cagr, max_drawdown: max_dd, calmar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn flat_market(n: usize, equity: f64, defensive: f64) -> MarketReturns {
        let mut dates = Vec::with_capacity(n);
        let mut d = NaiveDate::from_ymd_opt(2020, 1, 6).unwrap();
        for _ in 0..n {
            dates.push(d);
            d = d.succ_opt().unwrap();
        }
        MarketReturns { dates, equity: vec![equity; n], defensive: vec![defensive; n] }
    }

    #[test]
    fn full_equity_is_buy_and_hold() {
        let market = flat_market(10, 0.001, 0.0002);
        let n = market.len();
        let ledger = ledger_core(
            &vec![1.0; n],
            &vec![0.0; n],
            &vec![Regime::Normal; n],
            &market,
        );
        for t in 0..n {
            assert_abs_diff_eq!(ledger.net_return[t], 0.001, epsilon = 1e-15);
            assert_abs_diff_eq!(ledger.transaction_cost[t], 0.0, epsilon = 0.0);
            assert_abs_diff_eq!(ledger.leverage_cost[t], 0.0, epsilon = 0.0);
        }
        assert_abs_diff_eq!(
            *ledger.wealth.last().unwrap(),
            1.001f64.powi(10),
            epsilon = 1e-12
        );
    }

    #[test]
    fn zero_exposure_is_the_defensive_portfolio() {
        let market = flat_market(8, 0.002, 0.0004);
        let n = market.len();
        let ledger = ledger_core(
            &vec![0.0; n],
            &vec![1.0; n],
            &vec![Regime::Crisis; n],
            &market,
        );
        for t in 0..n {
            assert_abs_diff_eq!(ledger.net_return[t], 0.0004, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_switch_costs_five_bps_once() {
        let market = flat_market(6, 0.0, 0.0);
        let mut exposure = vec![1.0; 6];
        for w in exposure.iter_mut().skip(3) {
            *w = 0.0;
        }
        let defensive: Vec<f64> = exposure.iter().map(|w| 1.0 - w).collect();
        let ledger = ledger_core(&exposure, &defensive, &vec![Regime::Normal; 6], &market);
        let total_tc: f64 = ledger.transaction_cost.iter().sum();
        assert_abs_diff_eq!(total_tc, 0.0005, epsilon = 1e-18);
        assert_abs_diff_eq!(ledger.transaction_cost[3], 0.0005, epsilon = 1e-18);
        assert_abs_diff_eq!(ledger.net_return[3], -0.0005, epsilon = 1e-18);
    }

    #[test]
    fn first_day_entry_is_free() {
        let market = flat_market(3, 0.0, 0.0);
        let ledger = ledger_core(
            &[1.5, 1.5, 1.5],
            &[0.0, 0.0, 0.0],
            &[Regime::Rally; 3],
            &market,
        );
        assert_abs_diff_eq!(ledger.transaction_cost[0], 0.0, epsilon = 0.0);
        // Leverage fee accrues daily on the half unit above 1x.
        let daily_fee = 0.005 / 252.0 * 0.5;
        for t in 0..3 {
            assert_abs_diff_eq!(ledger.leverage_cost[t], daily_fee, epsilon = 1e-18);
        }
    }

    #[test]
    fn defensive_basket_weights() {
        use crate::panel::PricePanel;
        use chrono::Datelike;
        use ndarray::Array2;
        let symbols: Vec<String> =
            ["SPY", "GLD", "IEF", "UUP"].iter().map(|s| s.to_string()).collect();
        let n = 5;
        let growth: [f64; 4] = [1.01, 1.002, 1.001, 0.999];
        let prices = Array2::from_shape_fn((n, 4), |(t, a)| {
            100.0 * growth[a].powi(t as i32)
        });
        let mut dates = Vec::new();
        let mut d = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        while dates.len() < n {
            if d.weekday().num_days_from_monday() < 5 {
                dates.push(d);
            }
            d = d.succ_opt().unwrap();
        }
        let panel = PricePanel::from_parts(symbols, dates.clone(), prices).unwrap();
        let market = market_returns(&panel, "SPY", &[0, 1, 2, 3]).unwrap();
        let expect = 0.5 * 0.002 + 0.3 * 0.001 + 0.2 * (-0.001);
        for t in 0..4 {
            assert_abs_diff_eq!(market.defensive[t], expect, epsilon = 1e-12);
            assert_abs_diff_eq!(market.equity[t], 0.01, epsilon = 1e-12);
        }
        // A panel without UUP is fatal.
        let symbols3: Vec<String> =
            ["SPY", "GLD", "IEF"].iter().map(|s| s.to_string()).collect();
        let prices3 = Array2::from_shape_fn((n, 3), |(t, a)| {
            100.0 * growth[a].powi(t as i32)
        });
        let panel3 = PricePanel::from_parts(symbols3, dates, prices3).unwrap();
        assert!(market_returns(&panel3, "SPY", &[0, 1]).is_err());
    }

    #[test]
    fn sharpe_is_zero_at_the_risk_free_rate() {
        let net = vec![0.04 / 252.0; 100];
        let stats = performance_stats(&net).unwrap();
        assert_abs_diff_eq!(stats.sharpe, 0.0, epsilon = 0.0);
    }

    #[test]
    fn constant_nonzero_excess_with_zero_vol_is_an_error() {
        let net = vec![0.001; 50];
        assert!(performance_stats(&net).is_err());
    }

    #[test]
    fn monotone_wealth_has_infinite_calmar() {
        let net: Vec<f64> = (0..60).map(|t| 0.001 + 0.0001 * (t % 5) as f64).collect();
        let stats = performance_stats(&net).unwrap();
        assert_abs_diff_eq!(stats.max_drawdown, 0.0, epsilon = 0.0);
        assert!(stats.calmar.is_infinite());
        assert!(serde_json::to_string(&stats).unwrap().contains("null"));
    }

    #[test]
    fn calmar_reproduces_published_ratio() {
        // CAGR 15.6% against a -7.5% maximum drawdown.
        let calmar = 0.156f64 / 0.075;
        assert!((calmar - 2.08).abs() < 0.01);
    }

    #[test]
    fn drawdown_hand_case() {
        // Wealth path: 1.1, 0.99, 1.188 -> trough 0.99/1.1 - 1 = -10%.
        let net = vec![0.10, -0.10, 0.20];
        let stats = performance_stats(&net).unwrap();
        assert_abs_diff_eq!(stats.max_drawdown, -0.1, epsilon = 1e-12);
        let wealth = 1.1f64 * 0.9 * 1.2;
        assert_abs_diff_eq!(
            stats.cagr,
            wealth.powf(252.0 / 3.0) - 1.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn sharpe_hand_case() {
        let net = vec![0.01, -0.01, 0.01, -0.01, 0.02];
        let stats = performance_stats(&net).unwrap();
        let rf = 0.04 / 252.0;
        let excess: Vec<f64> = net.iter().map(|r| r - rf).collect();
        let expect = crate::stats::mean(&excess) / crate::stats::sample_std(&net)
            * 252.0f64.sqrt();
        assert_abs_diff_eq!(stats.sharpe, expect, epsilon = 1e-12);
    }
}
