//! Price-derived indicator block for the index series plus cross-asset
//! dispersion: multi-horizon returns, rolling and GARCH volatility,
//! drawdowns, RSI, rolling moments and friends.
//!
//! Sequential state (GARCH, RSI) is computed once per run from the start of
//! the panel, so every row is a pure function of data up to its date.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::PricePanel;
use crate::stats;

const ANNUALIZATION: f64 = 252.0;
const RATIO_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndicatorConfig {
    pub return_horizons: Vec<usize>,
    pub vol_windows: Vec<usize>,
    pub vol_ratio_pairs: Vec<(usize, usize)>,
    pub garch_alpha: f64,
    pub garch_beta: f64,
    pub semidev_window: usize,
    pub max_loss_windows: Vec<usize>,
    pub sma_windows: Vec<usize>,
    pub rsi_period: usize,
    pub drawdown_windows: Vec<usize>,
    pub moment_windows: Vec<usize>,
    pub vol_of_vol_window: usize,
    pub vol_of_vol_source: usize,
}

impl Default for IndicatorConfig {
    fn default() -> Self {
        IndicatorConfig {
            return_horizons: vec![1, 5, 10, 20, 60],
            vol_windows: vec![5, 10, 20, 60],
            vol_ratio_pairs: vec![(5, 20), (10, 60)],
            garch_alpha: 0.1,
            garch_beta: 0.85,
            semidev_window: 20,
            max_loss_windows: vec![5, 20],
            sma_windows: vec![10, 20, 50],
            rsi_period: 14,
            drawdown_windows: vec![20, 60],
            moment_windows: vec![20, 60],
            vol_of_vol_window: 20,
            vol_of_vol_source: 5,
        }
    }
}

impl IndicatorConfig {
    /// First return-row index at which every indicator is defined.
    pub fn first_valid(&self) -> usize {
        let mut need = self.rsi_period;
        for &h in &self.return_horizons {
            need = need.max(h);
        }
        for &w in &self.vol_windows {
            need = need.max(w);
        }
        for &w in &self.sma_windows {
            need = need.max(w);
        }
        for &w in &self.drawdown_windows {
            need = need.max(w);
        }
        for &w in &self.moment_windows {
            need = need.max(w);
        }
        need = need.max(self.vol_of_vol_window + self.vol_of_vol_source);
        need
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for h in &self.return_horizons {
            names.push(format!("trad_ret_{h}"));
        }
        for w in &self.vol_windows {
            names.push(format!("trad_vol_{w}"));
        }
        for (a, b) in &self.vol_ratio_pairs {
            names.push(format!("trad_vol_ratio_{a}_{b}"));
        }
        names.push("trad_garch_vol".to_string());
        names.push(format!("trad_semidev_{}", self.semidev_window));
        for w in &self.max_loss_windows {
            names.push(format!("trad_max_loss_{w}"));
        }
        for w in &self.sma_windows {
            names.push(format!("trad_price_sma_{w}"));
        }
        names.push(format!("trad_rsi_{}", self.rsi_period));
        for w in &self.drawdown_windows {
            names.push(format!("trad_drawdown_{w}"));
        }
        for w in &self.moment_windows {
            names.push(format!("trad_skew_{w}"));
        }
        for w in &self.moment_windows {
            names.push(format!("trad_kurt_{w}"));
        }
        names.push("trad_vol_of_vol".to_string());
        names.push("trad_dispersion".to_string());
        names
    }
}

/// Precomputed per-run state; rows are assembled per date from it.
#[derive(Debug, Clone)]
pub struct TraditionalSeries {
    cfg: IndicatorConfig,
    /// Full index price column (panel date indexing).
    prices: Vec<f64>,
    /// Index return column (return-row indexing).
    returns: Vec<f64>,
    /// One-step-ahead GARCH conditional volatility, return-row indexing.
    garch_sigma: Vec<f64>,
    /// Wilder RSI, return-row indexing; 50 before warm-up.
    rsi: Vec<f64>,
    /// Cross-sectional return std per return row.
    dispersion: Vec<f64>,
}

/// One-step-ahead GARCH(1,1) volatility forecasts with omega tied to the
/// expanding sample variance and the recursion seeded at it.
fn garch_series(returns: &[f64], alpha: f64, beta: f64) -> Vec<f64> {
    let n = returns.len();
    let mut sigma = vec![0.0; n];
    if n == 0 {
        return sigma;
    }
    sigma[0] = returns[0].abs();
    let mut mean = returns[0];
    let mut m2 = 0.0;
    let mut g_prev = returns[0] * returns[0];
    for t in 1..n {
        let count = (t + 1) as f64;
        let delta = returns[t] - mean;
        mean += delta / count;
        m2 += delta * (returns[t] - mean);
        let sample_var = m2 / (count - 1.0);
        let g = if t == 1 {
            sample_var
        } else {
            sample_var * (1.0 - alpha - beta) + alpha * returns[t] * returns[t] + beta * g_prev
        };
        sigma[t] = g.max(0.0).sqrt();
        g_prev = g;
    }
    sigma
}

/// Wilder RSI over price changes; 50 on a flat market and before warm-up.
fn rsi_series(prices: &[f64], period: usize) -> Vec<f64> {
    let n_changes = prices.len() - 1;
    let mut rsi = vec![50.0; n_changes];
    if n_changes < period {
        return rsi;
    }
    let mut avg_gain = 0.0;
    let mut avg_loss = 0.0;
    for t in 0..period {
        let d = prices[t + 1] - prices[t];
        avg_gain += d.max(0.0);
        avg_loss += (-d).max(0.0);
    }
    avg_gain /= period as f64;
    avg_loss /= period as f64;
    let level = |g: f64, l: f64| {
        if l <= 0.0 && g <= 0.0 {
            50.0
        } else if l <= 0.0 {
            100.0
        } else {
            100.0 - 100.0 / (1.0 + g / l)
        }
    };
    rsi[period - 1] = level(avg_gain, avg_loss);
    for t in period..n_changes {
        let d = prices[t + 1] - prices[t];
        avg_gain = (avg_gain * (period as f64 - 1.0) + d.max(0.0)) / period as f64;
        avg_loss = (avg_loss * (period as f64 - 1.0) + (-d).max(0.0)) / period as f64;
        rsi[t] = level(avg_gain, avg_loss);
    }
    rsi
}

pub fn prepare(
    panel: &PricePanel,
    index_symbol: &str,
    cfg: &IndicatorConfig,
) -> Result<TraditionalSeries> {
    let idx = panel.symbol_index(index_symbol)?;
    let prices: Vec<f64> = panel.prices().column(idx).to_vec();
    let returns: Vec<f64> = panel.returns().column(idx).to_vec();
    if returns.len() <= cfg.first_valid() {
        return Err(Error::InsufficientHistory {
            rows: returns.len(),
            need: cfg.first_valid() + 1,
        });
    }
    let garch_sigma = garch_series(&returns, cfg.garch_alpha, cfg.garch_beta);
    let rsi = rsi_series(&prices, cfg.rsi_period);
    let all = panel.returns();
    let dispersion: Vec<f64> = (0..all.nrows())
        .map(|t| {
            let row: Vec<f64> = all.row(t).to_vec();
            stats::population_std(&row)
        })
        .collect();
    Ok(TraditionalSeries { cfg: cfg.clone(), prices, returns, garch_sigma, rsi, dispersion })
}

impl TraditionalSeries {
    pub fn names(&self) -> Vec<String> {
        self.cfg.feature_names()
    }

    fn annualized_vol(&self, t: usize, window: usize) -> f64 {
        let slice = &self.returns[t + 1 - window..=t];
        stats::sample_std(slice) * ANNUALIZATION.sqrt()
    }

    /// Feature row at return index `t`. Caller guarantees
    /// `t >= cfg.first_valid()`.
    pub fn row(&self, t: usize) -> Vec<f64> {
        let cfg = &self.cfg;
        let p = |return_idx: usize| self.prices[return_idx + 1];
        let price_now = p(t);
        let mut out = Vec::with_capacity(27);

        for &h in &cfg.return_horizons {
            out.push(price_now / self.prices[t + 1 - h] - 1.0);
        }
        for &w in &cfg.vol_windows {
            out.push(self.annualized_vol(t, w));
        }
        for &(a, b) in &cfg.vol_ratio_pairs {
            let num = self.annualized_vol(t, a);
            let den = self.annualized_vol(t, b);
            out.push(if den <= RATIO_FLOOR { 0.0 } else { num / den });
        }
        out.push(self.garch_sigma[t]);

        let window = &self.returns[t + 1 - cfg.semidev_window..=t];
        let negatives: Vec<f64> = window.iter().copied().filter(|r| *r < 0.0).collect();
        out.push(stats::population_std(&negatives) * ANNUALIZATION.sqrt());

        for &w in &cfg.max_loss_windows {
            let min = self.returns[t + 1 - w..=t]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            out.push(if min < 0.0 { -min } else { 0.0 });
        }
        for &w in &cfg.sma_windows {
            let sma: f64 =
                (0..w).map(|k| p(t - k)).sum::<f64>() / w as f64;
            out.push(price_now / sma);
        }
        out.push(self.rsi[t]);
        for &w in &cfg.drawdown_windows {
            let high = (0..w).map(|k| p(t - k)).fold(f64::NEG_INFINITY, f64::max);
            out.push(price_now / high - 1.0);
        }
        for &w in &cfg.moment_windows {
            out.push(stats::population_skew(&self.returns[t + 1 - w..=t]));
        }
        for &w in &cfg.moment_windows {
            out.push(stats::population_excess_kurtosis(&self.returns[t + 1 - w..=t]));
        }

        let vols: Vec<f64> = (0..cfg.vol_of_vol_window)
            .map(|k| self.annualized_vol(t - k, cfg.vol_of_vol_source))
            .collect();
        out.push(stats::sample_std(&vols));
        out.push(self.dispersion[t]);
        out
    }
}
