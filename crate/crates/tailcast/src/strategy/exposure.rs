//! The two-dimensional rank-to-exposure map and the minimum-hold machine.

use serde::{Deserialize, Serialize};

use super::ranks::SignalRanks;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Normal,
    Rally,
    Caution,
    Euphoria,
    Crisis,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Normal => "normal",
            Regime::Rally => "rally",
            Regime::Caution => "caution",
            Regime::Euphoria => "euphoria",
            Regime::Crisis => "crisis",
        }
    }

    pub fn from_label(label: &str) -> Option<Regime> {
        match label {
            "normal" => Some(Regime::Normal),
            "rally" => Some(Regime::Rally),
            "caution" => Some(Regime::Caution),
            "euphoria" => Some(Regime::Euphoria),
            "crisis" => Some(Regime::Crisis),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExposureParams {
    /// Sweet-spot lower edge for the rally rank.
    pub rally_entry: f64,
    /// Rally rank at or above which everything is sold (euphoria).
    pub rally_exit: f64,
    /// Crash rank at or above which everything is sold (crisis).
    pub crash_exit: f64,
    /// Crash rank separating the calm cells from the caution cells.
    pub crash_caution: f64,
    /// Rally rank needed for the 1.2x momentum cell.
    pub momentum: f64,
    /// Scales every non-exit exposure before clamping.
    pub base: f64,
    pub max_leverage: f64,
    /// Trading days an exposure change is held before the next change.
    pub min_hold: usize,
    /// Scales the defensive allocation max(0, 1 - w).
    pub bounce: f64,
}

impl Default for ExposureParams {
    fn default() -> Self {
        ExposureParams {
            rally_entry: 0.78,
            rally_exit: 0.90,
            crash_exit: 0.60,
            crash_caution: 0.40,
            momentum: 0.60,
            base: 1.0,
            max_leverage: 1.5,
            min_hold: 8,
            bounce: 1.0,
        }
    }
}

/// Pure map from the two ranks to a target exposure and regime. Exits
/// dominate; the sweet spot takes maximum leverage; otherwise the four
/// intermediate cells scaled by `base`.
pub fn exposure_map(rally: f64, crash: f64, p: &ExposureParams) -> (f64, Regime) {
    if rally >= p.rally_exit {
        return (0.0, Regime::Euphoria);
    }
    if crash >= p.crash_exit {
        return (0.0, Regime::Crisis);
    }
    if rally >= p.rally_entry && crash < p.crash_caution {
        return (p.max_leverage, Regime::Rally);
    }
    let raw = if crash < p.crash_caution {
        if rally >= p.momentum {
            1.2
        } else {
            1.0
        }
    } else if rally < p.rally_entry {
        0.7
    } else {
        0.3
    };
    let w = (raw * p.base).clamp(0.0, p.max_leverage);
    let regime = if w <= 0.7 { Regime::Caution } else { Regime::Normal };
    (w, regime)
}

/// Apply the minimum-hold rule along a rank series. A change of target is
/// executed only once the previous change is `min_hold` days old, except
/// that a zero target (either exit) always executes immediately. Days on
/// which the machine refuses a change keep the previously applied regime.
pub fn exposure_series(ranks: &SignalRanks, p: &ExposureParams) -> (Vec<f64>, Vec<Regime>) {
    let n = ranks.len();
    let mut exposure = Vec::with_capacity(n);
    let mut regimes = Vec::with_capacity(n);
    let mut current = 0.0;
    let mut current_regime = Regime::Normal;
    let mut last_change = 0usize;
    for t in 0..n {
        let (desired, regime) = exposure_map(ranks.rally[t], ranks.crash[t], p);
        if t == 0 {
            current = desired;
            current_regime = regime;
        } else if desired == current {
            current_regime = regime;
        } else if desired == 0.0 {
            current = 0.0;
            current_regime = regime;
            last_change = t;
        } else if t - last_change >= p.min_hold {
            current = desired;
            current_regime = regime;
            last_change = t;
        }
        exposure.push(current);
        regimes.push(current_regime);
    }
    (exposure, regimes)
}
