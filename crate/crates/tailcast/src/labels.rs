//! Forward-looking labels and the gapped walk-forward fold layout.
//!
//! A row at return index `t` looks at the index price 10 sessions ahead:
//! rally when the 10-day forward return exceeds +3%, crash when the worst
//! intraperiod close-to-close drop within those 10 sessions goes below -7%.
//! Training rows therefore consume 10 future sessions, and every fold purges
//! 10 rows between the end of training and the start of testing.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, LABEL_LOOKAHEAD};
use crate::panel::PricePanel;

pub const RALLY_THRESHOLD: f64 = 0.03;
pub const CRASH_THRESHOLD: f64 = -0.07;
/// Rows purged between training and testing so no training label overlaps
/// the test window.
pub const PURGE_GAP: usize = LABEL_LOOKAHEAD;
pub const TEST_LEN: usize = 126;
pub const TRAIN_LEN: usize = 756;

const RALLY_RATE_RANGE: (f64, f64) = (0.01, 0.25);
const CRASH_RATE_RANGE: (f64, f64) = (0.001, 0.05);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Rally,
    Crash,
}

impl Task {
    pub fn all() -> [Task; 2] {
        [Task::Rally, Task::Crash]
    }

    pub fn label(&self) -> &'static str {
        match self {
            Task::Rally => "rally",
            Task::Crash => "crash",
        }
    }

    pub fn from_label(label: &str) -> Option<Task> {
        match label {
            "rally" => Some(Task::Rally),
            "crash" => Some(Task::Crash),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub rally: Vec<bool>,
    pub crash: Vec<bool>,
}

impl TargetSet {
    pub fn for_task(&self, task: Task) -> &[bool] {
        match task {
            Task::Rally => &self.rally,
            Task::Crash => &self.crash,
        }
    }

    pub fn base_rate(&self, task: Task) -> f64 {
        let y = self.for_task(task);
        y.iter().filter(|v| **v).count() as f64 / y.len().max(1) as f64
    }
}

/// Labels for each feature row, computed from the index price column.
pub fn build_targets(
    panel: &PricePanel,
    index_symbol: &str,
    features: &FeatureMatrix,
) -> Result<TargetSet> {
    let idx = panel.symbol_index(index_symbol)?;
    let prices = panel.prices();
    let mut rally = Vec::with_capacity(features.n_rows());
    let mut crash = Vec::with_capacity(features.n_rows());
    for &t in &features.return_indices {
        let now = t + 1;
        if now + LABEL_LOOKAHEAD >= panel.n_dates() {
            return Err(Error::Data(format!(
                "row at return index {t} has no {LABEL_LOOKAHEAD}-day look-ahead"
            )));
        }
        let p0 = prices[[now, idx]];
        rally.push(prices[[now + LABEL_LOOKAHEAD, idx]] / p0 - 1.0 > RALLY_THRESHOLD);
        let worst = (1..=LABEL_LOOKAHEAD)
            .map(|k| prices[[now + k, idx]] / p0 - 1.0)
            .fold(f64::INFINITY, f64::min);
        crash.push(worst < CRASH_THRESHOLD);
    }
    let targets = TargetSet { rally, crash };
    for (task, (lo, hi)) in [(Task::Rally, RALLY_RATE_RANGE), (Task::Crash, CRASH_RATE_RANGE)] {
        let rate = targets.base_rate(task);
        if rate < lo || rate > hi {
            log::warn!(
                "{} base rate {:.3}% outside expected [{}%, {}%]",
                task.label(),
                rate * 100.0,
                lo * 100.0,
                hi * 100.0
            );
        }
    }
    Ok(targets)
}

/// One walk-forward fold over feature-row indices. Ranges are half-open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub index: usize,
    pub train: Range<usize>,
    pub test: Range<usize>,
}

impl FoldSpec {
    /// Last training label must settle strictly before the test window.
    pub fn check_purge(&self) -> Result<()> {
        if self.train.is_empty() || self.test.is_empty() {
            return Err(Error::Config(format!("fold {} has an empty range", self.index)));
        }
        let last_train = self.train.end - 1;
        if last_train + PURGE_GAP >= self.test.start {
            return Err(Error::Config(format!(
                "fold {}: training row {} labels into the test window starting at {}",
                self.index, last_train, self.test.start
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<FoldSpec>,
    pub k_requested: usize,
    pub k_effective: usize,
    pub expanding: bool,
}

/// Lay out `k` test blocks of 126 rows anchored at the end of the sample,
/// each preceded by a 10-row purge and a 756-row rolling training window
/// (or everything from row 0 when `expanding`). When the sample cannot
/// support `k` folds the count is reduced with a warning, which `strict`
/// escalates to an error.
pub fn plan_folds(n_rows: usize, k: usize, expanding: bool, strict: bool) -> Result<FoldPlan> {
    if k == 0 {
        return Err(Error::Config("fold count must be positive".into()));
    }
    let per_fold_need = TEST_LEN;
    let base_need = TRAIN_LEN + PURGE_GAP;
    let max_k = if n_rows > base_need { (n_rows - base_need) / per_fold_need } else { 0 };
    if max_k == 0 {
        return Err(Error::InsufficientHistory { rows: n_rows, need: base_need + per_fold_need });
    }
    let k_effective = k.min(max_k);
    if k_effective < k {
        let msg = format!(
            "sample of {n_rows} rows supports only {k_effective} of the requested {k} folds"
        );
        if strict {
            return Err(Error::Config(msg));
        }
        log::warn!("{msg}");
    }
    let mut folds = Vec::with_capacity(k_effective);
    for i in 0..k_effective {
        let test_start = n_rows - (k_effective - i) * TEST_LEN;
        let train_end = test_start - PURGE_GAP;
        let train_start = if expanding { 0 } else { train_end - TRAIN_LEN };
        let fold = FoldSpec {
            index: i,
            train: train_start..train_end,
            test: test_start..test_start + TEST_LEN,
        };
        fold.check_purge()?;
        folds.push(fold);
    }
    Ok(FoldPlan { folds, k_requested: k, k_effective, expanding })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_features;
    use crate::traditional::IndicatorConfig;
    use chrono::{Datelike, NaiveDate};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn weekday_dates(n: usize) -> Vec<NaiveDate> {
        let mut out = Vec::with_capacity(n);
        let mut d = NaiveDate::from_ymd_opt(2012, 1, 2).unwrap();
        while out.len() < n {
            if d.weekday().num_days_from_monday() < 5 {
                out.push(d);
            }
            d = d.succ_opt().unwrap();
        }
        out
    }

    fn panel_with_index(index_prices: &[f64]) -> PricePanel {
        let n = index_prices.len();
        let mut prices = Array2::from_elem((n, 2), 0.0);
        for t in 0..n {
            prices[[t, 0]] = index_prices[t];
            prices[[t, 1]] = 50.0 + (t as f64 * 0.1).sin();
        }
        PricePanel::from_parts(
            vec!["IDX".into(), "OTH".into()],
            weekday_dates(n),
            prices,
        )
        .unwrap()
    }

    fn features_for(panel: &PricePanel) -> FeatureMatrix {
        build_features(panel, "IDX", &IndicatorConfig::default()).unwrap()
    }

    #[test]
    fn labels_match_independent_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 220;
        let mut p = vec![100.0f64];
        for _ in 1..n {
            let step = if rng.gen_bool(0.05) {
                rng.gen_range(-0.09..0.09)
            } else {
                rng.gen_range(-0.012..0.012)
            };
            p.push(p.last().unwrap() * (1.0 + step));
        }
        let panel = panel_with_index(&p);
        let fm = features_for(&panel);
        let targets = build_targets(&panel, "IDX", &fm).unwrap();
        for (i, &t) in fm.return_indices.iter().enumerate() {
            let now = t + 1;
            let expect_rally = p[now + 10] / p[now] - 1.0 > 0.03;
            let mut expect_crash = false;
            for k in 1..=10 {
                if p[now + k] / p[now] - 1.0 < -0.07 {
                    expect_crash = true;
                }
            }
            assert_eq!(targets.rally[i], expect_rally, "rally row {i}");
            assert_eq!(targets.crash[i], expect_crash, "crash row {i}");
        }
    }

    #[test]
    fn thresholds_flip_just_beyond_the_boundary() {
        // Flat at 100, then one step held forever. A +2.99% move is not a
        // rally and a +3.01% move is; likewise -6.99% / -7.01% for crashes.
        let n = 200;
        let jump_at = 150;
        let run = |level: f64| {
            let p: Vec<f64> =
                (0..n).map(|t| if t < jump_at { 100.0 } else { level }).collect();
            let panel = panel_with_index(&p);
            let fm = features_for(&panel);
            build_targets(&panel, "IDX", &fm).unwrap()
        };
        assert!(run(102.99).rally.iter().all(|v| !v));
        assert!(run(103.01).rally.iter().any(|v| *v));
        assert!(run(93.01).crash.iter().all(|v| !v));
        assert!(run(92.99).crash.iter().any(|v| *v));
    }

    #[test]
    fn crash_sees_intraperiod_minimum() {
        // Dip below -7% on day +4, full recovery by day +10: the 10-day
        // point return is 0 but the path minimum makes it a crash.
        let n = 200;
        let mut p = vec![100.0f64; n];
        for (off, v) in [(3, 95.0), (4, 91.0), (5, 95.0)] {
            p[160 + off] = v;
        }
        let panel = panel_with_index(&p);
        let fm = features_for(&panel);
        let targets = build_targets(&panel, "IDX", &fm).unwrap();
        let row = fm.return_indices.iter().position(|&t| t + 1 == 159).unwrap();
        assert!(targets.crash[row]);
        assert!(!targets.rally[row]);
    }

    #[test]
    fn fold_layout_for_fifteen_year_sample() {
        let plan = plan_folds(3650, 8, false, false).unwrap();
        assert_eq!(plan.k_effective, 8);
        assert_eq!(plan.folds.len(), 8);
        let f0 = &plan.folds[0];
        assert_eq!(f0.test, 2642..2768);
        assert_eq!(f0.train, 1876..2632);
        let f7 = &plan.folds[7];
        assert_eq!(f7.test, 3524..3650);
        assert_eq!(f7.train, 2758..3514);
        for f in &plan.folds {
            assert_eq!(f.train.len(), 756);
            assert_eq!(f.test.len(), 126);
            f.check_purge().unwrap();
        }
        // Consecutive test blocks tile the tail of the sample.
        for w in plan.folds.windows(2) {
            assert_eq!(w[0].test.end, w[1].test.start);
        }
    }

    #[test]
    fn expanding_folds_start_at_zero() {
        let plan = plan_folds(3650, 8, true, false).unwrap();
        for f in &plan.folds {
            assert_eq!(f.train.start, 0);
            f.check_purge().unwrap();
        }
        assert_eq!(plan.folds[0].train.end, 2632);
    }

    #[test]
    fn short_samples_reduce_fold_count() {
        let plan = plan_folds(1500, 8, false, false).unwrap();
        assert_eq!(plan.k_requested, 8);
        assert_eq!(plan.k_effective, 5);
        assert_eq!(plan.folds.len(), 5);
        for f in &plan.folds {
            f.check_purge().unwrap();
        }
        assert!(plan_folds(1500, 8, false, true).is_err(), "strict mode must refuse");
        assert!(matches!(
            plan_folds(800, 8, false, false).unwrap_err(),
            Error::InsufficientHistory { .. }
        ));
    }

    #[test]
    fn purge_violation_is_detected() {
        let bad = FoldSpec { index: 0, train: 0..100, test: 100..152 };
        assert!(bad.check_purge().is_err());
        let offby = FoldSpec { index: 0, train: 0..100, test: 109..161 };
        assert!(offby.check_purge().is_err());
        let good = FoldSpec { index: 0, train: 0..100, test: 110..162 };
        good.check_purge().unwrap();
    }

    #[test]
    fn base_rates_are_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 300;
        let mut p = vec![100.0f64];
        for _ in 1..n {
            p.push(p.last().unwrap() * (1.0 + rng.gen_range(-0.01..0.011)));
        }
        let panel = panel_with_index(&p);
        let fm = features_for(&panel);
        let targets = build_targets(&panel, "IDX", &fm).unwrap();
        let r = targets.base_rate(Task::Rally);
        let c = targets.base_rate(Task::Crash);
        assert!((0.0..=1.0).contains(&r));
        assert!((0.0..=1.0).contains(&c));
    }
}
