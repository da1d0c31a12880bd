//! Walk-forward training and evaluation of the rally/crash heads.
//!
//! Every fold fits its scaler and both forests on training rows only; a
//! [`RowGuard`] wraps the feature matrix during fitting and panics if any
//! purged or future row is touched, so the no-leakage property is enforced
//! at runtime rather than by convention.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureSubset};
use crate::labels::{FoldPlan, FoldSpec, Task, TargetSet};
use crate::learner::{fit_forest, ForestParams, RobustScaler};
use crate::metrics::{self, ThresholdMetrics};

/// View of the feature matrix restricted to rows a fold may read while
/// training. Any access outside the permitted half-open range panics.
pub struct RowGuard<'a> {
    values: ArrayView2<'a, f64>,
    permitted: std::ops::Range<usize>,
}

impl<'a> RowGuard<'a> {
    pub fn new(values: ArrayView2<'a, f64>, permitted: std::ops::Range<usize>) -> Self {
        RowGuard { values, permitted }
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        assert!(
            self.permitted.contains(&i),
            "row {i} is outside the permitted training range {:?}",
            self.permitted
        );
        self.values.row(i).to_vec()
    }

    /// Gather a contiguous block of permitted rows, restricted to columns.
    pub fn gather(&self, rows: std::ops::Range<usize>, columns: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((rows.len(), columns.len()));
        for (r, i) in rows.enumerate() {
            let full = self.row(i);
            for (c, &j) in columns.iter().enumerate() {
                out[[r, c]] = full[j];
            }
        }
        out
    }
}

/// Deterministic seed for one (fold, task) pair, mixed SplitMix-style so
/// neighbouring folds get unrelated streams.
pub fn fold_seed(run_seed: u64, fold: usize, task: Task) -> u64 {
    let task_tag = match task {
        Task::Rally => 1u64,
        Task::Crash => 2u64,
    };
    let mut z = run_seed
        .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(1 + fold as u64))
        .wrapping_add(task_tag.wrapping_mul(0x94d049bb133111eb));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Out-of-sample scores for one fold and task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScores {
    pub fold: usize,
    pub test_rows: std::ops::Range<usize>,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    /// Per-fold AUC; absent when the test block is single-class.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvaluation {
    pub task: Task,
    pub folds: Vec<FoldScores>,
    /// AUC over all test rows pooled across folds.
    pub pooled_auc: f64,
    pub pooled_ap: f64,
    pub fold_mean_auc: Option<f64>,
    pub single_class_folds: Vec<usize>,
    pub operating_point: Option<ThresholdMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetEvaluation {
    pub subset: FeatureSubset,
    pub rally: TaskEvaluation,
    pub crash: TaskEvaluation,
    pub bcd: f64,
}

impl SubsetEvaluation {
    pub fn task(&self, task: Task) -> &TaskEvaluation {
        match task {
            Task::Rally => &self.rally,
            Task::Crash => &self.crash,
        }
    }
}

/// Full walk-forward pass for one feature subset: per fold, fit scaler and
/// two forests on the training block, score the test block.
pub fn evaluate_subset(
    features: &FeatureMatrix,
    targets: &TargetSet,
    plan: &FoldPlan,
    subset: FeatureSubset,
    params: &ForestParams,
    run_seed: u64,
) -> Result<SubsetEvaluation> {
    let columns = features.columns_for(subset);
    let mut per_task: Vec<TaskEvaluation> = Vec::with_capacity(2);
    for task in Task::all() {
        let labels = targets.for_task(task);
        let mut folds = Vec::with_capacity(plan.folds.len());
        for fold in &plan.folds {
            fold.check_purge()?;
            let scores = score_fold(features, labels, fold, &columns, params, run_seed, task)?;
            folds.push(scores);
        }
        per_task.push(aggregate(task, folds));
    }
    let crash = per_task.pop().expect("two tasks");
    let rally = per_task.pop().expect("two tasks");
    let bcd = metrics::bcd(rally.pooled_auc, crash.pooled_auc);
    Ok(SubsetEvaluation { subset, rally, crash, bcd })
}

fn score_fold(
    features: &FeatureMatrix,
    labels: &[bool],
    fold: &FoldSpec,
    columns: &[usize],
    params: &ForestParams,
    run_seed: u64,
    task: Task,
) -> Result<FoldScores> {
    let guard = RowGuard::new(features.values.view(), fold.train.clone());
    let x_train = guard.gather(fold.train.clone(), columns);
    let y_train: Vec<bool> = fold.train.clone().map(|i| labels[i]).collect();
    let pos = y_train.iter().filter(|v| **v).count();
    if pos == 0 || pos == y_train.len() {
        return Err(Error::SingleClassTraining {
            fold: fold.index,
            task: task.label().to_string(),
        });
    }
    let scaler = RobustScaler::fit(x_train.view())?;
    let x_train = scaler.transform(x_train.view());
    let forest = fit_forest(x_train.view(), &y_train, params, fold_seed(run_seed, fold.index, task));

    let mut x_test = Array2::zeros((fold.test.len(), columns.len()));
    for (r, i) in fold.test.clone().enumerate() {
        for (c, &j) in columns.iter().enumerate() {
            x_test[[r, c]] = features.values[[i, j]];
        }
    }
    let x_test = scaler.transform(x_test.view());
    let scores = forest.predict(x_test.view());
    let fold_labels: Vec<bool> = fold.test.clone().map(|i| labels[i]).collect();
    let auc = metrics::auc(&scores, &fold_labels);
    Ok(FoldScores { fold: fold.index, test_rows: fold.test.clone(), scores, labels: fold_labels, auc })
}

fn aggregate(task: Task, folds: Vec<FoldScores>) -> TaskEvaluation {
    let mut pooled_scores = Vec::new();
    let mut pooled_labels = Vec::new();
    let mut fold_aucs = Vec::new();
    let mut single_class_folds = Vec::new();
    for f in &folds {
        pooled_scores.extend_from_slice(&f.scores);
        pooled_labels.extend_from_slice(&f.labels);
        match f.auc {
            Some(a) => fold_aucs.push(a),
            None => single_class_folds.push(f.fold),
        }
    }
    if !single_class_folds.is_empty() {
        log::warn!(
            "{}: folds {:?} have single-class test blocks; excluded from the fold-mean AUC",
            task.label(),
            single_class_folds
        );
    }
    let pooled_auc = metrics::auc(&pooled_scores, &pooled_labels).unwrap_or(0.5);
    let pooled_ap = metrics::average_precision(&pooled_scores, &pooled_labels).unwrap_or(0.0);
    let fold_mean_auc = if fold_aucs.is_empty() {
        None
    } else {
        Some(fold_aucs.iter().sum::<f64>() / fold_aucs.len() as f64)
    };
    let operating_point = metrics::best_f1(&pooled_scores, &pooled_labels);
    TaskEvaluation {
        task,
        folds,
        pooled_auc,
        pooled_ap,
        fold_mean_auc,
        single_class_folds,
        operating_point,
    }
}

/// Evaluate the three ablation subsets on identical folds and seeds.
pub fn evaluate_all_subsets(
    features: &FeatureMatrix,
    targets: &TargetSet,
    plan: &FoldPlan,
    params: &ForestParams,
    run_seed: u64,
) -> Result<Vec<SubsetEvaluation>> {
    FeatureSubset::all()
        .iter()
        .map(|&s| evaluate_subset(features, targets, plan, s, params, run_seed))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::plan_folds;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn synthetic_features(n: usize, d: usize, seed: u64) -> (FeatureMatrix, TargetSet) {
        use crate::features::{Family, MANIFEST_VERSION};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.2)).collect();
        let values = Array2::from_shape_fn((n, d), |(i, j)| {
            let signal = if j == 0 && labels[i] { 0.8 } else { 0.0 };
            signal + rng.gen_range(-1.0..1.0)
        });
        let mut dates = Vec::new();
        let mut day = chrono::NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
        for _ in 0..n {
            dates.push(day);
            day = day.succ_opt().unwrap();
        }
        let fm = FeatureMatrix {
            dates,
            return_indices: (0..n).collect(),
            names: (0..d).map(|j| format!("f{j}")).collect(),
            families: (0..d)
                .map(|j| if j % 2 == 0 { Family::Spectral } else { Family::Traditional })
                .collect(),
            values,
            manifest_version: MANIFEST_VERSION,
            zero_filled: 0,
        };
        let targets = TargetSet { rally: labels.clone(), crash: labels };
        (fm, targets)
    }

    #[test]
    fn row_guard_blocks_out_of_range_access() {
        let values = Array2::from_elem((10, 2), 1.0);
        let guard = RowGuard::new(values.view(), 2..5);
        assert_eq!(guard.row(2), vec![1.0, 1.0]);
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| guard.row(5)));
        assert!(result.is_err());
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| guard.row(1)));
        assert!(result.is_err());
    }

    #[test]
    fn fold_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for fold in 0..8 {
            for task in Task::all() {
                assert!(seen.insert(fold_seed(42, fold, task)));
            }
        }
        assert_eq!(fold_seed(42, 3, Task::Rally), fold_seed(42, 3, Task::Rally));
        assert_ne!(fold_seed(42, 3, Task::Rally), fold_seed(43, 3, Task::Rally));
    }

    #[test]
    fn evaluation_runs_and_detects_signal() {
        let (fm, targets) = synthetic_features(1200, 6, 3);
        let plan = plan_folds(1200, 3, false, false).unwrap();
        let params = ForestParams { n_trees: 30, ..ForestParams::default() };
        let eval =
            evaluate_subset(&fm, &targets, &plan, FeatureSubset::Combined, &params, 9).unwrap();
        assert!(eval.rally.pooled_auc > 0.6, "auc {}", eval.rally.pooled_auc);
        assert_eq!(eval.rally.folds.len(), plan.k_effective);
        for f in &eval.rally.folds {
            assert_eq!(f.scores.len(), 126);
        }
        assert!(eval.bcd > 0.0);
    }

    #[test]
    fn identical_seeds_reproduce_scores_bitwise() {
        let (fm, targets) = synthetic_features(1100, 5, 4);
        let plan = plan_folds(1100, 2, false, false).unwrap();
        let params = ForestParams { n_trees: 10, ..ForestParams::default() };
        let a = evaluate_subset(&fm, &targets, &plan, FeatureSubset::Combined, &params, 5).unwrap();
        let b = evaluate_subset(&fm, &targets, &plan, FeatureSubset::Combined, &params, 5).unwrap();
        assert_eq!(a, b);
        let c = evaluate_subset(&fm, &targets, &plan, FeatureSubset::Combined, &params, 6).unwrap();
        assert_ne!(a.rally.folds[0].scores, c.rally.folds[0].scores);
    }

    #[test]
    fn subsets_share_fold_layout_and_seeds() {
        let (fm, targets) = synthetic_features(1100, 6, 8);
        let plan = plan_folds(1100, 2, false, false).unwrap();
        let params = ForestParams { n_trees: 8, ..ForestParams::default() };
        let all = evaluate_all_subsets(&fm, &targets, &plan, &params, 11).unwrap();
        assert_eq!(all.len(), 3);
        for eval in &all {
            for (f_any, f_comb) in eval.rally.folds.iter().zip(&all[2].rally.folds) {
                assert_eq!(f_any.test_rows, f_comb.test_rows);
                assert_eq!(f_any.labels, f_comb.labels);
            }
        }
    }

    #[test]
    fn single_class_training_block_is_an_error() {
        let (fm, mut targets) = synthetic_features(1100, 4, 12);
        targets.rally = vec![false; 1100];
        let plan = plan_folds(1100, 2, false, false).unwrap();
        let params = ForestParams { n_trees: 4, ..ForestParams::default() };
        let err = evaluate_subset(&fm, &targets, &plan, FeatureSubset::Combined, &params, 3)
            .unwrap_err();
        assert!(matches!(err, Error::SingleClassTraining { .. }));
    }

    #[test]
    fn purged_rows_are_never_touched_during_training() {
        // gather() must refuse a range that spills past the training block.
        let (fm, _) = synthetic_features(900, 4, 13);
        let guard = RowGuard::new(fm.values.view(), 0..100);
        let caught = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            guard.gather(0..101, &[0, 1])
        }));
        assert!(caught.is_err());
    }
}
