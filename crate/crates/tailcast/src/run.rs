//! Pipeline driver behind the CLI subcommands: features, evaluate,
//! backtest, and the combined run report. Each step persists its artifacts
//! under the configured output directory and verifies upstream artifacts by
//! their embedded config hash before reusing them.

use std::path::PathBuf;

use chrono::NaiveDate;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, ArtifactMeta, PredictionRecord};
use crate::error::{Error, Result};
use crate::features::{build_features, FeatureMatrix, FeatureSubset, MANIFEST_VERSION};
use crate::labels::{build_targets, plan_folds, Task, TRAIN_LEN};
use crate::learner::ForestParams;
use crate::metrics::ThresholdMetrics;
use crate::panel::PricePanel;
use crate::strategy::{
    ensemble_wfo, ledger_core, market_returns, performance_stats, signal_ranks,
    BacktestLedger, EnsembleReport, GridSpec, MarketReturns, PerformanceStats, Regime,
    DEFAULT_TOP_N,
};
use crate::synthetic::DEFAULT_UNIVERSE;
use crate::traditional::IndicatorConfig;
use crate::walkforward::{evaluate_all_subsets, SubsetEvaluation};

pub const FEATURES_CSV: &str = "features.csv";
pub const FEATURES_MANIFEST_JSON: &str = "features_manifest.json";
pub const METRICS_JSON: &str = "metrics.json";
pub const PREDICTIONS_CSV: &str = "predictions.csv";
pub const STRATEGY_LEDGER_CSV: &str = "strategy_ledger.csv";
pub const BENCHMARK_LEDGER_CSV: &str = "benchmark_ledger.csv";
pub const STRATEGY_REPORT_JSON: &str = "strategy_report.json";
pub const RUN_REPORT_JSON: &str = "run_report.json";

fn default_universe() -> Vec<String> {
    DEFAULT_UNIVERSE.iter().map(|s| s.to_string()).collect()
}

fn default_index() -> String {
    "SPY".to_string()
}

fn default_seed() -> u64 {
    42
}

fn default_top_n() -> usize {
    DEFAULT_TOP_N
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FoldSettings {
    pub k: usize,
    pub expanding: bool,
    pub strict: bool,
}

impl Default for FoldSettings {
    fn default() -> Self {
        FoldSettings { k: 8, expanding: false, strict: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StrategySettings {
    pub grid: GridSpec,
    pub top_n: usize,
}

impl Default for StrategySettings {
    fn default() -> Self {
        StrategySettings { grid: GridSpec::default(), top_n: default_top_n() }
    }
}

/// Full run configuration. The config hash embedded in every artifact is
/// the hash of this structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Wide CSV of adjusted closes.
    pub data: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default = "default_universe")]
    pub universe: Vec<String>,
    #[serde(default = "default_index")]
    pub index_symbol: String,
    #[serde(default)]
    pub indicators: IndicatorConfig,
    #[serde(default)]
    pub folds: FoldSettings,
    #[serde(default)]
    pub forest: ForestParams,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Feature families written by the features step.
    #[serde(default)]
    pub subset: FeatureSubset,
    #[serde(default)]
    pub strategy: StrategySettings,
}

impl RunConfig {
    pub fn new(data: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            data: data.into(),
            out_dir: out_dir.into(),
            universe: default_universe(),
            index_symbol: default_index(),
            indicators: IndicatorConfig::default(),
            folds: FoldSettings::default(),
            forest: ForestParams::default(),
            seed: default_seed(),
            subset: FeatureSubset::Combined,
            strategy: StrategySettings::default(),
        }
    }

    pub fn meta(&self) -> Result<ArtifactMeta> {
        Ok(ArtifactMeta {
            config_hash: artifacts::config_hash(self)?,
            seed: self.seed,
            manifest_version: MANIFEST_VERSION,
        })
    }

    pub fn artifact_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn load_panel(&self) -> Result<PricePanel> {
        let (panel, stats) =
            PricePanel::load_csv(&self.data, &self.universe, TRAIN_LEN)?;
        if stats.rows_dropped > 0 || stats.cells_filled > 0 {
            info!(
                "panel cleaning: {} rows dropped, {} cells forward-filled",
                stats.rows_dropped, stats.cells_filled
            );
        }
        Ok(panel)
    }
}

/// Restrict a feature matrix to the families of the requested subset.
fn filter_subset(features: FeatureMatrix, subset: FeatureSubset) -> FeatureMatrix {
    if subset == FeatureSubset::Combined {
        return features;
    }
    let keep = features.columns_for(subset);
    let names = keep.iter().map(|&c| features.names[c].clone()).collect();
    let families = keep.iter().map(|&c| features.families[c]).collect();
    let values = ndarray::Array2::from_shape_fn(
        (features.n_rows(), keep.len()),
        |(r, i)| features.values[[r, keep[i]]],
    );
    FeatureMatrix {
        dates: features.dates,
        return_indices: features.return_indices,
        names,
        families,
        values,
        manifest_version: features.manifest_version,
        zero_filled: features.zero_filled,
    }
}

/// Build and persist the feature matrix. When the stored artifact already
/// carries this config's hash the computation is skipped and the file is
/// read back instead.
pub fn cmd_features(config: &RunConfig) -> Result<(ArtifactMeta, FeatureMatrix)> {
    let meta = config.meta()?;
    let path = config.artifact_path(FEATURES_CSV);
    if artifacts::matches_existing(&path, &meta) {
        info!("features artifact is current, skipping recompute");
        return artifacts::read_features_csv(&path);
    }
    let panel = config.load_panel()?;
    let features = build_features(&panel, &config.index_symbol, &config.indicators)?;
    let features = filter_subset(features, config.subset);
    artifacts::write_features_csv(&features, &meta, &path)?;
    artifacts::write_manifest_json(
        &features,
        &meta,
        &config.artifact_path(FEATURES_MANIFEST_JSON),
    )?;
    Ok((meta, features))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub pooled_auc: f64,
    pub pooled_ap: f64,
    pub fold_mean_auc: Option<f64>,
    pub fold_aucs: Vec<Option<f64>>,
    pub single_class_folds: Vec<usize>,
    pub operating_point: Option<ThresholdMetrics>,
}

impl TaskMetrics {
    fn from_eval(eval: &crate::walkforward::TaskEvaluation) -> Self {
        TaskMetrics {
            pooled_auc: eval.pooled_auc,
            pooled_ap: eval.pooled_ap,
            fold_mean_auc: eval.fold_mean_auc,
            fold_aucs: eval.folds.iter().map(|f| f.auc).collect(),
            single_class_folds: eval.single_class_folds.clone(),
            operating_point: eval.operating_point,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetMetrics {
    pub subset: FeatureSubset,
    pub rally: TaskMetrics,
    pub crash: TaskMetrics,
    pub bcd_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub meta: ArtifactMeta,
    pub n_rows: usize,
    pub k_requested: usize,
    pub k_effective: usize,
    pub expanding: bool,
    pub subsets: Vec<SubsetMetrics>,
}

fn require_meta(found: &ArtifactMeta, expected: &ArtifactMeta, what: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Data(format!(
            "{what} artifact was produced by config {} seed {}, expected {} seed {}; rerun the upstream step",
            found.config_hash, found.seed, expected.config_hash, expected.seed
        )));
    }
    Ok(())
}

/// Run the full walk-forward evaluation with ablations over the persisted
/// features, writing metrics and out-of-sample predictions.
pub fn cmd_evaluate(config: &RunConfig) -> Result<(MetricsReport, Vec<SubsetEvaluation>)> {
    let meta = config.meta()?;
    let features_path = config.artifact_path(FEATURES_CSV);
    let (stored_meta, features) = artifacts::read_features_csv(&features_path)?;
    require_meta(&stored_meta, &meta, "features")?;
    if config.subset != FeatureSubset::Combined {
        return Err(Error::Config(
            "evaluation needs the combined feature set; rerun features with subset=combined"
                .into(),
        ));
    }
    let panel = config.load_panel()?;
    let targets = build_targets(&panel, &config.index_symbol, &features)?;
    let plan = plan_folds(
        features.n_rows(),
        config.folds.k,
        config.folds.expanding,
        config.folds.strict,
    )?;
    let evaluations =
        evaluate_all_subsets(&features, &targets, &plan, &config.forest, config.seed)?;
    let report = MetricsReport {
        meta: meta.clone(),
        n_rows: features.n_rows(),
        k_requested: plan.k_requested,
        k_effective: plan.k_effective,
        expanding: plan.expanding,
        subsets: evaluations
            .iter()
            .map(|e| SubsetMetrics {
                subset: e.subset,
                rally: TaskMetrics::from_eval(&e.rally),
                crash: TaskMetrics::from_eval(&e.crash),
                bcd_auc: e.bcd,
            })
            .collect(),
    };
    artifacts::write_json(&report, &config.artifact_path(METRICS_JSON))?;
    let records = artifacts::prediction_records(&evaluations, &features);
    artifacts::write_predictions_csv(
        &records,
        &meta,
        &config.artifact_path(PREDICTIONS_CSV),
    )?;
    Ok((report, evaluations))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsPair {
    pub full: PerformanceStats,
    pub oos: PerformanceStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSummary {
    pub grid_index: usize,
    pub inner_sharpe: f64,
    pub oos_sharpe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub meta: ArtifactMeta,
    pub n_strategy_days: usize,
    pub inner_end_index: usize,
    pub oos_start_date: NaiveDate,
    pub feasible_combinations: usize,
    pub grid_size: usize,
    pub members: Vec<MemberSummary>,
    pub strategy: StatsPair,
    pub benchmark: StatsPair,
}

/// Ordered per-task score series for one subset, plus the matching
/// return-row indices.
fn score_series(
    records: &[PredictionRecord],
    subset: FeatureSubset,
) -> Result<(Vec<f64>, Vec<f64>, Vec<usize>)> {
    let mut rally: Vec<(usize, usize, f64)> = Vec::new();
    let mut crash: Vec<(usize, usize, f64)> = Vec::new();
    for r in records.iter().filter(|r| r.subset == subset) {
        match r.task {
            Task::Rally => rally.push((r.row, r.return_index, r.score)),
            Task::Crash => crash.push((r.row, r.return_index, r.score)),
        }
    }
    rally.sort_by_key(|r| r.0);
    crash.sort_by_key(|r| r.0);
    if rally.is_empty() || rally.len() != crash.len() {
        return Err(Error::Data(
            "predictions artifact lacks aligned rally and crash scores".into(),
        ));
    }
    for (a, b) in rally.iter().zip(&crash) {
        if a.0 != b.0 {
            return Err(Error::Data("rally and crash predictions cover different rows".into()));
        }
    }
    for pair in rally.windows(2) {
        if pair[1].0 != pair[0].0 + 1 {
            return Err(Error::Data("scored rows are not contiguous".into()));
        }
    }
    let rows: Vec<usize> = rally.iter().map(|r| r.1).collect();
    Ok((
        rally.into_iter().map(|r| r.2).collect(),
        crash.into_iter().map(|r| r.2).collect(),
        rows,
    ))
}

/// Run the ensemble walk-forward backtest from the persisted combined
/// out-of-sample predictions, writing the strategy and benchmark ledgers
/// and the strategy report.
pub fn cmd_backtest(config: &RunConfig) -> Result<(StrategyReport, EnsembleReport)> {
    let meta = config.meta()?;
    let (stored_meta, records) =
        artifacts::read_predictions_csv(&config.artifact_path(PREDICTIONS_CSV))?;
    require_meta(&stored_meta, &meta, "predictions")?;
    let (rally_scores, crash_scores, return_rows) =
        score_series(&records, FeatureSubset::Combined)?;
    let ranks = signal_ranks(&rally_scores, &crash_scores)?;
    let panel = config.load_panel()?;
    let strategy_rows: Vec<usize> = return_rows[ranks.offset..].to_vec();
    let market = market_returns(&panel, &config.index_symbol, &strategy_rows)?;
    let ensemble = ensemble_wfo(
        &ranks,
        &market,
        &config.strategy.grid,
        config.strategy.top_n,
    )?;
    artifacts::write_ledger_csv(
        &ensemble.ledger,
        &meta,
        &config.artifact_path(STRATEGY_LEDGER_CSV),
    )?;
    let benchmark = benchmark_ledger(&market);
    artifacts::write_ledger_csv(
        &benchmark,
        &meta,
        &config.artifact_path(BENCHMARK_LEDGER_CSV),
    )?;
    let inner = ensemble.inner_end;
    let report = StrategyReport {
        meta: meta.clone(),
        n_strategy_days: market.len(),
        inner_end_index: inner,
        oos_start_date: market.dates[inner],
        feasible_combinations: ensemble.feasible,
        grid_size: config.strategy.grid.len(),
        members: ensemble
            .members
            .iter()
            .map(|m| MemberSummary {
                grid_index: m.grid_index,
                inner_sharpe: m.inner_sharpe,
                oos_sharpe: m.oos_sharpe,
            })
            .collect(),
        strategy: StatsPair {
            full: performance_stats(&ensemble.ledger.net_return)?,
            oos: ensemble.oos_stats,
        },
        benchmark: StatsPair {
            full: performance_stats(&benchmark.net_return)?,
            oos: performance_stats(&benchmark.net_return[inner..])?,
        },
    };
    artifacts::write_json(&report, &config.artifact_path(STRATEGY_REPORT_JSON))?;
    Ok((report, ensemble))
}

/// Buy-and-hold ledger: full equity exposure, no defensive sleeve, no
/// costs beyond the (free) initial entry.
pub fn benchmark_ledger(market: &MarketReturns) -> BacktestLedger {
    let n = market.len();
    ledger_core(&vec![1.0; n], &vec![0.0; n], &vec![Regime::Normal; n], market)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub meta: ArtifactMeta,
    pub config: RunConfig,
    pub classification: MetricsReport,
    pub strategy: StrategyReport,
    pub notes: Vec<String>,
}

/// Assemble the final run report from the persisted metrics and strategy
/// artifacts.
pub fn cmd_report(config: &RunConfig) -> Result<RunReport> {
    let meta = config.meta()?;
    let classification: MetricsReport =
        artifacts::read_json(&config.artifact_path(METRICS_JSON))?;
    require_meta(&classification.meta, &meta, "metrics")?;
    let strategy: StrategyReport =
        artifacts::read_json(&config.artifact_path(STRATEGY_REPORT_JSON))?;
    require_meta(&strategy.meta, &meta, "strategy report")?;
    let mut notes = vec![
        "All levels are computed on the supplied price panel; the published \
         baseline figures come from a proprietary vendor dataset, so divergence \
         is expected and no numeric tolerance is claimed."
            .to_string(),
        "bcd_auc is the geometric mean of the rally and crash pooled AUCs."
            .to_string(),
        "Out-of-sample strategy statistics cover the final 45% of the signal \
         history; the first 55% selected the ensemble."
            .to_string(),
    ];
    if classification.k_effective < classification.k_requested {
        notes.push(format!(
            "fold count reduced from {} to {} by available history",
            classification.k_requested, classification.k_effective
        ));
    }
    for subset in &classification.subsets {
        for (task, m) in
            [("rally", &subset.rally), ("crash", &subset.crash)]
        {
            if !m.single_class_folds.is_empty() {
                notes.push(format!(
                    "{} {task}: test folds {:?} contain a single class and are \
                     excluded from the fold-mean AUC",
                    subset.subset.label(),
                    m.single_class_folds
                ));
            }
        }
    }
    if strategy.feasible_combinations < strategy.grid_size {
        notes.push(format!(
            "{} of {} grid combinations were feasible on the inner segment",
            strategy.feasible_combinations, strategy.grid_size
        ));
    }
    let report = RunReport { meta, config: config.clone(), classification, strategy, notes };
    artifacts::write_json(&report, &config.artifact_path(RUN_REPORT_JSON))?;
    Ok(report)
}

/// Features, evaluation, backtest, and report in sequence.
pub fn run_all(config: &RunConfig) -> Result<RunReport> {
    let (_, features) = cmd_features(config)?;
    if features.zero_filled > 0 {
        warn!("{} feature cells were non-finite and zero-filled", features.zero_filled);
    }
    cmd_evaluate(config)?;
    cmd_backtest(config)?;
    cmd_report(config)
}
