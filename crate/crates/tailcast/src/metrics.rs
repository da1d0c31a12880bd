//! Ranking metrics for the classifier heads: AUC, average precision,
//! best-F1 threshold and the balanced composite detection score.

use serde::{Deserialize, Serialize};

/// Reported decision thresholds are kept inside this band.
pub const THRESHOLD_BAND: (f64, f64) = (0.05, 0.95);

/// Mann-Whitney AUC with average ranks for tied scores. `None` when either
/// class is absent.
pub fn auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|v| **v).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_pos_sum = 0.0;
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j averaged over the tie group.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if labels[idx] {
                rank_pos_sum += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_pos_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Average precision as the step-function sum over distinct descending
/// score thresholds. `None` when there are no positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|v| **v).count();
    if n_pos == 0 || n_pos == labels.len() {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Some(ap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Best-F1 operating point over all distinct score thresholds, where a row
/// is called positive when its score is >= the threshold. Ties resolve to
/// the lowest threshold. The reported threshold is clamped into
/// [`THRESHOLD_BAND`]; the metrics stay those of the optimum.
pub fn best_f1(scores: &[f64], labels: &[bool]) -> Option<ThresholdMetrics> {
    assert_eq!(scores.len(), labels.len());
    let n_pos = labels.iter().filter(|v| **v).count();
    if n_pos == 0 || n_pos == labels.len() {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut best: Option<ThresholdMetrics> = None;
    let mut i = 0usize;
    while i < order.len() {
        let threshold = scores[order[i]];
        let mut j = i;
        while j < order.len() && scores[order[j]] == threshold {
            if labels[order[j]] {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let precision = tp as f64 / (tp + fp) as f64;
        let recall = tp as f64 / n_pos as f64;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        if best.map_or(true, |b| f1 >= b.f1) {
            best = Some(ThresholdMetrics { threshold, f1, precision, recall });
        }
        i = j;
    }
    best.map(|mut b| {
        b.threshold = b.threshold.clamp(THRESHOLD_BAND.0, THRESHOLD_BAND.1);
        b
    })
}

/// Geometric mean of the rally and crash AUCs.
pub fn bcd(auc_rally: f64, auc_crash: f64) -> f64 {
    (auc_rally * auc_crash).sqrt()
}
