//! Thresholded-graph topology features and aggregate statistics on the
//! off-diagonal absolute correlations.

use ndarray::ArrayView2;

use crate::stats;

/// Absolute-correlation thresholds defining the graphs.
pub const TAUS: [f64; 3] = [0.3, 0.5, 0.7];

/// Features per threshold level.
const PER_TAU: [&str; 7] = [
    "edge_density",
    "mean_degree",
    "std_degree",
    "max_degree",
    "isolated",
    "centralization",
    "clustering",
];

const AGGREGATE: [&str; 7] = [
    "abs_mean", "abs_median", "abs_max", "abs_std", "abs_skew", "frac_gt50", "frac_gt70",
];

fn tau_tag(tau: f64) -> String {
    format!("t{:02}", (tau * 100.0).round() as u32)
}

pub fn topology_feature_names() -> Vec<String> {
    let mut names = Vec::new();
    for tau in TAUS {
        for f in PER_TAU {
            names.push(format!("{}_{}", tau_tag(tau), f));
        }
    }
    names.extend(AGGREGATE.iter().map(|s| s.to_string()));
    names
}

/// Node degrees of the graph A_ij = 1[|C_ij| > tau], i != j.
pub fn degrees(matrix: ArrayView2<'_, f64>, tau: f64) -> Vec<usize> {
    let n = matrix.nrows();
    let mut deg = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if matrix[[i, j]].abs() > tau {
                deg[i] += 1;
                deg[j] += 1;
            }
        }
    }
    deg
}

/// Global clustering coefficient: 3 * triangles / sum_i C(d_i, 2), defined
/// as 0 when no node has two neighbours.
pub fn global_clustering(matrix: ArrayView2<'_, f64>, tau: f64) -> f64 {
    let n = matrix.nrows();
    let adj = |i: usize, j: usize| matrix[[i, j]].abs() > tau;
    let mut triangles = 0u64;
    for i in 0..n {
        for j in (i + 1)..n {
            if !adj(i, j) {
                continue;
            }
            for k in (j + 1)..n {
                if adj(j, k) && adj(i, k) {
                    triangles += 1;
                }
            }
        }
    }
    let deg = degrees(matrix, tau);
    let triplets: u64 = deg.iter().map(|&d| (d as u64) * (d as u64).saturating_sub(1) / 2).sum();
    if triplets == 0 {
        0.0
    } else {
        3.0 * triangles as f64 / triplets as f64
    }
}

fn per_tau_values(matrix: ArrayView2<'_, f64>, tau: f64) -> [f64; 7] {
    let n = matrix.nrows();
    let deg = degrees(matrix, tau);
    let degf: Vec<f64> = deg.iter().map(|&d| d as f64).collect();
    let total: usize = deg.iter().sum();
    let pairs = n * (n - 1);
    let density = if pairs == 0 { 0.0 } else { total as f64 / pairs as f64 };
    let max_deg = deg.iter().copied().max().unwrap_or(0);
    let isolated = deg.iter().filter(|&&d| d == 0).count();
    let cent_denom = if n > 2 { ((n - 1) * (n - 2)) as f64 } else { 0.0 };
    let centralization = if cent_denom == 0.0 {
        0.0
    } else {
        deg.iter().map(|&d| (max_deg - d) as f64).sum::<f64>() / cent_denom
    };
    [
        density,
        stats::mean(&degf),
        stats::population_std(&degf),
        max_deg as f64,
        isolated as f64,
        centralization,
        global_clustering(matrix, tau),
    ]
}

fn aggregate_values(matrix: ArrayView2<'_, f64>) -> [f64; 7] {
    let n = matrix.nrows();
    let mut abs: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            abs.push(matrix[[i, j]].abs());
        }
    }
    if abs.is_empty() {
        return [0.0; 7];
    }
    let mut sorted = abs.clone();
    sorted.sort_by(f64::total_cmp);
    let count = abs.len() as f64;
    [
        stats::mean(&abs),
        stats::median_sorted(&sorted),
        sorted[sorted.len() - 1],
        stats::population_std(&abs),
        stats::population_skew(&abs),
        abs.iter().filter(|&&x| x > 0.50).count() as f64 / count,
        abs.iter().filter(|&&x| x > 0.70).count() as f64 / count,
    ]
}

/// All 28 topology + aggregate features in manifest order.
pub fn topology_feature_values(matrix: ArrayView2<'_, f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(TAUS.len() * PER_TAU.len() + AGGREGATE.len());
    for tau in TAUS {
        out.extend(per_tau_values(matrix, tau));
    }
    out.extend(aggregate_values(matrix));
    out
}
