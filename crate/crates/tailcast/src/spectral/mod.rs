//! Spectral half of the feature vector: per-estimator eigenvalue,
//! eigenvector, topology and aggregate blocks plus the dynamics block over
//! the key quantities of the 60-day estimator.

pub mod dynamics;
pub mod eigen;
pub mod topology;

pub use dynamics::{DynamicsState, dynamics_feature_names, dynamics_feature_values};
pub use eigen::{Spectrum, eigendecompose, jacobi};

use crate::correlation::{CorrelationSnapshot, Estimator};
use crate::error::Result;

/// Static features per estimator: 11 eigen + 4 eigenvector + 28 topology
/// and aggregate.
pub const PER_ESTIMATOR: usize = 43;

/// One estimator's computed block plus the key quantities tracked by the
/// dynamics state (only the 60-day estimator's quantities are consumed).
#[derive(Debug, Clone)]
pub struct EstimatorBlock {
    pub values: Vec<f64>,
    pub key_quantities: [f64; 8],
}

pub fn estimator_block_names(estimator: Estimator) -> Vec<String> {
    let prefix = estimator.label();
    let mut names = Vec::with_capacity(PER_ESTIMATOR);
    for n in eigen::eigen_feature_names() {
        names.push(format!("{prefix}_{n}"));
    }
    for n in eigen::eigenvector_feature_names() {
        names.push(format!("{prefix}_{n}"));
    }
    for n in topology::topology_feature_names() {
        names.push(format!("{prefix}_{n}"));
    }
    names
}

/// Compute one estimator's static features and key quantities.
pub fn estimator_block(snapshot: &CorrelationSnapshot) -> Result<EstimatorBlock> {
    let spectrum = eigendecompose(snapshot)?;
    let eig = eigen::eigen_feature_values(&spectrum, snapshot.effective_t);
    let vecf = eigen::eigenvector_feature_values(&spectrum);
    let topo = topology::topology_feature_values(snapshot.matrix.view());

    let total: f64 = spectrum.eigenvalues.iter().sum();
    let lambda1 = spectrum.eigenvalues[0];
    let var_share = if total > 0.0 { lambda1 / total } else { 0.0 };
    let names = topology::topology_feature_names();
    let pick = |name: &str| topo[names.iter().position(|n| n == name).unwrap()];
    let key_quantities = [
        lambda1,
        var_share,
        var_share, // rank-one absorption ratio; identical by trace = n
        eig[3],    // entropy
        eig[4],    // effective rank
        pick("abs_mean"),
        pick("t50_edge_density"),
        pick("t50_clustering"),
    ];

    let mut values = eig;
    values.extend(vecf);
    values.extend(topo);
    debug_assert_eq!(values.len(), PER_ESTIMATOR);
    Ok(EstimatorBlock { values, key_quantities })
}

/// Full spectral manifest: three estimator blocks then the dynamics block.
pub fn spectral_manifest_names() -> Vec<String> {
    let mut names = Vec::new();
    for est in Estimator::all() {
        names.extend(estimator_block_names(est));
    }
    names.extend(dynamics_feature_names());
    names
}

/// Concatenate the three per-estimator blocks and the dynamics features for
/// the latest date pushed into `state`.
pub fn assemble_spectral_row(blocks: &[EstimatorBlock; 3], state: &DynamicsState) -> Vec<f64> {
    let mut row = Vec::with_capacity(3 * PER_ESTIMATOR + dynamics::QUANTITIES.len() * dynamics::PER_QUANTITY);
    for block in blocks {
        row.extend_from_slice(&block.values);
    }
    row.extend(dynamics_feature_values(state));
    row
}
