//! Scaling and the random-forest learner.

pub mod forest;
pub mod scaler;
pub mod tree;

pub use forest::{fit_forest, Forest, ForestParams};
pub use scaler::RobustScaler;
pub use tree::{fit_tree, fit_tree_with_weights, Tree, TreeParams};
