//! Gibbs measures derived from translation-invariant interactions on
//! permutation-labeled regular graphs and on the regular tree.
//!
//! The crate provides exact enumeration on small graphs, exact message passing
//! on tree balls, and Monte Carlo estimators for percolative entropy, strong
//! spatial mixing profiles, Dobrushin coefficients and specific entropy.

pub mod config;
pub mod dist;
pub mod estimators;
pub mod exact;
pub mod graph;
pub mod group;
pub mod interaction;
pub mod parallel;
pub mod tree;

pub use dist::Distribution;
pub use estimators::{Estimate, EstimatorError};
pub use exact::{ExactGibbs, EntropySummary};
pub use graph::{LabeledRegularGraph, Spin};
pub use group::{Parity, TreeBall, Word};
pub use interaction::{InteractionSpec, LogWeight, ModelKind, SelfField};
pub use tree::{Boundary, TreeModel};
