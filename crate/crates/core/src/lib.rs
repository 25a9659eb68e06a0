//! Deterministic simulation of a VCG-based block-building mechanism whose
//! default builder splits bundles into conflict groups.

pub mod amount;
pub mod baselines;
pub mod builders;
pub mod conflict;
pub mod default_algo;
pub mod fixtures;
pub mod mechanism;
pub mod model;
pub mod oracle;
pub mod seeding;
pub mod strategy;
pub mod suites;
pub mod workload;

pub use amount::Amount;
pub use model::{Block, BundleId, BundleSet, CoinbaseLabel, Scenario};

/// Groups at least this large are not searched exhaustively.
pub const DEFAULT_K_CUTOFF: usize = 8;
