//! Experiment engine: dataset ingestion, supervised discretization,
//! cross-validation, MDL/call comparison, variable-level cycle analysis, and
//! DOT export. The CLI is a thin wrapper over this module.

pub mod compare;
pub mod crossval;
pub mod cycles;
pub mod discretize;
pub mod dot;
pub mod ingest;

use serde::Serialize;

use crate::bkbsl::Backend;
use crate::scores::BnMdlVariant;

/// One experiment's knobs, shared by the comparison and cross-validation
/// drivers.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub dataset_name: String,
    pub parent_limit: usize,
    pub folds: usize,
    pub backend: Backend,
    pub delta: f64,
    pub variant: BnMdlVariant,
    pub seed: u64,
    /// Target variable name; defaults to the declared output or last column.
    pub target: String,
}

/// Benchmark parent-set limits, keyed by dataset name.
const PARENT_LIMITS: &[(&str, usize)] = &[
    ("newthyroid", 5),
    ("car", 6),
    ("banana", 2),
    ("poker", 1),
    ("heart", 10),
    ("saheart", 9),
    ("wine", 8),
    ("mammographic", 5),
    ("pima", 8),
    ("housevotes", 7),
    ("tic-tac-toe", 9),
    ("winequality-red", 10),
    ("ecoli", 7),
    ("contraceptive", 9),
    ("yeast", 8),
    ("nursery", 8),
    ("titanic", 3),
    ("hayes-roth", 4),
    ("iris", 4),
    ("bupa", 6),
    ("haberman", 3),
    ("winequality-white", 4),
    ("glass", 9),
    ("flare", 6),
    ("phoneme", 5),
    ("bands", 5),
    ("australian", 6),
    ("tae", 5),
    ("post-operative", 8),
    ("vowel", 5),
    ("balance", 4),
    ("zoo", 7),
    ("hepatitis", 6),
    ("crx", 5),
    ("cleveland", 10),
    ("lymphography", 5),
    ("breast", 9),
    ("led7digit", 7),
    ("kr-vs-k", 3),
    ("monk-2", 6),
];

/// Default parent-set limit for a known benchmark dataset name.
pub fn default_parent_limit(dataset_name: &str) -> Option<usize> {
    let name = dataset_name.to_ascii_lowercase();
    PARENT_LIMITS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|&(_, k)| k)
}
