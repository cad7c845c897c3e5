//! Full-data MDL and complexity comparison between the fused-model learner
//! and the exact MDL Bayesian network: data-encoding bits under both sign
//! conventions, model bits, and the unique-call counts of each path. The
//! two paths run on separate probability engines so neither inherits the
//! other's memo table.

use serde::Serialize;

use crate::bkbsl::{self, LearnOptions};
use crate::bnlearn;
use crate::core::Dataset;
use crate::error::Result;
use crate::prob::ProbEngine;

use super::ExperimentConfig;

/// One side of the comparison.
#[derive(Debug, Clone, Serialize)]
pub struct PathReport {
    pub model_bits: f64,
    /// Factorized data bits: each training world scored by the model's own
    /// rule factorization for that world, weighted by multiplicity.
    pub data_bits: f64,
    pub data_mdl_signed: f64,
    /// Same data term summed once per unique world.
    pub data_bits_unique_worlds: f64,
    pub unique_calls: u64,
    pub total_calls: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub dataset: String,
    pub parent_limit: usize,
    pub delta: f64,
    pub bkb: PathReport,
    /// Extra fused-model numbers: reasoner-based data bits (source mixture
    /// over all valid inferences) and model bits without source priors.
    pub bkb_data_bits_reasoner: f64,
    pub bkb_model_bits_without_sources: f64,
    pub bn: PathReport,
    /// `bkb.data_bits - bn.data_bits`; negative when the fused model fits
    /// the data tighter.
    pub data_bits_difference: f64,
    /// `bkb.unique_calls - bn.unique_calls` as a signed count.
    pub calls_difference: i64,
}

impl CompareReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>14} {:>14} {:>12} {:>12}\n",
            "model", "data-bits", "data-mdl", "model-bits", "calls"
        ));
        out.push_str(&format!(
            "{:<12} {:>14.1} {:>14.1} {:>12.1} {:>12}\n",
            "fused-bkb",
            self.bkb.data_bits,
            self.bkb.data_mdl_signed,
            self.bkb.model_bits,
            self.bkb.unique_calls
        ));
        out.push_str(&format!(
            "{:<12} {:>14.1} {:>14.1} {:>12.1} {:>12}\n",
            "bn",
            self.bn.data_bits,
            self.bn.data_mdl_signed,
            self.bn.model_bits,
            self.bn.unique_calls
        ));
        out.push_str(&format!(
            "{:<12} {:>14.1} {:>14} {:>12} {:>12}\n",
            "difference", self.data_bits_difference, "", "", self.calls_difference
        ));
        out
    }
}

/// Trains both models on the full dataset and assembles the comparison.
pub fn compare_mdl(dataset: &Dataset, config: &ExperimentConfig) -> Result<CompareReport> {
    // fused-model path with its own engine (created inside learn)
    let mut opts = LearnOptions::new(config.parent_limit);
    opts.backend = config.backend;
    opts.delta = config.delta;
    let learned = bkbsl::learn(dataset, &opts)?;

    // BN path on a fresh engine
    let bn_engine = ProbEngine::new(dataset);
    let (_bn, bn_mdl) = bnlearn::learn_bn(
        &bn_engine,
        config.parent_limit,
        config.delta,
        config.variant,
        crate::daglearn::DEFAULT_EXACT_LIMIT,
    )?;
    let bn_calls = bn_engine.calls();

    // per-unique-world BN data bits for the alternative convention
    let bn_data_unique = {
        let worlds = crate::core::dedupe_worlds(dataset);
        let mut bits = 0.0;
        for w in &worlds {
            if let Some(q) = _bn.world_prob(&w.assignment) {
                if q > 0.0 {
                    bits -= q.log2();
                }
            }
        }
        bits
    };

    let bkb = PathReport {
        model_bits: learned.mdl.model_bits,
        data_bits: learned.data_bits_factorized,
        data_mdl_signed: -learned.data_bits_factorized,
        data_bits_unique_worlds: learned.data_bits_factorized_unique,
        unique_calls: learned.calls.unique,
        total_calls: learned.calls.total,
    };
    let bn = PathReport {
        model_bits: bn_mdl.model_bits,
        data_bits: bn_mdl.data_bits,
        data_mdl_signed: bn_mdl.data_mdl_signed(),
        data_bits_unique_worlds: bn_data_unique,
        unique_calls: bn_calls.unique,
        total_calls: bn_calls.total,
    };
    Ok(CompareReport {
        dataset: config.dataset_name.clone(),
        parent_limit: config.parent_limit,
        delta: config.delta,
        data_bits_difference: bkb.data_bits - bn.data_bits,
        calls_difference: bkb.unique_calls as i64 - bn.unique_calls as i64,
        bkb,
        bkb_data_bits_reasoner: learned.mdl.data_bits,
        bkb_model_bits_without_sources: learned.model_bits_without_sources,
        bn,
    })
}
