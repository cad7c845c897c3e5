//! Seeded stratified k-fold cross-validation comparing the fused-model
//! learner against the exact MDL Bayesian network on a classification
//! target, with macro-averaged precision, recall, and F1 plus abstention
//! counts.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bkbsl::{self, LearnOptions};
use crate::bnlearn;
use crate::core::{Dataset, VarId};
use crate::error::{Error, Result};
use crate::prob::ProbEngine;
use crate::reason::{self, Evidence};

use super::ExperimentConfig;

/// Macro metrics for one model, averaged over folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRow {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Test rows on which every class state scored zero.
    pub failed: usize,
}

/// Cross-validation outcome for one dataset.
#[derive(Debug, Clone, Serialize)]
pub struct CvReport {
    pub dataset: String,
    pub target: String,
    pub folds: usize,
    pub seed: u64,
    pub parent_limit: usize,
    pub bkb: MetricsRow,
    pub bn: MetricsRow,
    pub per_fold_bkb_f1: Vec<f64>,
    pub per_fold_bn_f1: Vec<f64>,
}

impl CvReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16} {:>9} {:>9} {:>9} {:>8}\n",
            "model", "precision", "recall", "f1", "failed"
        ));
        for (name, row) in [("fused-bkb", &self.bkb), ("bn", &self.bn)] {
            out.push_str(&format!(
                "{:<16} {:>9.3} {:>9.3} {:>9.3} {:>8}\n",
                name, row.precision, row.recall, row.f1, row.failed
            ));
        }
        out
    }
}

/// Per-row fold ids: rows of each class are shuffled with the seed and dealt
/// round-robin, so every fold sees every class when counts allow.
pub fn stratified_folds(dataset: &Dataset, target: VarId, folds: usize, seed: u64) -> Vec<usize> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, row) in dataset.rows().iter().enumerate() {
        by_class.entry(row[target]).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; dataset.num_rows()];
    for (_, mut rows) in by_class {
        rows.shuffle(&mut rng);
        for (pos, row) in rows.into_iter().enumerate() {
            fold_of[row] = pos % folds;
        }
    }
    fold_of
}

/// Confusion counts: `(actual, Some(predicted))` or `(actual, None)` for an
/// abstention.
type Confusion = BTreeMap<(usize, Option<usize>), usize>;

/// Macro precision/recall/F1 over all `n_classes`; absent denominators score
/// zero, and abstentions count against recall only.
pub fn macro_metrics(confusion: &Confusion, n_classes: usize) -> (f64, f64, f64) {
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut f1_sum = 0.0;
    for class in 0..n_classes {
        let tp = *confusion.get(&(class, Some(class))).unwrap_or(&0) as f64;
        let predicted: f64 = confusion
            .iter()
            .filter(|&(&(_, p), _)| p == Some(class))
            .map(|(_, &c)| c as f64)
            .sum();
        let actual: f64 = confusion
            .iter()
            .filter(|&(&(a, _), _)| a == class)
            .map(|(_, &c)| c as f64)
            .sum();
        let p = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let r = if actual > 0.0 { tp / actual } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        precision_sum += p;
        recall_sum += r;
        f1_sum += f;
    }
    let k = n_classes as f64;
    (precision_sum / k, recall_sum / k, f1_sum / k)
}

/// Runs the cross-validation on a fully categorical dataset.
pub fn crossval(dataset: &Dataset, config: &ExperimentConfig) -> Result<CvReport> {
    if config.folds < 2 {
        return Err(Error::Input("cross-validation needs at least 2 folds".into()));
    }
    let target = dataset
        .var_index(&config.target)
        .ok_or_else(|| Error::Input(format!("unknown target variable {}", config.target)))?;
    let n_classes = dataset.variables()[target].arity();
    let fold_of = stratified_folds(dataset, target, config.folds, config.seed);

    let fold_results: Vec<(Confusion, Confusion)> = (0..config.folds)
        .map(|fold| -> Result<(Confusion, Confusion)> {
            let train_rows: Vec<Vec<usize>> = dataset
                .rows()
                .iter()
                .enumerate()
                .filter(|&(i, _)| fold_of[i] != fold)
                .map(|(_, r)| r.clone())
                .collect();
            let test_rows: Vec<Vec<usize>> = dataset
                .rows()
                .iter()
                .enumerate()
                .filter(|&(i, _)| fold_of[i] == fold)
                .map(|(_, r)| r.clone())
                .collect();
            if train_rows.is_empty() || test_rows.is_empty() {
                return Err(Error::Input(format!(
                    "fold {fold} is degenerate; lower the fold count"
                )));
            }
            let train = Dataset::new(dataset.variables().to_vec(), train_rows)?;

            let mut opts = LearnOptions::new(config.parent_limit);
            opts.backend = config.backend;
            opts.delta = config.delta;
            let report = bkbsl::learn(&train, &opts)?;

            let engine = ProbEngine::new(&train);
            let (bn, _) = bnlearn::learn_bn(
                &engine,
                config.parent_limit,
                config.delta,
                config.variant,
                crate::daglearn::DEFAULT_EXACT_LIMIT,
            )?;

            let mut bkb_confusion: Confusion = BTreeMap::new();
            let mut bn_confusion: Confusion = BTreeMap::new();
            for row in &test_rows {
                let evidence = Evidence::new(
                    row.iter()
                        .copied()
                        .enumerate()
                        .filter(|&(v, _)| v != target)
                        .collect(),
                )?;
                let prediction = reason::classify(&report.model, &evidence, target)?;
                *bkb_confusion.entry((row[target], prediction.state)).or_insert(0) += 1;
                let bn_state = bn.classify(row, target);
                *bn_confusion.entry((row[target], bn_state)).or_insert(0) += 1;
            }
            Ok((bkb_confusion, bn_confusion))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut bkb_metrics = Vec::new();
    let mut bn_metrics = Vec::new();
    let mut bkb_failed = 0;
    let mut bn_failed = 0;
    for (bkb_conf, bn_conf) in &fold_results {
        bkb_metrics.push(macro_metrics(bkb_conf, n_classes));
        bn_metrics.push(macro_metrics(bn_conf, n_classes));
        bkb_failed += bkb_conf
            .iter()
            .filter(|&(&(_, p), _)| p.is_none())
            .map(|(_, &c)| c)
            .sum::<usize>();
        bn_failed += bn_conf
            .iter()
            .filter(|&(&(_, p), _)| p.is_none())
            .map(|(_, &c)| c)
            .sum::<usize>();
    }
    let mean = |xs: &[(f64, f64, f64)], pick: fn(&(f64, f64, f64)) -> f64| {
        xs.iter().map(pick).sum::<f64>() / xs.len() as f64
    };
    Ok(CvReport {
        dataset: config.dataset_name.clone(),
        target: config.target.clone(),
        folds: config.folds,
        seed: config.seed,
        parent_limit: config.parent_limit,
        bkb: MetricsRow {
            precision: mean(&bkb_metrics, |m| m.0),
            recall: mean(&bkb_metrics, |m| m.1),
            f1: mean(&bkb_metrics, |m| m.2),
            failed: bkb_failed,
        },
        bn: MetricsRow {
            precision: mean(&bn_metrics, |m| m.0),
            recall: mean(&bn_metrics, |m| m.1),
            f1: mean(&bn_metrics, |m| m.2),
            failed: bn_failed,
        },
        per_fold_bkb_f1: bkb_metrics.iter().map(|m| m.2).collect(),
        per_fold_bn_f1: bn_metrics.iter().map(|m| m.2).collect(),
    })
}
