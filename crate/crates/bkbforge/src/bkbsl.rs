//! End-to-end instantiation-level structure learning: deduplicate the data
//! into unique worlds, learn one minimal-entropy fragment per world, fuse the
//! fragments with source nodes, and score the result.
//!
//! Worlds are learned independently (the objective decomposes per world with
//! no cross-world coupling), so fragment learning runs on a parallel pool
//! over a shared memoizing probability engine; fusion is a deterministic
//! ordered reduce. Source labels are `row_<i>` with `i` the first row index
//! carrying the world, and reliabilities default to world multiplicities so
//! the source priors reproduce the empirical world frequencies.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::core::{dedupe_worlds, Dataset, Fragment, World};
use crate::daglearn::{self, ScoreParams};
use crate::error::{Error, Result};
use crate::fusion::{self, FusedBkb};
use crate::prob::{CallCounter, ProbEngine};
use crate::reason;
use crate::scores::{self, MdlBreakdown};

/// Which per-world solver to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Exact,
    Greedy,
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "greedy" => Ok(Backend::Greedy),
            other => Err(Error::Input(format!("unknown backend {other}"))),
        }
    }
}

/// Learner configuration.
#[derive(Debug, Clone)]
pub struct LearnOptions {
    pub parent_limit: usize,
    pub backend: Backend,
    /// Structure-penalty scale inside the per-world objective; zero is the
    /// pure minimal-entropy objective.
    pub lambda: f64,
    /// Bits per stored probability in the model-encoding term.
    pub delta: f64,
    /// Cap for the exact solver.
    pub exact_limit: usize,
    /// Reliability per source label; absent labels use world multiplicity.
    pub reliabilities: Option<BTreeMap<String, f64>>,
}

impl LearnOptions {
    pub fn new(parent_limit: usize) -> Self {
        LearnOptions {
            parent_limit,
            backend: Backend::Exact,
            lambda: 0.0,
            delta: 32.0,
            exact_limit: daglearn::DEFAULT_EXACT_LIMIT,
            reliabilities: None,
        }
    }
}

/// A learned model with its score breakdown and accounting.
#[derive(Debug, Clone)]
pub struct LearnReport {
    pub model: FusedBkb,
    /// Model bits over every rule of the fused graph (source priors
    /// included) plus reasoner-based data bits.
    pub mdl: MdlBreakdown,
    /// Model bits with the source priors excluded, for comparisons against
    /// rule sets that carry no sources.
    pub model_bits_without_sources: f64,
    /// Data bits from each training world's own fragment factorization,
    /// weighted by multiplicity. This is the like-for-like counterpart of a
    /// BN's factorized data bits.
    pub data_bits_factorized: f64,
    /// Same, summed once per unique world.
    pub data_bits_factorized_unique: f64,
    pub calls: CallCounter,
    /// `(source label, total instantiated conditional entropy)` per world.
    pub per_world_scores: Vec<(String, f64)>,
    pub wall_time: Duration,
}

/// Serializable view of a [`LearnReport`] (the model itself is saved
/// separately). Field order is fixed and maps are sorted, so equal runs
/// serialize to identical bytes; `wall_time_ms` is the one nondeterministic
/// field.
#[derive(Debug, Serialize)]
pub struct LearnReportJson {
    pub parent_limit: usize,
    pub backend: Backend,
    pub delta: f64,
    pub model_bits: f64,
    pub model_bits_without_sources: f64,
    pub data_bits: f64,
    pub data_mdl_signed: f64,
    pub data_bits_factorized: f64,
    pub data_bits_factorized_unique: f64,
    pub unique_calls: u64,
    pub total_calls: u64,
    pub per_world_entropy: Vec<(String, f64)>,
    pub wall_time_ms: u64,
}

impl LearnReport {
    pub fn to_json(&self, opts: &LearnOptions) -> LearnReportJson {
        LearnReportJson {
            parent_limit: opts.parent_limit,
            backend: opts.backend,
            delta: opts.delta,
            model_bits: self.mdl.model_bits,
            model_bits_without_sources: self.model_bits_without_sources,
            data_bits: self.mdl.data_bits,
            data_mdl_signed: self.mdl.data_mdl_signed(),
            data_bits_factorized: self.data_bits_factorized,
            data_bits_factorized_unique: self.data_bits_factorized_unique,
            unique_calls: self.calls.unique,
            total_calls: self.calls.total,
            per_world_entropy: self.per_world_scores.clone(),
            wall_time_ms: self.wall_time.as_millis() as u64,
        }
    }
}

/// Source label for a unique world: the index of its first carrying row.
pub fn world_labels(dataset: &Dataset, worlds: &[World]) -> Vec<String> {
    let mut first_row = Vec::with_capacity(worlds.len());
    let mut seen: BTreeMap<&[usize], usize> = BTreeMap::new();
    for (i, row) in dataset.rows().iter().enumerate() {
        seen.entry(row.as_slice()).or_insert(i);
    }
    for w in worlds {
        first_row.push(format!("row_{}", seen[w.assignment.as_slice()]));
    }
    first_row
}

/// Learns one fragment per unique world and fuses them.
pub fn learn(dataset: &Dataset, opts: &LearnOptions) -> Result<LearnReport> {
    let start = Instant::now();
    let engine = ProbEngine::new(dataset);
    let worlds = dedupe_worlds(dataset);
    let labels = world_labels(dataset, &worlds);
    let params = ScoreParams {
        parent_limit: opts.parent_limit,
        lambda: opts.lambda,
        delta: opts.delta,
        log2_m: dataset.log2_state_space(),
    };

    let solved: Vec<(Fragment, f64)> = worlds
        .par_iter()
        .zip(labels.par_iter())
        .map(|(world, label)| -> Result<(Fragment, f64)> {
            let table = daglearn::build_score_table(&engine, world, &params)?;
            let dag = match opts.backend {
                Backend::Exact => daglearn::solve_exact_with_limit(&table, opts.exact_limit)?,
                Backend::Greedy => daglearn::solve_greedy(&table),
            };
            let reliability = opts
                .reliabilities
                .as_ref()
                .and_then(|m| m.get(label).copied())
                .unwrap_or(world.multiplicity as f64);
            let fragment =
                daglearn::dag_to_fragment(&dag, world, &engine, label.clone(), reliability)?;
            // report pure entropy regardless of the lambda knob
            let entropy: f64 = fragment
                .bkb
                .snodes()
                .iter()
                .map(|s| engine.inst_cond_entropy(s.head(), s.parents()))
                .sum::<Result<f64>>()?;
            Ok((fragment, entropy))
        })
        .collect::<Result<Vec<_>>>()?;

    let fragments: Vec<Fragment> = solved.iter().map(|(f, _)| f.clone()).collect();
    let per_world_scores: Vec<(String, f64)> = labels
        .iter()
        .cloned()
        .zip(solved.iter().map(|(_, e)| *e))
        .collect();

    let model = fusion::fuse(&fragments)?;
    debug_assert!(fusion::mutex_audit(&model).is_empty());

    let log2_m = dataset.log2_state_space();
    let model_bits = scores::bkb_model_bits(model.bkb(), log2_m, opts.delta);
    let model_bits_without_sources = scores::model_bits_for_sizes(
        model
            .bkb()
            .snodes()
            .iter()
            .filter(|s| s.head().variable < model.num_data_vars())
            .map(|s| s.parents().len()),
        log2_m,
        opts.delta,
    );
    let data_bits = scores::data_bits(
        |w| reason::world_probability(&model, &w.assignment).unwrap_or(0.0),
        dataset,
    )?;
    let mut data_bits_factorized = 0.0;
    let mut data_bits_factorized_unique = 0.0;
    for (fragment, _) in &solved {
        let w = fragment.inference_weight();
        if w <= 0.0 {
            return Err(Error::CannotEncode(format!(
                "fragment {} carries zero weight",
                fragment.source
            )));
        }
        let mult = worlds
            .iter()
            .find(|x| x.assignment == fragment.world())
            .map(|x| x.multiplicity)
            .unwrap_or(1) as f64;
        data_bits_factorized -= mult * w.log2();
        data_bits_factorized_unique -= w.log2();
    }

    Ok(LearnReport {
        model,
        mdl: MdlBreakdown {
            model_bits,
            data_bits,
            delta: opts.delta,
            log2_m,
            n: dataset.num_vars(),
            variant: None,
        },
        model_bits_without_sources,
        data_bits_factorized,
        data_bits_factorized_unique,
        calls: engine.calls(),
        per_world_scores,
        wall_time: start.elapsed(),
    })
}

/// Data score of a model on a dataset through the reasoner: both the
/// nonnegative encoding bits and the signed table convention. Fails listing
/// every world the model cannot cover.
pub fn data_mdl_of(model: &FusedBkb, dataset: &Dataset) -> Result<(f64, f64)> {
    let worlds = dedupe_worlds(dataset);
    let mut uncovered = Vec::new();
    let mut bits = 0.0;
    for world in &worlds {
        let q = reason::world_probability(model, &world.assignment)?;
        if q <= 0.0 {
            uncovered.push(world.assignment.clone());
        } else {
            bits -= world.multiplicity as f64 * q.log2();
        }
    }
    if !uncovered.is_empty() {
        return Err(Error::CannotEncode(format!(
            "{} of {} worlds have zero probability under the model: {:?}",
            uncovered.len(),
            worlds.len(),
            uncovered
        )));
    }
    Ok((bits, -bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{validate_mutex, Variable};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dataset(arities: &[usize], rows: Vec<Vec<usize>>) -> Dataset {
        let vars: Vec<Variable> = arities
            .iter()
            .enumerate()
            .map(|(i, &r)| {
                Variable::new(format!("V{i}"), (0..r).map(|s| s.to_string()).collect()).unwrap()
            })
            .collect();
        Dataset::new(vars, rows).unwrap()
    }

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize, rows: usize) -> Dataset {
        let arities: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=3)).collect();
        let data = (0..rows)
            .map(|_| arities.iter().map(|&r| rng.gen_range(0..r)).collect())
            .collect();
        dataset(&arities, data)
    }

    #[test]
    fn repeated_single_row_yields_certain_model() {
        let ds = dataset(&[2, 3], vec![vec![1, 2]; 5]);
        let report = learn(&ds, &LearnOptions::new(1)).unwrap();
        assert_eq!(report.per_world_scores.len(), 1);
        let q = reason::world_probability(&report.model, &[1, 2]).unwrap();
        assert!((q - 1.0).abs() < 1e-12);
        assert_eq!(report.mdl.data_bits, 0.0);
        assert_eq!(report.data_bits_factorized, 0.0);
    }

    #[test]
    fn training_worlds_are_always_covered() {
        let mut rng = ChaCha8Rng::seed_from_u64(127);
        for _ in 0..15 {
            let rows = rng.gen_range(3..=12);
            let ds = random_dataset(&mut rng, 3, rows);
            let report = learn(&ds, &LearnOptions::new(2)).unwrap();
            for world in dedupe_worlds(&ds) {
                let q = reason::world_probability(&report.model, &world.assignment).unwrap();
                assert!(q > 0.0, "training world {:?} uncovered", world.assignment);
            }
            let (bits, signed) = data_mdl_of(&report.model, &ds).unwrap();
            assert!((bits + signed).abs() < 1e-12);
            assert!((bits - report.mdl.data_bits).abs() < 1e-9);
        }
    }

    #[test]
    fn fused_output_passes_mutex_and_counts_calls() {
        let mut rng = ChaCha8Rng::seed_from_u64(131);
        let ds = random_dataset(&mut rng, 4, 10);
        let report = learn(&ds, &LearnOptions::new(2)).unwrap();
        assert!(validate_mutex(report.model.bkb()).is_empty());
        assert!(report.calls.unique > 0);
        assert!(report.calls.total >= report.calls.unique);
        assert_eq!(
            report.per_world_scores.len(),
            dedupe_worlds(&ds).len()
        );
    }

    #[test]
    fn objective_decomposes_per_world() {
        // total of the reported per-world entropies equals re-solving each
        // world in isolation; no cross-world coupling
        let mut rng = ChaCha8Rng::seed_from_u64(137);
        let ds = random_dataset(&mut rng, 3, 10);
        let report = learn(&ds, &LearnOptions::new(2)).unwrap();
        let engine = ProbEngine::new(&ds);
        for (world, (_, got)) in dedupe_worlds(&ds).iter().zip(&report.per_world_scores) {
            let table = daglearn::build_score_table(
                &engine,
                world,
                &ScoreParams::entropy_only(2),
            )
            .unwrap();
            let dag = daglearn::solve_exact(&table).unwrap();
            assert!((dag.total_score - got).abs() < 1e-12);
        }
    }

    #[test]
    fn row_permutation_learns_an_isomorphic_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(139);
        let ds = random_dataset(&mut rng, 3, 8);
        let mut rows = ds.rows().to_vec();
        rows.shuffle(&mut rng);
        let permuted = Dataset::new(ds.variables().to_vec(), rows).unwrap();
        let a = learn(&ds, &LearnOptions::new(1)).unwrap();
        let b = learn(&permuted, &LearnOptions::new(1)).unwrap();
        // structurally identical up to source labels: compare signatures
        // after mapping each label to the world content it names
        let relabel = |report: &LearnReport, data: &Dataset| {
            let worlds = dedupe_worlds(data);
            let labels = world_labels(data, &worlds);
            let by_label: BTreeMap<&str, &World> = labels
                .iter()
                .map(|l| l.as_str())
                .zip(worlds.iter())
                .collect();
            let mut sig = report.model.canonical_signature();
            for (head, parents, _) in &mut sig {
                for part in std::iter::once(head).chain(parents.iter_mut()) {
                    if let Some(rest) = part.strip_prefix("__source__") {
                        let (var, label) = rest.split_once('=').unwrap();
                        let world = &by_label[label];
                        *part = format!("src:{var}={:?}", world.assignment);
                    }
                }
                parents.sort();
            }
            sig.sort();
            sig
        };
        assert_eq!(relabel(&a, &ds), relabel(&b, &permuted));
    }

    #[test]
    fn reliability_override_is_applied() {
        let ds = dataset(&[2], vec![vec![0], vec![0], vec![1]]);
        let mut opts = LearnOptions::new(0);
        let mut map = BTreeMap::new();
        map.insert("row_0".to_string(), 6.0);
        map.insert("row_2".to_string(), 2.0);
        opts.reliabilities = Some(map);
        let report = learn(&ds, &opts).unwrap();
        let sv = &report.model.source_vars()[0];
        assert_eq!(sv.sources[0], ("row_0".to_string(), 6.0));
        assert_eq!(sv.sources[1], ("row_2".to_string(), 2.0));
        // priors normalize to 0.75 / 0.25
        let priors: Vec<f64> = report.model.rules_for(0).iter().map(|r| r.prior).collect();
        assert!((priors[0] - 0.75).abs() < 1e-12);
        assert!((priors[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn greedy_backend_runs_and_scores_no_better_than_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(149);
        let ds = random_dataset(&mut rng, 4, 12);
        let exact = learn(&ds, &LearnOptions::new(2)).unwrap();
        let mut opts = LearnOptions::new(2);
        opts.backend = Backend::Greedy;
        let greedy = learn(&ds, &opts).unwrap();
        let total = |r: &LearnReport| -> f64 { r.per_world_scores.iter().map(|(_, s)| s).sum() };
        assert!(total(&greedy) >= total(&exact) - 1e-9);
    }

    #[test]
    fn evaluating_on_unseen_worlds_reports_them() {
        let train = dataset(&[2, 2], vec![vec![0, 0], vec![0, 0], vec![1, 1]]);
        let report = learn(&train, &LearnOptions::new(1)).unwrap();
        let test = dataset(&[2, 2], vec![vec![1, 0]]);
        match data_mdl_of(&report.model, &test) {
            Err(Error::CannotEncode(msg)) => assert!(msg.contains("[1, 0]")),
            other => panic!("expected cannot-encode, got {other:?}"),
        }
    }

    #[test]
    fn empty_dataset_is_rejected_at_construction() {
        let vars = vec![Variable::new("A", vec!["0".into()]).unwrap()];
        assert!(Dataset::new(vars, vec![]).is_err());
    }
}
