//! Empirical joint-probability engine over a dataset, with memoization and
//! unique-call accounting, plus the instantiated entropy and
//! mutual-information quantities that drive structure learning.
//!
//! Probabilities come from raw dataset counts with no estimation by default;
//! an optional Laplace term is available as a knob. Counts are memoized by a
//! canonical query key (sorted `(variable, state)` pairs), so the number of
//! unique keys ever computed is a machine-independent complexity measure that
//! can be compared across learning algorithms.

use std::sync::atomic::{AtomicU64, Ordering};

use dashmap::DashMap;

use crate::core::{Dataset, INode, VarId};
use crate::error::{Error, Result};

/// A partial assignment in canonical form: sorted by variable id, at most one
/// state per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query(Vec<(VarId, usize)>);

impl Query {
    pub fn new(mut pairs: Vec<(VarId, usize)>) -> Result<Self> {
        pairs.sort();
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                if w[0].1 == w[1].1 {
                    continue;
                }
                return Err(Error::Input(format!(
                    "query assigns two states to variable {}",
                    w[0].0
                )));
            }
        }
        pairs.dedup();
        Ok(Query(pairs))
    }

    pub fn empty() -> Self {
        Query(Vec::new())
    }

    pub fn from_inodes(inodes: impl IntoIterator<Item = INode>) -> Result<Self> {
        Query::new(inodes.into_iter().map(|i| (i.variable, i.state)).collect())
    }

    pub fn pairs(&self) -> &[(VarId, usize)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Snapshot of the engine's call accounting. `unique` equals the memo-table
/// size; `total` counts every lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CallCounter {
    pub unique: u64,
    pub total: u64,
}

/// Joint, head-marginal, and parent-marginal probabilities entering one
/// instantiated local score.
#[derive(Debug, Clone, Copy)]
pub struct LocalScoreInputs {
    pub joint: f64,
    pub parent_marginal: f64,
    pub head_marginal: f64,
}

/// Memoizing count engine over one dataset. Queries may run concurrently; the
/// memo behaves as a single logical map (one stored value and one unique
/// increment per key), and counters are atomic.
pub struct ProbEngine<'d> {
    dataset: &'d Dataset,
    memo: DashMap<Query, u64>,
    total: AtomicU64,
    laplace: f64,
}

impl<'d> ProbEngine<'d> {
    pub fn new(dataset: &'d Dataset) -> Self {
        ProbEngine {
            dataset,
            memo: DashMap::new(),
            total: AtomicU64::new(0),
            laplace: 0.0,
        }
    }

    /// Adds `alpha` pseudo-counts per cell of each queried table. Zero keeps
    /// raw counts.
    pub fn with_laplace(dataset: &'d Dataset, alpha: f64) -> Self {
        let mut e = ProbEngine::new(dataset);
        e.laplace = alpha;
        e
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    fn check_query(&self, query: &Query) -> Result<()> {
        for &(v, s) in query.pairs() {
            let var = self
                .dataset
                .variables()
                .get(v)
                .ok_or_else(|| Error::Input(format!("query names unknown variable id {v}")))?;
            if s >= var.arity() {
                return Err(Error::Input(format!(
                    "query state {s} out of range for variable {}",
                    var.name
                )));
            }
        }
        Ok(())
    }

    /// Number of rows consistent with the query, memoized.
    pub fn count(&self, query: &Query) -> Result<u64> {
        self.check_query(query)?;
        self.total.fetch_add(1, Ordering::Relaxed);
        if let Some(c) = self.memo.get(query) {
            return Ok(*c);
        }
        let c = *self.memo.entry(query.clone()).or_insert_with(|| {
            self.dataset
                .rows()
                .iter()
                .filter(|row| query.pairs().iter().all(|&(v, s)| row[v] == s))
                .count() as u64
        });
        Ok(c)
    }

    /// `(count, N)`: the exact rational probability of the query.
    pub fn prob_exact(&self, query: &Query) -> Result<(u64, u64)> {
        Ok((self.count(query)?, self.dataset.num_rows() as u64))
    }

    /// Probability as a float; with a Laplace knob the denominator grows by
    /// `alpha` per joint cell of the queried variables.
    pub fn prob(&self, query: &Query) -> Result<f64> {
        let (c, n) = self.prob_exact(query)?;
        if self.laplace == 0.0 {
            return Ok(c as f64 / n as f64);
        }
        let cells: f64 = query
            .pairs()
            .iter()
            .map(|&(v, _)| self.dataset.variables()[v].arity() as f64)
            .product();
        Ok((c as f64 + self.laplace) / (n as f64 + self.laplace * cells))
    }

    pub fn calls(&self) -> CallCounter {
        CallCounter {
            unique: self.memo.len() as u64,
            total: self.total.load(Ordering::Relaxed),
        }
    }

    fn joint_and_parent(&self, head: INode, parents: &[INode]) -> Result<(u64, u64)> {
        if parents.iter().any(|p| p.variable == head.variable) {
            return Err(Error::Input(format!(
                "head variable {} appears among parents",
                head.variable
            )));
        }
        let joint = Query::from_inodes(parents.iter().copied().chain([head]))?;
        let parent = Query::from_inodes(parents.iter().copied())?;
        Ok((self.count(&joint)?, self.count(&parent)?))
    }

    /// The probabilities entering one instantiated score.
    pub fn local_inputs(&self, head: INode, parents: &[INode]) -> Result<LocalScoreInputs> {
        let (cj, cp) = self.joint_and_parent(head, parents)?;
        let ch = self.count(&Query::from_inodes([head])?)?;
        let n = self.dataset.num_rows() as f64;
        Ok(LocalScoreInputs {
            joint: cj as f64 / n,
            parent_marginal: cp as f64 / n,
            head_marginal: ch as f64 / n,
        })
    }

    /// Instantiated conditional entropy
    /// `-p(x, pi) * log2(p(x, pi) / p(pi))`, nonnegative, with the
    /// `0 * log 0 = 0` convention. Zero exactly when the joint count is zero
    /// or the rule is deterministic (joint count equals parent count).
    pub fn inst_cond_entropy(&self, head: INode, parents: &[INode]) -> Result<f64> {
        let (cj, cp) = self.joint_and_parent(head, parents)?;
        if cj == 0 || cj == cp {
            return Ok(0.0);
        }
        let n = self.dataset.num_rows() as f64;
        Ok(-(cj as f64 / n) * (cj as f64 / cp as f64).log2())
    }

    /// One instantiated mutual-information summand
    /// `p(x, pi) * log2(p(x, pi) / (p(x) p(pi)))`; zero when any involved
    /// probability is zero.
    pub fn inst_mutual_info(&self, head: INode, parents: &[INode]) -> Result<f64> {
        let (cj, cp) = self.joint_and_parent(head, parents)?;
        if cj == 0 {
            return Ok(0.0);
        }
        let ch = self.count(&Query::from_inodes([head])?)?;
        let n = self.dataset.num_rows() as f64;
        // p(x,pi) / (p(x) p(pi)) = cj * N / (ch * cp)
        Ok((cj as f64 / n) * ((cj as f64 * n) / (ch as f64 * cp as f64)).log2())
    }

    /// Variable-level mutual information `I(X; Pi)`: the instantiated
    /// summands accumulated over every joint instantiation of the head and
    /// parent variables. Always nonnegative.
    pub fn rv_mutual_info(&self, variable: VarId, parent_variables: &[VarId]) -> Result<f64> {
        if parent_variables.contains(&variable) {
            return Err(Error::Input(format!(
                "variable {variable} appears among its own parents"
            )));
        }
        let r_head = self.dataset.variables()[variable].arity();
        let mut total = 0.0;
        for head_state in 0..r_head {
            let head = INode::new(variable, head_state);
            for config in StateConfigs::new(self.dataset, parent_variables) {
                let parents: Vec<INode> = parent_variables
                    .iter()
                    .zip(&config)
                    .map(|(&v, &s)| INode::new(v, s))
                    .collect();
                total += self.inst_mutual_info(head, &parents)?;
            }
        }
        Ok(total)
    }
}

/// Iterator over all state configurations of a variable list in odometer
/// order; an empty list yields the one empty configuration.
pub struct StateConfigs {
    arities: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl StateConfigs {
    pub fn new(dataset: &Dataset, variables: &[VarId]) -> Self {
        let arities: Vec<usize> = variables
            .iter()
            .map(|&v| dataset.variables()[v].arity())
            .collect();
        StateConfigs {
            next: Some(vec![0; arities.len()]),
            arities,
        }
    }
}

impl Iterator for StateConfigs {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut i = succ.len();
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            succ[i] += 1;
            if succ[i] < self.arities[i] {
                self.next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(current)
    }
}
