//! Domain types for datasets, worlds, I-nodes, S-nodes, BKBs, and fragments,
//! plus validators for the BKB semantic properties.
//!
//! A BKB `K = (G, w)` is a correlation graph over I-nodes (instantiations
//! `X = x`) and S-nodes (weighted rules `parents -> head`) subject to three
//! properties:
//!
//! 1. an S-node's parent set holds at most one instantiation per variable;
//! 2. two S-nodes supporting the same head must have mutex parent sets;
//! 3. any group of S-nodes with mutex heads and non-mutex parent sets has
//!    total weight at most one.
//!
//! [`validate_mutex`] reports violations of 2 and 3; [`is_inference`] decides
//! whether an S-node subset forms a valid inference (a world) and returns its
//! weight.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for property-3 weight sums; weights originate from count ratios,
/// so anything past this indicates a construction bug rather than rounding.
pub const WEIGHT_EPSILON: f64 = 1e-9;

/// Index of a variable within its owning variable table.
pub type VarId = usize;

/// A named discrete variable with an ordered, duplicate-free state space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn new(name: impl Into<String>, states: Vec<String>) -> Result<Self> {
        let name = name.into();
        if states.is_empty() {
            return Err(Error::Input(format!("variable {name} has no states")));
        }
        let mut seen = states.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != states.len() {
            return Err(Error::Input(format!(
                "variable {name} has duplicate state labels"
            )));
        }
        Ok(Variable { name, states })
    }

    /// Number of states `r_i`.
    pub fn arity(&self) -> usize {
        self.states.len()
    }
}

/// A complete discrete table: every row assigns one valid state index to
/// every variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    variables: Arc<Vec<Variable>>,
    rows: Vec<Vec<usize>>,
}

impl Dataset {
    pub fn new(variables: Vec<Variable>, rows: Vec<Vec<usize>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Input("dataset has no rows".into()));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != variables.len() {
                return Err(Error::Input(format!(
                    "row {r} has {} values, expected {}",
                    row.len(),
                    variables.len()
                )));
            }
            for (v, &s) in row.iter().enumerate() {
                if s >= variables[v].arity() {
                    return Err(Error::Input(format!(
                        "row {r} assigns state {s} to variable {} (arity {})",
                        variables[v].name,
                        variables[v].arity()
                    )));
                }
            }
        }
        Ok(Dataset {
            variables: Arc::new(variables),
            rows,
        })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn shared_variables(&self) -> Arc<Vec<Variable>> {
        Arc::clone(&self.variables)
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    /// Row count `N`.
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn var_index(&self, name: &str) -> Option<VarId> {
        self.variables.iter().position(|v| v.name == name)
    }

    /// `log2(m)` where `m` is the total I-node assignment space over all
    /// variables. Kept in log form so wide tables cannot overflow.
    pub fn log2_state_space(&self) -> f64 {
        self.variables.iter().map(|v| (v.arity() as f64).log2()).sum()
    }
}

/// One unique assignment in a dataset together with how many rows carry it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct World {
    pub assignment: Vec<usize>,
    pub multiplicity: usize,
}

impl World {
    /// Empirical weight numerator; the probability of the world is
    /// `multiplicity / N`, kept as exact counts until a log is taken.
    pub fn probability(&self, n: usize) -> (usize, usize) {
        (self.multiplicity, n)
    }
}

/// Unique worlds of a dataset in first-appearance order; the multiplicities
/// partition the rows.
pub fn dedupe_worlds(dataset: &Dataset) -> Vec<World> {
    let mut index: HashMap<&[usize], usize> = HashMap::new();
    let mut worlds: Vec<World> = Vec::new();
    for row in dataset.rows() {
        match index.get(row.as_slice()) {
            Some(&i) => worlds[i].multiplicity += 1,
            None => {
                index.insert(row.as_slice(), worlds.len());
                worlds.push(World {
                    assignment: row.clone(),
                    multiplicity: 1,
                });
            }
        }
    }
    worlds
}

/// An instantiation node: `variable = state`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct INode {
    pub variable: VarId,
    pub state: usize,
}

impl INode {
    pub fn new(variable: VarId, state: usize) -> Self {
        INode { variable, state }
    }
}

impl From<(usize, usize)> for INode {
    fn from((variable, state): (usize, usize)) -> Self {
        INode { variable, state }
    }
}

impl From<INode> for (usize, usize) {
    fn from(i: INode) -> Self {
        (i.variable, i.state)
    }
}

/// Two I-node sets are mutex when some variable is instantiated to different
/// states in each. Mutex is symmetric and irreflexive on parent sets.
pub fn sets_mutex(a: &[INode], b: &[INode]) -> bool {
    a.iter().any(|x| {
        b.iter()
            .any(|y| x.variable == y.variable && x.state != y.state)
    })
}

/// A support node: a weighted rule `parents -> head`. Parents are kept sorted
/// by variable id so equal rules compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SNode {
    head: INode,
    parents: Vec<INode>,
    weight: f64,
}

impl SNode {
    pub fn new(head: INode, mut parents: Vec<INode>, weight: f64) -> Result<Self> {
        parents.sort();
        for pair in parents.windows(2) {
            if pair[0].variable == pair[1].variable {
                return Err(Error::Input(format!(
                    "rule parents instantiate variable {} more than once",
                    pair[0].variable
                )));
            }
        }
        if parents.iter().any(|p| p.variable == head.variable) {
            return Err(Error::Input(format!(
                "rule head variable {} appears in its own parents",
                head.variable
            )));
        }
        if !(0.0..=1.0 + WEIGHT_EPSILON).contains(&weight) || weight.is_nan() {
            return Err(Error::Input(format!("rule weight {weight} outside [0, 1]")));
        }
        Ok(SNode {
            head,
            parents,
            weight: weight.min(1.0),
        })
    }

    pub fn head(&self) -> INode {
        self.head
    }

    pub fn parents(&self) -> &[INode] {
        &self.parents
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// All I-nodes touched by this rule: head plus parents.
    pub fn inodes(&self) -> impl Iterator<Item = INode> + '_ {
        std::iter::once(self.head).chain(self.parents.iter().copied())
    }
}

/// A correlation graph: a variable table plus a collection of S-nodes over it.
#[derive(Debug, Clone, PartialEq)]
pub struct Bkb {
    variables: Arc<Vec<Variable>>,
    snodes: Vec<SNode>,
}

impl Bkb {
    pub fn new(variables: Arc<Vec<Variable>>) -> Self {
        Bkb {
            variables,
            snodes: Vec::new(),
        }
    }

    pub fn with_snodes(variables: Arc<Vec<Variable>>, snodes: Vec<SNode>) -> Result<Self> {
        let mut bkb = Bkb::new(variables);
        for s in snodes {
            bkb.push(s)?;
        }
        Ok(bkb)
    }

    /// Adds an S-node, checking its I-nodes against the variable table.
    pub fn push(&mut self, snode: SNode) -> Result<()> {
        for inode in snode.inodes() {
            let var = self.variables.get(inode.variable).ok_or_else(|| {
                Error::Input(format!("unknown variable id {}", inode.variable))
            })?;
            if inode.state >= var.arity() {
                return Err(Error::Input(format!(
                    "state {} out of range for variable {}",
                    inode.state, var.name
                )));
            }
        }
        self.snodes.push(snode);
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn shared_variables(&self) -> Arc<Vec<Variable>> {
        Arc::clone(&self.variables)
    }

    pub fn snodes(&self) -> &[SNode] {
        &self.snodes
    }

    /// Every I-node appearing as a head or parent, deduplicated and ordered.
    pub fn inodes(&self) -> Vec<INode> {
        let mut all: Vec<INode> = self.snodes.iter().flat_map(|s| s.inodes()).collect();
        all.sort();
        all.dedup();
        all
    }
}

/// A violation reported by [`validate_mutex`]. Indices refer to
/// [`Bkb::snodes`] order.
#[derive(Debug, Clone, PartialEq)]
pub enum MutexViolation {
    /// Property 2: two S-nodes share a head but their parent sets are not
    /// mutex.
    SameHeadNotMutex { head: INode, first: usize, second: usize },
    /// Property 3: S-nodes with mutex heads and identical parent sets whose
    /// weights exceed one.
    WeightSumExceeded {
        head_variable: VarId,
        parents: Vec<INode>,
        total: f64,
        members: Vec<usize>,
    },
}

/// Reports every pair of same-head S-nodes whose parent sets are not mutex,
/// and every group of S-nodes sharing one head variable and an identical
/// parent set whose weights sum past `1 + WEIGHT_EPSILON`. An empty report
/// means the BKB satisfies the mutual-exclusion semantics. Validation never
/// aborts; it only reports.
///
/// Property 3 quantifies over arbitrary subsets; groups with an identical
/// parent-set signature are the ones every construction in this crate can
/// produce, so those are what is checked.
pub fn validate_mutex(bkb: &Bkb) -> Vec<MutexViolation> {
    let mut violations = Vec::new();

    let mut by_head: BTreeMap<INode, Vec<usize>> = BTreeMap::new();
    for (i, s) in bkb.snodes().iter().enumerate() {
        by_head.entry(s.head()).or_default().push(i);
    }
    for (head, members) in &by_head {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                let pi = bkb.snodes()[i].parents();
                let pj = bkb.snodes()[j].parents();
                if !sets_mutex(pi, pj) {
                    violations.push(MutexViolation::SameHeadNotMutex {
                        head: *head,
                        first: i,
                        second: j,
                    });
                }
            }
        }
    }

    let mut by_group: BTreeMap<(VarId, Vec<INode>), Vec<usize>> = BTreeMap::new();
    for (i, s) in bkb.snodes().iter().enumerate() {
        let key = (s.head().variable, s.parents().to_vec());
        by_group.entry(key).or_default().push(i);
    }
    for ((head_variable, parents), members) in by_group {
        let states: Vec<usize> = members
            .iter()
            .map(|&i| bkb.snodes()[i].head().state)
            .collect();
        let distinct = {
            let mut s = states.clone();
            s.sort();
            s.dedup();
            s.len()
        };
        if distinct < 2 {
            continue; // heads not mutex, property 3 does not apply
        }
        let total: f64 = members.iter().map(|&i| bkb.snodes()[i].weight()).sum();
        if total > 1.0 + WEIGHT_EPSILON {
            violations.push(MutexViolation::WeightSumExceeded {
                head_variable,
                parents,
                total,
                members,
            });
        }
    }

    violations
}

/// Decides whether the S-node subset (given by indices into [`Bkb::snodes`])
/// forms a valid inference, returning its weight `w = prod w(q)` when it does.
///
/// The induced subgraph takes every head and parent edge of the chosen
/// S-nodes, so the checks are: every I-node touched is the head of some chosen
/// S-node (well-supported), the subgraph is acyclic, and no variable is
/// instantiated twice. Well-foundedness and well-definedness hold by
/// construction of the induced edge set. The empty subset is vacuously an
/// inference of weight one.
pub fn is_inference(bkb: &Bkb, subset: &[usize]) -> Option<f64> {
    let snodes: Vec<&SNode> = subset.iter().map(|&i| &bkb.snodes()[i]).collect();

    // one instantiation per variable
    let mut state_of: HashMap<VarId, usize> = HashMap::new();
    for s in &snodes {
        for inode in s.inodes() {
            match state_of.get(&inode.variable) {
                Some(&st) if st != inode.state => return None,
                _ => {
                    state_of.insert(inode.variable, inode.state);
                }
            }
        }
    }

    // well-supported: every touched I-node has a supporting S-node in the set
    let mut head_vars: Vec<VarId> = snodes.iter().map(|s| s.head().variable).collect();
    head_vars.sort();
    head_vars.dedup();
    for s in &snodes {
        for p in s.parents() {
            if head_vars.binary_search(&p.variable).is_err() {
                return None;
            }
        }
    }

    // acyclic: since each variable carries one instantiation and each included
    // I-node is supported, cycles in the I/S graph reduce to cycles in the
    // variable-level graph induced by parent -> head edges.
    let n = snodes.len();
    let mut var_node: HashMap<VarId, Vec<usize>> = HashMap::new();
    for (i, s) in snodes.iter().enumerate() {
        var_node.entry(s.head().variable).or_default().push(i);
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, s) in snodes.iter().enumerate() {
        for p in s.parents() {
            for &j in &var_node[&p.variable] {
                adj[j].push(i); // supporter of the parent precedes this rule
            }
        }
    }
    let mut color = vec![0u8; n]; // 0 unvisited, 1 in progress, 2 done
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for start in 0..n {
        if color[start] != 0 {
            continue;
        }
        stack.push((start, 0));
        color[start] = 1;
        while let Some(&(node, edge)) = stack.last() {
            if edge < adj[node].len() {
                stack.last_mut().unwrap().1 += 1;
                let next = adj[node][edge];
                match color[next] {
                    0 => {
                        color[next] = 1;
                        stack.push((next, 0));
                    }
                    1 => return None,
                    _ => {}
                }
            } else {
                color[node] = 2;
                stack.pop();
            }
        }
    }

    Some(snodes.iter().map(|s| s.weight()).product())
}

/// A single-inference BKB tagged with its source name and reliability: the
/// unit that fusion joins. Exactly one S-node per variable, forming a valid
/// complete inference.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub bkb: Bkb,
    pub source: String,
    pub reliability: f64,
}

impl Fragment {
    pub fn new(bkb: Bkb, source: impl Into<String>, reliability: f64) -> Result<Self> {
        let source = source.into();
        if reliability <= 0.0 || !reliability.is_finite() {
            return Err(Error::Input(format!(
                "source {source} has non-positive reliability {reliability}"
            )));
        }
        if bkb.snodes().len() != bkb.variables().len() {
            return Err(Error::Input(format!(
                "fragment {source} has {} rules over {} variables; need exactly one per variable",
                bkb.snodes().len(),
                bkb.variables().len()
            )));
        }
        let mut heads: Vec<VarId> = bkb.snodes().iter().map(|s| s.head().variable).collect();
        heads.sort();
        heads.dedup();
        if heads.len() != bkb.variables().len() {
            return Err(Error::Input(format!(
                "fragment {source} does not head every variable exactly once"
            )));
        }
        let all: Vec<usize> = (0..bkb.snodes().len()).collect();
        if is_inference(&bkb, &all).is_none() {
            return Err(Error::Input(format!(
                "fragment {source} rules do not form a valid inference"
            )));
        }
        Ok(Fragment {
            bkb,
            source,
            reliability,
        })
    }

    /// The complete assignment this fragment's inference instantiates.
    pub fn world(&self) -> Vec<usize> {
        let mut assignment = vec![0usize; self.bkb.variables().len()];
        for s in self.bkb.snodes() {
            assignment[s.head().variable] = s.head().state;
        }
        assignment
    }

    /// Product of the fragment's rule weights.
    pub fn inference_weight(&self) -> f64 {
        self.bkb.snodes().iter().map(|s| s.weight()).product()
    }
}

/// The per-variable source bookkeeping minted by fusion: which sources
/// contribute rules for a data variable and with what reliabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceVariable {
    /// Data variable whose rules the sources tag.
    pub target_variable: VarId,
    /// The minted variable holding one state per contributing source.
    pub source_variable: VarId,
    /// `(label, reliability)` in state order; normalized weights are
    /// `reliability / rho` with `rho` the sum below.
    pub sources: Vec<(String, f64)>,
}

impl SourceVariable {
    /// `rho`: total reliability mass over contributing sources.
    pub fn rho(&self) -> f64 {
        self.sources.iter().map(|(_, r)| r).sum()
    }
}

/// Serialization shell for [`Bkb`]: variables, rules, and (for fused models)
/// the source bookkeeping. Weights round-trip at full binary precision.
#[derive(Debug, Serialize, Deserialize)]
pub struct BkbJson {
    pub variables: Vec<Variable>,
    pub snodes: Vec<SNodeJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sources: Option<Vec<SourceVariable>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SNodeJson {
    pub head: INode,
    pub parents: Vec<INode>,
    pub weight: f64,
}

impl Bkb {
    pub fn to_json(&self) -> BkbJson {
        BkbJson {
            variables: self.variables().to_vec(),
            snodes: self
                .snodes()
                .iter()
                .map(|s| SNodeJson {
                    head: s.head(),
                    parents: s.parents().to_vec(),
                    weight: s.weight(),
                })
                .collect(),
            sources: None,
        }
    }

    pub fn from_json(json: BkbJson) -> Result<Self> {
        let mut bkb = Bkb::new(Arc::new(json.variables));
        for s in json.snodes {
            bkb.push(SNode::new(s.head, s.parents, s.weight)?)?;
        }
        Ok(bkb)
    }
}
