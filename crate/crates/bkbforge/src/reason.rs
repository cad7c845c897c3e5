//! Inference over fused BKBs: complete-world probability, bounded
//! marginalization for partial evidence, and classification with abstention.
//!
//! The probability of a complete world is the summed weight of every valid
//! complete inference consistent with it. In a fused model an inference picks
//! one (source, rule) choice per data variable, the priors of the chosen
//! sources come along through the support requirement, and the only
//! cross-variable constraint left is acyclicity of the chosen rules' parent
//! graph. Choices therefore factor per variable except inside strongly
//! connected components of the potential-dependency graph, where an
//! inclusion-exclusion over sink sets recovers the exact acyclic-only sum.
//! The factorization is checked against direct enumeration of inference
//! subgraphs in the tests rather than assumed.

use crate::core::VarId;
use crate::error::{Error, Result};
use crate::fusion::FusedBkb;

/// Default cap on unassigned variables in [`marginal`].
pub const DEFAULT_MAX_FREE_VARS: usize = 12;

/// Cap on the size of a strongly connected component in the exact sum; the
/// subset DP costs `3^|component|`.
const MAX_COMPONENT: usize = 18;

/// A partial assignment over the data variables of a model.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Evidence {
    pairs: Vec<(VarId, usize)>,
}

impl Evidence {
    pub fn new(mut pairs: Vec<(VarId, usize)>) -> Result<Self> {
        pairs.sort();
        pairs.dedup();
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Input(format!(
                    "evidence assigns two states to variable {}",
                    w[0].0
                )));
            }
        }
        Ok(Evidence { pairs })
    }

    pub fn pairs(&self) -> &[(VarId, usize)] {
        &self.pairs
    }

    pub fn get(&self, v: VarId) -> Option<usize> {
        self.pairs
            .iter()
            .find(|&&(u, _)| u == v)
            .map(|&(_, s)| s)
    }
}

/// Outcome of a classification query: per-state joint scores and either the
/// argmax state or an abstention when every state scores zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub target: VarId,
    pub scores: Vec<f64>,
    pub state: Option<usize>,
}

impl Prediction {
    pub fn abstained(&self) -> bool {
        self.state.is_none()
    }
}

/// One selectable rule for a variable during evaluation: combined weight
/// (rule weight times source prior) and the data-parent variables it needs.
#[derive(Debug, Clone, Copy)]
struct Choice {
    weight: f64,
    parent_vars: u64,
}

/// Probability of a complete world: the exact sum over valid complete
/// inferences consistent with it. Zero as soon as one variable has no
/// consistent rule (the non-generalizable case).
pub fn world_probability(fused: &FusedBkb, world: &[usize]) -> Result<f64> {
    let n = fused.num_data_vars();
    if world.len() != n {
        return Err(Error::Input(format!(
            "world has {} values, model has {n} data variables",
            world.len()
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let mut choices: Vec<Vec<Choice>> = Vec::with_capacity(n);
    for v in 0..n {
        let mut list = Vec::new();
        for rule in fused.rules_for(v) {
            let s = &fused.bkb().snodes()[rule.snode];
            if s.head().state != world[v] {
                continue;
            }
            let mut mask = 0u64;
            let mut ok = true;
            for p in s.parents() {
                if fused.is_source_var(p.variable) {
                    continue;
                }
                if world[p.variable] != p.state {
                    ok = false;
                    break;
                }
                mask |= 1 << p.variable;
            }
            if ok {
                list.push(Choice {
                    weight: s.weight() * rule.prior,
                    parent_vars: mask,
                });
            }
        }
        if list.is_empty() {
            return Ok(0.0);
        }
        choices.push(list);
    }
    acyclic_selection_sum(&choices)
}

/// Weighted sum over per-variable choice selections whose combined parent
/// graph is acyclic, factorized over strongly connected components of the
/// potential-dependency graph.
fn acyclic_selection_sum(choices: &[Vec<Choice>]) -> Result<f64> {
    let n = choices.len();
    let mut dep = vec![0u64; n]; // dep[i]: union of possible parents of i
    for (i, list) in choices.iter().enumerate() {
        for c in list {
            dep[i] |= c.parent_vars;
        }
    }
    let components = tarjan_sccs(&dep);
    let mut total = 1.0;
    for comp in components {
        if comp.len() == 1 {
            let i = comp[0];
            total *= choices[i].iter().map(|c| c.weight).sum::<f64>();
        } else {
            if comp.len() > MAX_COMPONENT {
                return Err(Error::Capacity(format!(
                    "cyclic dependency component of {} variables exceeds the exact bound {MAX_COMPONENT}",
                    comp.len()
                )));
            }
            total *= component_sum(&comp, choices);
        }
        if total == 0.0 {
            return Ok(0.0);
        }
    }
    Ok(total)
}

/// Exact acyclic-only sum within one component: `f(U)` accumulates over
/// nonempty sink sets `T` with alternating sign, where a sink's choices may
/// only use in-component parents outside `T`.
fn component_sum(comp: &[usize], choices: &[Vec<Choice>]) -> f64 {
    let m = comp.len();
    let comp_mask: u64 = comp.iter().map(|&v| 1u64 << v).sum();
    let to_global: Vec<u64> = comp.iter().map(|&v| 1u64 << v).collect();
    // a[i][allowed]: total weight of i's choices whose in-component parents
    // lie inside `allowed` (a local mask)
    let a = |i: usize, allowed: usize| -> f64 {
        let mut allowed_global = 0u64;
        for (b, &g) in to_global.iter().enumerate() {
            if allowed >> b & 1 == 1 {
                allowed_global |= g;
            }
        }
        choices[comp[i]]
            .iter()
            .filter(|c| c.parent_vars & comp_mask & !allowed_global == 0)
            .map(|c| c.weight)
            .sum()
    };
    let mut f = vec![0.0f64; 1 << m];
    f[0] = 1.0;
    for u in 1usize..(1 << m) {
        let mut acc = 0.0;
        // every nonempty subset t of u acts as the final sink set
        let mut t = u;
        while t != 0 {
            let rest = u & !t;
            let mut prod = f[rest];
            let mut bits = t;
            while prod != 0.0 && bits != 0 {
                let b = bits.trailing_zeros() as usize;
                prod *= a(b, rest);
                bits &= bits - 1;
            }
            if t.count_ones() % 2 == 1 {
                acc += prod;
            } else {
                acc -= prod;
            }
            t = (t - 1) & u;
        }
        f[u] = acc;
    }
    f[(1 << m) - 1]
}

/// Strongly connected components of the dependency graph `dep[i] -> i`,
/// returned in a deterministic order.
fn tarjan_sccs(dep: &[u64]) -> Vec<Vec<usize>> {
    let n = dep.len();
    // successors: j such that i in dep[j]
    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, &mask) in dep.iter().enumerate() {
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            if i < n {
                succ[i].push(j);
            }
            bits &= bits - 1;
        }
    }
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut next_index = 0;
    let mut sccs = Vec::new();
    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        call.push((start, 0));
        index[start] = next_index;
        low[start] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start] = true;
        while let Some(&(v, ei)) = call.last() {
            if ei < succ[v].len() {
                call.last_mut().unwrap().1 += 1;
                let w = succ[v][ei];
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort();
                    sccs.push(comp);
                }
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
            }
        }
    }
    sccs.sort();
    sccs
}

/// Sum of [`world_probability`] over every completion of the evidence.
/// Refuses more than `max_free_vars` unassigned variables.
pub fn marginal(fused: &FusedBkb, evidence: &Evidence, max_free_vars: usize) -> Result<f64> {
    let n = fused.num_data_vars();
    for &(v, s) in evidence.pairs() {
        if v >= n {
            return Err(Error::Input(format!("evidence names unknown variable {v}")));
        }
        if s >= fused.data_variables()[v].arity() {
            return Err(Error::Input(format!(
                "evidence state {s} out of range for variable {}",
                fused.data_variables()[v].name
            )));
        }
    }
    let free: Vec<VarId> = (0..n).filter(|&v| evidence.get(v).is_none()).collect();
    if free.len() > max_free_vars {
        return Err(Error::Capacity(format!(
            "{} free variables exceed the marginalization bound {max_free_vars}; \
             use classification over a single target instead",
            free.len()
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let mut world: Vec<usize> = (0..n).map(|v| evidence.get(v).unwrap_or(0)).collect();
    let arities: Vec<usize> = free
        .iter()
        .map(|&v| fused.data_variables()[v].arity())
        .collect();
    let mut total = 0.0;
    let mut odometer = vec![0usize; free.len()];
    loop {
        for (slot, &v) in free.iter().enumerate() {
            world[v] = odometer[slot];
        }
        total += world_probability(fused, &world)?;
        let mut i = free.len();
        loop {
            if i == 0 {
                return Ok(total);
            }
            i -= 1;
            odometer[i] += 1;
            if odometer[i] < arities[i] {
                break;
            }
            odometer[i] = 0;
        }
    }
}

/// Most likely state of `target` given evidence over every other data
/// variable. Scores are the joint world probabilities per state; ties break
/// to the lowest state index; all-zero scores abstain.
pub fn classify(fused: &FusedBkb, evidence: &Evidence, target: VarId) -> Result<Prediction> {
    let n = fused.num_data_vars();
    if target >= n {
        return Err(Error::Input(format!("unknown target variable {target}")));
    }
    let mut world = vec![0usize; n];
    for v in 0..n {
        if v == target {
            continue;
        }
        match evidence.get(v) {
            Some(s) => world[v] = s,
            None => {
                return Err(Error::Input(format!(
                    "classification evidence must assign every non-target variable; {} is free",
                    fused.data_variables()[v].name
                )))
            }
        }
    }
    let arity = fused.data_variables()[target].arity();
    let mut scores = Vec::with_capacity(arity);
    for state in 0..arity {
        world[target] = state;
        scores.push(world_probability(fused, &world)?);
    }
    let state = scores
        .iter()
        .enumerate()
        .filter(|&(_, &q)| q > 0.0)
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap().then(b.0.cmp(&a.0)))
        .map(|(s, _)| s);
    Ok(Prediction {
        target,
        scores,
        state,
    })
}

/// Direct enumeration of every valid complete inference consistent with a
/// world: the oracle the factorized evaluation is verified against. Cost is
/// exponential in the rule count; intended for small models and tests.
pub fn brute_force_world_probability(fused: &FusedBkb, world: &[usize]) -> Result<f64> {
    let bkb = fused.bkb();
    let n = fused.num_data_vars();
    if world.len() != n {
        return Err(Error::Input("world arity mismatch".into()));
    }
    let consistent: Vec<usize> = (0..bkb.snodes().len())
        .filter(|&i| {
            bkb.snodes()[i].inodes().all(|inode| {
                if inode.variable < n {
                    world[inode.variable] == inode.state
                } else {
                    true // source instantiations are free
                }
            })
        })
        .collect();
    if consistent.len() > 24 {
        return Err(Error::Capacity(format!(
            "{} consistent rules is too many to enumerate",
            consistent.len()
        )));
    }
    // source instantiations must stay consistent within a subset; that is
    // part of the inference check itself
    let mut total = 0.0;
    for mask in 0u32..(1 << consistent.len()) {
        let subset: Vec<usize> = consistent
            .iter()
            .enumerate()
            .filter(|&(b, _)| mask >> b & 1 == 1)
            .map(|(_, &i)| i)
            .collect();
        // completeness: every data variable instantiated by some head
        let mut covered = vec![false; n];
        let mut data_rules = 0usize;
        for &i in &subset {
            let hv = bkb.snodes()[i].head().variable;
            if hv < n {
                covered[hv] = true;
                data_rules += 1;
            }
        }
        if data_rules != n || !covered.iter().all(|&c| c) {
            continue;
        }
        if let Some(w) = crate::core::is_inference(bkb, &subset) {
            total += w;
        }
    }
    Ok(total)
}
