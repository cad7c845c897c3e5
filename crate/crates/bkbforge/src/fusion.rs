//! Fusing single-inference fragments into one mutex-valid BKB.
//!
//! For every data variable a source variable is minted whose states are the
//! contributing fragment labels. Each fragment rule gains its source's I-node
//! as an extra parent, and each source I-node gets a parentless prior rule
//! weighted by the source's normalized reliability `r(s) / rho`. Two rules
//! for the same head coming from different fragments then disagree on the
//! source variable's state, so the fused graph cannot violate mutual
//! exclusion, while rules from different fragments can still combine into
//! new inferences: that recombination is what lets the fused model cover
//! worlds never seen in the data.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::core::{
    validate_mutex, Bkb, Fragment, INode, MutexViolation, SNode, SourceVariable, VarId, Variable,
};
use crate::error::{Error, Result};

/// Name given to the minted source variable of a data variable.
pub fn source_variable_name(data_variable: &str) -> String {
    format!("__source__{data_variable}")
}

/// A fused BKB: the correlation graph over data plus source variables, the
/// per-variable source bookkeeping, and the rule index per fragment.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedBkb {
    bkb: Bkb,
    num_data_vars: usize,
    source_vars: Vec<SourceVariable>,
    fragment_index: BTreeMap<String, Vec<usize>>,
    /// Per data variable: `(snode index, source state, prior weight)` for
    /// every data rule heading that variable.
    rules_by_var: Vec<Vec<FusedRule>>,
}

/// One data rule inside a fused BKB, with its source attachment resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedRule {
    pub snode: usize,
    pub source_state: usize,
    pub prior: f64,
}

impl FusedBkb {
    pub fn bkb(&self) -> &Bkb {
        &self.bkb
    }

    pub fn num_data_vars(&self) -> usize {
        self.num_data_vars
    }

    pub fn data_variables(&self) -> &[Variable] {
        &self.bkb.variables()[..self.num_data_vars]
    }

    pub fn source_vars(&self) -> &[SourceVariable] {
        &self.source_vars
    }

    pub fn fragment_index(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.fragment_index
    }

    /// Data rules heading the given data variable.
    pub fn rules_for(&self, variable: VarId) -> &[FusedRule] {
        &self.rules_by_var[variable]
    }

    pub fn is_source_var(&self, variable: VarId) -> bool {
        variable >= self.num_data_vars
    }

    /// Label-keyed structural signature: head and parents by name/state
    /// label with exact weight bits. Fusions of the same fragments compare
    /// equal regardless of fragment order.
    pub fn canonical_signature(&self) -> Vec<(String, Vec<String>, u64)> {
        let label = |i: INode| {
            let var = &self.bkb.variables()[i.variable];
            format!("{}={}", var.name, var.states[i.state])
        };
        let mut sig: Vec<(String, Vec<String>, u64)> = self
            .bkb
            .snodes()
            .iter()
            .map(|s| {
                let mut parents: Vec<String> = s.parents().iter().map(|&p| label(p)).collect();
                parents.sort();
                (label(s.head()), parents, s.weight().to_bits())
            })
            .collect();
        sig.sort();
        sig
    }

    pub fn to_json(&self) -> crate::core::BkbJson {
        let mut json = self.bkb.to_json();
        json.sources = Some(self.source_vars.clone());
        json
    }

    pub fn from_json(json: crate::core::BkbJson) -> Result<Self> {
        let source_vars = json
            .sources
            .clone()
            .ok_or_else(|| Error::Input("model file has no sources section".into()))?;
        let bkb = Bkb::from_json(json)?;
        let num_data_vars = bkb
            .variables()
            .len()
            .checked_sub(source_vars.len())
            .ok_or_else(|| Error::Input("more source variables than variables".into()))?;
        for sv in &source_vars {
            if sv.target_variable >= num_data_vars || sv.source_variable < num_data_vars {
                return Err(Error::Input(
                    "source variables must follow the data variables".into(),
                ));
            }
        }
        FusedBkb::assemble(bkb, num_data_vars, source_vars)
    }

    /// Rebuilds the per-variable rule index and fragment index from the raw
    /// graph; every non-source rule must carry exactly one source parent.
    fn assemble(
        bkb: Bkb,
        num_data_vars: usize,
        source_vars: Vec<SourceVariable>,
    ) -> Result<Self> {
        let source_of_target: BTreeMap<VarId, &SourceVariable> = source_vars
            .iter()
            .map(|sv| (sv.target_variable, sv))
            .collect();
        let mut prior_weight: BTreeMap<INode, f64> = BTreeMap::new();
        for s in bkb.snodes() {
            if s.head().variable >= num_data_vars {
                if !s.parents().is_empty() {
                    return Err(Error::Input("source prior rules must be parentless".into()));
                }
                prior_weight.insert(s.head(), s.weight());
            }
        }
        let mut rules_by_var = vec![Vec::new(); num_data_vars];
        let mut fragment_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (idx, s) in bkb.snodes().iter().enumerate() {
            let head_var = s.head().variable;
            if head_var >= num_data_vars {
                continue;
            }
            let sv = source_of_target.get(&head_var).ok_or_else(|| {
                Error::Input(format!("data variable {head_var} has no source variable"))
            })?;
            let mut source_parent = None;
            for p in s.parents() {
                if p.variable >= num_data_vars {
                    if source_parent.is_some() || p.variable != sv.source_variable {
                        return Err(Error::Input(format!(
                            "rule {idx} has a foreign or duplicate source parent"
                        )));
                    }
                    source_parent = Some(p.state);
                }
            }
            let source_state = source_parent.ok_or_else(|| {
                Error::Input(format!("rule {idx} carries no source parent"))
            })?;
            let prior = *prior_weight
                .get(&INode::new(sv.source_variable, source_state))
                .ok_or_else(|| {
                    Error::Input(format!("rule {idx} references a source with no prior"))
                })?;
            rules_by_var[head_var].push(FusedRule {
                snode: idx,
                source_state,
                prior,
            });
            fragment_index
                .entry(sv.sources[source_state].0.clone())
                .or_default()
                .push(idx);
        }
        Ok(FusedBkb {
            bkb,
            num_data_vars,
            source_vars,
            fragment_index,
            rules_by_var,
        })
    }
}

/// Joins the fragments into one BKB: union of I-nodes, rules, and edges, a
/// source I-node per (fragment, head variable) attached to the fragment's
/// rule, and a prior rule per source I-node carrying `r(s) / rho`. Original
/// rule weights are preserved. Fragments are processed in label order, so
/// the output does not depend on the order they are passed in. Fails on
/// duplicate labels or mismatched variable universes; an empty fragment
/// list fuses to an empty model.
pub fn fuse(fragments: &[Fragment]) -> Result<FusedBkb> {
    if fragments.is_empty() {
        let bkb = Bkb::new(Arc::new(Vec::new()));
        return FusedBkb::assemble(bkb, 0, Vec::new());
    }
    let mut fragments: Vec<&Fragment> = fragments.iter().collect();
    fragments.sort_by(|a, b| a.source.cmp(&b.source));
    let data_vars = fragments[0].bkb.variables().to_vec();
    for f in &fragments[1..] {
        if f.bkb.variables() != data_vars.as_slice() {
            return Err(Error::Input(format!(
                "fragment {} is over a different variable universe",
                f.source
            )));
        }
    }
    if fragments.windows(2).any(|w| w[0].source == w[1].source) {
        return Err(Error::Input("fragment source labels must be unique".into()));
    }

    let num_data_vars = data_vars.len();
    let mut variables = data_vars;
    // one source variable per data variable; states in label order
    let labels: Vec<String> = fragments.iter().map(|f| f.source.clone()).collect();
    let mut source_vars = Vec::with_capacity(num_data_vars);
    for v in 0..num_data_vars {
        let source_variable = variables.len();
        variables.push(Variable::new(
            source_variable_name(&variables[v].name),
            labels.clone(),
        )?);
        source_vars.push(SourceVariable {
            target_variable: v,
            source_variable,
            sources: fragments
                .iter()
                .map(|f| (f.source.clone(), f.reliability))
                .collect(),
        });
    }

    let mut bkb = Bkb::new(Arc::new(variables));
    // data rules: fragment order, head variable ascending within a fragment
    for (fi, f) in fragments.iter().enumerate() {
        let mut snodes: Vec<&SNode> = f.bkb.snodes().iter().collect();
        snodes.sort_by_key(|s| s.head().variable);
        for s in snodes {
            let source_inode = INode::new(source_vars[s.head().variable].source_variable, fi);
            let mut parents = s.parents().to_vec();
            parents.push(source_inode);
            bkb.push(SNode::new(s.head(), parents, s.weight())?)?;
        }
    }
    // prior rules: data variable ascending, fragment ascending
    for sv in &source_vars {
        let rho = sv.rho();
        for (fi, (_, reliability)) in sv.sources.iter().enumerate() {
            bkb.push(SNode::new(
                INode::new(sv.source_variable, fi),
                Vec::new(),
                reliability / rho,
            )?)?;
        }
    }

    FusedBkb::assemble(bkb, num_data_vars, source_vars)
}

/// Mutex audit of a fused model; any output of [`fuse`] must come back empty.
pub fn mutex_audit(fused: &FusedBkb) -> Vec<MutexViolation> {
    validate_mutex(fused.bkb())
}
