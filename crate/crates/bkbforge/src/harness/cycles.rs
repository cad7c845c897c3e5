//! Variable-level cycle analysis of a fused model: projects every data rule
//! to `parent variable -> head variable` edges, then reports 2-cycles and
//! larger strongly connected components. Opposite orientations learned by
//! different per-world fragments are exactly what shows up here.

use serde::Serialize;

use crate::core::VarId;
use crate::fusion::FusedBkb;

#[derive(Debug, Clone, Serialize)]
pub struct CycleReport {
    /// Distinct projected edges `(parent, head)` over data variables.
    pub edges: Vec<(VarId, VarId)>,
    /// Unordered variable pairs connected in both directions.
    pub two_cycles: Vec<(VarId, VarId)>,
    /// Strongly connected components with at least two variables.
    pub components: Vec<Vec<VarId>>,
}

impl CycleReport {
    pub fn render(&self, names: &[String]) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{} projected edges, {} two-cycles, {} larger components\n",
            self.edges.len(),
            self.two_cycles.len(),
            self.components.len()
        ));
        for &(a, b) in &self.two_cycles {
            out.push_str(&format!("  {} <-> {}\n", names[a], names[b]));
        }
        for comp in &self.components {
            let labels: Vec<&str> = comp.iter().map(|&v| names[v].as_str()).collect();
            out.push_str(&format!("  component: {}\n", labels.join(", ")));
        }
        out
    }
}

/// Projects the model's data rules onto variable-level edges and finds all
/// cyclic structure.
pub fn analyze_rv_cycles(model: &FusedBkb) -> CycleReport {
    let n = model.num_data_vars();
    let mut edge_set = std::collections::BTreeSet::new();
    for s in model.bkb().snodes() {
        let head = s.head().variable;
        if head >= n {
            continue;
        }
        for p in s.parents() {
            if p.variable < n {
                edge_set.insert((p.variable, head));
            }
        }
    }
    let edges: Vec<(VarId, VarId)> = edge_set.iter().copied().collect();
    let mut two_cycles = Vec::new();
    for &(a, b) in &edges {
        if a < b && edge_set.contains(&(b, a)) {
            two_cycles.push((a, b));
        }
    }
    let mut adjacency = vec![Vec::new(); n];
    for &(a, b) in &edges {
        adjacency[a].push(b);
    }
    let components = tarjan(&adjacency)
        .into_iter()
        .filter(|c| c.len() >= 2)
        .collect();
    CycleReport {
        edges,
        two_cycles,
        components,
    }
}

/// Iterative Tarjan over adjacency lists; components come back sorted.
fn tarjan(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adjacency.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut call: Vec<(usize, usize)> = Vec::new();
    let mut next = 0;
    let mut out = Vec::new();
    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        index[start] = next;
        low[start] = next;
        next += 1;
        stack.push(start);
        on_stack[start] = true;
        call.push((start, 0));
        while let Some(&(v, ei)) = call.last() {
            if ei < adjacency[v].len() {
                call.last_mut().unwrap().1 += 1;
                let w = adjacency[v][ei];
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
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
                    out.push(comp);
                }
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
            }
        }
    }
    out.sort();
    out
}
