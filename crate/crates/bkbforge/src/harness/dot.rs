//! DOT export of correlation graphs and Bayesian networks for inspection
//! with standard graph tooling. I-nodes render as ellipses, rules as small
//! weight-labeled boxes, source I-nodes dashed; node order is deterministic.

use std::fmt::Write;

use crate::bnlearn::BayesNet;
use crate::core::{Bkb, INode};
use crate::fusion::FusedBkb;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn inode_id(i: INode) -> String {
    format!("i_{}_{}", i.variable, i.state)
}

fn render_bkb(bkb: &Bkb, is_source: impl Fn(usize) -> bool) -> String {
    let mut out = String::from("digraph bkb {\n  rankdir=LR;\n");
    for inode in bkb.inodes() {
        let var = &bkb.variables()[inode.variable];
        let label = format!("{}={}", var.name, var.states[inode.state]);
        let style = if is_source(inode.variable) {
            ", style=dashed"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "  {} [shape=ellipse, label={}{}];",
            inode_id(inode),
            quote(&label),
            style
        );
    }
    for (idx, s) in bkb.snodes().iter().enumerate() {
        let _ = writeln!(
            out,
            "  s{idx} [shape=box, width=0.2, height=0.2, label={}];",
            quote(&format!("{}", s.weight()))
        );
        for p in s.parents() {
            let _ = writeln!(out, "  {} -> s{idx};", inode_id(*p));
        }
        let _ = writeln!(out, "  s{idx} -> {};", inode_id(s.head()));
    }
    out.push_str("}\n");
    out
}

/// DOT text for a plain correlation graph.
pub fn export_dot_bkb(bkb: &Bkb) -> String {
    render_bkb(bkb, |_| false)
}

/// DOT text for a fused model; source I-nodes are dashed.
pub fn export_dot_fused(model: &FusedBkb) -> String {
    let n = model.num_data_vars();
    render_bkb(model.bkb(), move |v| v >= n)
}

/// DOT text for a BN at the variable level.
pub fn export_dot_bn(bn: &BayesNet) -> String {
    let mut out = String::from("digraph bn {\n");
    for (i, var) in bn.variables().iter().enumerate() {
        let _ = writeln!(out, "  v{i} [shape=ellipse, label={}];", quote(&var.name));
    }
    for i in 0..bn.variables().len() {
        for &p in bn.parents(i) {
            let _ = writeln!(out, "  v{p} -> v{i};");
        }
    }
    out.push_str("}\n");
    out
}
