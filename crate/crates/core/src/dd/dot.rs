//! Graphviz dump for debugging.

use std::fmt::Write;

use super::manager::{Diagram, Manager, VarKind};

impl Manager {
    /// DOT rendering of `root`: one node per diagram node, then-edges solid,
    /// else-edges dashed, terminals labelled with their exact value.
    pub fn to_dot(&self, root: Diagram) -> String {
        let mut out = String::from("digraph dd {\n");
        let mut seen = std::collections::BTreeSet::new();
        let mut stack = vec![root];
        while let Some(d) = stack.pop() {
            if !seen.insert(d) {
                continue;
            }
            match (self.value(d), self.then_child(d), self.else_child(d)) {
                (Some(v), _, _) => {
                    let _ = writeln!(out, "  n{} [shape=box,label=\"{}\"];", d.id(), v);
                }
                (None, Some(t), Some(e)) => {
                    let label = match self.var_at(self.level(d)) {
                        Some(VarKind::State(v)) => v.to_string(),
                        Some(VarKind::Aux(i)) => format!("in{i}"),
                        None => "?".into(),
                    };
                    let _ = writeln!(out, "  n{} [label=\"{}\"];", d.id(), label);
                    let _ = writeln!(out, "  n{} -> n{};", d.id(), t.id());
                    let _ = writeln!(out, "  n{} -> n{} [style=dashed];", d.id(), e.id());
                    stack.push(t);
                    stack.push(e);
                }
                _ => unreachable!(),
            }
        }
        out.push_str("}\n");
        out
    }
}
