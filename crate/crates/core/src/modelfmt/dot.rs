use std::fmt::Write as _;

use crate::process::Process;
use crate::semantics::RealizationLts;

fn esc(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// States as nodes (start doubled), transitions labelled with operators.
pub fn process_to_dot(p: &Process) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "digraph \"{}\" {{", esc(p.name.as_str()));
    s.push_str("  rankdir=LR;\n  node [shape=circle];\n");
    for st in &p.states {
        let shape = if *st == p.start { " [shape=doublecircle]" } else { "" };
        let _ = writeln!(s, "  \"{}\"{shape};", esc(st.as_str()));
    }
    for t in &p.transitions {
        let _ = writeln!(
            s,
            "  \"{}\" -> \"{}\" [label=\"{}: {}\"];",
            esc(t.src.as_str()),
            esc(t.dst.as_str()),
            esc(t.id.as_str()),
            esc(&t.op.to_string())
        );
    }
    s.push_str("}\n");
    s
}

/// Reachable vertices as nodes (root doubled), edges labelled with actions.
pub fn lts_to_dot(l: &RealizationLts) -> String {
    let reach = l.reachable();
    let mut s = String::new();
    let _ = writeln!(s, "digraph \"{}\" {{", esc(l.process.as_str()));
    s.push_str("  node [shape=box];\n");
    for v in 0..l.num_vertices() {
        if !reach[v] {
            continue;
        }
        let shape = if v == 0 { ", shape=doublecircle" } else { "" };
        let _ = writeln!(s, "  v{v} [label=\"{}\"{shape}];", esc(&l.describe(v as u32)));
    }
    for (a, lab, b) in l.edges() {
        if reach[a as usize] {
            let _ = writeln!(s, "  v{a} -> v{b} [label=\"{}\"];", esc(&lab.to_string()));
        }
    }
    s.push_str("}\n");
    s
}
