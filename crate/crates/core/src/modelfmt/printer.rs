use std::fmt::Write as _;

use super::Model;
use crate::symbolic::Domain;

fn domain_ref(m: &Model, d: &Domain) -> String {
    m.domains
        .iter()
        .find(|(_, x)| *x == d)
        .map(|(n, _)| n.to_string())
        .unwrap_or_else(|| d.to_string())
}

fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

/// Canonical text: declarations grouped by kind and sorted by name.
pub fn serialize_model(m: &Model) -> String {
    let mut s = String::new();
    if let Some(n) = &m.name {
        match &m.comment {
            Some(c) => {
                let _ = writeln!(s, "model {n} {}\n", quote(c));
            }
            None => {
                let _ = writeln!(s, "model {n}\n");
            }
        }
    }
    for (n, d) in &m.domains {
        let _ = writeln!(s, "domain {n} = {d}");
    }
    if !m.domains.is_empty() {
        s.push('\n');
    }
    for (n, d) in &m.channels {
        let _ = writeln!(s, "channel {n} : {}", domain_ref(m, d));
    }
    if !m.channels.is_empty() {
        s.push('\n');
    }
    for p in m.processes.values() {
        let _ = writeln!(s, "process {} {{", p.name);
        if !p.vars.is_empty() {
            let vars: Vec<String> = p.vars.iter().map(|(x, d)| format!("{x}: {}", domain_ref(m, d))).collect();
            let _ = writeln!(s, "  var {};", vars.join(", "));
        }
        if !p.init.is_true() {
            let _ = writeln!(s, "  init {};", p.init);
        }
        let states: Vec<&str> = p.states.iter().map(|x| x.as_str()).collect();
        let _ = writeln!(s, "  states {};", states.join(" "));
        let _ = writeln!(s, "  start {};", p.start);
        if !p.finals.is_empty() {
            let finals: Vec<&str> = p.finals.iter().map(|x| x.as_str()).collect();
            let _ = writeln!(s, "  final {};", finals.join(" "));
        }
        for t in &p.transitions {
            let _ = writeln!(s, "  {}: {} -> {} : {};", t.id, t.src, t.dst, t.op);
        }
        s.push_str("}\n\n");
    }
    for (n, e) in &m.systems {
        let _ = writeln!(s, "system {n} = {e}");
    }
    if !m.systems.is_empty() {
        s.push('\n');
    }
    for c in m.certificates.values() {
        let _ = writeln!(s, "certificate {} ({}, {}) {{", c.name, c.left, c.right);
        for ((a, b), f) in &c.entries {
            let _ = writeln!(s, "  ({a}, {b}): {f};");
        }
        if !c.hints.is_empty() {
            s.push_str("  hints {\n");
            for ((t, st), cts) in &c.hints {
                let cts: Vec<String> = cts
                    .iter()
                    .map(|ct| {
                        if ct.is_empty() {
                            "()".to_string()
                        } else {
                            ct.iter().map(|x| x.as_str()).collect::<Vec<_>>().join(".")
                        }
                    })
                    .collect();
                let _ = writeln!(s, "    {t} @ {st}: [{}];", cts.join(", "));
            }
            s.push_str("  }\n");
        }
        let _ = writeln!(s, "  maxlen {};", c.maxlen);
        s.push_str("}\n\n");
    }
    while s.ends_with("\n\n") {
        s.pop();
    }
    s
}
