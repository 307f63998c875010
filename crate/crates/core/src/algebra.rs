//! Parallel composition, restriction, renaming and composition expressions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::operators::{AtomicOp, Operator};
use crate::process::{Process, Transition};
use crate::symbolic::{Name, Term};

/// A composed process with the renamings applied to separate the operands
/// and the handshakes that could not be formed.
#[derive(Clone, Debug)]
pub struct Composition {
    pub process: Process,
    pub renames: Vec<String>,
    pub omitted: Vec<String>,
}

fn clash_renaming(p1: &Process, p2: &Process) -> (BTreeMap<Name, Name>, BTreeMap<Name, Name>) {
    let mut m1 = BTreeMap::new();
    let mut m2 = BTreeMap::new();
    let taken: BTreeSet<&Name> = p1.vars.keys().chain(p2.vars.keys()).collect();
    for x in p1.vars.keys().filter(|x| p2.vars.contains_key(*x)) {
        let pick = |k: u32| {
            (0..)
                .map(|i| {
                    if i == 0 {
                        Name::from(format!("{x}@{k}"))
                    } else {
                        Name::from(format!("{x}@{k}_{i}"))
                    }
                })
                .find(|c| !taken.contains(c))
                .unwrap()
        };
        m1.insert(x.clone(), pick(1));
        m2.insert(x.clone(), pick(2));
    }
    (m1, m2)
}

fn pair_names(s1: &[Name], s2: &[Name]) -> BTreeMap<(Name, Name), Name> {
    let join = |sep: &str| -> BTreeMap<(Name, Name), Name> {
        s1.iter()
            .flat_map(|a| s2.iter().map(move |b| ((a.clone(), b.clone()), Name::from(format!("{a}{sep}{b}")))))
            .collect()
    };
    let plain = join("");
    let distinct: BTreeSet<&Name> = plain.values().collect();
    if distinct.len() == plain.len() {
        plain
    } else {
        join("@")
    }
}

/// Splits an operator around its communication: `(O′·[comm])·O″`.
fn factor(op: &Operator) -> Option<(Operator, AtomicOp, Operator)> {
    let i = op.comm_index()?;
    Some((
        Operator::new(op.guard.clone(), op.body[..i].to_vec()),
        op.body[i].clone(),
        Operator::seq(op.body[i + 1..].to_vec()),
    ))
}

/// Builds the handshake of a receiving and a sending operator on the same
/// channel, if every concatenation involved is defined.
fn handshake(recv: &Operator, send: &Operator) -> Result<Option<Operator>> {
    let (Some((pre_r, AtomicOp::Input { var, .. }, post_r)), Some((pre_s, AtomicOp::Output { expr, .. }, post_s))) =
        (factor(recv), factor(send))
    else {
        return Ok(None);
    };
    let Some(pre) = pre_r.concat(&pre_s)? else {
        return Ok(None);
    };
    let Some(mid) = pre.concat(&Operator::seq(vec![AtomicOp::Assign { var, expr }]))? else {
        return Ok(None);
    };
    let Some(post) = post_r.concat(&post_s)? else {
        return Ok(None);
    };
    let Some(all) = mid.concat(&post)? else {
        return Ok(None);
    };
    Ok(Some(Operator::new(
        Term::and(recv.guard.clone(), send.guard.clone()),
        all.body,
    )))
}

/// `P1 | P2`, separating clashing variables first.
pub fn parallel_report(p1: &Process, p2: &Process) -> Result<Composition> {
    let (m1, m2) = clash_renaming(p1, p2);
    let mut renames = Vec::new();
    for (m, p) in [(&m1, p1), (&m2, p2)] {
        for (a, b) in m {
            renames.push(format!("{}: {a} -> {b}", p.name));
        }
    }
    let p1 = if m1.is_empty() { p1.clone() } else { p1.rename_vars(&m1) };
    let p2 = if m2.is_empty() { p2.clone() } else { p2.rename_vars(&m2) };
    let names = pair_names(&p1.states, &p2.states);
    let st = |a: &Name, b: &Name| names[&(a.clone(), b.clone())].clone();

    let mut out = Process::new(format!("({}|{})", p1.name, p2.name), st(&p1.start, &p2.start));
    out.states = p1
        .states
        .iter()
        .flat_map(|a| p2.states.iter().map(move |b| (a, b)))
        .map(|(a, b)| st(a, b))
        .collect();
    out.finals = p1
        .finals
        .iter()
        .flat_map(|a| p2.finals.iter().map(move |b| (a, b)))
        .map(|(a, b)| st(a, b))
        .collect();
    out.vars = p1.vars.clone();
    out.vars.extend(p2.vars.clone());
    out.init = Term::and(p1.init.clone(), p2.init.clone());

    let mut ts: Vec<(Name, Operator, Name)> = Vec::new();
    for t in &p1.transitions {
        for s in &p2.states {
            ts.push((st(&t.src, s), t.op.clone(), st(&t.dst, s)));
        }
    }
    for t in &p2.transitions {
        for s in &p1.states {
            ts.push((st(s, &t.src), t.op.clone(), st(s, &t.dst)));
        }
    }
    let mut omitted = Vec::new();
    for t1 in &p1.transitions {
        for t2 in &p2.transitions {
            let (Some(c1), Some(c2)) = (t1.op.comm_index(), t2.op.comm_index()) else {
                continue;
            };
            let (a1, a2) = (&t1.op.body[c1], &t2.op.body[c2]);
            if a1.channel() != a2.channel() {
                continue;
            }
            let op = match (a1, a2) {
                (AtomicOp::Input { .. }, AtomicOp::Output { .. }) => handshake(&t1.op, &t2.op)?,
                (AtomicOp::Output { .. }, AtomicOp::Input { .. }) => handshake(&t2.op, &t1.op)?,
                _ => continue,
            };
            match op {
                Some(op) => ts.push((st(&t1.src, &t2.src), op, st(&t1.dst, &t2.dst))),
                None => omitted.push(format!("handshake {} with {} is undefined", t1.id, t2.id)),
            }
        }
    }
    for (k, (src, op, dst)) in ts.into_iter().enumerate() {
        out.transitions.push(Transition::new(format!("t{}", k + 1), src, op, dst));
    }
    Ok(Composition {
        process: out,
        renames,
        omitted,
    })
}

pub fn parallel(p1: &Process, p2: &Process) -> Result<Process> {
    Ok(parallel_report(p1, p2)?.process)
}

/// `P \ L`: drops communications on the listed channels.
pub fn restrict(p: &Process, l: &BTreeSet<Name>) -> Process {
    let mut out = p.clone();
    out.transitions.retain(|t| t.op.channel().is_none_or(|c| !l.contains(c)));
    out
}

/// `P[f]` for a channel map; unmapped names stay.
pub fn rename(p: &Process, f: &BTreeMap<Name, Name>) -> Process {
    let g = |c: &Name| f.get(c).cloned().unwrap_or_else(|| c.clone());
    let mut out = p.clone();
    for t in &mut out.transitions {
        t.op = t.op.rename_channels(&g);
    }
    out
}

/// Deletes every atomic operator communicating on the listed channels,
/// making those transitions internal.
pub fn erase(p: &Process, l: &BTreeSet<Name>) -> Process {
    let mut out = p.clone();
    for t in &mut out.transitions {
        t.op.body.retain(|ao| ao.channel().is_none_or(|c| !l.contains(c)));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CompositionExpr {
    Ref(Name),
    Par(Box<CompositionExpr>, Box<CompositionExpr>),
    Restrict(Box<CompositionExpr>, BTreeSet<Name>),
    Erase(Box<CompositionExpr>, BTreeSet<Name>),
    /// Pairs are `(new, old)`, as written `[new/old]`.
    Rename(Box<CompositionExpr>, Vec<(Name, Name)>),
}

impl CompositionExpr {
    pub fn id(n: impl Into<Name>) -> Self {
        CompositionExpr::Ref(n.into())
    }

    pub fn par(self, other: CompositionExpr) -> Self {
        CompositionExpr::Par(Box::new(self), Box::new(other))
    }

    pub fn restrict<I: IntoIterator<Item = N>, N: Into<Name>>(self, l: I) -> Self {
        CompositionExpr::Restrict(Box::new(self), l.into_iter().map(Into::into).collect())
    }

    pub fn erase<I: IntoIterator<Item = N>, N: Into<Name>>(self, l: I) -> Self {
        CompositionExpr::Erase(Box::new(self), l.into_iter().map(Into::into).collect())
    }

    pub fn rename<I: IntoIterator<Item = (N, N)>, N: Into<Name>>(self, pairs: I) -> Self {
        CompositionExpr::Rename(
            Box::new(self),
            pairs.into_iter().map(|(a, b)| (a.into(), b.into())).collect(),
        )
    }

    pub fn references(&self) -> BTreeSet<Name> {
        match self {
            CompositionExpr::Ref(n) => BTreeSet::from([n.clone()]),
            CompositionExpr::Par(a, b) => {
                let mut s = a.references();
                s.extend(b.references());
                s
            }
            CompositionExpr::Restrict(e, _) | CompositionExpr::Erase(e, _) | CompositionExpr::Rename(e, _) => e.references(),
        }
    }

    fn prec(&self) -> u8 {
        match self {
            CompositionExpr::Par(..) => 0,
            CompositionExpr::Restrict(..) | CompositionExpr::Erase(..) => 1,
            CompositionExpr::Ref(_) | CompositionExpr::Rename(..) => 2,
        }
    }
}

fn write_set(f: &mut fmt::Formatter<'_>, l: &BTreeSet<Name>) -> fmt::Result {
    let items: Vec<&str> = l.iter().map(Name::as_str).collect();
    write!(f, "{{{}}}", items.join(", "))
}

impl fmt::Display for CompositionExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |f: &mut fmt::Formatter<'_>, e: &CompositionExpr, min: u8| {
            if e.prec() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            CompositionExpr::Ref(n) => write!(f, "{n}"),
            CompositionExpr::Par(a, b) => {
                sub(f, a, 0)?;
                f.write_str(" | ")?;
                sub(f, b, 1)
            }
            CompositionExpr::Restrict(e, l) => {
                sub(f, e, 1)?;
                f.write_str(" \\ ")?;
                write_set(f, l)
            }
            CompositionExpr::Erase(e, l) => {
                sub(f, e, 1)?;
                f.write_str(" / ")?;
                write_set(f, l)
            }
            CompositionExpr::Rename(e, pairs) => {
                sub(f, e, 2)?;
                let items: Vec<String> = pairs.iter().map(|(a, b)| format!("{a}/{b}")).collect();
                write!(f, "[{}]", items.join(", "))
            }
        }
    }
}

/// Evaluates a composition expression; `|` chains associate to the left.
pub fn compose_expr(expr: &CompositionExpr, env: &BTreeMap<Name, Process>) -> Result<Composition> {
    match expr {
        CompositionExpr::Ref(n) => env
            .get(n)
            .cloned()
            .map(|process| Composition {
                process,
                renames: Vec::new(),
                omitted: Vec::new(),
            })
            .ok_or_else(|| Error::UnknownProcess(n.to_string())),
        CompositionExpr::Par(a, b) => {
            let ca = compose_expr(a, env)?;
            let cb = compose_expr(b, env)?;
            let mut c = parallel_report(&ca.process, &cb.process)?;
            let mut renames = ca.renames;
            renames.extend(cb.renames);
            renames.append(&mut c.renames);
            let mut omitted = ca.omitted;
            omitted.extend(cb.omitted);
            omitted.append(&mut c.omitted);
            Ok(Composition {
                process: c.process,
                renames,
                omitted,
            })
        }
        CompositionExpr::Restrict(e, l) => {
            let mut c = compose_expr(e, env)?;
            c.process = restrict(&c.process, l);
            Ok(c)
        }
        CompositionExpr::Erase(e, l) => {
            let mut c = compose_expr(e, env)?;
            c.process = erase(&c.process, l);
            Ok(c)
        }
        CompositionExpr::Rename(e, pairs) => {
            let mut c = compose_expr(e, env)?;
            let f: BTreeMap<Name, Name> = pairs.iter().map(|(new, old)| (old.clone(), new.clone())).collect();
            c.process = rename(&c.process, &f);
            Ok(c)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{Domain, Func};

    fn v(s: &str) -> Term {
        Term::var(s)
    }

    fn sender() -> Process {
        let mut p = Process::new("S", "s1").with_var("e", Domain::int(0, 2));
        p.add_transition(None, "s1", Operator::seq(vec![AtomicOp::output("a", v("e"))]), "s2");
        p
    }

    fn receiver() -> Process {
        let mut p = Process::new("R", "r1").with_var("x", Domain::int(0, 2));
        p.add_transition(None, "r1", Operator::seq(vec![AtomicOp::input("a", "x")]), "r2");
        p
    }

    #[test]
    fn handshake_becomes_assignment() {
        let c = parallel(&sender(), &receiver()).unwrap();
        let hs: Vec<_> = c.transitions.iter().filter(|t| t.op.is_internal()).collect();
        assert_eq!(hs.len(), 1);
        assert_eq!(hs[0].src.as_str(), "s1r1");
        assert_eq!(hs[0].dst.as_str(), "s2r2");
        assert_eq!(hs[0].op, Operator::seq(vec![AtomicOp::assign("x", v("e"))]));
    }

    #[test]
    fn empty_partner_replicates_transitions() {
        let mut q = Process::new("Q", "q1");
        q.add_state("q2");
        q.add_state("q3");
        let c = parallel(&sender(), &q).unwrap();
        assert_eq!(c.states.len(), 6);
        assert_eq!(c.transitions.len(), 3);
    }

    #[test]
    fn clashing_variables_are_suffixed() {
        let mut r = receiver();
        r.vars.insert(Name::new("e"), Domain::int(0, 2));
        let c = parallel_report(&sender(), &r).unwrap();
        assert!(c.process.vars.contains_key("e@1"));
        assert!(c.process.vars.contains_key("e@2"));
        assert_eq!(c.renames.len(), 2);
        assert!(c.process.validate().is_empty());
    }

    #[test]
    fn guards_are_conjoined_and_prefixes_kept() {
        let mut s = Process::new("S", "s1").with_var("e", Domain::int(0, 2));
        s.add_transition(
            None,
            "s1",
            Operator::new(
                Term::bin(Func::Lt, v("e"), Term::int(2)),
                vec![
                    AtomicOp::assign("e", Term::bin(Func::Add, v("e"), Term::int(1))),
                    AtomicOp::output("a", v("e")),
                ],
            ),
            "s1",
        );
        let c = parallel(&s, &receiver()).unwrap();
        let h = c.transitions.iter().find(|t| t.op.is_internal()).unwrap();
        assert_eq!(
            h.op.to_string(),
            "[e < 2] (e := e + 1; x := e)"
        );
    }

    #[test]
    fn restriction_and_renaming() {
        let s = sender();
        assert_eq!(restrict(&s, &BTreeSet::new()), s);
        assert!(restrict(&s, &BTreeSet::from([Name::new("a")])).transitions.is_empty());
        let r = rename(&s, &BTreeMap::from([(Name::new("a"), Name::new("b"))]));
        assert_eq!(r.channels(), BTreeSet::from([Name::new("b")]));
    }

    #[test]
    fn expression_display_round_trips_precedence() {
        let e = CompositionExpr::id("A")
            .rename([("p", "q")])
            .par(CompositionExpr::id("B"))
            .restrict(["p"]);
        assert_eq!(e.to_string(), "(A[p/q] | B) \\ {p}");
        let env = BTreeMap::from([(Name::new("A"), sender())]);
        assert!(matches!(compose_expr(&e, &env), Err(Error::UnknownProcess(_))));
    }
}
