//! State removal, fusion and elimination of unessential assignments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::operators::{AtomicOp, Operator};
use crate::process::{Process, Transition};
use crate::symbolic::{is_valid, satisfiable, show_valuation, Domains, Name, Term, Verdict};

/// How strictly state removal is guarded.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum Mode {
    /// Only the removal rule's own side conditions.
    Verbatim,
    /// Additionally requires that the removed state be passed through
    /// without an observable choice point being created or lost.
    #[default]
    Sound,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Rejection {
    Start,
    Final,
    SelfLoop(Name),
    Undefined { incoming: Name, outgoing: Name },
    NotDisjoint { a: Name, b: Name, witness: String },
    /// An incoming transition but no outgoing one.
    Stuck,
    /// After `incoming`, no outgoing guard holds.
    NotCovering { incoming: Name, witness: String },
    /// Some outgoing transition communicates but `incoming` does.
    CommunicatingIncoming(Name),
    /// `incoming` competes with `other` at its source.
    Competing { incoming: Name, other: Name, witness: String },
    /// `incoming` leaves the start state, where the choice among several
    /// initial valuations is still open.
    InitialChoice { incoming: Name, witnesses: [String; 2] },
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::Start => write!(f, "the start state cannot be removed"),
            Rejection::Final => write!(f, "final states are kept"),
            Rejection::SelfLoop(t) => write!(f, "transition {t} is a self-loop on the state"),
            Rejection::Undefined { incoming, outgoing } => {
                write!(f, "concatenation {incoming}.{outgoing} is undefined")
            }
            Rejection::NotDisjoint { a, b, witness } => {
                write!(f, "internal outgoing {a} and {b} overlap at {witness}")
            }
            Rejection::Stuck => write!(f, "the state has incoming but no outgoing transitions"),
            Rejection::NotCovering { incoming, witness } => {
                write!(f, "after {incoming} no outgoing guard holds at {witness}")
            }
            Rejection::CommunicatingIncoming(t) => {
                write!(f, "an outgoing transition communicates and incoming {t} does too")
            }
            Rejection::Competing { incoming, other, witness } => {
                write!(f, "incoming {incoming} competes with {other} at {witness}")
            }
            Rejection::InitialChoice { incoming, witnesses: [a, b] } => {
                write!(f, "incoming {incoming} leaves the start state, which has initial valuations {a} and {b}")
            }
        }
    }
}

fn concat_defined(a: &Operator, b: &Operator) -> Result<Option<Operator>> {
    if !a.is_internal() && !b.is_internal() {
        return Ok(None);
    }
    a.concat(b)
}

/// Replaces inputs by assignments from fresh variables so that a weakest
/// precondition can be taken through them.
fn open_inputs(op: &Operator, doms: &mut Domains) -> Result<Operator> {
    let mut body = Vec::new();
    for ao in &op.body {
        match ao {
            AtomicOp::Input { var, .. } => {
                let fresh = Name::from(format!("{var}#recv"));
                let d = doms.get(var).cloned().ok_or_else(|| Error::DomainMissing(var.clone()))?;
                doms.insert(fresh.clone(), d);
                body.push(AtomicOp::assign(var.clone(), Term::Var(fresh)));
            }
            other => body.push(other.clone()),
        }
    }
    Ok(Operator::new(op.guard.clone(), body))
}

fn witness_of(v: Verdict) -> Option<String> {
    match v {
        Verdict::Valid => None,
        Verdict::Counterexample { valuation, .. } => Some(show_valuation(&valuation)),
    }
}

/// Checks the removal conditions for `s`; `Ok(None)` means removable.
pub fn removal_obstacle(p: &Process, s: &Name, mode: Mode) -> Result<Option<Rejection>> {
    if !p.has_state(s.as_str()) {
        return Err(Error::UnknownState(s.to_string()));
    }
    if s == &p.start {
        return Ok(Some(Rejection::Start));
    }
    if p.finals.contains(s) {
        return Ok(Some(Rejection::Final));
    }
    let inc: Vec<&Transition> = p.incoming(s).collect();
    let out: Vec<&Transition> = p.outgoing(s).collect();
    if let Some(t) = inc.iter().chain(out.iter()).find(|t| t.src == t.dst) {
        return Ok(Some(Rejection::SelfLoop(t.id.clone())));
    }
    let all_internal = out.iter().all(|t| t.op.is_internal());
    if all_internal {
        for (i, a) in out.iter().enumerate() {
            for b in &out[i + 1..] {
                if let Some(w) = satisfiable(&Term::and(a.op.guard.clone(), b.op.guard.clone()), &p.vars)? {
                    return Ok(Some(Rejection::NotDisjoint {
                        a: a.id.clone(),
                        b: b.id.clone(),
                        witness: show_valuation(&w),
                    }));
                }
            }
        }
    }
    for i in &inc {
        for o in &out {
            if concat_defined(&i.op, &o.op)?.is_none() {
                return Ok(Some(Rejection::Undefined {
                    incoming: i.id.clone(),
                    outgoing: o.id.clone(),
                }));
            }
        }
    }
    if mode == Mode::Verbatim {
        return Ok(None);
    }
    if out.is_empty() && !inc.is_empty() {
        return Ok(Some(Rejection::Stuck));
    }
    if all_internal {
        let any = Term::or_all(out.iter().map(|t| t.op.guard.clone()));
        for i in &inc {
            let mut doms = p.vars.clone();
            let opened = open_inputs(&i.op, &mut doms)?;
            let post = opened.wp(&any)?.expect("inputs are opened");
            let claim = Term::app(crate::symbolic::Func::Implies, vec![i.op.guard.clone(), post]);
            if let Some(w) = witness_of(is_valid(&claim, &doms)?) {
                return Ok(Some(Rejection::NotCovering {
                    incoming: i.id.clone(),
                    witness: w,
                }));
            }
        }
    } else {
        for i in &inc {
            if !i.op.is_internal() {
                return Ok(Some(Rejection::CommunicatingIncoming(i.id.clone())));
            }
            if i.src == p.start {
                if let Some(witnesses) = two_initial_valuations(p)? {
                    return Ok(Some(Rejection::InitialChoice {
                        incoming: i.id.clone(),
                        witnesses,
                    }));
                }
            }
            for other in p.outgoing(&i.src).filter(|t| t.id != i.id) {
                let both = Term::and(i.op.guard.clone(), other.op.guard.clone());
                if let Some(w) = satisfiable(&both, &p.vars)? {
                    return Ok(Some(Rejection::Competing {
                        incoming: i.id.clone(),
                        other: other.id.clone(),
                        witness: show_valuation(&w),
                    }));
                }
            }
        }
    }
    Ok(None)
}

fn two_initial_valuations(p: &Process) -> Result<Option<[String; 2]>> {
    let Some(mut first) = satisfiable(&p.init, &p.vars)? else {
        return Ok(None);
    };
    for (x, d) in &p.vars {
        if first.contains_key(x) {
            continue;
        }
        let vals = d.values();
        first.insert(x.clone(), vals[0].clone());
        if let Some(v) = vals.get(1) {
            let mut second = first.clone();
            second.insert(x.clone(), v.clone());
            return Ok(Some([show_valuation(&first), show_valuation(&second)]));
        }
    }
    let same = Term::and_all(first.iter().map(|(x, v)| Term::eq(Term::Var(x.clone()), Term::Const(v.clone()))));
    let other = satisfiable(&Term::and(p.init.clone(), Term::not(same)), &p.vars)?;
    Ok(other.map(|o| [show_valuation(&first), show_valuation(&o)]))
}

fn fresh_id(taken: &mut BTreeSet<Name>, base: String) -> Name {
    let mut cand = Name::from(base.clone());
    let mut k = 1;
    while taken.contains(&cand) {
        k += 1;
        cand = Name::from(format!("{base}_{k}"));
    }
    taken.insert(cand.clone());
    cand
}

/// Removes `s`, bypassing it with every incoming/outgoing concatenation.
pub fn remove_state(p: &Process, s: &Name, mode: Mode) -> Result<std::result::Result<Process, Rejection>> {
    if let Some(r) = removal_obstacle(p, s, mode)? {
        return Ok(Err(r));
    }
    let inc: Vec<Transition> = p.incoming(s).cloned().collect();
    let out: Vec<Transition> = p.outgoing(s).cloned().collect();
    let mut q = p.clone();
    q.states.retain(|x| x != s);
    q.transitions.retain(|t| &t.src != s && &t.dst != s);
    let mut taken: BTreeSet<Name> = q.transitions.iter().map(|t| t.id.clone()).collect();
    for i in &inc {
        for o in &out {
            let op = concat_defined(&i.op, &o.op)?.expect("checked above");
            let id = fresh_id(&mut taken, format!("{}{}", i.id, o.id));
            q.transitions.push(Transition::new(id, i.src.clone(), op, o.dst.clone()));
        }
    }
    Ok(Ok(q))
}

/// Merges parallel transitions with identical bodies, or-ing the guards.
pub fn fuse(p: &Process) -> Process {
    fuse_logged(p).0
}

fn fuse_logged(p: &Process) -> (Process, Vec<String>) {
    let mut groups: BTreeMap<(Name, Name, String), usize> = BTreeMap::new();
    let mut kept: Vec<Transition> = Vec::new();
    let mut log = Vec::new();
    for t in &p.transitions {
        let key = (t.src.clone(), t.dst.clone(), format!("{:?}", t.op.body));
        match groups.get(&key) {
            Some(&k) => {
                let into = &mut kept[k];
                log.push(format!("fuse {} into {}", t.id, into.id));
                into.op.guard = Term::or(into.op.guard.clone(), t.op.guard.clone());
            }
            None => {
                groups.insert(key, kept.len());
                kept.push(t.clone());
            }
        }
    }
    let mut q = p.clone();
    q.transitions = kept;
    (q, log)
}

/// Deletes assignments to variables outside the essential set, to fixpoint.
pub fn drop_unessential(p: &Process) -> Process {
    drop_unessential_logged(p).0
}

fn drop_unessential_logged(p: &Process) -> (Process, Vec<String>) {
    let mut q = p.clone();
    let mut log = Vec::new();
    loop {
        let ess = q.essential_vars();
        let mut changed = false;
        for t in &mut q.transitions {
            let before = t.op.body.len();
            t.op.body.retain(|ao| match ao {
                AtomicOp::Assign { var, .. } => {
                    let keep = ess.contains(var);
                    if !keep {
                        log.push(format!("drop {ao} from {}", t.id));
                    }
                    keep
                }
                _ => true,
            });
            changed |= t.op.body.len() != before;
        }
        if !changed {
            return (q, log);
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Strategy {
    pub mode: Mode,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub rule: u8,
    pub detail: String,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {}: {}", self.rule, self.detail)
    }
}

/// States other than the start in ascending total degree, ties by name.
pub fn removal_order(p: &Process) -> Vec<Name> {
    let mut deg: BTreeMap<&Name, usize> = p.states.iter().map(|s| (s, 0)).collect();
    for t in &p.transitions {
        *deg.get_mut(&t.src).unwrap() += 1;
        *deg.get_mut(&t.dst).unwrap() += 1;
    }
    let mut order: Vec<(usize, Name)> = deg
        .into_iter()
        .filter(|(s, _)| **s != p.start)
        .map(|(s, d)| (d, s.clone()))
        .collect();
    order.sort();
    order.into_iter().map(|(_, s)| s).collect()
}

/// Applies rules 3, 2 and 1 in that order until none applies.
pub fn simplify(p: &Process, strategy: Strategy) -> Result<(Process, Vec<Step>)> {
    let mut cur = p.clone();
    let mut log = Vec::new();
    loop {
        let (q, l3) = drop_unessential_logged(&cur);
        log.extend(l3.into_iter().map(|detail| Step { rule: 3, detail }));
        let (q, l2) = fuse_logged(&q);
        log.extend(l2.into_iter().map(|detail| Step { rule: 2, detail }));
        cur = q;
        let mut removed = false;
        for s in removal_order(&cur) {
            if let Ok(q) = remove_state(&cur, &s, strategy.mode)? {
                log.push(Step {
                    rule: 1,
                    detail: format!("remove state {s}"),
                });
                cur = q;
                removed = true;
                break;
            }
        }
        if !removed {
            return Ok((cur, log));
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

    #[test]
    fn chain_removal_concatenates() {
        let mut p = Process::new("P", "A").with_var("x", Domain::int(0, 2));
        p.add_transition(Some("t1"), "A", Operator::seq(vec![AtomicOp::assign("x", Term::int(1))]), "B");
        p.add_transition(
            Some("t2"),
            "B",
            Operator::new(Term::bin(Func::Gt, v("x"), Term::int(0)), vec![AtomicOp::output("a", v("x"))]),
            "C",
        );
        let q = remove_state(&p, &Name::new("B"), Mode::Verbatim).unwrap().unwrap();
        assert_eq!(q.states.len(), 2);
        assert_eq!(q.transitions.len(), 1);
        assert_eq!(q.transitions[0].op.to_string(), "[1 > 0] (x := 1; a!x)");
        assert_eq!(q.transitions[0].src.as_str(), "A");
        assert_eq!(q.transitions[0].dst.as_str(), "C");
    }

    #[test]
    fn open_initial_choice_blocks_removal_before_output() {
        let mut p = Process::new("P", "A").with_var("y", Domain::int(0, 1));
        p.add_transition(Some("t1"), "A", Operator::skip(), "B");
        p.add_transition(Some("t2"), "B", Operator::seq(vec![AtomicOp::output("b", v("y"))]), "C");
        let r = removal_obstacle(&p, &Name::new("B"), Mode::Sound).unwrap();
        assert!(matches!(r, Some(Rejection::InitialChoice { .. })), "{r:?}");
        assert_eq!(removal_obstacle(&p, &Name::new("B"), Mode::Verbatim).unwrap(), None);
        let fixed = p.with_init(Term::eq(v("y"), Term::int(0)));
        assert_eq!(removal_obstacle(&fixed, &Name::new("B"), Mode::Sound).unwrap(), None);
    }

    #[test]
    fn self_loop_is_rejected() {
        let mut p = Process::new("P", "A");
        p.add_transition(Some("t1"), "A", Operator::skip(), "B");
        p.add_transition(Some("t2"), "B", Operator::skip(), "B");
        assert_eq!(
            remove_state(&p, &Name::new("B"), Mode::Verbatim).unwrap(),
            Err(Rejection::SelfLoop(Name::new("t2")))
        );
        assert_eq!(remove_state(&p, &Name::new("A"), Mode::Verbatim).unwrap(), Err(Rejection::Start));
        assert!(matches!(remove_state(&p, &Name::new("Z"), Mode::Verbatim), Err(Error::UnknownState(_))));
    }

    #[test]
    fn overlapping_internal_guards_are_rejected() {
        let mut p = Process::new("P", "A").with_var("x", Domain::int(0, 2));
        p.add_transition(Some("t1"), "A", Operator::skip(), "B");
        p.add_transition(Some("t2"), "B", Operator::new(Term::bin(Func::Ge, v("x"), Term::int(1)), vec![]), "C");
        p.add_transition(Some("t3"), "B", Operator::new(Term::bin(Func::Le, v("x"), Term::int(1)), vec![]), "D");
        let r = remove_state(&p, &Name::new("B"), Mode::Verbatim).unwrap().unwrap_err();
        assert!(matches!(r, Rejection::NotDisjoint { .. }), "{r}");
    }

    #[test]
    fn fusion_folds_three_copies() {
        let mut p = Process::new("P", "A").with_var("x", Domain::int(0, 3));
        for k in 1..=3 {
            p.add_transition(
                None,
                "A",
                Operator::new(Term::eq(v("x"), Term::int(k)), vec![AtomicOp::assign("x", Term::int(1))]),
                "B",
            );
        }
        let q = fuse(&p);
        assert_eq!(q.transitions.len(), 1);
        assert_eq!(q.transitions[0].op.guard.to_string(), "x == 1 || x == 2 || x == 3");
        assert_eq!(fuse(&q), q);
    }

    #[test]
    fn unessential_assignments_cascade() {
        let mut p = Process::new("P", "A")
            .with_var("x", Domain::int(0, 3))
            .with_var("y", Domain::int(0, 3))
            .with_var("w", Domain::int(0, 3));
        p.add_transition(
            None,
            "A",
            Operator::seq(vec![
                AtomicOp::assign("w", Term::int(1)),
                AtomicOp::assign("y", v("w")),
                AtomicOp::output("a", v("x")),
            ]),
            "A",
        );
        let q = drop_unessential(&p);
        assert_eq!(q.transitions[0].op.body, vec![AtomicOp::output("a", v("x"))]);
    }

    #[test]
    fn minimal_process_is_untouched() {
        let mut p = Process::new("P", "A").with_var("x", Domain::int(0, 1));
        p.add_transition(None, "A", Operator::seq(vec![AtomicOp::input("a", "x")]), "B");
        p.add_transition(None, "B", Operator::seq(vec![AtomicOp::output("b", v("x"))]), "A");
        let (q, log) = simplify(&p, Strategy::default()).unwrap();
        assert_eq!(q, p);
        assert!(log.is_empty());
    }
}
