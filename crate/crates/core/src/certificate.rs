//! Checking a family of formulas `b_{s1,s2}` against two processes.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::operators::{pair_transform, Kind, Operator};
use crate::process::{CompositeTransition, Process};
use crate::symbolic::{
    is_valid, show_valuation, solutions, Compiled, Domain, Domains, Name, Term, Valuation, ValuationIter, Verdict,
};

/// Name every matched-input variable is normalized to, so that all
/// disjuncts of one obligation speak about the same received value.
const RECEIVED: &str = "#in";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub name: Name,
    pub left: Name,
    pub right: Name,
    /// Absent pairs stand for ⊥.
    pub entries: BTreeMap<(Name, Name), Term>,
    /// `(transition id, opposite state)` to CTs given as step-id sequences.
    pub hints: BTreeMap<(Name, Name), Vec<Vec<Name>>>,
    pub maxlen: usize,
}

impl Certificate {
    pub fn new(name: impl Into<Name>, left: impl Into<Name>, right: impl Into<Name>) -> Self {
        Certificate {
            name: name.into(),
            left: left.into(),
            right: right.into(),
            entries: BTreeMap::new(),
            hints: BTreeMap::new(),
            maxlen: 2,
        }
    }

    pub fn entry(&self, s1: &Name, s2: &Name) -> Term {
        self.entries
            .get(&(s1.clone(), s2.clone()))
            .cloned()
            .unwrap_or_else(Term::ff)
    }

    pub fn with_entry(mut self, s1: &str, s2: &str, b: Term) -> Self {
        self.entries.insert((Name::new(s1), Name::new(s2)), b);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Status {
    /// Holds; the smallest sufficient CT set found is listed.
    Pass { cts: Vec<Vec<Name>> },
    Fail { counterexample: Valuation },
    /// Fails, but longer CTs than `maxlen` were not explored.
    NoCtWithinMaxlen { counterexample: Valuation },
}

impl Status {
    pub fn passed(&self) -> bool {
        matches!(self, Status::Pass { .. })
    }

    fn tag(&self) -> &'static str {
        match self {
            Status::Pass { .. } => "pass",
            Status::Fail { .. } => "fail",
            Status::NoCtWithinMaxlen { .. } => "no-ct",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Obligation {
    pub id: String,
    pub formula: Term,
    pub status: Status,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub certificate: Name,
    pub obligations: Vec<Obligation>,
    /// Obligations whose antecedent entry is ⊥.
    pub vacuous: usize,
    pub domain_sizes: BTreeMap<Name, u128>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.obligations.iter().all(|o| o.status.passed())
    }

    pub fn failures(&self) -> impl Iterator<Item = &Obligation> {
        self.obligations.iter().filter(|o| !o.status.passed())
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "certificate {}", self.certificate);
        let sizes: Vec<String> = self.domain_sizes.iter().map(|(k, n)| format!("{k}:{n}")).collect();
        let _ = writeln!(s, "enumerated domain sizes: {}", sizes.join(" "));
        for o in &self.obligations {
            match &o.status {
                Status::Pass { cts } => {
                    let cts: Vec<String> = cts.iter().map(|c| show_ct(c)).collect();
                    let _ = writeln!(s, "  PASS {} via {{{}}}", o.id, cts.join(", "));
                }
                Status::Fail { counterexample } => {
                    let _ = writeln!(s, "  FAIL {} failed with counterexample {}", o.id, show_valuation(counterexample));
                }
                Status::NoCtWithinMaxlen { counterexample } => {
                    let _ = writeln!(
                        s,
                        "  FAIL {} no sufficient CT set within maxlen; counterexample {}",
                        o.id,
                        show_valuation(counterexample)
                    );
                }
            }
        }
        let _ = writeln!(s, "  {} vacuous obligations (entry is false)", self.vacuous);
        let _ = writeln!(s, "{}", if self.passed() { "all obligations pass" } else { "some obligations fail" });
        s
    }

    pub fn render_machine(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "certificate={}", self.certificate);
        let _ = writeln!(s, "passed={}", self.passed());
        let _ = writeln!(s, "obligations={}", self.obligations.len());
        let _ = writeln!(s, "vacuous={}", self.vacuous);
        for o in &self.obligations {
            let _ = writeln!(s, "obligation.{}={}", o.id, o.status.tag());
        }
        s
    }
}

fn show_ct(steps: &[Name]) -> String {
    if steps.is_empty() {
        "()".into()
    } else {
        steps.iter().map(Name::as_str).collect::<Vec<_>>().join(".")
    }
}

fn compatible(a: &Kind, b: &Kind) -> bool {
    a == b
}

/// All CTs from `s` of at most `maxlen` steps whose kind matches `against`.
pub fn find_matching_cts(p: &Process, s: &Name, against: &Operator, maxlen: usize) -> Result<Vec<CompositeTransition>> {
    Ok(matching(p, s, against, maxlen)?.0)
}

/// Matching CTs and whether the search was cut short by `maxlen`.
fn matching(p: &Process, s: &Name, against: &Operator, maxlen: usize) -> Result<(Vec<CompositeTransition>, bool)> {
    let kind = against.classify()?;
    let all = p.composite_transitions(s, maxlen);
    let truncated = all
        .iter()
        .any(|ct| ct.steps.len() == maxlen && p.outgoing(&ct.dst).next().is_some());
    let cts = all
        .into_iter()
        .filter(|ct| ct.op.classify().is_ok_and(|k| compatible(&k, &kind)))
        .collect();
    Ok((cts, truncated))
}

/// Resolves a hinted CT against `p`, starting at `s`.
fn hinted_ct(p: &Process, s: &Name, steps: &[Name]) -> Result<CompositeTransition> {
    let mut at = s.clone();
    let mut op: Option<Operator> = None;
    for id in steps {
        let t = p
            .transition(id.as_str())
            .ok_or_else(|| Error::HintInvalid(format!("unknown transition {id} in {}", p.name)))?;
        if t.src != at {
            return Err(Error::HintInvalid(format!(
                "{} does not continue from state {at}",
                t.id
            )));
        }
        op = Some(match op {
            None => t.op.clone(),
            Some(o) => {
                if !o.is_internal() && !t.op.is_internal() {
                    return Err(Error::HintInvalid(format!(
                        "CT {} communicates twice",
                        show_ct(steps)
                    )));
                }
                o.concat(&t.op)?
                    .ok_or_else(|| Error::HintInvalid(format!("CT {} has an undefined fold", show_ct(steps))))?
            }
        });
        at = t.dst.clone();
    }
    Ok(CompositeTransition {
        src: s.clone(),
        dst: at,
        steps: steps.to_vec(),
        op: op.unwrap_or_else(Operator::skip),
    })
}

/// Validity of `lhs → rhs`, enumerating only the solutions of `lhs` for
/// the variables it constrains.
fn implication(lhs: &Term, rhs: &Term, doms: &Domains) -> Result<Verdict> {
    let whole = Term::app(crate::symbolic::Func::Implies, vec![lhs.clone(), rhs.clone()]);
    whole.check_formula(doms)?;
    let lvars = lhs.free_vars();
    let sols = match solutions(lhs, &lvars, doms) {
        Ok(s) => s,
        Err(Error::Eval(_)) => return is_valid(&whole, doms),
        Err(e) => return Err(e),
    };
    let rest: BTreeSet<Name> = rhs.free_vars().difference(&lvars).cloned().collect();
    let mut names: Vec<Name> = lvars.iter().cloned().collect();
    let it = ValuationIter::new(&rest, doms)?;
    names.extend(it.names().iter().cloned());
    let c = Compiled::new(rhs, &|x| names.iter().position(|n| n == x))?;
    let rest_vals: Vec<Vec<crate::symbolic::Value>> = {
        let mut it = ValuationIter::new(&rest, doms)?;
        let mut frame = Vec::new();
        let mut out = Vec::new();
        while it.next_frame(&mut frame) {
            out.push(frame.clone());
        }
        out
    };
    let mut frame = Vec::with_capacity(names.len());
    for sol in &sols {
        for tail in &rest_vals {
            frame.clear();
            frame.extend(lvars.iter().map(|x| sol[x].clone()));
            frame.extend(tail.iter().cloned());
            let res = c.holds(&frame);
            if res != Ok(true) {
                return Ok(Verdict::Counterexample {
                    valuation: names.iter().cloned().zip(frame.iter().cloned()).collect(),
                    error: res.err(),
                });
            }
        }
    }
    Ok(Verdict::Valid)
}

struct Side<'a> {
    mover: &'a Process,
    other: &'a Process,
    /// Whether the mover is the left process of the certificate.
    left: bool,
}

struct Checker<'a> {
    cert: &'a Certificate,
    doms: Domains,
    channel_domains: &'a Domains,
}

impl Checker<'_> {
    fn entry(&self, side: &Side, own: &Name, opp: &Name) -> Term {
        if side.left {
            self.cert.entry(own, opp)
        } else {
            self.cert.entry(opp, own)
        }
    }

    fn obligation(
        &mut self,
        side: &Side,
        t: &crate::process::Transition,
        opp: &Name,
    ) -> Result<Option<Obligation>> {
        let b = self.entry(side, &t.src, opp);
        if b.is_false() {
            return Ok(None);
        }
        let lhs = Term::and(b, t.op.guard.clone());
        let hint = self.cert.hints.get(&(t.id.clone(), opp.clone()));
        let (cts, truncated) = match hint {
            Some(list) => (
                list.iter()
                    .map(|steps| hinted_ct(side.other, opp, steps))
                    .collect::<Result<Vec<_>>>()?,
                false,
            ),
            None => matching(side.other, opp, &t.op, self.cert.maxlen)?,
        };
        let mut disjuncts = Vec::new();
        for ct in &cts {
            let post = self.entry(side, &t.dst, &ct.dst);
            let pr = pair_transform(&t.op, &ct.op, &post)?;
            let mut f = pr.formula;
            for fv in &pr.fresh {
                let canon = Name::new(RECEIVED);
                let dom = self
                    .channel_domains
                    .get(&fv.chan)
                    .or_else(|| self.doms.get(&fv.left))
                    .cloned()
                    .ok_or_else(|| Error::DomainMissing(fv.left.clone()))?;
                self.doms.insert(canon.clone(), dom);
                let from = fv.name.clone();
                f = f.rename_vars(&|x: &Name| (x == &from).then(|| canon.clone()));
            }
            disjuncts.push(f);
        }
        let id = format!("{}:{}@{}", if side.left { "left" } else { "right" }, t.id, opp);
        let formula = Term::app(
            crate::symbolic::Func::Implies,
            vec![lhs.clone(), Term::or_all(disjuncts.clone())],
        );
        let holds = |this: &Self, pick: &[usize]| -> Result<Verdict> {
            let rhs = Term::or_all(pick.iter().map(|&i| disjuncts[i].clone()));
            implication(&lhs, &rhs, &this.doms)
        };
        let all: Vec<usize> = (0..disjuncts.len()).collect();
        let status = match holds(self, &all)? {
            Verdict::Counterexample { valuation, .. } => {
                if truncated {
                    Status::NoCtWithinMaxlen {
                        counterexample: valuation,
                    }
                } else {
                    Status::Fail {
                        counterexample: valuation,
                    }
                }
            }
            Verdict::Valid => {
                let mut best: Option<Vec<usize>> = None;
                if holds(self, &[])?.is_valid() {
                    best = Some(Vec::new());
                }
                for i in 0..all.len() {
                    if best.is_some() {
                        break;
                    }
                    if holds(self, &[i])?.is_valid() {
                        best = Some(vec![i]);
                    }
                }
                'pairs: for i in 0..all.len() {
                    for j in i + 1..all.len() {
                        if best.is_some() {
                            break 'pairs;
                        }
                        if holds(self, &[i, j])?.is_valid() {
                            best = Some(vec![i, j]);
                        }
                    }
                }
                let best = match best {
                    Some(b) => b,
                    None => {
                        let mut keep = all.clone();
                        let mut k = 0;
                        while k < keep.len() {
                            let mut trial = keep.clone();
                            trial.remove(k);
                            if holds(self, &trial)?.is_valid() {
                                keep = trial;
                            } else {
                                k += 1;
                            }
                        }
                        keep
                    }
                };
                Status::Pass {
                    cts: best.iter().map(|&i| cts[i].steps.clone()).collect(),
                }
            }
        };
        Ok(Some(Obligation { id, formula, status }))
    }
}

/// Checks the initial-pair condition and both transfer conditions.
pub fn check_certificate(p1: &Process, p2: &Process, cert: &Certificate, channel_domains: &Domains) -> Result<Report> {
    p1.ensure_valid()?;
    p2.ensure_valid()?;
    let shared: Vec<&Name> = p1.vars.keys().filter(|x| p2.vars.contains_key(*x)).collect();
    if !shared.is_empty() {
        return Err(Error::PreconditionViolation(format!(
            "{} and {} share variables {:?}; rename them apart first",
            p1.name, p2.name, shared
        )));
    }
    for ((s1, s2), b) in &cert.entries {
        if !p1.has_state(s1.as_str()) {
            return Err(Error::UnknownState(format!("{s1} in {}", p1.name)));
        }
        if !p2.has_state(s2.as_str()) {
            return Err(Error::UnknownState(format!("{s2} in {}", p2.name)));
        }
        if b.mentions(&p1.at_var()) {
            return Err(Error::PreconditionViolation(format!("entry ({s1},{s2}) mentions the control variable")));
        }
    }
    let mut doms = p1.vars.clone();
    doms.extend(p2.vars.clone());
    let mut checker = Checker {
        cert,
        doms,
        channel_domains,
    };
    let mut obligations = Vec::new();
    let init = Term::and(p1.init.clone(), p2.init.clone());
    let b0 = cert.entry(&p1.start, &p2.start);
    let status = match implication(&init, &b0, &checker.doms)? {
        Verdict::Valid => Status::Pass { cts: Vec::new() },
        Verdict::Counterexample { valuation, .. } => Status::Fail {
            counterexample: valuation,
        },
    };
    obligations.push(Obligation {
        id: "init".into(),
        formula: Term::app(crate::symbolic::Func::Implies, vec![init, b0]),
        status,
    });
    let mut vacuous = 0;
    for side in [
        Side {
            mover: p1,
            other: p2,
            left: true,
        },
        Side {
            mover: p2,
            other: p1,
            left: false,
        },
    ] {
        let mut ts: Vec<_> = side.mover.transitions.iter().collect();
        ts.sort_by(|a, b| a.id.cmp(&b.id));
        for t in ts {
            for opp in &side.other.states {
                match checker.obligation(&side, t, opp)? {
                    Some(o) => obligations.push(o),
                    None => vacuous += 1,
                }
            }
        }
    }
    let domain_sizes = checker
        .doms
        .iter()
        .map(|(k, d)| (k.clone(), d.cardinality()))
        .collect();
    Ok(Report {
        certificate: cert.name.clone(),
        obligations,
        vacuous,
        domain_sizes,
    })
}

/// Domains for the payloads of named channels.
pub fn channel_domains<I: IntoIterator<Item = (Name, Domain)>>(it: I) -> Domains {
    it.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::AtomicOp;
    use crate::symbolic::Domain;

    #[test]
    fn empty_processes_pass_with_true_start_entry() {
        let p = Process::new("P", "p");
        let q = Process::new("Q", "q");
        let cert = Certificate::new("c", "P", "Q").with_entry("p", "q", Term::tt());
        let r = check_certificate(&p, &q, &cert, &Domains::new()).unwrap();
        assert!(r.passed());
        assert_eq!(r.obligations.len(), 1);
    }

    #[test]
    fn internal_against_internal_allows_empty_ct() {
        let mut p = Process::new("P", "p");
        p.add_transition(None, "p", Operator::skip(), "p");
        let cts = find_matching_cts(&p, &Name::new("p"), &Operator::skip(), 0).unwrap();
        assert_eq!(cts.len(), 1);
        assert!(cts[0].steps.is_empty());
    }

    #[test]
    fn missing_output_yields_no_candidates() {
        let mut p = Process::new("P", "p").with_var("x", Domain::int(0, 1));
        p.add_transition(None, "p", Operator::seq(vec![AtomicOp::input("a", "x")]), "p");
        let out = Operator::seq(vec![AtomicOp::output("a", Term::int(0))]);
        assert!(find_matching_cts(&p, &Name::new("p"), &out, 3).unwrap().is_empty());
    }

    #[test]
    fn dangling_hint_is_rejected() {
        let mut p = Process::new("P", "p")
            .with_var("x", Domain::int(0, 1))
            .with_init(Term::eq(Term::var("x"), Term::int(0)));
        p.add_transition(Some("t1"), "p", Operator::seq(vec![AtomicOp::output("a", Term::var("x"))]), "p");
        let mut q = Process::new("Q", "q")
            .with_var("y", Domain::int(0, 1))
            .with_init(Term::eq(Term::var("y"), Term::int(0)));
        q.add_transition(Some("e1"), "q", Operator::seq(vec![AtomicOp::output("a", Term::var("y"))]), "q");
        let mut cert = Certificate::new("c", "P", "Q").with_entry("p", "q", Term::eq(Term::var("x"), Term::var("y")));
        cert.hints.insert((Name::new("t1"), Name::new("q")), vec![vec![Name::new("nope")]]);
        assert!(matches!(
            check_certificate(&p, &q, &cert, &Domains::new()),
            Err(Error::HintInvalid(_))
        ));
        cert.hints.insert((Name::new("t1"), Name::new("q")), vec![vec![Name::new("e1")]]);
        assert!(check_certificate(&p, &q, &cert, &Domains::new()).unwrap().passed());
    }
}
