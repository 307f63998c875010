//! Process graphs, derived formulas, essential variables and composite transitions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::operators::{AtomicOp, Operator};
use crate::symbolic::{satisfiable, Domain, Domains, Name, Sort, Term};

/// Name of the control variable `at_P` in valuations.
pub const AT: &str = "@at";

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transition {
    pub id: Name,
    pub src: Name,
    pub op: Operator,
    pub dst: Name,
}

impl Transition {
    pub fn new(id: impl Into<Name>, src: impl Into<Name>, op: Operator, dst: impl Into<Name>) -> Self {
        Transition {
            id: id.into(),
            src: src.into(),
            op,
            dst: dst.into(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Process {
    pub name: Name,
    pub vars: Domains,
    pub init: Term,
    pub states: Vec<Name>,
    pub start: Name,
    /// States where stopping counts as normal completion rather than deadlock.
    pub finals: Vec<Name>,
    pub transitions: Vec<Transition>,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Diagnostic {
    pub code: &'static str,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CompositeTransition {
    pub src: Name,
    pub dst: Name,
    pub steps: Vec<Name>,
    /// The folded operator; `⊤[]` for the empty CT.
    pub op: Operator,
}

impl Process {
    pub fn new(name: impl Into<Name>, start: impl Into<Name>) -> Self {
        let start = start.into();
        Process {
            name: name.into(),
            vars: Domains::new(),
            init: Term::tt(),
            states: vec![start.clone()],
            start,
            finals: Vec::new(),
            transitions: Vec::new(),
        }
    }

    pub fn with_var(mut self, x: impl Into<Name>, d: Domain) -> Self {
        self.vars.insert(x.into(), d);
        self
    }

    pub fn with_init(mut self, init: Term) -> Self {
        self.init = init;
        self
    }

    pub fn add_state(&mut self, s: impl Into<Name>) {
        let s = s.into();
        if !self.states.contains(&s) {
            self.states.push(s);
        }
    }

    /// Adds a transition with the next positional id `t<k>` unless `id` is given.
    pub fn add_transition(&mut self, id: Option<&str>, src: &str, op: Operator, dst: &str) {
        self.add_state(src);
        self.add_state(dst);
        let id = match id {
            Some(id) => Name::new(id),
            None => self.fresh_transition_id("t"),
        };
        self.transitions.push(Transition::new(id, src, op, dst));
    }

    pub fn fresh_transition_id(&self, prefix: &str) -> Name {
        let taken: BTreeSet<&str> = self.transitions.iter().map(|t| t.id.as_str()).collect();
        (self.transitions.len() + 1..)
            .map(|k| format!("{prefix}{k}"))
            .find(|c| !taken.contains(c.as_str()))
            .map(Name::from)
            .unwrap()
    }

    pub fn at_var(&self) -> Name {
        Name::new(AT)
    }

    pub fn at_domain(&self) -> Domain {
        Domain::Enum(self.states.clone())
    }

    /// Declared domains plus the control variable.
    pub fn full_domains(&self) -> Domains {
        let mut d = self.vars.clone();
        d.insert(self.at_var(), self.at_domain());
        d
    }

    /// `⟨P⟩ = (at_P = s0) ∧ I_P`
    pub fn formula(&self) -> Term {
        Term::and(
            Term::eq(Term::Var(self.at_var()), Term::Const(crate::symbolic::Value::Sym(self.start.clone()))),
            self.init.clone(),
        )
    }

    /// `⟨t⟩ = (at_P = src) ∧ ⟨O_t⟩`
    pub fn transition_formula(&self, t: &Transition) -> Term {
        Term::and(
            Term::eq(Term::Var(self.at_var()), Term::Const(crate::symbolic::Value::Sym(t.src.clone()))),
            t.op.guard.clone(),
        )
    }

    pub fn transition(&self, id: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.id.as_str() == id)
    }

    pub fn has_state(&self, s: &str) -> bool {
        self.states.iter().any(|x| x.as_str() == s)
    }

    pub fn outgoing<'a>(&'a self, s: &'a Name) -> impl Iterator<Item = &'a Transition> + 'a {
        self.transitions.iter().filter(move |t| &t.src == s)
    }

    pub fn incoming<'a>(&'a self, s: &'a Name) -> impl Iterator<Item = &'a Transition> + 'a {
        self.transitions.iter().filter(move |t| &t.dst == s)
    }

    /// Channel names occurring in any transition.
    pub fn channels(&self) -> BTreeSet<Name> {
        self.transitions
            .iter()
            .flat_map(|t| t.op.body.iter().filter_map(AtomicOp::channel).cloned())
            .collect()
    }

    /// Returns every violated invariant; empty means valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut diag = |code: &'static str, message: String| out.push(Diagnostic { code, message });
        let state_set: BTreeSet<&Name> = self.states.iter().collect();
        if state_set.len() != self.states.len() {
            diag("duplicate-state", "a state is declared twice".into());
        }
        if !state_set.contains(&self.start) {
            diag("unknown-state", format!("start state {} is not declared", self.start));
        }
        for f in &self.finals {
            if !state_set.contains(f) {
                diag("unknown-state", format!("final state {f} is not declared"));
            }
        }
        for (x, d) in &self.vars {
            if x.as_str() == AT {
                diag("at-variable", "the control variable may not be declared".into());
            }
            if let Err(e) = d.check() {
                diag("domain", format!("domain of {x}: {e}"));
            }
        }
        let sort_of = |x: &Name| self.vars.get(x).map(Domain::sort);
        let check_vars = |what: &str, vars: BTreeSet<Name>, diag: &mut dyn FnMut(&'static str, String)| {
            for x in vars {
                if x.as_str() == AT {
                    diag("at-variable", format!("{what} mentions the control variable"));
                } else if !self.vars.contains_key(&x) {
                    diag("undeclared-variable", format!("{what} uses undeclared variable {x}"));
                }
            }
        };
        check_vars("precondition", self.init.free_vars(), &mut diag);
        match self.init.sort(&sort_of) {
            Ok(s) if !s.compatible(&Sort::Bool) => diag("sort", format!("precondition has sort {s}")),
            Err(e) => diag("sort", format!("precondition: {e}")),
            _ => match satisfiable(&self.init, &self.vars) {
                Ok(None) => diag(
                    "precondition-unsatisfiable",
                    format!(
                        "precondition {} has no satisfying valuation over the declared domains",
                        self.init
                    ),
                ),
                Ok(Some(_)) => {}
                Err(e) => diag("precondition", e.to_string()),
            },
        }
        let mut ids = BTreeSet::new();
        for t in &self.transitions {
            let what = format!("transition {}", t.id);
            if !ids.insert(&t.id) {
                diag("duplicate-transition", format!("{what} is declared twice"));
            }
            for s in [&t.src, &t.dst] {
                if !state_set.contains(s) {
                    diag("unknown-state", format!("{what} refers to undeclared state {s}"));
                }
            }
            if let Err(e) = t.op.classify() {
                diag("operator-malformed", format!("{what}: {e}"));
            }
            check_vars(&what, t.op.vars(), &mut diag);
            match t.op.guard.sort(&sort_of) {
                Ok(s) if !s.compatible(&Sort::Bool) => diag("sort", format!("{what}: guard has sort {s}")),
                Err(e) => diag("sort", format!("{what}: guard: {e}")),
                _ => {}
            }
            for ao in &t.op.body {
                match ao {
                    AtomicOp::Assign { var, expr } => match (expr.sort(&sort_of), sort_of(var)) {
                        (Ok(s), Some(vs)) if !s.compatible(&vs) => {
                            diag("sort", format!("{what}: {ao} assigns {s} to a {vs} variable"))
                        }
                        (Err(e), _) => diag("sort", format!("{what}: {ao}: {e}")),
                        _ => {}
                    },
                    AtomicOp::Output { expr, .. } => {
                        if let Err(e) = expr.sort(&sort_of) {
                            diag("sort", format!("{what}: {ao}: {e}"));
                        }
                    }
                    AtomicOp::Input { .. } => {}
                }
            }
        }
        out
    }

    /// Errors with the first diagnostic if the process is invalid.
    pub fn ensure_valid(&self) -> Result<()> {
        match self.validate().first() {
            None => Ok(()),
            Some(d) => Err(Error::InvalidProcess {
                process: self.name.to_string(),
                detail: d.to_string(),
            }),
        }
    }

    /// Least set containing guard and output variables and closed under
    /// assignment dataflow into essential targets.
    pub fn essential_vars(&self) -> BTreeSet<Name> {
        let mut ess = BTreeSet::new();
        for t in &self.transitions {
            ess.extend(t.op.guard.free_vars());
            for ao in &t.op.body {
                if let AtomicOp::Output { expr, .. } = ao {
                    ess.extend(expr.free_vars());
                }
            }
        }
        loop {
            let before = ess.len();
            for t in &self.transitions {
                for ao in &t.op.body {
                    if let AtomicOp::Assign { var, expr } = ao {
                        if ess.contains(var) {
                            ess.extend(expr.free_vars());
                        }
                    }
                }
            }
            if ess.len() == before {
                break;
            }
        }
        ess.remove(&self.at_var());
        ess
    }

    /// Every composite transition from `s` with at most `maxlen` steps whose
    /// fold is defined, in lexicographic order of step identifiers.
    pub fn composite_transitions(&self, s: &Name, maxlen: usize) -> Vec<CompositeTransition> {
        let mut by_src: BTreeMap<&Name, Vec<&Transition>> = BTreeMap::new();
        for t in &self.transitions {
            by_src.entry(&t.src).or_default().push(t);
        }
        for v in by_src.values_mut() {
            v.sort_by(|a, b| a.id.cmp(&b.id));
        }
        let mut out = Vec::new();
        let mut steps = Vec::new();
        self.ct_dfs(&by_src, s, None, &mut steps, s, maxlen, &mut out);
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn ct_dfs(
        &self,
        by_src: &BTreeMap<&Name, Vec<&Transition>>,
        start: &Name,
        acc: Option<&Operator>,
        steps: &mut Vec<Name>,
        at: &Name,
        remaining: usize,
        out: &mut Vec<CompositeTransition>,
    ) {
        out.push(CompositeTransition {
            src: start.clone(),
            dst: at.clone(),
            steps: steps.clone(),
            op: acc.cloned().unwrap_or_else(Operator::skip),
        });
        if remaining == 0 {
            return;
        }
        for t in by_src.get(at).map(Vec::as_slice).unwrap_or(&[]) {
            if t.op.classify().is_err() {
                continue;
            }
            let folded = match acc {
                None => t.op.clone(),
                Some(o) => {
                    if !o.is_internal() && !t.op.is_internal() {
                        continue;
                    }
                    match o.concat(&t.op) {
                        Ok(Some(c)) => c,
                        _ => continue,
                    }
                }
            };
            steps.push(t.id.clone());
            self.ct_dfs(by_src, start, Some(&folded), steps, &t.dst, remaining - 1, out);
            steps.pop();
        }
    }

    /// Applies a variable renaming to declarations, precondition and operators.
    pub fn rename_vars(&self, map: &BTreeMap<Name, Name>) -> Process {
        let f = |x: &Name| map.get(x).cloned();
        let mut p = self.clone();
        p.vars = self
            .vars
            .iter()
            .map(|(x, d)| (f(x).unwrap_or_else(|| x.clone()), d.clone()))
            .collect();
        p.init = self.init.rename_vars(&f);
        for t in &mut p.transitions {
            t.op = t.op.rename_vars(&f);
        }
        p
    }

    /// Applies a state renaming everywhere states occur.
    pub fn rename_states(&self, map: &BTreeMap<Name, Name>) -> Process {
        let f = |s: &Name| map.get(s).cloned().unwrap_or_else(|| s.clone());
        let mut p = self.clone();
        p.states = self.states.iter().map(f).collect();
        p.start = f(&self.start);
        p.finals = self.finals.iter().map(f).collect();
        for t in &mut p.transitions {
            t.src = f(&t.src);
            t.dst = f(&t.dst);
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::run_operator;
    use crate::symbolic::{enumerate_valuations, eval_term, Func, Value};

    fn v(s: &str) -> Term {
        Term::var(s)
    }

    #[test]
    fn trivial_process_is_valid() {
        let p = Process::new("P", "s");
        assert!(p.validate().is_empty());
    }

    #[test]
    fn unsatisfiable_precondition_is_reported() {
        let p = Process::new("P", "s")
            .with_var("x", Domain::int(0, 3))
            .with_init(Term::bin(Func::Lt, v("x"), v("x")));
        let d = p.validate();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].code, "precondition-unsatisfiable");
    }

    #[test]
    fn malformed_operator_is_reported() {
        let mut p = Process::new("P", "s").with_var("x", Domain::int(0, 1));
        p.add_transition(
            Some("t"),
            "s",
            Operator::seq(vec![AtomicOp::input("a", "x"), AtomicOp::input("b", "x")]),
            "s",
        );
        let d = p.validate();
        assert!(d.iter().any(|d| d.code == "operator-malformed"), "{d:?}");
    }

    #[test]
    fn undeclared_variables_and_states_are_reported() {
        let mut p = Process::new("P", "s");
        p.transitions.push(Transition::new(
            "t",
            "s",
            Operator::seq(vec![AtomicOp::assign("y", Term::int(1))]),
            "q",
        ));
        let codes: BTreeSet<_> = p.validate().iter().map(|d| d.code).collect();
        assert!(codes.contains("undeclared-variable"));
        assert!(codes.contains("unknown-state"));
    }

    #[test]
    fn essential_closure() {
        let mut p = Process::new("P", "s")
            .with_var("x", Domain::int(0, 1))
            .with_var("y", Domain::int(0, 1))
            .with_var("w", Domain::int(0, 1));
        p.add_transition(
            None,
            "s",
            Operator::seq(vec![AtomicOp::assign("y", Term::bin(Func::Add, v("x"), Term::int(1)))]),
            "s",
        );
        assert!(p.essential_vars().is_empty());

        p.add_transition(
            None,
            "s",
            Operator::new(Term::eq(v("y"), Term::int(0)), vec![AtomicOp::output("o", v("y"))]),
            "s",
        );
        p.add_transition(None, "s", Operator::seq(vec![AtomicOp::assign("x", v("w"))]), "s");
        let names: BTreeSet<Name> = ["w", "x", "y"].iter().map(|s| Name::new(s)).collect();
        assert_eq!(p.essential_vars(), names);
    }

    fn chain() -> Process {
        let mut p = Process::new("P", "a")
            .with_var("x", Domain::int(0, 2))
            .with_var("y", Domain::int(0, 2));
        p.add_transition(Some("t1"), "a", Operator::seq(vec![AtomicOp::assign("x", Term::int(1))]), "b");
        p.add_transition(
            Some("t2"),
            "b",
            Operator::new(Term::bin(Func::Gt, v("x"), Term::int(0)), vec![AtomicOp::output("o", v("x"))]),
            "c",
        );
        p.add_transition(Some("t3"), "c", Operator::seq(vec![AtomicOp::input("i", "y")]), "a");
        p
    }

    #[test]
    fn composite_transitions_bounded() {
        let p = chain();
        let a = Name::new("a");
        let cts = p.composite_transitions(&a, 0);
        assert_eq!(cts.len(), 1);
        assert!(cts[0].steps.is_empty());
        assert_eq!(cts[0].op, Operator::skip());

        let cts = p.composite_transitions(&a, 4);
        let seqs: Vec<String> = cts.iter().map(|c| c.steps.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(".")).collect();
        assert_eq!(seqs, vec!["", "t1", "t1.t2"]);
    }

    #[test]
    fn composite_fold_agrees_with_stepwise_execution() {
        let p = chain();
        let doms = p.vars.clone();
        let ct = p.composite_transitions(&Name::new("a"), 2).pop().unwrap();
        let vars: BTreeSet<Name> = doms.keys().cloned().collect();
        for xi in enumerate_valuations(&vars, &doms).unwrap() {
            if eval_term(&ct.op.guard, &xi).unwrap() != Value::Bool(true) {
                continue;
            }
            let folded = run_operator(&xi, &ct.op, None, &doms).unwrap();
            let mut cur = xi.clone();
            let mut act = crate::semantics::Action::Tau;
            for id in &ct.steps {
                let t = p.transition(id.as_str()).unwrap();
                let (a, next) = run_operator(&cur, &t.op, None, &doms).unwrap();
                if a != crate::semantics::Action::Tau {
                    act = a;
                }
                cur = next;
            }
            assert_eq!(folded, (act, cur));
        }
    }
}
