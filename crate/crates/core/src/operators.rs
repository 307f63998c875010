//! Atomic operators, guarded operator sequences and their formula transformers.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::semantics::Action;
use crate::symbolic::{eval_term, Domains, EvalError, Name, Term, Valuation, Value};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum AtomicOp {
    Input { chan: Name, var: Name },
    Output { chan: Name, expr: Term },
    Assign { var: Name, expr: Term },
}

impl AtomicOp {
    pub fn input(chan: impl Into<Name>, var: impl Into<Name>) -> Self {
        AtomicOp::Input {
            chan: chan.into(),
            var: var.into(),
        }
    }

    pub fn output(chan: impl Into<Name>, expr: Term) -> Self {
        AtomicOp::Output {
            chan: chan.into(),
            expr,
        }
    }

    pub fn assign(var: impl Into<Name>, expr: Term) -> Self {
        AtomicOp::Assign {
            var: var.into(),
            expr,
        }
    }

    pub fn channel(&self) -> Option<&Name> {
        match self {
            AtomicOp::Input { chan, .. } | AtomicOp::Output { chan, .. } => Some(chan),
            AtomicOp::Assign { .. } => None,
        }
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        match self {
            AtomicOp::Input { var, .. } => [var.clone()].into(),
            AtomicOp::Output { expr, .. } => expr.free_vars(),
            AtomicOp::Assign { var, expr } => {
                let mut s = expr.free_vars();
                s.insert(var.clone());
                s
            }
        }
    }
}

impl fmt::Display for AtomicOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomicOp::Input { chan, var } => write!(f, "{chan}?{var}"),
            AtomicOp::Output { chan, expr } => match expr {
                Term::Var(_) | Term::Const(_) => write!(f, "{chan}!{expr}"),
                Term::App(func, _) if func.call_name().is_some() => write!(f, "{chan}!{expr}"),
                _ => write!(f, "{chan}!({expr})"),
            },
            AtomicOp::Assign { var, expr } => write!(f, "{var} := {expr}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Kind {
    Internal,
    Input(Name),
    Output(Name),
}

/// A guard plus a sequence of atomic operators with at most one communication.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Operator {
    pub guard: Term,
    pub body: Vec<AtomicOp>,
}

impl Operator {
    pub fn new(guard: Term, body: Vec<AtomicOp>) -> Self {
        Operator { guard, body }
    }

    /// `⊤[body]`
    pub fn seq(body: Vec<AtomicOp>) -> Self {
        Operator::new(Term::tt(), body)
    }

    /// `⊤[]`
    pub fn skip() -> Self {
        Operator::seq(Vec::new())
    }

    pub fn classify(&self) -> Result<Kind> {
        let mut kind = Kind::Internal;
        for ao in &self.body {
            let k = match ao {
                AtomicOp::Input { chan, .. } => Kind::Input(chan.clone()),
                AtomicOp::Output { chan, .. } => Kind::Output(chan.clone()),
                AtomicOp::Assign { .. } => continue,
            };
            if kind != Kind::Internal {
                return Err(Error::MalformedOperator(format!(
                    "{self} contains more than one communication"
                )));
            }
            kind = k;
        }
        Ok(kind)
    }

    pub fn is_internal(&self) -> bool {
        self.body.iter().all(|ao| ao.channel().is_none())
    }

    pub fn comm_index(&self) -> Option<usize> {
        self.body.iter().position(|ao| ao.channel().is_some())
    }

    pub fn channel(&self) -> Option<&Name> {
        self.body.iter().find_map(AtomicOp::channel)
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        let mut s = self.guard.free_vars();
        for ao in &self.body {
            s.extend(ao.vars());
        }
        s
    }

    /// `O·b`; `None` when the transform is undefined.
    pub fn wp(&self, b: &Term) -> Result<Option<Term>> {
        let mut b = b.clone();
        for ao in self.body.iter().rev() {
            match ao {
                AtomicOp::Input { var, .. } => {
                    if b.mentions(var) {
                        return Ok(None);
                    }
                }
                AtomicOp::Output { .. } => {}
                AtomicOp::Assign { var, expr } => b = b.substitute(var, expr)?,
            }
        }
        Ok(Some(Term::and(self.guard.clone(), b)))
    }

    /// `O1·O2`; `None` when `O1·⟨O2⟩` is undefined.
    pub fn concat(&self, other: &Operator) -> Result<Option<Operator>> {
        self.classify()?;
        other.classify()?;
        if !self.is_internal() && !other.is_internal() {
            return Err(Error::PreconditionViolation(format!(
                "cannot concatenate two communicating operators {self} and {other}"
            )));
        }
        let Some(guard) = self.wp(&other.guard)? else {
            return Ok(None);
        };
        let mut body = self.body.clone();
        body.extend(other.body.iter().cloned());
        Ok(Some(Operator { guard, body }))
    }

    /// Renames channels; variables are untouched.
    pub fn rename_channels(&self, f: &dyn Fn(&Name) -> Name) -> Operator {
        let body = self
            .body
            .iter()
            .map(|ao| match ao {
                AtomicOp::Input { chan, var } => AtomicOp::Input {
                    chan: f(chan),
                    var: var.clone(),
                },
                AtomicOp::Output { chan, expr } => AtomicOp::Output {
                    chan: f(chan),
                    expr: expr.clone(),
                },
                other => other.clone(),
            })
            .collect();
        Operator {
            guard: self.guard.clone(),
            body,
        }
    }

    /// Renames variables everywhere (guard, targets, expressions).
    pub fn rename_vars(&self, f: &dyn Fn(&Name) -> Option<Name>) -> Operator {
        let rn = |x: &Name| f(x).unwrap_or_else(|| x.clone());
        let body = self
            .body
            .iter()
            .map(|ao| match ao {
                AtomicOp::Input { chan, var } => AtomicOp::Input {
                    chan: chan.clone(),
                    var: rn(var),
                },
                AtomicOp::Output { chan, expr } => AtomicOp::Output {
                    chan: chan.clone(),
                    expr: expr.rename_vars(f),
                },
                AtomicOp::Assign { var, expr } => AtomicOp::Assign {
                    var: rn(var),
                    expr: expr.rename_vars(f),
                },
            })
            .collect();
        Operator {
            guard: self.guard.rename_vars(f),
            body,
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.guard.is_true() {
            write!(f, "[{}] ", self.guard)?;
        }
        f.write_str("(")?;
        for (i, ao) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{ao}")?;
        }
        f.write_str(")")
    }
}

/// Executes `op` from `xi`. Assigned and received values are checked against
/// `doms` for every variable that has a declared domain.
pub fn run_operator(
    xi: &Valuation,
    op: &Operator,
    input: Option<&Value>,
    doms: &Domains,
) -> Result<(Action, Valuation)> {
    let kind = op.classify()?;
    if matches!(kind, Kind::Input(_)) != input.is_some() {
        return Err(Error::PreconditionViolation(
            "an input value is required exactly for input operators".into(),
        ));
    }
    if eval_term(&op.guard, xi)?.as_bool() != Some(true) {
        return Err(Error::GuardFalse);
    }
    let store = |xi: &mut Valuation, var: &Name, v: Value| -> Result<()> {
        let v = match doms.get(var) {
            Some(d) => d.normalize(&v).ok_or_else(|| EvalError::OutOfDomain {
                var: var.clone(),
                value: v.clone(),
            })?,
            None => v,
        };
        xi.insert(var.clone(), v);
        Ok(())
    };
    let mut cur = xi.clone();
    let mut action = Action::Tau;
    for ao in &op.body {
        match ao {
            AtomicOp::Input { chan, var } => {
                let v = input.cloned().unwrap_or(Value::Int(0));
                store(&mut cur, var, v.clone())?;
                action = Action::Recv(chan.clone(), v);
            }
            AtomicOp::Output { chan, expr } => {
                action = Action::Send(chan.clone(), eval_term(expr, &cur)?);
            }
            AtomicOp::Assign { var, expr } => {
                let v = eval_term(expr, &cur)?;
                store(&mut cur, var, v)?;
            }
        }
    }
    Ok((action, cur))
}

/// A variable introduced by the matched-input case of the pair transform.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FreshVar {
    pub name: Name,
    pub chan: Name,
    pub left: Name,
    pub right: Name,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PairResult {
    pub formula: Term,
    pub fresh: Vec<FreshVar>,
}

/// `(O1, O2)·b`
pub fn pair_transform(o1: &Operator, o2: &Operator, b: &Term) -> Result<PairResult> {
    let mut taken = o1.vars();
    taken.extend(o2.vars());
    taken.extend(b.free_vars());
    let mut counter = 0usize;
    let mut fresh = Vec::new();
    let (mut l, mut r) = (&o1.body[..], &o2.body[..]);
    let mut b = b.clone();
    loop {
        match (l.last(), r.last()) {
            (None, None) => {
                let formula = Term::and(Term::and(o1.guard.clone(), o2.guard.clone()), b);
                return Ok(PairResult { formula, fresh });
            }
            (_, Some(AtomicOp::Assign { var, expr })) => {
                b = b.substitute(var, expr)?;
                r = &r[..r.len() - 1];
            }
            (Some(AtomicOp::Assign { var, expr }), _) => {
                b = b.substitute(var, expr)?;
                l = &l[..l.len() - 1];
            }
            (
                Some(AtomicOp::Input { chan: c1, var: x }),
                Some(AtomicOp::Input { chan: c2, var: y }),
            ) if c1 == c2 => {
                let z = loop {
                    let cand = Name::from(format!("z#{counter}"));
                    counter += 1;
                    if !taken.contains(&cand) {
                        break cand;
                    }
                };
                taken.insert(z.clone());
                let zt = Term::Var(z.clone());
                b = b.substitute(x, &zt)?.substitute(y, &zt)?;
                fresh.push(FreshVar {
                    name: z,
                    chan: c1.clone(),
                    left: x.clone(),
                    right: y.clone(),
                });
                l = &l[..l.len() - 1];
                r = &r[..r.len() - 1];
            }
            (
                Some(AtomicOp::Output { chan: c1, expr: e1 }),
                Some(AtomicOp::Output { chan: c2, expr: e2 }),
            ) if c1 == c2 => {
                b = Term::and(Term::eq(e1.clone(), e2.clone()), b);
                l = &l[..l.len() - 1];
                r = &r[..r.len() - 1];
            }
            _ => {
                return Ok(PairResult {
                    formula: Term::ff(),
                    fresh,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::{is_valid, semantically_equal, Domain, Func, Verdict};

    fn v(s: &str) -> Term {
        Term::var(s)
    }

    fn name(s: &str) -> Name {
        Name::new(s)
    }

    #[test]
    fn classification() {
        assert_eq!(Operator::skip().classify(), Ok(Kind::Internal));
        let inp = Operator::seq(vec![AtomicOp::input("a", "x"), AtomicOp::assign("y", v("x"))]);
        assert_eq!(inp.classify(), Ok(Kind::Input(name("a"))));
        let bad = Operator::seq(vec![AtomicOp::input("a", "x"), AtomicOp::output("b", v("y"))]);
        assert!(matches!(bad.classify(), Err(Error::MalformedOperator(_))));
    }

    #[test]
    fn wp_cases() {
        let b = v("b");
        assert_eq!(Operator::skip().wp(&b).unwrap(), Some(b));

        let op = Operator::new(
            Term::bin(Func::Gt, v("x"), Term::int(0)),
            vec![AtomicOp::assign("x", Term::bin(Func::Add, v("x"), Term::int(1)))],
        );
        let post = Term::bin(Func::Gt, v("x"), Term::int(2));
        let w = op.wp(&post).unwrap().unwrap();
        assert_eq!(w.to_string(), "x > 0 && x + 1 > 2");
        let doms: Domains = [(name("x"), Domain::int(0, 4))].into();
        for x in 0..=4 {
            let xi: Valuation = [(name("x"), Value::Int(x))].into();
            let pre = eval_term(&w, &xi).unwrap();
            if x > 0 {
                let (_, after) = run_operator(&xi, &op, None, &Domains::new()).unwrap();
                assert_eq!(pre, eval_term(&post, &after).unwrap());
            } else {
                assert_eq!(pre, Value::Bool(false));
            }
        }
        assert!(doms.contains_key(&name("x")));

        let recv = Operator::seq(vec![AtomicOp::input("a", "x")]);
        assert_eq!(recv.wp(&Term::eq(v("x"), Term::int(1))).unwrap(), None);
    }

    #[test]
    fn run_operator_cases() {
        let xi: Valuation = [(name("x"), Value::Int(0))].into();
        let none = Domains::new();
        assert_eq!(
            run_operator(&xi, &Operator::skip(), None, &none).unwrap(),
            (Action::Tau, xi.clone())
        );
        let op = Operator::seq(vec![AtomicOp::assign("x", Term::int(1)), AtomicOp::output("a", v("x"))]);
        let (a, after) = run_operator(&xi, &op, None, &none).unwrap();
        assert_eq!(a, Action::Send(name("a"), Value::Int(1)));
        assert_eq!(after[&name("x")], Value::Int(1));
        let recv = Operator::seq(vec![AtomicOp::input("a", "x")]);
        let (a, after) = run_operator(&xi, &recv, Some(&Value::Int(7)), &none).unwrap();
        assert_eq!(a, Action::Recv(name("a"), Value::Int(7)));
        assert_eq!(after[&name("x")], Value::Int(7));

        let blocked = Operator::new(Term::ff(), vec![]);
        assert_eq!(run_operator(&xi, &blocked, None, &none), Err(Error::GuardFalse));
        let doms: Domains = [(name("x"), Domain::int(0, 3))].into();
        assert!(matches!(
            run_operator(&xi, &recv, Some(&Value::Int(7)), &doms),
            Err(Error::Eval(EvalError::OutOfDomain { .. }))
        ));
    }

    #[test]
    fn concat_cases() {
        let o1 = Operator::seq(vec![AtomicOp::assign("x", Term::int(1))]);
        let o2 = Operator::new(
            Term::bin(Func::Gt, v("x"), Term::int(0)),
            vec![AtomicOp::output("a", v("x"))],
        );
        let c = o1.concat(&o2).unwrap().unwrap();
        assert_eq!(c.to_string(), "[1 > 0] (x := 1; a!x)");

        let b = Term::bin(Func::Lt, v("x"), Term::int(3));
        let lhs = c.wp(&b).unwrap().unwrap();
        let rhs = o1.wp(&o2.wp(&b).unwrap().unwrap()).unwrap().unwrap();
        let doms: Domains = [(name("x"), Domain::int(0, 3))].into();
        assert!(semantically_equal(&lhs, &rhs, &doms).unwrap().is_valid());

        let recv = Operator::seq(vec![AtomicOp::input("a", "x")]);
        let send = Operator::seq(vec![AtomicOp::output("b", v("y"))]);
        assert!(matches!(recv.concat(&send), Err(Error::PreconditionViolation(_))));
        let guarded = Operator::new(Term::eq(v("x"), Term::int(0)), vec![AtomicOp::assign("y", Term::int(1))]);
        assert_eq!(recv.concat(&guarded).unwrap(), None);
    }

    #[test]
    fn pair_transform_cases() {
        let ox = Operator::seq(vec![AtomicOp::output("a", v("x"))]);
        let oy = Operator::seq(vec![AtomicOp::output("a", v("y"))]);
        let r = pair_transform(&ox, &oy, &Term::tt()).unwrap();
        assert_eq!(r.formula, Term::eq(v("x"), v("y")));
        let doms: Domains = [(name("x"), Domain::int(0, 2)), (name("y"), Domain::int(0, 2))].into();
        let mut cex = 0;
        for x in 0..=2 {
            for y in 0..=2 {
                let xi: Valuation = [(name("x"), Value::Int(x)), (name("y"), Value::Int(y))].into();
                let holds = eval_term(&r.formula, &xi).unwrap() == Value::Bool(true);
                assert_eq!(holds, x == y);
                cex += (!holds) as usize;
            }
        }
        assert_eq!(cex, 6);
        assert!(matches!(is_valid(&r.formula, &doms).unwrap(), Verdict::Counterexample { .. }));

        let ix = Operator::seq(vec![AtomicOp::input("a", "x")]);
        let iy = Operator::seq(vec![AtomicOp::input("a", "y")]);
        let r = pair_transform(&ix, &iy, &Term::eq(v("x"), v("y"))).unwrap();
        assert_eq!(r.formula.to_string(), "z#0 == z#0");
        assert_eq!(r.fresh.len(), 1);
        let fd: Domains = [(name("z#0"), Domain::int(0, 2))].into();
        assert!(is_valid(&r.formula, &fd).unwrap().is_valid());

        let ob = Operator::seq(vec![AtomicOp::output("b", v("y"))]);
        assert_eq!(pair_transform(&ox, &ob, &Term::tt()).unwrap().formula, Term::ff());
    }

    #[test]
    fn pair_transform_fresh_names_avoid_existing() {
        let ix = Operator::seq(vec![AtomicOp::input("a", "x")]);
        let iy = Operator::seq(vec![AtomicOp::input("a", "y")]);
        let b = Term::eq(v("x"), v("z#0"));
        let r = pair_transform(&ix, &iy, &b).unwrap();
        assert_eq!(r.fresh[0].name, name("z#1"));
    }

    #[test]
    fn pair_transform_substitutes_right_assignments_first() {
        let o1 = Operator::seq(vec![AtomicOp::assign("x", Term::int(1))]);
        let o2 = Operator::seq(vec![AtomicOp::assign("y", v("x"))]);
        let r = pair_transform(&o1, &o2, &Term::eq(v("y"), Term::int(1))).unwrap();
        assert_eq!(r.formula.to_string(), "1 == 1");
    }
}
