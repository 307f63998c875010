//! Values, finite domains, terms, evaluation and enumeration-based validity.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::error::{Error, Result};

/// Interned identifier used for variables, channels, states and enum constants.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Name(Arc<str>);

impl Name {
    pub fn new(s: &str) -> Self {
        Name(Arc::from(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Name {
    fn from(s: &str) -> Self {
        Name::new(s)
    }
}

impl From<String> for Name {
    fn from(s: String) -> Self {
        Name(Arc::from(s))
    }
}

impl From<&String> for Name {
    fn from(s: &String) -> Self {
        Name::new(s)
    }
}

impl Borrow<str> for Name {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Sym(Name),
    /// `phi(info, seq, ack)`
    Frame(Arc<[Value; 3]>),
    /// The distorted frame.
    Star,
    List(Arc<[Value]>),
}

impl Value {
    pub fn frame(info: Value, seq: Value, ack: Value) -> Value {
        Value::Frame(Arc::new([info, seq, ack]))
    }

    pub fn list(items: Vec<Value>) -> Value {
        Value::List(Arc::from(items))
    }

    pub fn empty_list() -> Value {
        Value::List(Arc::from(Vec::new()))
    }

    /// Integer view; booleans read as 0/1.
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            Value::Bool(b) => Some(*b as i64),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            Value::Int(0) => Some(false),
            Value::Int(1) => Some(true),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Value]> {
        match self {
            Value::List(items) => Some(items),
            _ => None,
        }
    }

    /// Equality that identifies booleans with the integers 0 and 1.
    pub fn loose_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Bool(_), Value::Int(_)) | (Value::Int(_), Value::Bool(_)) => {
                self.as_int() == other.as_int()
            }
            (Value::Frame(a), Value::Frame(b)) => a.iter().zip(b.iter()).all(|(x, y)| x.loose_eq(y)),
            (Value::List(a), Value::List(b)) => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.loose_eq(y))
            }
            _ => self == other,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Bool(true) => f.write_str("true"),
            Value::Bool(false) => f.write_str("false"),
            Value::Sym(s) => write!(f, "{s}"),
            Value::Frame(c) => write!(f, "phi({}, {}, {})", c[0], c[1], c[2]),
            Value::Star => f.write_str("star"),
            Value::List(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Domain {
    Int { lo: i64, hi: i64 },
    Bool,
    Enum(Vec<Name>),
    List { elem: Box<Domain>, cap: usize },
    Frame { info: Box<Domain>, seq: Box<Domain>, ack: Box<Domain> },
}

impl Domain {
    pub fn int(lo: i64, hi: i64) -> Domain {
        Domain::Int { lo, hi }
    }

    pub fn list(elem: Domain, cap: usize) -> Domain {
        Domain::List { elem: Box::new(elem), cap }
    }

    pub fn frame(info: Domain, seq: Domain, ack: Domain) -> Domain {
        Domain::Frame {
            info: Box::new(info),
            seq: Box::new(seq),
            ack: Box::new(ack),
        }
    }

    /// Checks the structural invariants (lo ≤ hi, nonempty enums).
    pub fn check(&self) -> std::result::Result<(), String> {
        match self {
            Domain::Int { lo, hi } if lo > hi => Err(format!("empty integer range {lo}..{hi}")),
            Domain::Enum(names) if names.is_empty() => Err("empty enumeration".into()),
            Domain::Enum(names) => {
                let set: BTreeSet<_> = names.iter().collect();
                if set.len() != names.len() {
                    Err("duplicate enumeration constant".into())
                } else {
                    Ok(())
                }
            }
            Domain::List { elem, .. } => elem.check(),
            Domain::Frame { info, seq, ack } => {
                info.check()?;
                seq.check()?;
                ack.check()
            }
            _ => Ok(()),
        }
    }

    /// Number of values; saturates at `u128::MAX`.
    pub fn cardinality(&self) -> u128 {
        match self {
            Domain::Int { lo, hi } => (hi - lo + 1).max(0) as u128,
            Domain::Bool => 2,
            Domain::Enum(names) => names.len() as u128,
            Domain::List { elem, cap } => {
                let e = elem.cardinality();
                let mut total: u128 = 0;
                let mut pow: u128 = 1;
                for _ in 0..=*cap {
                    total = total.saturating_add(pow);
                    pow = pow.saturating_mul(e);
                }
                total
            }
            Domain::Frame { info, seq, ack } => info
                .cardinality()
                .saturating_mul(seq.cardinality())
                .saturating_mul(ack.cardinality())
                .saturating_add(1),
        }
    }

    /// All values in a fixed canonical order.
    pub fn values(&self) -> Vec<Value> {
        match self {
            Domain::Int { lo, hi } => (*lo..=*hi).map(Value::Int).collect(),
            Domain::Bool => vec![Value::Bool(false), Value::Bool(true)],
            Domain::Enum(names) => names.iter().cloned().map(Value::Sym).collect(),
            Domain::List { elem, cap } => {
                let elems = elem.values();
                let mut out = vec![Value::empty_list()];
                let mut layer: Vec<Vec<Value>> = vec![Vec::new()];
                for _ in 0..*cap {
                    let mut next = Vec::with_capacity(layer.len() * elems.len());
                    for prefix in &layer {
                        for e in &elems {
                            let mut v = prefix.clone();
                            v.push(e.clone());
                            next.push(v);
                        }
                    }
                    out.extend(next.iter().cloned().map(Value::list));
                    layer = next;
                }
                out
            }
            Domain::Frame { info, seq, ack } => {
                let mut out = vec![Value::Star];
                for i in info.values() {
                    for s in seq.values() {
                        for a in ack.values() {
                            out.push(Value::frame(i.clone(), s.clone(), a.clone()));
                        }
                    }
                }
                out
            }
        }
    }

    /// Coerces `v` into this domain's representation, or `None` if it is not a member.
    pub fn normalize(&self, v: &Value) -> Option<Value> {
        match (self, v) {
            (Domain::Int { lo, hi }, _) => {
                let i = v.as_int()?;
                (*lo <= i && i <= *hi).then_some(Value::Int(i))
            }
            (Domain::Bool, _) => v.as_bool().map(Value::Bool),
            (Domain::Enum(names), Value::Sym(s)) => names.contains(s).then(|| v.clone()),
            (Domain::List { elem, cap }, Value::List(items)) => {
                if items.len() > *cap {
                    return None;
                }
                let mut out = Vec::with_capacity(items.len());
                for it in items.iter() {
                    out.push(elem.normalize(it)?);
                }
                Some(Value::list(out))
            }
            (Domain::Frame { .. }, Value::Star) => Some(Value::Star),
            (Domain::Frame { info, seq, ack }, Value::Frame(c)) => Some(Value::frame(
                info.normalize(&c[0])?,
                seq.normalize(&c[1])?,
                ack.normalize(&c[2])?,
            )),
            _ => None,
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        self.normalize(v).is_some_and(|n| &n == v)
    }

    pub fn sort(&self) -> Sort {
        match self {
            Domain::Int { .. } => Sort::Int,
            Domain::Bool => Sort::Bool,
            Domain::Enum(_) => Sort::Sym,
            Domain::List { elem, .. } => Sort::List(Box::new(elem.sort())),
            Domain::Frame { info, seq, ack } => Sort::Frame(
                Box::new(info.sort()),
                Box::new(seq.sort()),
                Box::new(ack.sort()),
            ),
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Int { lo, hi } => write!(f, "int {lo}..{hi}"),
            Domain::Bool => f.write_str("bool"),
            Domain::Enum(names) => {
                f.write_str("{ ")?;
                for (i, n) in names.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{n}")?;
                }
                f.write_str(" }")
            }
            Domain::List { elem, cap } => write!(f, "list<{elem}> cap {cap}"),
            Domain::Frame { info, seq, ack } => write!(f, "frame({info}, {seq}, {ack})"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Sort {
    Int,
    Bool,
    Sym,
    Frame(Box<Sort>, Box<Sort>, Box<Sort>),
    List(Box<Sort>),
    /// Sort of polymorphic constants (`star`, `[]`).
    Any,
}

impl Sort {
    pub fn compatible(&self, other: &Sort) -> bool {
        use Sort::*;
        match (self, other) {
            (Any, _) | (_, Any) => true,
            (Int | Bool, Int | Bool) => true,
            (Sym, Sym) => true,
            (Frame(a1, b1, c1), Frame(a2, b2, c2)) => {
                a1.compatible(a2) && b1.compatible(b2) && c1.compatible(c2)
            }
            (List(a), List(b)) => a.compatible(b),
            _ => false,
        }
    }

    fn is_numeric(&self) -> bool {
        matches!(self, Sort::Int | Sort::Bool | Sort::Any)
    }

    fn is_bool(&self) -> bool {
        matches!(self, Sort::Bool | Sort::Any)
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => f.write_str("int"),
            Sort::Bool => f.write_str("bool"),
            Sort::Sym => f.write_str("enum"),
            Sort::Frame(a, b, c) => write!(f, "frame({a}, {b}, {c})"),
            Sort::List(e) => write!(f, "list<{e}>"),
            Sort::Any => f.write_str("any"),
        }
    }
}

/// The builtin function symbols.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum Func {
    Add,
    Sub,
    Mul,
    AddMod,
    SubMod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Not,
    Implies,
    Append,
    Head,
    Tail,
    Len,
    Phi,
    Info,
    Seq,
    Ack,
    InInterval,
    MonoIncrMod,
    Max,
    Min,
    Remove,
}

impl Func {
    pub fn arity(self) -> usize {
        use Func::*;
        match self {
            Not | Head | Tail | Len | Info | Seq | Ack | Max | Min => 1,
            Add | Sub | Mul | Eq | Ne | Lt | Le | Gt | Ge | And | Or | Implies | Append
            | Remove => 2,
            AddMod | SubMod | Phi => 3,
            InInterval | MonoIncrMod => 4,
        }
    }

    /// Name used in call syntax; `None` for infix/prefix operators.
    pub fn call_name(self) -> Option<&'static str> {
        use Func::*;
        Some(match self {
            AddMod => "add_mod",
            SubMod => "sub_mod",
            Append => "append",
            Head => "head",
            Tail => "tail",
            Len => "len",
            Phi => "phi",
            Info => "info",
            Seq => "seq",
            Ack => "ack",
            InInterval => "in_interval",
            MonoIncrMod => "mono_incr_mod",
            Max => "max",
            Min => "min",
            Remove => "remove",
            _ => return None,
        })
    }

    pub fn from_call_name(s: &str) -> Option<Func> {
        use Func::*;
        [
            AddMod, SubMod, Append, Head, Tail, Len, Phi, Info, Seq, Ack, InInterval,
            MonoIncrMod, Max, Min, Remove,
        ]
        .into_iter()
        .find(|f| f.call_name() == Some(s))
    }

    pub fn infix_symbol(self) -> Option<&'static str> {
        use Func::*;
        Some(match self {
            Add => "+",
            Sub => "-",
            Mul => "*",
            Eq => "==",
            Ne => "!=",
            Lt => "<",
            Le => "<=",
            Gt => ">",
            Ge => ">=",
            And => "&&",
            Or => "||",
            Implies => "->",
            _ => return None,
        })
    }

    fn label(self) -> &'static str {
        self.call_name()
            .or_else(|| self.infix_symbol())
            .unwrap_or("!")
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Term {
    Var(Name),
    Const(Value),
    App(Func, Vec<Term>),
    /// `forall var in list : body`
    Forall {
        var: Name,
        list: Box<Term>,
        body: Box<Term>,
    },
}

pub type Formula = Term;

impl Term {
    pub fn var(name: impl Into<Name>) -> Term {
        Term::Var(name.into())
    }

    pub fn int(i: i64) -> Term {
        Term::Const(Value::Int(i))
    }

    pub fn tt() -> Term {
        Term::Const(Value::Bool(true))
    }

    pub fn ff() -> Term {
        Term::Const(Value::Bool(false))
    }

    pub fn app(f: Func, args: Vec<Term>) -> Term {
        debug_assert_eq!(f.arity(), args.len());
        Term::App(f, args)
    }

    pub fn bin(f: Func, a: Term, b: Term) -> Term {
        Term::App(f, vec![a, b])
    }

    pub fn not(a: Term) -> Term {
        Term::App(Func::Not, vec![a])
    }

    pub fn eq(a: Term, b: Term) -> Term {
        Term::bin(Func::Eq, a, b)
    }

    pub fn forall(var: impl Into<Name>, list: Term, body: Term) -> Term {
        Term::Forall {
            var: var.into(),
            list: Box::new(list),
            body: Box::new(body),
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Term::Const(v) if v.as_bool() == Some(true))
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Term::Const(v) if v.as_bool() == Some(false))
    }

    /// Conjunction normalized by the unit laws only.
    pub fn and(a: Term, b: Term) -> Term {
        if a.is_false() || b.is_false() {
            Term::ff()
        } else if a.is_true() {
            b
        } else if b.is_true() {
            a
        } else {
            Term::bin(Func::And, a, b)
        }
    }

    /// Disjunction normalized by the unit laws only.
    pub fn or(a: Term, b: Term) -> Term {
        if a.is_true() || b.is_true() {
            Term::tt()
        } else if a.is_false() {
            b
        } else if b.is_false() {
            a
        } else {
            Term::bin(Func::Or, a, b)
        }
    }

    pub fn and_all(items: impl IntoIterator<Item = Term>) -> Term {
        items.into_iter().fold(Term::tt(), Term::and)
    }

    pub fn or_all(items: impl IntoIterator<Item = Term>) -> Term {
        items.into_iter().fold(Term::ff(), Term::or)
    }

    /// Top-level conjuncts of a formula.
    pub fn conjuncts(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        fn walk<'a>(t: &'a Term, out: &mut Vec<&'a Term>) {
            match t {
                Term::App(Func::And, args) => {
                    walk(&args[0], out);
                    walk(&args[1], out);
                }
                _ => out.push(t),
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            Term::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Term::Const(_) => {}
            Term::App(_, args) => {
                for a in args {
                    a.collect_free(bound, out);
                }
            }
            Term::Forall { var, list, body } => {
                list.collect_free(bound, out);
                bound.push(var.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    pub fn mentions(&self, x: &Name) -> bool {
        match self {
            Term::Var(y) => y == x,
            Term::Const(_) => false,
            Term::App(_, args) => args.iter().any(|a| a.mentions(x)),
            Term::Forall { var, list, body } => list.mentions(x) || (var != x && body.mentions(x)),
        }
    }

    /// Replaces every free occurrence of `x` by `r`.
    pub fn substitute(&self, x: &Name, r: &Term) -> Result<Term> {
        match self {
            Term::Var(y) if y == x => Ok(r.clone()),
            Term::Var(_) | Term::Const(_) => Ok(self.clone()),
            Term::App(f, args) => Ok(Term::App(
                *f,
                args.iter()
                    .map(|a| a.substitute(x, r))
                    .collect::<Result<_>>()?,
            )),
            Term::Forall { var, list, body } => {
                let list = list.substitute(x, r)?;
                let body = if var == x {
                    (**body).clone()
                } else if body.mentions(x) {
                    if r.mentions(var) {
                        return Err(Error::Capture(var.clone()));
                    }
                    body.substitute(x, r)?
                } else {
                    (**body).clone()
                };
                Ok(Term::Forall {
                    var: var.clone(),
                    list: Box::new(list),
                    body: Box::new(body),
                })
            }
        }
    }

    /// Renames free variables through `f`; bound variables are left alone.
    pub fn rename_vars(&self, f: &dyn Fn(&Name) -> Option<Name>) -> Term {
        fn go(t: &Term, f: &dyn Fn(&Name) -> Option<Name>, bound: &mut Vec<Name>) -> Term {
            match t {
                Term::Var(x) if !bound.contains(x) => Term::Var(f(x).unwrap_or_else(|| x.clone())),
                Term::Var(_) | Term::Const(_) => t.clone(),
                Term::App(g, args) => Term::App(*g, args.iter().map(|a| go(a, f, bound)).collect()),
                Term::Forall { var, list, body } => {
                    let list = go(list, f, bound);
                    bound.push(var.clone());
                    let body = go(body, f, bound);
                    bound.pop();
                    Term::Forall {
                        var: var.clone(),
                        list: Box::new(list),
                        body: Box::new(body),
                    }
                }
            }
        }
        go(self, f, &mut Vec::new())
    }

    /// Infers the result sort. `var_sort` supplies sorts of free variables.
    pub fn sort(&self, var_sort: &dyn Fn(&Name) -> Option<Sort>) -> Result<Sort> {
        let mut locals = Vec::new();
        self.sort_in(var_sort, &mut locals)
    }

    fn sort_in(
        &self,
        var_sort: &dyn Fn(&Name) -> Option<Sort>,
        locals: &mut Vec<(Name, Sort)>,
    ) -> Result<Sort> {
        use Func::*;
        match self {
            Term::Var(x) => {
                if let Some((_, s)) = locals.iter().rev().find(|(n, _)| n == x) {
                    return Ok(s.clone());
                }
                var_sort(x).ok_or_else(|| Error::DomainMissing(x.clone()))
            }
            Term::Const(v) => Ok(value_sort(v)),
            Term::Forall { var, list, body } => {
                let ls = list.sort_in(var_sort, locals)?;
                let elem = match ls {
                    Sort::List(e) => *e,
                    Sort::Any => Sort::Any,
                    other => return Err(Error::Sort(format!("forall over non-list sort {other}"))),
                };
                locals.push((var.clone(), elem));
                let bs = body.sort_in(var_sort, locals);
                locals.pop();
                let bs = bs?;
                if !bs.is_bool() {
                    return Err(Error::Sort(format!("forall body has sort {bs}")));
                }
                Ok(Sort::Bool)
            }
            Term::App(f, args) => {
                if args.len() != f.arity() {
                    return Err(Error::Sort(format!(
                        "{} expects {} arguments, got {}",
                        f.label(),
                        f.arity(),
                        args.len()
                    )));
                }
                let s: Vec<Sort> = args
                    .iter()
                    .map(|a| a.sort_in(var_sort, locals))
                    .collect::<Result<_>>()?;
                let need_num = |i: usize| -> Result<()> {
                    if s[i].is_numeric() {
                        Ok(())
                    } else {
                        Err(Error::Sort(format!(
                            "argument {} of {} has sort {}, expected int",
                            i + 1,
                            f.label(),
                            s[i]
                        )))
                    }
                };
                let need_bool = |i: usize| -> Result<()> {
                    if s[i].is_bool() {
                        Ok(())
                    } else {
                        Err(Error::Sort(format!(
                            "argument {} of {} has sort {}, expected bool",
                            i + 1,
                            f.label(),
                            s[i]
                        )))
                    }
                };
                let list_elem = |i: usize| -> Result<Sort> {
                    match &s[i] {
                        Sort::List(e) => Ok((**e).clone()),
                        Sort::Any => Ok(Sort::Any),
                        other => Err(Error::Sort(format!(
                            "argument {} of {} has sort {other}, expected list",
                            i + 1,
                            f.label()
                        ))),
                    }
                };
                let frame_parts = |i: usize| -> Result<(Sort, Sort, Sort)> {
                    match &s[i] {
                        Sort::Frame(a, b, c) => Ok(((**a).clone(), (**b).clone(), (**c).clone())),
                        Sort::Any => Ok((Sort::Any, Sort::Any, Sort::Any)),
                        other => Err(Error::Sort(format!(
                            "argument of {} has sort {other}, expected frame",
                            f.label()
                        ))),
                    }
                };
                match f {
                    Add | Sub | Mul => {
                        need_num(0)?;
                        need_num(1)?;
                        Ok(Sort::Int)
                    }
                    AddMod | SubMod => {
                        (0..3).try_for_each(need_num)?;
                        Ok(Sort::Int)
                    }
                    Eq | Ne => {
                        if s[0].compatible(&s[1]) {
                            Ok(Sort::Bool)
                        } else {
                            Err(Error::Sort(format!("cannot compare {} with {}", s[0], s[1])))
                        }
                    }
                    Lt | Le | Gt | Ge => {
                        need_num(0)?;
                        need_num(1)?;
                        Ok(Sort::Bool)
                    }
                    And | Or | Implies => {
                        need_bool(0)?;
                        need_bool(1)?;
                        Ok(Sort::Bool)
                    }
                    Not => {
                        need_bool(0)?;
                        Ok(Sort::Bool)
                    }
                    Append => {
                        let e = list_elem(0)?;
                        if !e.compatible(&s[1]) {
                            return Err(Error::Sort(format!("cannot append {} to list<{e}>", s[1])));
                        }
                        Ok(Sort::List(Box::new(if e == Sort::Any { s[1].clone() } else { e })))
                    }
                    Remove => {
                        let e = list_elem(0)?;
                        if !e.compatible(&s[1]) {
                            return Err(Error::Sort(format!("cannot remove {} from list<{e}>", s[1])));
                        }
                        Ok(s[0].clone())
                    }
                    Head => list_elem(0),
                    Tail => {
                        list_elem(0)?;
                        Ok(s[0].clone())
                    }
                    Len => {
                        list_elem(0)?;
                        Ok(Sort::Int)
                    }
                    Max | Min => {
                        let e = list_elem(0)?;
                        if !e.is_numeric() {
                            return Err(Error::Sort(format!("{} over list<{e}>", f.label())));
                        }
                        Ok(Sort::Int)
                    }
                    Phi => Ok(Sort::Frame(
                        Box::new(s[0].clone()),
                        Box::new(s[1].clone()),
                        Box::new(s[2].clone()),
                    )),
                    Info => Ok(frame_parts(0)?.0),
                    Seq => Ok(frame_parts(0)?.1),
                    Ack => Ok(frame_parts(0)?.2),
                    InInterval => {
                        (0..4).try_for_each(need_num)?;
                        Ok(Sort::Bool)
                    }
                    MonoIncrMod => {
                        list_elem(0)?;
                        (1..4).try_for_each(need_num)?;
                        Ok(Sort::Bool)
                    }
                }
            }
        }
    }

    /// Checks that the term is boolean-sorted under `doms`.
    pub fn check_formula(&self, doms: &Domains) -> Result<()> {
        let s = self.sort(&|x| doms.get(x).map(Domain::sort))?;
        if s.is_bool() {
            Ok(())
        } else {
            Err(Error::Sort(format!("formula {self} has sort {s}")))
        }
    }

    fn precedence(&self) -> u8 {
        use Func::*;
        match self {
            Term::Forall { .. } => 0,
            Term::App(Implies, _) => 1,
            Term::App(Or, _) => 2,
            Term::App(And, _) => 3,
            Term::App(Not, _) => 4,
            Term::App(Eq | Ne | Lt | Le | Gt | Ge, _) => 5,
            Term::App(Add | Sub, _) => 6,
            Term::App(Mul, _) => 7,
            _ => 8,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let p = self.precedence();
        if p < min {
            f.write_str("(")?;
            self.fmt_prec(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Term::Var(x) => write!(f, "{x}"),
            Term::Const(v) => write!(f, "{v}"),
            Term::Forall { var, list, body } => {
                write!(f, "forall {var} in ")?;
                list.fmt_prec(f, 6)?;
                f.write_str(" : ")?;
                body.fmt_prec(f, 0)
            }
            Term::App(Func::Not, args) => {
                f.write_str("!")?;
                args[0].fmt_prec(f, 4)
            }
            Term::App(func, args) => {
                if let Some(sym) = func.infix_symbol() {
                    let (l, r) = match func {
                        Func::Implies => (p + 1, p),
                        Func::Eq | Func::Ne | Func::Lt | Func::Le | Func::Gt | Func::Ge => {
                            (p + 1, p + 1)
                        }
                        _ => (p, p + 1),
                    };
                    args[0].fmt_prec(f, l)?;
                    write!(f, " {sym} ")?;
                    args[1].fmt_prec(f, r)
                } else {
                    write!(f, "{}(", func.call_name().unwrap_or("?"))?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        a.fmt_prec(f, 0)?;
                    }
                    f.write_str(")")
                }
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

fn value_sort(v: &Value) -> Sort {
    match v {
        Value::Int(_) => Sort::Int,
        Value::Bool(_) => Sort::Bool,
        Value::Sym(_) => Sort::Sym,
        Value::Star => Sort::Any,
        Value::Frame(c) => Sort::Frame(
            Box::new(value_sort(&c[0])),
            Box::new(value_sort(&c[1])),
            Box::new(value_sort(&c[2])),
        ),
        Value::List(items) => Sort::List(Box::new(items.first().map(value_sort).unwrap_or(Sort::Any))),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    Unbound(Name),
    #[error("{func} is undefined on {arg}")]
    Partial { func: &'static str, arg: String },
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
    #[error("value {value} lies outside the domain of {var}")]
    OutOfDomain { var: Name, value: Value },
    #[error("{func} applied to {arg}")]
    Sort { func: &'static str, arg: String },
}

pub type Valuation = BTreeMap<Name, Value>;
pub type Domains = BTreeMap<Name, Domain>;

/// Renders a valuation as `x=1, y=0`.
pub fn show_valuation(v: &Valuation) -> String {
    v.iter()
        .map(|(k, x)| format!("{k}={x}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// A term resolved against variable slots for repeated evaluation.
#[derive(Clone, Debug)]
pub struct Compiled(Code);

#[derive(Clone, Debug)]
enum Code {
    Slot(usize),
    Local(usize),
    Const(Value),
    App(Func, Vec<Code>),
    Forall(Box<Code>, Box<Code>),
}

impl Compiled {
    pub fn new(term: &Term, slot: &dyn Fn(&Name) -> Option<usize>) -> std::result::Result<Self, EvalError> {
        fn go(
            t: &Term,
            slot: &dyn Fn(&Name) -> Option<usize>,
            locals: &mut Vec<Name>,
        ) -> std::result::Result<Code, EvalError> {
            Ok(match t {
                Term::Var(x) => match locals.iter().rposition(|n| n == x) {
                    Some(i) => Code::Local(i),
                    None => Code::Slot(slot(x).ok_or_else(|| EvalError::Unbound(x.clone()))?),
                },
                Term::Const(v) => Code::Const(v.clone()),
                Term::App(f, args) => Code::App(
                    *f,
                    args.iter()
                        .map(|a| go(a, slot, locals))
                        .collect::<std::result::Result<_, _>>()?,
                ),
                Term::Forall { var, list, body } => {
                    let l = go(list, slot, locals)?;
                    locals.push(var.clone());
                    let b = go(body, slot, locals);
                    locals.pop();
                    Code::Forall(Box::new(l), Box::new(b?))
                }
            })
        }
        go(term, slot, &mut Vec::new()).map(Compiled)
    }

    pub fn eval(&self, frame: &[Value]) -> std::result::Result<Value, EvalError> {
        let mut locals = Vec::new();
        eval_code(&self.0, frame, &mut locals)
    }

    /// Evaluates a formula; non-boolean results are sort errors.
    pub fn holds(&self, frame: &[Value]) -> std::result::Result<bool, EvalError> {
        let v = self.eval(frame)?;
        v.as_bool().ok_or(EvalError::Sort {
            func: "formula",
            arg: v.to_string(),
        })
    }
}

fn eval_code(c: &Code, frame: &[Value], locals: &mut Vec<Value>) -> std::result::Result<Value, EvalError> {
    match c {
        Code::Slot(i) => Ok(frame[*i].clone()),
        Code::Local(i) => Ok(locals[*i].clone()),
        Code::Const(v) => Ok(v.clone()),
        Code::Forall(list, body) => {
            let l = eval_code(list, frame, locals)?;
            let items = l.as_list().ok_or_else(|| EvalError::Sort {
                func: "forall",
                arg: l.to_string(),
            })?;
            for it in items.iter() {
                locals.push(it.clone());
                let r = eval_code(body, frame, locals);
                locals.pop();
                if !truth("forall", &r?)? {
                    return Ok(Value::Bool(false));
                }
            }
            Ok(Value::Bool(true))
        }
        Code::App(Func::And, args) => {
            if !truth("&&", &eval_code(&args[0], frame, locals)?)? {
                return Ok(Value::Bool(false));
            }
            Ok(Value::Bool(truth("&&", &eval_code(&args[1], frame, locals)?)?))
        }
        Code::App(Func::Or, args) => {
            if truth("||", &eval_code(&args[0], frame, locals)?)? {
                return Ok(Value::Bool(true));
            }
            Ok(Value::Bool(truth("||", &eval_code(&args[1], frame, locals)?)?))
        }
        Code::App(Func::Implies, args) => {
            if !truth("->", &eval_code(&args[0], frame, locals)?)? {
                return Ok(Value::Bool(true));
            }
            Ok(Value::Bool(truth("->", &eval_code(&args[1], frame, locals)?)?))
        }
        Code::App(f, args) => {
            let vals = args
                .iter()
                .map(|a| eval_code(a, frame, locals))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            apply(*f, &vals)
        }
    }
}

fn truth(func: &'static str, v: &Value) -> std::result::Result<bool, EvalError> {
    v.as_bool().ok_or_else(|| EvalError::Sort {
        func,
        arg: v.to_string(),
    })
}

fn int(func: &'static str, v: &Value) -> std::result::Result<i64, EvalError> {
    v.as_int().ok_or_else(|| EvalError::Sort {
        func,
        arg: v.to_string(),
    })
}

fn modulus(func: &'static str, v: &Value) -> std::result::Result<i64, EvalError> {
    let n = int(func, v)?;
    if n <= 0 {
        return Err(EvalError::Partial {
            func,
            arg: format!("modulus {n}"),
        });
    }
    Ok(n)
}

fn frame_part(func: &'static str, v: &Value, i: usize) -> std::result::Result<Value, EvalError> {
    match v {
        Value::Frame(c) => Ok(c[i].clone()),
        Value::Star => Err(EvalError::Partial {
            func,
            arg: "star".into(),
        }),
        other => Err(EvalError::Sort {
            func,
            arg: other.to_string(),
        }),
    }
}

fn list<'a>(func: &'static str, v: &'a Value) -> std::result::Result<&'a [Value], EvalError> {
    v.as_list().ok_or_else(|| EvalError::Sort {
        func,
        arg: v.to_string(),
    })
}

/// `i ∈ [b, s[` on the ring of integers modulo n.
pub fn in_interval(i: i64, b: i64, s: i64, _n: i64) -> bool {
    if b <= s {
        b <= i && i < s
    } else {
        i >= b || i < s
    }
}

fn apply(f: Func, a: &[Value]) -> std::result::Result<Value, EvalError> {
    use Func::*;
    let label = f.label();
    Ok(match f {
        Add => Value::Int(int(label, &a[0])?.checked_add(int(label, &a[1])?).ok_or(EvalError::Overflow("+"))?),
        Sub => Value::Int(int(label, &a[0])?.checked_sub(int(label, &a[1])?).ok_or(EvalError::Overflow("-"))?),
        Mul => Value::Int(int(label, &a[0])?.checked_mul(int(label, &a[1])?).ok_or(EvalError::Overflow("*"))?),
        AddMod => {
            let n = modulus(label, &a[2])?;
            let s = int(label, &a[0])?.checked_add(int(label, &a[1])?).ok_or(EvalError::Overflow("add_mod"))?;
            Value::Int(s.rem_euclid(n))
        }
        SubMod => {
            let n = modulus(label, &a[2])?;
            let s = int(label, &a[0])?.checked_sub(int(label, &a[1])?).ok_or(EvalError::Overflow("sub_mod"))?;
            Value::Int(s.rem_euclid(n))
        }
        Eq => Value::Bool(a[0].loose_eq(&a[1])),
        Ne => Value::Bool(!a[0].loose_eq(&a[1])),
        Lt => Value::Bool(int(label, &a[0])? < int(label, &a[1])?),
        Le => Value::Bool(int(label, &a[0])? <= int(label, &a[1])?),
        Gt => Value::Bool(int(label, &a[0])? > int(label, &a[1])?),
        Ge => Value::Bool(int(label, &a[0])? >= int(label, &a[1])?),
        Not => Value::Bool(!truth(label, &a[0])?),
        And | Or | Implies => unreachable!("short-circuit operators are evaluated lazily"),
        Append => {
            let mut items = list(label, &a[0])?.to_vec();
            items.push(a[1].clone());
            Value::list(items)
        }
        Remove => {
            let items = list(label, &a[0])?;
            let mut out = items.to_vec();
            if let Some(pos) = items.iter().position(|x| x.loose_eq(&a[1])) {
                out.remove(pos);
            }
            Value::list(out)
        }
        Head => list(label, &a[0])?
            .first()
            .cloned()
            .ok_or(EvalError::Partial {
                func: "head",
                arg: "[]".into(),
            })?,
        Tail => {
            let items = list(label, &a[0])?;
            if items.is_empty() {
                return Err(EvalError::Partial {
                    func: "tail",
                    arg: "[]".into(),
                });
            }
            Value::list(items[1..].to_vec())
        }
        Len => Value::Int(list(label, &a[0])?.len() as i64),
        Max | Min => {
            let items = list(label, &a[0])?;
            let ints = items
                .iter()
                .map(|v| int(label, v))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let r = if f == Max { ints.iter().max() } else { ints.iter().min() };
            Value::Int(*r.ok_or(EvalError::Partial {
                func: label,
                arg: "[]".into(),
            })?)
        }
        Phi => Value::frame(a[0].clone(), a[1].clone(), a[2].clone()),
        Info => frame_part("info", &a[0], 0)?,
        Seq => frame_part("seq", &a[0], 1)?,
        Ack => frame_part("ack", &a[0], 2)?,
        InInterval => {
            let n = modulus(label, &a[3])?;
            Value::Bool(in_interval(
                int(label, &a[0])?,
                int(label, &a[1])?,
                int(label, &a[2])?,
                n,
            ))
        }
        MonoIncrMod => {
            let items = list(label, &a[0])?;
            let lo = int(label, &a[1])?;
            let hi = int(label, &a[2])?;
            let n = modulus(label, &a[3])?;
            let span = (hi - lo).rem_euclid(n);
            let mut prev = -1;
            for it in items.iter() {
                let key = match it {
                    Value::Frame(_) | Value::Star => int(label, &frame_part("ack", it, 2)?)?,
                    other => int(label, other)?,
                };
                let off = (key - lo).rem_euclid(n);
                if off > span || off < prev {
                    return Ok(Value::Bool(false));
                }
                prev = off;
            }
            Value::Bool(true)
        }
    })
}

/// Evaluates `e` under `xi`.
pub fn eval_term(e: &Term, xi: &Valuation) -> std::result::Result<Value, EvalError> {
    let names: Vec<&Name> = xi.keys().collect();
    let frame: Vec<Value> = xi.values().cloned().collect();
    let c = Compiled::new(e, &|x| names.binary_search(&x).ok())?;
    c.eval(&frame)
}

/// Streams every valuation of a variable set over its declared domains.
pub struct ValuationIter {
    names: Vec<Name>,
    values: Vec<Vec<Value>>,
    idx: Vec<usize>,
    done: bool,
}

impl ValuationIter {
    pub fn new(vars: &BTreeSet<Name>, doms: &Domains) -> Result<Self> {
        let mut names = Vec::new();
        let mut values = Vec::new();
        for x in vars {
            let d = doms.get(x).ok_or_else(|| Error::DomainMissing(x.clone()))?;
            names.push(x.clone());
            values.push(d.values());
        }
        let done = values.iter().any(|v| v.is_empty());
        Ok(ValuationIter {
            idx: vec![0; names.len()],
            names,
            values,
            done,
        })
    }

    pub fn names(&self) -> &[Name] {
        &self.names
    }

    /// Advances and fills `frame` with the next valuation in slot order.
    pub fn next_frame(&mut self, frame: &mut Vec<Value>) -> bool {
        if self.done {
            return false;
        }
        frame.clear();
        frame.extend(self.idx.iter().zip(&self.values).map(|(&i, vs)| vs[i].clone()));
        let mut k = self.idx.len();
        loop {
            if k == 0 {
                self.done = true;
                break;
            }
            k -= 1;
            self.idx[k] += 1;
            if self.idx[k] < self.values[k].len() {
                break;
            }
            self.idx[k] = 0;
        }
        true
    }
}

impl Iterator for ValuationIter {
    type Item = Valuation;

    fn next(&mut self) -> Option<Valuation> {
        let mut frame = Vec::new();
        if !self.next_frame(&mut frame) {
            return None;
        }
        Some(self.names.iter().cloned().zip(frame).collect())
    }
}

pub fn enumerate_valuations(vars: &BTreeSet<Name>, doms: &Domains) -> Result<ValuationIter> {
    ValuationIter::new(vars, doms)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Counterexample {
        valuation: Valuation,
        error: Option<EvalError>,
    },
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

/// Decides validity of `b` by enumerating every valuation of its free variables.
pub fn is_valid(b: &Formula, doms: &Domains) -> Result<Verdict> {
    b.check_formula(doms)?;
    let vars = b.free_vars();
    let mut it = ValuationIter::new(&vars, doms)?;
    let names = it.names().to_vec();
    let c = Compiled::new(b, &|x| names.iter().position(|n| n == x))?;
    let mut frame = Vec::with_capacity(names.len());
    while it.next_frame(&mut frame) {
        let res = c.holds(&frame);
        if res != Ok(true) {
            return Ok(Verdict::Counterexample {
                valuation: names.iter().cloned().zip(frame.iter().cloned()).collect(),
                error: res.err(),
            });
        }
    }
    Ok(Verdict::Valid)
}

/// Decides whether two terms agree on every valuation of their free variables.
pub fn semantically_equal(e1: &Term, e2: &Term, doms: &Domains) -> Result<Verdict> {
    let vs = |x: &Name| doms.get(x).map(Domain::sort);
    let (s1, s2) = (e1.sort(&vs)?, e2.sort(&vs)?);
    if !s1.compatible(&s2) {
        return Err(Error::Sort(format!("cannot compare {s1} with {s2}")));
    }
    let mut vars = e1.free_vars();
    vars.extend(e2.free_vars());
    let mut it = ValuationIter::new(&vars, doms)?;
    let names = it.names().to_vec();
    let slot = |x: &Name| names.iter().position(|n| n == x);
    let c1 = Compiled::new(e1, &slot)?;
    let c2 = Compiled::new(e2, &slot)?;
    let mut frame = Vec::with_capacity(names.len());
    while it.next_frame(&mut frame) {
        let (a, b) = (c1.eval(&frame), c2.eval(&frame));
        let ok = match (&a, &b) {
            (Ok(x), Ok(y)) => x.loose_eq(y),
            (Err(x), Err(y)) => x == y,
            _ => false,
        };
        if !ok {
            return Ok(Verdict::Counterexample {
                valuation: names.iter().cloned().zip(frame.iter().cloned()).collect(),
                error: a.err().or(b.err()),
            });
        }
    }
    Ok(Verdict::Valid)
}

/// Groups top-level conjuncts into classes that share variables.
fn conjunct_components(b: &Formula) -> Vec<(BTreeSet<Name>, Term)> {
    let mut comps: Vec<(BTreeSet<Name>, Vec<Term>)> = Vec::new();
    for c in b.conjuncts() {
        let vars = c.free_vars();
        let mut merged = (vars, vec![c.clone()]);
        let mut rest = Vec::new();
        for comp in comps.drain(..) {
            if comp.0.is_disjoint(&merged.0) {
                rest.push(comp);
            } else {
                merged.0.extend(comp.0);
                merged.1.extend(comp.1);
            }
        }
        rest.push(merged);
        comps = rest;
    }
    comps
        .into_iter()
        .map(|(v, ts)| (v, Term::and_all(ts)))
        .collect()
}

/// All valuations of `vars` that satisfy `b`, enumerated component-wise so that
/// independent conjuncts do not multiply the search.
pub fn solutions(b: &Formula, vars: &BTreeSet<Name>, doms: &Domains) -> Result<Vec<Valuation>> {
    b.check_formula(doms)?;
    let mut partials: Vec<Vec<Valuation>> = Vec::new();
    let mut covered = BTreeSet::new();
    for (cv, term) in conjunct_components(b) {
        let mut it = ValuationIter::new(&cv, doms)?;
        let names = it.names().to_vec();
        let c = Compiled::new(&term, &|x| names.iter().position(|n| n == x))?;
        let mut frame = Vec::new();
        let mut sols = Vec::new();
        while it.next_frame(&mut frame) {
            if c.holds(&frame)? {
                sols.push(names.iter().cloned().zip(frame.iter().cloned()).collect::<Valuation>());
            }
        }
        covered.extend(cv);
        partials.push(sols);
    }
    let free: BTreeSet<Name> = vars.difference(&covered).cloned().collect();
    partials.push(ValuationIter::new(&free, doms)?.collect());
    let mut out: Vec<Valuation> = vec![Valuation::new()];
    for part in partials {
        let mut next = Vec::with_capacity(out.len() * part.len());
        for base in &out {
            for p in &part {
                let mut v = base.clone();
                v.extend(p.iter().map(|(k, x)| (k.clone(), x.clone())));
                next.push(v);
            }
        }
        out = next;
    }
    Ok(out)
}

/// Finds one satisfying valuation of `b`'s free variables, if any.
pub fn satisfiable(b: &Formula, doms: &Domains) -> Result<Option<Valuation>> {
    b.check_formula(doms)?;
    let mut witness = Valuation::new();
    for (cv, term) in conjunct_components(b) {
        let mut it = ValuationIter::new(&cv, doms)?;
        let names = it.names().to_vec();
        let c = Compiled::new(&term, &|x| names.iter().position(|n| n == x))?;
        let mut frame = Vec::new();
        let mut found = false;
        while it.next_frame(&mut frame) {
            if c.holds(&frame) == Ok(true) {
                witness.extend(names.iter().cloned().zip(frame.iter().cloned()));
                found = true;
                break;
            }
        }
        if !found {
            return Ok(None);
        }
    }
    Ok(Some(witness))
}
