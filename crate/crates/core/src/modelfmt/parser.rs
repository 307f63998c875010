use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{tokenize, Tok, Token};
use super::{resolve_syms, Model, ParseError, ParseErrorKind};
use crate::algebra::CompositionExpr;
use crate::certificate::Certificate;
use crate::operators::{AtomicOp, Operator};
use crate::process::{Process, Transition};
use crate::symbolic::{Domain, Func, Name, Term, Value};

type PResult<T> = Result<T, ParseError>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

/// A name together with where it was written.
#[derive(Clone)]
struct Spanned {
    name: Name,
    line: usize,
    col: usize,
}

fn resolve_err(at: &Spanned, message: String) -> ParseError {
    ParseError {
        kind: ParseErrorKind::Resolve,
        line: at.line,
        col: at.col,
        message,
        expected: Vec::new(),
    }
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, expected: &[&str]) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError {
            kind: ParseErrorKind::Syntax,
            line: t.line,
            col: t.col,
            message: format!("unexpected {}", t.tok.describe()),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn at(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.at(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> PResult<()> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.err(&[&format!("`{p}`")]))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.at_kw(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.err(&[&format!("`{kw}`")]))
        }
    }

    fn ident(&mut self) -> PResult<Spanned> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let t = self.bump();
                Ok(Spanned {
                    name: Name::from(s),
                    line: t.line,
                    col: t.col,
                })
            }
            _ => Err(self.err(&["identifier"])),
        }
    }

    fn int(&mut self) -> PResult<i64> {
        let neg = self.eat("-");
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.err(&["integer"])),
        }
    }

    fn domain(&mut self, named: &BTreeMap<Name, Domain>) -> PResult<Domain> {
        if self.at("{") {
            self.bump();
            let mut names = Vec::new();
            if !self.at("}") {
                loop {
                    names.push(self.ident()?.name);
                    if !self.eat(",") {
                        break;
                    }
                }
            }
            self.expect("}")?;
            return Ok(Domain::Enum(names));
        }
        let id = self.ident()?;
        match id.name.as_str() {
            "int" => {
                let lo = self.int()?;
                self.expect("..")?;
                let hi = self.int()?;
                Ok(Domain::int(lo, hi))
            }
            "bool" => Ok(Domain::Bool),
            "list" => {
                self.expect("<")?;
                let elem = self.domain(named)?;
                self.expect(">")?;
                self.expect_kw("cap")?;
                let cap = self.int()?;
                if cap < 0 {
                    return Err(self.err(&["non-negative capacity"]));
                }
                Ok(Domain::list(elem, cap as usize))
            }
            "frame" => {
                self.expect("(")?;
                let a = self.domain(named)?;
                self.expect(",")?;
                let b = self.domain(named)?;
                self.expect(",")?;
                let c = self.domain(named)?;
                self.expect(")")?;
                Ok(Domain::frame(a, b, c))
            }
            _ => named
                .get(&id.name)
                .cloned()
                .ok_or_else(|| resolve_err(&id, format!("unknown domain {}", id.name))),
        }
    }

    fn formula(&mut self) -> PResult<Term> {
        let lhs = self.or()?;
        if self.eat("->") {
            let rhs = self.formula()?;
            return Ok(Term::App(Func::Implies, vec![lhs, rhs]));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> PResult<Term> {
        let mut t = self.and()?;
        while self.eat("||") {
            t = Term::App(Func::Or, vec![t, self.and()?]);
        }
        Ok(t)
    }

    fn and(&mut self) -> PResult<Term> {
        let mut t = self.not()?;
        while self.eat("&&") {
            t = Term::App(Func::And, vec![t, self.not()?]);
        }
        Ok(t)
    }

    fn not(&mut self) -> PResult<Term> {
        if self.eat("!") {
            return Ok(Term::App(Func::Not, vec![self.not()?]));
        }
        self.cmp()
    }

    fn cmp(&mut self) -> PResult<Term> {
        let lhs = self.add()?;
        let op = match self.peek() {
            Tok::Punct("==") => Func::Eq,
            Tok::Punct("!=") => Func::Ne,
            Tok::Punct("<") => Func::Lt,
            Tok::Punct("<=") => Func::Le,
            Tok::Punct(">") => Func::Gt,
            Tok::Punct(">=") => Func::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.add()?;
        Ok(Term::App(op, vec![lhs, rhs]))
    }

    fn add(&mut self) -> PResult<Term> {
        let mut t = self.mul()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("+") => Func::Add,
                Tok::Punct("-") => Func::Sub,
                _ => return Ok(t),
            };
            self.bump();
            t = Term::App(op, vec![t, self.mul()?]);
        }
    }

    fn mul(&mut self) -> PResult<Term> {
        let mut t = self.atom()?;
        while self.eat("*") {
            t = Term::App(Func::Mul, vec![t, self.atom()?]);
        }
        Ok(t)
    }

    fn constant(&mut self) -> PResult<Value> {
        match self.atom()? {
            Term::Const(v) => Ok(v),
            Term::Var(x) => Ok(Value::Sym(x)),
            _ => Err(self.err(&["constant"])),
        }
    }

    fn atom(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Term::Const(Value::Int(v)))
            }
            Tok::Punct("-") if matches!(self.peek_at(1), Tok::Int(_)) => Ok(Term::Const(Value::Int(self.int()?))),
            Tok::Punct("(") => {
                self.bump();
                let t = self.formula()?;
                self.expect(")")?;
                Ok(t)
            }
            Tok::Punct("[") => {
                self.bump();
                let mut items = Vec::new();
                if !self.at("]") {
                    loop {
                        items.push(self.constant()?);
                        if !self.eat(",") {
                            break;
                        }
                    }
                }
                self.expect("]")?;
                Ok(Term::Const(Value::List(items.into())))
            }
            Tok::Ident(s) => match s.as_str() {
                "true" => {
                    self.bump();
                    Ok(Term::Const(Value::Bool(true)))
                }
                "false" => {
                    self.bump();
                    Ok(Term::Const(Value::Bool(false)))
                }
                "star" => {
                    self.bump();
                    Ok(Term::Const(Value::Star))
                }
                "forall" => {
                    self.bump();
                    let var = self.ident()?.name;
                    self.expect_kw("in")?;
                    let list = self.add()?;
                    self.expect(":")?;
                    let body = self.formula()?;
                    Ok(Term::Forall {
                        var,
                        list: Box::new(list),
                        body: Box::new(body),
                    })
                }
                _ => {
                    let id = self.ident()?;
                    if !self.at("(") {
                        return Ok(Term::Var(id.name));
                    }
                    let f = Func::from_call_name(id.name.as_str())
                        .ok_or_else(|| resolve_err(&id, format!("unknown function {}", id.name)))?;
                    self.bump();
                    let mut args = Vec::new();
                    if !self.at(")") {
                        loop {
                            args.push(self.formula()?);
                            if !self.eat(",") {
                                break;
                            }
                        }
                    }
                    self.expect(")")?;
                    if args.len() != f.arity() {
                        return Err(ParseError {
                            kind: ParseErrorKind::Syntax,
                            line: id.line,
                            col: id.col,
                            message: format!("{} takes {} arguments, got {}", id.name, f.arity(), args.len()),
                            expected: Vec::new(),
                        });
                    }
                    if f == Func::Phi {
                        if let [Term::Const(a), Term::Const(b), Term::Const(c)] = args.as_slice() {
                            return Ok(Term::Const(Value::frame(a.clone(), b.clone(), c.clone())));
                        }
                    }
                    Ok(Term::App(f, args))
                }
            },
            _ => Err(self.err(&["term"])),
        }
    }

    fn atomic_op(&mut self) -> PResult<AtomicOp> {
        let id = self.ident()?;
        if self.eat("?") {
            let x = self.ident()?.name;
            return Ok(AtomicOp::input(id.name, x));
        }
        if self.eat("!") {
            let e = self.atom()?;
            return Ok(AtomicOp::output(id.name, e));
        }
        if self.eat(":=") {
            let e = self.formula()?;
            return Ok(AtomicOp::assign(id.name, e));
        }
        Err(self.err(&["`?`", "`!`", "`:=`"]))
    }

    fn operator(&mut self) -> PResult<Operator> {
        let guard = if self.eat("[") {
            let g = self.formula()?;
            self.expect("]")?;
            g
        } else {
            Term::tt()
        };
        self.expect("(")?;
        let mut body = Vec::new();
        if !self.at(")") {
            loop {
                body.push(self.atomic_op()?);
                if !self.eat(";") {
                    break;
                }
            }
        }
        self.expect(")")?;
        Ok(Operator::new(guard, body))
    }

    fn process(&mut self, named: &BTreeMap<Name, Domain>) -> PResult<(Process, Spanned, Vec<(Spanned, Spanned)>)> {
        let name = self.ident()?;
        self.expect("{")?;
        let mut vars = BTreeMap::new();
        let mut init = Term::tt();
        let mut states: Option<Vec<Spanned>> = None;
        let mut start: Option<Spanned> = None;
        let mut finals = Vec::new();
        let mut transitions = Vec::new();
        let mut ends = Vec::new();
        loop {
            if self.eat("}") {
                break;
            }
            let is_transition = matches!(self.peek_at(1), Tok::Punct(":"));
            if !is_transition && self.at_kw("var") {
                self.bump();
                loop {
                    let x = self.ident()?;
                    self.expect(":")?;
                    let d = self.domain(named)?;
                    vars.insert(x.name, d);
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect(";")?;
            } else if !is_transition && self.at_kw("init") {
                self.bump();
                init = self.formula()?;
                self.expect(";")?;
            } else if !is_transition && (self.at_kw("states") || self.at_kw("final")) {
                let is_final = self.at_kw("final");
                self.bump();
                let mut list = Vec::new();
                while !self.at(";") {
                    list.push(self.ident()?);
                }
                self.expect(";")?;
                if is_final {
                    finals = list;
                } else {
                    states = Some(list);
                }
            } else if !is_transition && self.at_kw("start") {
                self.bump();
                start = Some(self.ident()?);
                self.expect(";")?;
            } else if matches!(self.peek(), Tok::Ident(_)) {
                let id = self.ident()?;
                self.expect(":")?;
                let src = self.ident()?;
                self.expect("->")?;
                let dst = self.ident()?;
                self.expect(":")?;
                let op = self.operator()?;
                self.expect(";")?;
                transitions.push(Transition::new(id.name, src.name.clone(), op, dst.name.clone()));
                ends.push((src, dst));
            } else {
                return Err(self.err(&["`var`", "`init`", "`states`", "`start`", "`final`", "transition", "`}`"]));
            }
        }
        let states = states.ok_or_else(|| resolve_err(&name, format!("process {} declares no states", name.name)))?;
        let start = start.ok_or_else(|| resolve_err(&name, format!("process {} declares no start state", name.name)))?;
        let declared: BTreeSet<&Name> = states.iter().map(|s| &s.name).collect();
        for s in std::iter::once(&start)
            .chain(finals.iter())
            .chain(ends.iter().flat_map(|(a, b)| [a, b]))
        {
            if !declared.contains(&s.name) {
                return Err(resolve_err(s, format!("unknown state {} in process {}", s.name, name.name)));
            }
        }
        let p = Process {
            name: name.name.clone(),
            vars,
            init,
            states: states.iter().map(|s| s.name.clone()).collect(),
            start: start.name,
            finals: finals.into_iter().map(|s| s.name).collect(),
            transitions,
        };
        Ok((p, name, ends))
    }

    fn system_expr(&mut self) -> PResult<(CompositionExpr, Vec<Spanned>)> {
        let mut refs = Vec::new();
        let mut e = self.restricted(&mut refs)?;
        while self.eat("|") {
            let rhs = self.restricted(&mut refs)?;
            e = e.par(rhs);
        }
        Ok((e, refs))
    }

    fn name_set(&mut self) -> PResult<BTreeSet<Name>> {
        self.expect("{")?;
        let mut out = BTreeSet::new();
        if !self.at("}") {
            loop {
                out.insert(self.ident()?.name);
                if !self.eat(",") {
                    break;
                }
            }
        }
        self.expect("}")?;
        Ok(out)
    }

    fn restricted(&mut self, refs: &mut Vec<Spanned>) -> PResult<CompositionExpr> {
        let mut e = self.renamed(refs)?;
        loop {
            if self.eat("\\") {
                e = CompositionExpr::Restrict(Box::new(e), self.name_set()?);
            } else if self.eat("/") {
                e = CompositionExpr::Erase(Box::new(e), self.name_set()?);
            } else {
                return Ok(e);
            }
        }
    }

    fn renamed(&mut self, refs: &mut Vec<Spanned>) -> PResult<CompositionExpr> {
        let mut e = if self.eat("(") {
            let (e, mut inner) = self.system_expr()?;
            refs.append(&mut inner);
            self.expect(")")?;
            e
        } else {
            let id = self.ident()?;
            refs.push(id.clone());
            CompositionExpr::Ref(id.name)
        };
        while self.eat("[") {
            let mut pairs = Vec::new();
            if !self.at("]") {
                loop {
                    let new = self.ident()?.name;
                    self.expect("/")?;
                    let old = self.ident()?.name;
                    pairs.push((new, old));
                    if !self.eat(",") {
                        break;
                    }
                }
            }
            self.expect("]")?;
            e = CompositionExpr::Rename(Box::new(e), pairs);
        }
        Ok(e)
    }

    fn ct(&mut self) -> PResult<Vec<Name>> {
        if self.eat("(") {
            self.expect(")")?;
            return Ok(Vec::new());
        }
        let mut steps = vec![self.ident()?.name];
        while self.eat(".") {
            steps.push(self.ident()?.name);
        }
        Ok(steps)
    }

    fn certificate(&mut self) -> PResult<(Certificate, Spanned, Spanned, Spanned, Vec<CertRef>)> {
        let name = self.ident()?;
        self.expect("(")?;
        let left = self.ident()?;
        self.expect(",")?;
        let right = self.ident()?;
        self.expect(")")?;
        self.expect("{")?;
        let mut c = Certificate::new(name.name.clone(), left.name.clone(), right.name.clone());
        let mut refs = Vec::new();
        loop {
            if self.eat("}") {
                break;
            }
            if self.eat("(") {
                let s1 = self.ident()?;
                self.expect(",")?;
                let s2 = self.ident()?;
                self.expect(")")?;
                self.expect(":")?;
                let b = self.formula()?;
                self.expect(";")?;
                c.entries.insert((s1.name.clone(), s2.name.clone()), b);
                refs.push(CertRef::Entry(s1, s2));
            } else if self.at_kw("hints") {
                self.bump();
                self.expect("{")?;
                while !self.eat("}") {
                    let t = self.ident()?;
                    self.expect("@")?;
                    let s = self.ident()?;
                    self.expect(":")?;
                    self.expect("[")?;
                    let mut cts = Vec::new();
                    if !self.at("]") {
                        loop {
                            cts.push(self.ct()?);
                            if !self.eat(",") {
                                break;
                            }
                        }
                    }
                    self.expect("]")?;
                    self.expect(";")?;
                    refs.push(CertRef::Hint(t.clone(), s.clone(), cts.clone()));
                    c.hints.insert((t.name, s.name), cts);
                }
            } else if self.at_kw("maxlen") {
                self.bump();
                let n = self.int()?;
                if n < 0 {
                    return Err(self.err(&["non-negative maxlen"]));
                }
                c.maxlen = n as usize;
                self.eat(";");
            } else {
                return Err(self.err(&["`(`", "`hints`", "`maxlen`", "`}`"]));
            }
        }
        Ok((c, name, left, right, refs))
    }
}

enum CertRef {
    Entry(Spanned, Spanned),
    Hint(Spanned, Spanned, Vec<Vec<Name>>),
}

fn resolve_process_terms(p: &mut Process, consts: &BTreeSet<Name>, vars: &BTreeSet<Name>) {
    let r = |t: &Term| resolve_syms(t, consts, vars, &mut Vec::new());
    p.init = r(&p.init);
    for t in &mut p.transitions {
        t.op.guard = r(&t.op.guard);
        for ao in &mut t.op.body {
            match ao {
                AtomicOp::Output { expr, .. } | AtomicOp::Assign { expr, .. } => *expr = r(expr),
                AtomicOp::Input { .. } => {}
            }
        }
    }
}

/// Parses a model and resolves every cross-reference.
pub fn parse_model(text: &str) -> Result<Model, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    let mut m = Model::default();
    let mut proc_pos: BTreeMap<Name, Spanned> = BTreeMap::new();
    let mut system_refs: Vec<Spanned> = Vec::new();
    let mut certs = Vec::new();
    let mut declared: BTreeSet<Name> = BTreeSet::new();
    let mut declare = |id: &Spanned| {
        if declared.insert(id.name.clone()) {
            Ok(())
        } else {
            Err(resolve_err(id, format!("{} is declared twice", id.name)))
        }
    };
    loop {
        let kw = match p.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(s) => s,
            _ => return Err(p.err(&["`model`", "`domain`", "`channel`", "`process`", "`system`", "`certificate`"])),
        };
        match kw.as_str() {
            "model" => {
                p.bump();
                m.name = Some(p.ident()?.name);
                if let Tok::Str(s) = p.peek().clone() {
                    p.bump();
                    m.comment = Some(s);
                }
                p.eat(";");
            }
            "domain" => {
                p.bump();
                let id = p.ident()?;
                p.expect("=")?;
                let d = p.domain(&m.domains)?;
                if m.domains.insert(id.name.clone(), d).is_some() {
                    return Err(resolve_err(&id, format!("domain {} is declared twice", id.name)));
                }
                p.eat(";");
            }
            "channel" => {
                p.bump();
                let id = p.ident()?;
                p.expect(":")?;
                let d = p.domain(&m.domains)?;
                m.channels.insert(id.name, d);
                p.eat(";");
            }
            "process" => {
                p.bump();
                let (proc_, id, _) = p.process(&m.domains)?;
                declare(&id)?;
                proc_pos.insert(id.name.clone(), id);
                m.processes.insert(proc_.name.clone(), proc_);
            }
            "system" => {
                p.bump();
                let id = p.ident()?;
                p.expect("=")?;
                let (e, mut refs) = p.system_expr()?;
                declare(&id)?;
                system_refs.append(&mut refs);
                proc_pos.insert(id.name.clone(), id.clone());
                m.systems.insert(id.name, e);
                p.eat(";");
            }
            "certificate" => {
                p.bump();
                let (c, id, l, r, refs) = p.certificate()?;
                if m.certificates.contains_key(&c.name) {
                    return Err(resolve_err(&id, format!("certificate {} is declared twice", id.name)));
                }
                m.certificates.insert(c.name.clone(), c);
                certs.push((id, l, r, refs));
            }
            _ => return Err(p.err(&["`model`", "`domain`", "`channel`", "`process`", "`system`", "`certificate`"])),
        }
    }
    for r in &system_refs {
        if !m.has_process(r.name.as_str()) {
            return Err(resolve_err(r, format!("unknown process {}", r.name)));
        }
    }
    let consts = m.enum_constants();
    let vars: BTreeSet<Name> = m.processes.values().flat_map(|p| p.vars.keys().cloned()).collect();
    for proc_ in m.processes.values_mut() {
        resolve_process_terms(proc_, &consts, &vars);
    }
    for c in m.certificates.values_mut() {
        for b in c.entries.values_mut() {
            *b = resolve_syms(b, &consts, &vars, &mut Vec::new());
        }
    }
    for (name, proc_) in &m.processes {
        for d in proc_.validate() {
            let kind = match d.code {
                "sort" => ParseErrorKind::Sort,
                "undeclared-variable" | "unknown-state" => ParseErrorKind::Resolve,
                _ => continue,
            };
            let at = &proc_pos[name];
            return Err(ParseError {
                kind,
                line: at.line,
                col: at.col,
                message: format!("process {name}: {}", d.message),
                expected: Vec::new(),
            });
        }
    }
    for (id, l, r, refs) in certs {
        let side = |s: &Spanned| {
            m.process(s.name.as_str())
                .map_err(|e| resolve_err(s, format!("certificate {}: {e}", id.name)))
        };
        let (p1, p2) = (side(&l)?, side(&r)?);
        for cr in refs {
            match cr {
                CertRef::Entry(s1, s2) => {
                    if !p1.has_state(s1.name.as_str()) {
                        return Err(resolve_err(&s1, format!("unknown state {} of {}", s1.name, p1.name)));
                    }
                    if !p2.has_state(s2.name.as_str()) {
                        return Err(resolve_err(&s2, format!("unknown state {} of {}", s2.name, p2.name)));
                    }
                }
                CertRef::Hint(t, s, cts) => {
                    let owner = if p1.transition(t.name.as_str()).is_some() && p2.has_state(s.name.as_str()) {
                        &p2
                    } else if p2.transition(t.name.as_str()).is_some() && p1.has_state(s.name.as_str()) {
                        &p1
                    } else {
                        return Err(resolve_err(
                            &t,
                            format!("hint {} @ {} matches no transition and opposite state", t.name, s.name),
                        ));
                    };
                    for step in cts.iter().flatten() {
                        if owner.transition(step.as_str()).is_none() {
                            return Err(resolve_err(&s, format!("hint step {step} is not a transition of {}", owner.name)));
                        }
                    }
                }
            }
        }
    }
    Ok(m)
}

/// Parses a standalone formula or term.
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    let t = p.formula()?;
    if !matches!(p.peek(), Tok::Eof) {
        return Err(p.err(&["end of input"]));
    }
    Ok(t)
}
