//! The `.mpp` model format: parsing, canonical printing and DOT export.

mod dot;
mod lexer;
mod parser;
mod printer;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::algebra::{compose_expr, Composition, CompositionExpr};
use crate::certificate::{check_certificate, Certificate, Report};
use crate::error::{Error, Result};
use crate::process::Process;
use crate::symbolic::{Domain, Domains, Name, Term};

pub use dot::{lts_to_dot, process_to_dot};
pub use parser::{parse_model, parse_term};
pub use printer::serialize_model;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ParseErrorKind {
    Syntax,
    Resolve,
    Sort,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub expected: Vec<String>,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ParseErrorKind::Syntax => "parse error",
            ParseErrorKind::Resolve => "resolve error",
            ParseErrorKind::Sort => "sort error",
        };
        write!(f, "{}:{}: {kind}: {}", self.line, self.col, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected one of: {})", self.expected.join(", "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Model {
    pub name: Option<Name>,
    pub comment: Option<String>,
    pub domains: BTreeMap<Name, Domain>,
    pub channels: BTreeMap<Name, Domain>,
    pub processes: BTreeMap<Name, Process>,
    pub systems: BTreeMap<Name, CompositionExpr>,
    pub certificates: BTreeMap<Name, Certificate>,
}

impl Model {
    pub fn add_process(&mut self, p: Process) {
        self.processes.insert(p.name.clone(), p);
    }

    pub fn add_system(&mut self, name: impl Into<Name>, e: CompositionExpr) {
        self.systems.insert(name.into(), e);
    }

    pub fn add_certificate(&mut self, c: Certificate) {
        self.certificates.insert(c.name.clone(), c);
    }

    /// Payload domains declared for channels.
    pub fn channel_domains(&self) -> Domains {
        self.channels.clone()
    }

    pub fn has_process(&self, name: &str) -> bool {
        self.processes.contains_key(name) || self.systems.contains_key(name)
    }

    /// A declared process, or a system evaluated to a process of that name.
    pub fn process(&self, name: &str) -> Result<Process> {
        Ok(self.composition(name)?.process)
    }

    pub fn composition(&self, name: &str) -> Result<Composition> {
        self.compose_named(name, &mut Vec::new())
    }

    fn compose_named(&self, name: &str, stack: &mut Vec<Name>) -> Result<Composition> {
        if let Some(p) = self.processes.get(name) {
            return Ok(Composition {
                process: p.clone(),
                renames: Vec::new(),
                omitted: Vec::new(),
            });
        }
        let e = self
            .systems
            .get(name)
            .ok_or_else(|| Error::UnknownProcess(name.to_string()))?;
        if stack.iter().any(|n| n.as_str() == name) {
            return Err(Error::UnknownProcess(format!("{name} is defined in terms of itself")));
        }
        stack.push(Name::new(name));
        let mut env = BTreeMap::new();
        let mut renames = Vec::new();
        let mut omitted = Vec::new();
        for r in e.references() {
            let mut c = self.compose_named(r.as_str(), stack)?;
            renames.append(&mut c.renames);
            omitted.append(&mut c.omitted);
            env.insert(r, c.process);
        }
        stack.pop();
        let mut c = compose_expr(e, &env)?;
        c.process.name = Name::new(name);
        renames.append(&mut c.renames);
        omitted.append(&mut c.omitted);
        c.renames = renames;
        c.omitted = omitted;
        Ok(c)
    }

    pub fn check_certificate(&self, name: &str) -> Result<Report> {
        let cert = self
            .certificates
            .get(name)
            .ok_or_else(|| Error::UnknownProcess(format!("certificate {name}")))?;
        let p1 = self.process(cert.left.as_str())?;
        let p2 = self.process(cert.right.as_str())?;
        check_certificate(&p1, &p2, cert, &self.channel_domains())
    }

    /// Every validation diagnostic of every process and system.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let names: BTreeSet<&Name> = self.processes.keys().chain(self.systems.keys()).collect();
        for n in names {
            match self.composition(n.as_str()) {
                Ok(c) => {
                    out.extend(c.process.validate().into_iter().map(|d| format!("{n}: {d}")));
                    out.extend(c.omitted.into_iter().map(|o| format!("{n}: {o}")));
                }
                Err(e) => out.push(format!("{n}: {e}")),
            }
        }
        out
    }

    /// Enum constants declared anywhere in the model.
    pub fn enum_constants(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        let doms = self
            .domains
            .values()
            .chain(self.channels.values())
            .chain(self.processes.values().flat_map(|p| p.vars.values()));
        for d in doms {
            collect_enum(d, &mut out);
        }
        out
    }

    /// Turns identifiers that name enum constants (and no variable) into constants.
    pub fn resolve_term(&self, t: &Term) -> Term {
        let consts = self.enum_constants();
        let vars: BTreeSet<Name> = self.processes.values().flat_map(|p| p.vars.keys().cloned()).collect();
        resolve_syms(t, &consts, &vars, &mut Vec::new())
    }
}

fn collect_enum(d: &Domain, out: &mut BTreeSet<Name>) {
    match d {
        Domain::Enum(ns) => out.extend(ns.iter().cloned()),
        Domain::List { elem, .. } => collect_enum(elem, out),
        Domain::Frame { info, seq, ack } => {
            collect_enum(info, out);
            collect_enum(seq, out);
            collect_enum(ack, out);
        }
        Domain::Int { .. } | Domain::Bool => {}
    }
}

pub(crate) fn resolve_syms(t: &Term, consts: &BTreeSet<Name>, vars: &BTreeSet<Name>, bound: &mut Vec<Name>) -> Term {
    match t {
        Term::Var(x) if consts.contains(x) && !vars.contains(x) && !bound.contains(x) => {
            Term::Const(crate::symbolic::Value::Sym(x.clone()))
        }
        Term::Var(_) | Term::Const(_) => t.clone(),
        Term::App(f, args) => Term::App(*f, args.iter().map(|a| resolve_syms(a, consts, vars, bound)).collect()),
        Term::Forall { var, list, body } => {
            let list = resolve_syms(list, consts, vars, bound);
            bound.push(var.clone());
            let body = resolve_syms(body, consts, vars, bound);
            bound.pop();
            Term::Forall {
                var: var.clone(),
                list: Box::new(list),
                body: Box::new(body),
            }
        }
    }
}
