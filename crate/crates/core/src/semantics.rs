//! Realization of processes as explicit labelled transition systems.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::hash::{Hash, Hasher};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operators::AtomicOp;
use crate::process::{Process, AT};
use crate::symbolic::{solutions, Compiled, Domain, EvalError, Name, Valuation, ValuationIter, Value};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Action {
    Recv(Name, Value),
    Send(Name, Value),
    Tau,
}

impl Action {
    pub fn is_tau(&self) -> bool {
        matches!(self, Action::Tau)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Recv(c, v) => write!(f, "{c}?{v}"),
            Action::Send(c, v) => write!(f, "{c}!{v}"),
            Action::Tau => f.write_str("tau"),
        }
    }
}

pub type VertexId = u32;
pub type LabelId = u32;

/// Per-slot interned values; each non-root vertex is a row of small codes.
#[derive(Clone, Debug, Default)]
pub(crate) struct Store {
    width: usize,
    rows: usize,
    tables: Vec<Vec<Value>>,
    index: Vec<HashMap<Value, u16>>,
    codes: Vec<u16>,
}

impl Store {
    pub(crate) fn new(width: usize) -> Self {
        Store {
            width,
            rows: 0,
            tables: vec![Vec::new(); width],
            index: vec![HashMap::new(); width],
            codes: Vec::new(),
        }
    }

    fn encode_into(&mut self, frame: &[Value], out: &mut Vec<u16>) -> Result<()> {
        out.clear();
        for (i, v) in frame.iter().enumerate() {
            let code = match self.index[i].get(v) {
                Some(&c) => c,
                None => {
                    let c = u16::try_from(self.tables[i].len())
                        .map_err(|_| Error::Parameter("more than 65536 distinct values in one variable".into()))?;
                    self.tables[i].push(v.clone());
                    self.index[i].insert(v.clone(), c);
                    c
                }
            };
            out.push(code);
        }
        Ok(())
    }

    fn push_row(&mut self, row: &[u16]) {
        self.codes.extend_from_slice(row);
        self.rows += 1;
    }

    fn row(&self, r: usize) -> &[u16] {
        &self.codes[r * self.width..(r + 1) * self.width]
    }

    fn value(&self, r: usize, slot: usize) -> &Value {
        &self.tables[slot][self.row(r)[slot] as usize]
    }

    fn decode(&self, r: usize) -> Vec<Value> {
        self.row(r)
            .iter()
            .enumerate()
            .map(|(i, &c)| self.tables[i][c as usize].clone())
            .collect()
    }
}

/// An explicit LTS whose vertex 0 is the root `P^0`; every other vertex is a
/// valuation (control variable first).
#[derive(Clone, Debug)]
pub struct RealizationLts {
    pub process: Name,
    pub vars: Vec<Name>,
    store: Store,
    labels: Vec<Action>,
    offsets: Vec<usize>,
    targets: Vec<(LabelId, VertexId)>,
    finals: BTreeSet<Name>,
}

impl RealizationLts {
    /// Builds an LTS from raw parts. Vertex 0 is the root; `vals[0]` must be
    /// `None` and every other entry `Some`.
    pub fn from_parts(
        process: Name,
        vars: Vec<Name>,
        vals: Vec<Option<Arc<[Value]>>>,
        labels: Vec<Action>,
        edges: Vec<(VertexId, LabelId, VertexId)>,
        finals: BTreeSet<Name>,
    ) -> Self {
        assert!(!vals.is_empty() && vals[0].is_none());
        let mut store = Store::new(vars.len());
        let mut row = Vec::new();
        for v in &vals[1..] {
            let v = v.as_ref().expect("non-root vertices carry valuations");
            store.encode_into(v, &mut row).expect("value table overflow");
            store.push_row(&row);
        }
        Self::from_store(process, vars, store, labels, edges, finals)
    }

    fn from_store(
        process: Name,
        vars: Vec<Name>,
        store: Store,
        labels: Vec<Action>,
        mut edges: Vec<(VertexId, LabelId, VertexId)>,
        finals: BTreeSet<Name>,
    ) -> Self {
        edges.sort_unstable();
        edges.dedup();
        let n = store.rows + 1;
        let mut offsets = vec![0usize; n + 1];
        for &(s, _, _) in &edges {
            offsets[s as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = edges.into_iter().map(|(_, a, d)| (a, d)).collect();
        RealizationLts {
            process,
            vars,
            store,
            labels,
            offsets,
            targets,
            finals,
        }
    }

    /// An unlabelled-vertex LTS, for tests and hand-built systems.
    pub fn from_edges(n: usize, edges: &[(usize, Action, usize)]) -> Self {
        let mut labels: Vec<Action> = Vec::new();
        let mut idx = HashMap::new();
        let mut es = Vec::new();
        for (s, a, d) in edges {
            let l = *idx.entry(a.clone()).or_insert_with(|| {
                labels.push(a.clone());
                labels.len() as u32 - 1
            });
            es.push((*s as u32, l, *d as u32));
        }
        let mut vals = vec![None];
        vals.extend((1..n).map(|i| Some(Arc::from(vec![Value::Int(i as i64)]))));
        RealizationLts::from_parts(
            Name::new("lts"),
            vec![Name::new("v")],
            vals,
            labels,
            es,
            BTreeSet::new(),
        )
    }

    pub fn root(&self) -> VertexId {
        0
    }

    pub fn num_vertices(&self) -> usize {
        self.store.rows + 1
    }

    pub fn num_edges(&self) -> usize {
        self.targets.len()
    }

    pub fn labels(&self) -> &[Action] {
        &self.labels
    }

    pub fn label(&self, l: LabelId) -> &Action {
        &self.labels[l as usize]
    }

    pub fn succ(&self, v: VertexId) -> &[(LabelId, VertexId)] {
        &self.targets[self.offsets[v as usize]..self.offsets[v as usize + 1]]
    }

    pub fn edges(&self) -> impl Iterator<Item = (VertexId, &Action, VertexId)> + '_ {
        (0..self.num_vertices() as u32).flat_map(move |v| {
            self.succ(v)
                .iter()
                .map(move |&(a, d)| (v, &self.labels[a as usize], d))
        })
    }

    /// Values in `vars` order; `None` at the root.
    pub fn raw_values(&self, v: VertexId) -> Option<Vec<Value>> {
        (v != 0).then(|| self.store.decode(v as usize - 1))
    }

    /// Value of the variable in `slot` at a non-root vertex.
    pub fn value(&self, v: VertexId, slot: usize) -> Option<&Value> {
        (v != 0).then(|| self.store.value(v as usize - 1, slot))
    }

    pub fn valuation(&self, v: VertexId) -> Option<Valuation> {
        self.raw_values(v)
            .map(|vals| self.vars.iter().cloned().zip(vals).collect())
    }

    /// Value of `at_P` at a vertex, if it is a valuation of a process.
    pub fn control(&self, v: VertexId) -> Option<&Name> {
        if self.vars.first().map(Name::as_str) != Some(AT) {
            return None;
        }
        match self.value(v, 0)? {
            Value::Sym(s) => Some(s),
            _ => None,
        }
    }

    pub fn finals(&self) -> &BTreeSet<Name> {
        &self.finals
    }

    /// Short description of a vertex for reports.
    pub fn describe(&self, v: VertexId) -> String {
        match self.raw_values(v) {
            None => format!("{}^0", self.process),
            Some(vals) => self
                .vars
                .iter()
                .zip(vals.iter())
                .map(|(k, x)| {
                    if k.as_str() == AT {
                        format!("at={x}")
                    } else {
                        format!("{k}={x}")
                    }
                })
                .collect::<Vec<_>>()
                .join(" "),
        }
    }

    /// Vertices reachable from the root.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_vertices()];
        let mut queue = VecDeque::from([0u32]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &(_, d) in self.succ(v) {
                if !seen[d as usize] {
                    seen[d as usize] = true;
                    queue.push_back(d);
                }
            }
        }
        seen
    }
}

#[derive(Clone, Debug, Default)]
pub struct RealizeOptions {
    /// Materialize every valuation instead of the reachable fragment.
    pub full_enumeration: bool,
    /// Payload domains overriding the receiving variable's domain.
    pub channel_domains: BTreeMap<Name, Domain>,
    /// Abort when more vertices than this would be created.
    pub max_vertices: Option<usize>,
}

enum Step {
    Input { chan: LabelChan, slot: usize, payload: Vec<Value> },
    Output { chan: LabelChan, code: Compiled },
    Assign { slot: usize, code: Compiled, dom: Domain, var: Name },
}

type LabelChan = Name;

struct CompiledTransition {
    id: Name,
    guard: Compiled,
    steps: Vec<Step>,
    dst: Value,
}

struct Engine<'a> {
    process: &'a Process,
    names: Vec<Name>,
    by_state: HashMap<Value, Vec<CompiledTransition>>,
}

impl<'a> Engine<'a> {
    fn new(p: &'a Process, opts: &RealizeOptions) -> Result<Self> {
        let mut names = vec![p.at_var()];
        names.extend(p.vars.keys().cloned());
        let slot_of = |x: &Name| names.iter().position(|n| n == x);
        let mut by_state: HashMap<Value, Vec<CompiledTransition>> = HashMap::new();
        for s in &p.states {
            by_state.insert(Value::Sym(s.clone()), Vec::new());
        }
        for t in &p.transitions {
            let ctx = |e: EvalError| Error::Realize {
                transition: t.id.to_string(),
                valuation: "(compilation)".into(),
                source: e,
            };
            let guard = Compiled::new(&t.op.guard, &slot_of).map_err(ctx)?;
            let mut steps = Vec::new();
            for ao in &t.op.body {
                steps.push(match ao {
                    AtomicOp::Input { chan, var } => {
                        let slot = slot_of(var).ok_or_else(|| Error::DomainMissing(var.clone()))?;
                        let vd = &p.vars[var];
                        let payload = match opts.channel_domains.get(chan) {
                            Some(cd) => {
                                let mut out = Vec::new();
                                for v in cd.values() {
                                    out.push(vd.normalize(&v).ok_or_else(|| {
                                        Error::Parameter(format!(
                                            "payload {v} of channel {chan} is outside the domain of {var}"
                                        ))
                                    })?);
                                }
                                out
                            }
                            None => vd.values(),
                        };
                        Step::Input {
                            chan: chan.clone(),
                            slot,
                            payload,
                        }
                    }
                    AtomicOp::Output { chan, expr } => Step::Output {
                        chan: chan.clone(),
                        code: Compiled::new(expr, &slot_of).map_err(ctx)?,
                    },
                    AtomicOp::Assign { var, expr } => Step::Assign {
                        slot: slot_of(var).ok_or_else(|| Error::DomainMissing(var.clone()))?,
                        code: Compiled::new(expr, &slot_of).map_err(ctx)?,
                        dom: p.vars[var].clone(),
                        var: var.clone(),
                    },
                });
            }
            by_state
                .entry(Value::Sym(t.src.clone()))
                .or_default()
                .push(CompiledTransition {
                    id: t.id.clone(),
                    guard,
                    steps,
                    dst: Value::Sym(t.dst.clone()),
                });
        }
        Ok(Engine {
            process: p,
            names,
            by_state,
        })
    }

    fn describe(&self, frame: &[Value]) -> String {
        self.names
            .iter()
            .zip(frame)
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", ")
    }

    /// Calls `emit(action, successor)` for every realization leaving `frame`.
    fn expand(&self, frame: &[Value], emit: &mut dyn FnMut(Action, Vec<Value>)) -> Result<()> {
        let Some(ts) = self.by_state.get(&frame[0]) else {
            return Ok(());
        };
        for t in ts {
            let err = |e: EvalError| Error::Realize {
                transition: t.id.to_string(),
                valuation: self.describe(frame),
                source: e,
            };
            if !t.guard.holds(frame).map_err(err)? {
                continue;
            }
            let inputs: Vec<Option<&Value>> = match t.steps.iter().find_map(|s| match s {
                Step::Input { payload, .. } => Some(payload),
                _ => None,
            }) {
                Some(payload) => payload.iter().map(Some).collect(),
                None => vec![None],
            };
            for input in inputs {
                let mut cur = frame.to_vec();
                let mut action = Action::Tau;
                for s in &t.steps {
                    match s {
                        Step::Input { chan, slot, .. } => {
                            let v = input.expect("input value").clone();
                            action = Action::Recv(chan.clone(), v.clone());
                            cur[*slot] = v;
                        }
                        Step::Output { chan, code } => {
                            action = Action::Send(chan.clone(), code.eval(&cur).map_err(err)?);
                        }
                        Step::Assign { slot, code, dom, var } => {
                            let v = code.eval(&cur).map_err(err)?;
                            cur[*slot] = dom.normalize(&v).ok_or_else(|| {
                                err(EvalError::OutOfDomain {
                                    var: var.clone(),
                                    value: v.clone(),
                                })
                            })?;
                        }
                    }
                }
                cur[0] = t.dst.clone();
                emit(action, cur);
            }
        }
        Ok(())
    }

    fn initial(&self) -> Result<Vec<Vec<Value>>> {
        let p = self.process;
        let vars: BTreeSet<Name> = p.vars.keys().cloned().collect();
        let sols = solutions(&p.init, &vars, &p.vars)?;
        Ok(sols
            .into_iter()
            .map(|xi| {
                let mut frame = vec![Value::Sym(p.start.clone())];
                frame.extend(xi.into_values());
                frame
            })
            .collect())
    }
}

struct Builder {
    store: Store,
    lookup: HashMap<u64, VertexId>,
    overflow: HashMap<Vec<u16>, VertexId>,
    row: Vec<u16>,
    labels: Vec<Action>,
    label_index: HashMap<Action, LabelId>,
    edges: Vec<(VertexId, LabelId, VertexId)>,
    limit: Option<usize>,
}

impl Builder {
    fn new(width: usize, limit: Option<usize>) -> Self {
        Builder {
            store: Store::new(width),
            lookup: HashMap::new(),
            overflow: HashMap::new(),
            row: Vec::new(),
            labels: Vec::new(),
            label_index: HashMap::new(),
            edges: Vec::new(),
            limit,
        }
    }

    fn vertex(&mut self, frame: &[Value]) -> Result<(VertexId, bool)> {
        let mut row = std::mem::take(&mut self.row);
        self.store.encode_into(frame, &mut row)?;
        let mut h = DefaultHasher::new();
        row.hash(&mut h);
        let key = h.finish();
        let found = match self.lookup.get(&key) {
            Some(&v) if self.store.row(v as usize - 1) == row.as_slice() => Some(v),
            Some(_) => self.overflow.get(&row).copied(),
            None => None,
        };
        if let Some(v) = found {
            self.row = row;
            return Ok((v, false));
        }
        if let Some(limit) = self.limit {
            if self.store.rows + 1 > limit {
                return Err(Error::Parameter(format!(
                    "realization exceeds the vertex limit of {limit}"
                )));
            }
        }
        let id = self.store.rows as VertexId + 1;
        self.store.push_row(&row);
        if self.lookup.contains_key(&key) {
            self.overflow.insert(row.clone(), id);
        } else {
            self.lookup.insert(key, id);
        }
        self.row = row;
        Ok((id, true))
    }

    fn label(&mut self, a: Action) -> LabelId {
        if let Some(&l) = self.label_index.get(&a) {
            return l;
        }
        self.labels.push(a.clone());
        let l = self.labels.len() as LabelId - 1;
        self.label_index.insert(a, l);
        l
    }
}

/// Builds the realization graph of `p`.
pub fn realize(p: &Process, opts: &RealizeOptions) -> Result<RealizationLts> {
    p.ensure_valid()?;
    let engine = Engine::new(p, opts)?;
    let mut b = Builder::new(engine.names.len(), opts.max_vertices);
    let mut queue = VecDeque::new();
    let mut initial = Vec::new();
    if opts.full_enumeration {
        let all: BTreeSet<Name> = engine.names.iter().cloned().collect();
        let doms = p.full_domains();
        let mut it = ValuationIter::new(&all, &doms)?;
        let order: Vec<usize> = engine
            .names
            .iter()
            .map(|n| it.names().iter().position(|m| m == n).unwrap())
            .collect();
        let mut raw = Vec::new();
        while it.next_frame(&mut raw) {
            let frame: Vec<Value> = order.iter().map(|&i| raw[i].clone()).collect();
            let (v, _) = b.vertex(&frame)?;
            queue.push_back(v);
        }
    }
    for frame in engine.initial()? {
        let (v, fresh) = b.vertex(&frame)?;
        initial.push(v);
        if fresh {
            queue.push_back(v);
        }
    }
    let mut pending = Vec::new();
    while let Some(v) = queue.pop_front() {
        let frame = b.store.decode(v as usize - 1);
        pending.clear();
        engine.expand(&frame, &mut |a, next| pending.push((a, next)))?;
        for (a, next) in pending.drain(..) {
            let (d, fresh) = b.vertex(&next)?;
            if fresh {
                queue.push_back(d);
            }
            let l = b.label(a);
            b.edges.push((v, l, d));
        }
    }
    let mut by_src: HashMap<VertexId, Vec<(LabelId, VertexId)>> = HashMap::new();
    for &(s, l, d) in &b.edges {
        by_src.entry(s).or_default().push((l, d));
    }
    for v in &initial {
        if let Some(es) = by_src.get(v) {
            for &(l, d) in es {
                b.edges.push((0, l, d));
            }
        }
    }
    Ok(RealizationLts::from_store(
        p.name.clone(),
        engine.names,
        b.store,
        b.labels,
        b.edges,
        p.finals.iter().cloned().collect(),
    ))
}

/// Non-root vertices without outgoing edges, excluding vertices whose control
/// state is declared final.
pub fn deadlocks(l: &RealizationLts) -> Vec<VertexId> {
    (1..l.num_vertices() as VertexId)
        .filter(|&v| l.succ(v).is_empty())
        .filter(|&v| l.control(v).is_none_or(|s| !l.finals().contains(s)))
        .collect()
}

/// Vertex pairs reachable from the two roots when τ moves are taken alone and
/// visible moves jointly on equal actions.
pub fn lockstep_pairs(l1: &RealizationLts, l2: &RealizationLts) -> Vec<(VertexId, VertexId)> {
    let mut seen = std::collections::HashSet::from([(0, 0)]);
    let mut order = vec![(0, 0)];
    let mut i = 0;
    while i < order.len() {
        let (a, b) = order[i];
        i += 1;
        let mut next = Vec::new();
        for &(la, da) in l1.succ(a) {
            let act = l1.label(la);
            if act.is_tau() {
                next.push((da, b));
                continue;
            }
            for &(lb, db) in l2.succ(b) {
                if l2.label(lb) == act {
                    next.push((da, db));
                }
            }
        }
        for &(lb, db) in l2.succ(b) {
            if l2.label(lb).is_tau() {
                next.push((a, db));
            }
        }
        for p in next {
            if seen.insert(p) {
                order.push(p);
            }
        }
    }
    order
}

/// Explicit weak transition relation:`⇒τ` is reflexive-transitive closure of
/// τ; `⇒a` is `τ* a τ*`.
#[derive(Clone, Debug)]
pub struct WeakLts {
    pub labels: Vec<Action>,
    pub edges: Vec<BTreeSet<(LabelId, VertexId)>>,
}

impl WeakLts {
    pub fn tau_label(&self) -> Option<LabelId> {
        self.labels.iter().position(Action::is_tau).map(|i| i as LabelId)
    }
}

pub fn tau_closure(l: &RealizationLts, v: VertexId) -> BTreeSet<VertexId> {
    let mut seen = BTreeSet::from([v]);
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        for &(a, d) in l.succ(u) {
            if l.label(a).is_tau() && seen.insert(d) {
                stack.push(d);
            }
        }
    }
    seen
}

pub fn tau_saturate(l: &RealizationLts) -> WeakLts {
    let n = l.num_vertices();
    let mut labels = l.labels().to_vec();
    let tau = match labels.iter().position(Action::is_tau) {
        Some(i) => i as LabelId,
        None => {
            labels.push(Action::Tau);
            labels.len() as LabelId - 1
        }
    };
    let closures: Vec<BTreeSet<VertexId>> = (0..n as VertexId).map(|v| tau_closure(l, v)).collect();
    let mut edges = vec![BTreeSet::new(); n];
    for v in 0..n {
        for &u in &closures[v] {
            edges[v].insert((tau, u));
            for &(a, w) in l.succ(u) {
                if l.label(a).is_tau() {
                    continue;
                }
                for &w2 in &closures[w as usize] {
                    edges[v].insert((a, w2));
                }
            }
        }
    }
    WeakLts { labels, edges }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::Operator;
    use crate::symbolic::{Func, Term};

    fn buffer() -> Process {
        crate::examples::gen_buffer(2, &Domain::int(0, 1)).unwrap()
    }

    #[test]
    fn empty_process_has_only_the_root_edges() {
        let p = Process::new("P", "s");
        let l = realize(&p, &RealizeOptions::default()).unwrap();
        assert_eq!(l.num_vertices(), 2);
        assert_eq!(l.num_edges(), 0);
    }

    #[test]
    fn buffer_root_edges_receive_each_payload() {
        let l = realize(&buffer(), &RealizeOptions::default()).unwrap();
        let root: BTreeSet<String> = l.succ(0).iter().map(|&(a, _)| l.label(a).to_string()).collect();
        assert_eq!(root, BTreeSet::from(["In?0".to_string(), "In?1".to_string()]));
        assert!(deadlocks(&l).is_empty());
    }

    #[test]
    fn input_edges_one_per_payload_value() {
        let mut p = Process::new("P", "s").with_var("x", Domain::int(0, 2));
        p.add_transition(None, "s", Operator::seq(vec![AtomicOp::input("a", "x")]), "q");
        let l = realize(&p, &RealizeOptions::default()).unwrap();
        let v = l.succ(0)[0].1;
        assert!(l.raw_values(v).is_some());
        let init_vertex = (1..l.num_vertices() as u32)
            .find(|&v| l.control(v).map(Name::as_str) == Some("s") && l.raw_values(v).unwrap()[1] == Value::Int(0))
            .unwrap();
        assert_eq!(l.succ(init_vertex).len(), 3);
    }

    #[test]
    fn self_loop_is_not_a_deadlock() {
        let mut p = Process::new("P", "s");
        p.add_transition(None, "s", Operator::skip(), "s");
        let l = realize(&p, &RealizeOptions::default()).unwrap();
        assert!(deadlocks(&l).is_empty());
    }

    #[test]
    fn evaluation_errors_are_hard_errors() {
        let mut p = Process::new("P", "s").with_var("m", Domain::list(Domain::int(0, 1), 1));
        p.init = Term::eq(Term::var("m"), Term::Const(Value::empty_list()));
        p.add_transition(
            Some("bad"),
            "s",
            Operator::seq(vec![AtomicOp::assign("m", Term::app(Func::Tail, vec![Term::var("m")]))]),
            "s",
        );
        match realize(&p, &RealizeOptions::default()) {
            Err(Error::Realize { transition, .. }) => assert_eq!(transition, "bad"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn control_variable_tracks_destination() {
        let l = realize(&buffer(), &RealizeOptions { full_enumeration: true, ..Default::default() }).unwrap();
        for (s, _, d) in l.edges() {
            if s != 0 {
                assert_eq!(l.control(d).map(Name::as_str), Some("B"));
            }
        }
    }

    #[test]
    fn saturation_examples() {
        let a = Action::Send(Name::new("a"), Value::Int(0));
        let plain = RealizationLts::from_edges(3, &[(0, a.clone(), 1), (1, a.clone(), 2)]);
        let w = tau_saturate(&plain);
        let tau = w.tau_label().unwrap();
        for v in 0..3u32 {
            let taus: Vec<_> = w.edges[v as usize].iter().filter(|e| e.0 == tau).collect();
            assert_eq!(taus, vec![&(tau, v)]);
        }
        let chain = RealizationLts::from_edges(3, &[(0, Action::Tau, 1), (1, Action::Tau, 2)]);
        let w = tau_saturate(&chain);
        let tau = w.tau_label().unwrap();
        assert!(w.edges[0].contains(&(tau, 2)));
        let mixed = RealizationLts::from_edges(3, &[(0, Action::Tau, 1), (1, a.clone(), 2)]);
        let w = tau_saturate(&mixed);
        let al = w.labels.iter().position(|x| x == &a).unwrap() as u32;
        assert!(w.edges[0].contains(&(al, 2)));
    }

    #[test]
    fn lockstep_pairs_follow_tau_alone_and_visible_jointly() {
        let a = Action::Send(Name::new("c"), Value::Int(0));
        let b = Action::Send(Name::new("c"), Value::Int(1));
        let l1 = RealizationLts::from_edges(3, &[(0, Action::Tau, 1), (1, a.clone(), 2)]);
        let l2 = RealizationLts::from_edges(3, &[(0, a, 1), (0, b, 2)]);
        let mut pairs = lockstep_pairs(&l1, &l2);
        pairs.sort();
        assert_eq!(pairs, vec![(0, 0), (1, 0), (2, 1)]);
    }
}
