//! Weak bisimulation by signature refinement over τ-SCC-collapsed graphs.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::semantics::{Action, RealizationLts, VertexId};
use crate::symbolic::Name;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// A weak bisimulation given as a class per vertex; two vertices are related
/// iff both are reachable and carry the same class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relation {
    pub left: Vec<Option<u32>>,
    pub right: Vec<Option<u32>>,
}

impl Relation {
    pub fn related(&self, v1: VertexId, v2: VertexId) -> bool {
        match (self.left[v1 as usize], self.right[v2 as usize]) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        }
    }

    pub fn pairs(&self) -> Vec<(VertexId, VertexId)> {
        let mut by_class: BTreeMap<u32, Vec<VertexId>> = BTreeMap::new();
        for (v, c) in self.right.iter().enumerate() {
            if let Some(c) = c {
                by_class.entry(*c).or_default().push(v as VertexId);
            }
        }
        let mut out = Vec::new();
        for (v, c) in self.left.iter().enumerate() {
            if let Some(ws) = c.and_then(|c| by_class.get(&c)) {
                out.extend(ws.iter().map(|&w| (v as VertexId, w)));
            }
        }
        out
    }

    pub fn mirrored(&self) -> Relation {
        Relation {
            left: self.right.clone(),
            right: self.left.clone(),
        }
    }
}

/// A strategy showing two vertices apart: the attacker makes a weak move the
/// defender must answer; each answer is refuted by a subtree. A node without
/// responses is a move the defender cannot match at all.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Distinguisher {
    pub left: VertexId,
    pub right: VertexId,
    pub attacker: Side,
    pub action: Action,
    pub target: VertexId,
    pub responses: Vec<(VertexId, Distinguisher)>,
    /// Set when responses were elided to bound the report size.
    pub truncated: bool,
}

impl Distinguisher {
    pub fn depth(&self) -> usize {
        1 + self
            .responses
            .iter()
            .map(|(_, d)| d.depth())
            .max()
            .unwrap_or(0)
    }

    pub fn mirrored(&self) -> Distinguisher {
        Distinguisher {
            left: self.right,
            right: self.left,
            attacker: self.attacker.other(),
            action: self.action.clone(),
            target: self.target,
            responses: self
                .responses
                .iter()
                .map(|(v, d)| (*v, d.mirrored()))
                .collect(),
            truncated: self.truncated,
        }
    }

    /// The attacker moves along the leftmost branch down to an unmatched move.
    pub fn principal_path(&self) -> Vec<(Side, Action)> {
        let mut out = vec![(self.attacker, self.action.clone())];
        if let Some((_, sub)) = self.responses.first() {
            out.extend(sub.principal_path());
        }
        out
    }

    pub fn render(&self, l1: &RealizationLts, l2: &RealizationLts) -> String {
        let mut s = String::new();
        self.render_into(l1, l2, 0, &mut s);
        s
    }

    fn render_into(&self, l1: &RealizationLts, l2: &RealizationLts, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        let (att, def) = match self.attacker {
            Side::Left => (l1, l2),
            Side::Right => (l2, l1),
        };
        out.push_str(&format!(
            "{pad}{} moves =={}=> [{}]\n",
            self.attacker,
            self.action,
            att.describe(self.target)
        ));
        if self.responses.is_empty() {
            out.push_str(&format!("{pad}  {} has no matching move\n", self.attacker.other()));
        }
        for (v, sub) in &self.responses {
            out.push_str(&format!(
                "{pad}  {} answers [{}]\n",
                self.attacker.other(),
                def.describe(*v)
            ));
            sub.render_into(l1, l2, indent + 2, out);
        }
        if self.truncated {
            out.push_str(&format!("{pad}  (further answers elided)\n"));
        }
    }
}

#[derive(Clone, Debug)]
pub enum BisimVerdict {
    Equivalent(Relation),
    Inequivalent(Distinguisher),
}

impl BisimVerdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, BisimVerdict::Equivalent(_))
    }
}

/// Disjoint union of LTSs over a shared label table.
struct Graph {
    labels: Vec<Action>,
    tau: Option<u32>,
    succ: Vec<Vec<(u32, u32)>>,
}

impl Graph {
    fn union(parts: &[&RealizationLts]) -> (Graph, Vec<usize>) {
        let mut labels: Vec<Action> = Vec::new();
        let mut index: HashMap<Action, u32> = HashMap::new();
        let mut succ = Vec::new();
        let mut offsets = Vec::new();
        for l in parts {
            let base = succ.len() as u32;
            offsets.push(base as usize);
            let map: Vec<u32> = l
                .labels()
                .iter()
                .map(|a| {
                    *index.entry(a.clone()).or_insert_with(|| {
                        labels.push(a.clone());
                        labels.len() as u32 - 1
                    })
                })
                .collect();
            for v in 0..l.num_vertices() as VertexId {
                succ.push(
                    l.succ(v)
                        .iter()
                        .map(|&(a, d)| (map[a as usize], d + base))
                        .collect(),
                );
            }
        }
        let tau = labels.iter().position(Action::is_tau).map(|i| i as u32);
        (Graph { labels, tau, succ }, offsets)
    }
}

/// τ-strongly-connected components, listed so that every τ-successor
/// component appears before its predecessors.
fn tau_sccs(g: &Graph) -> (Vec<u32>, Vec<u32>) {
    let n = g.succ.len();
    let tau = g.tau;
    let tau_succ = |v: usize| {
        g.succ[v]
            .iter()
            .filter(move |(a, _)| Some(*a) == tau)
            .map(|&(_, d)| d as usize)
    };
    const UNSEEN: u32 = u32::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![0u32; n];
    let mut order = Vec::new();
    let mut counter = 0u32;
    let mut ncomp = 0u32;
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = Vec::new();
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, tau_succ(root).collect(), 0));
        while let Some(frame) = call.last_mut() {
            let v = frame.0;
            if frame.2 < frame.1.len() {
                let w = frame.1[frame.2];
                frame.2 += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, tau_succ(w).collect(), 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(parent) = call.last() {
                    let p = parent.0;
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    order.push(ncomp);
                    ncomp += 1;
                }
            }
        }
    }
    (comp, order)
}

/// The τ-collapsed quotient with its refinement history.
struct Refinement {
    graph: Graph,
    comp: Vec<u32>,
    tau_succ: Vec<Vec<u32>>,
    vis: Vec<Vec<(u32, u32)>>,
    history: Vec<Vec<u32>>,
}

impl Refinement {
    fn run(graph: Graph) -> Refinement {
        let (comp, order) = tau_sccs(&graph);
        let m = order.len();
        let mut tau_succ: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); m];
        let mut vis: Vec<BTreeSet<(u32, u32)>> = vec![BTreeSet::new(); m];
        for (v, es) in graph.succ.iter().enumerate() {
            let c = comp[v];
            for &(a, d) in es {
                let dc = comp[d as usize];
                if Some(a) == graph.tau {
                    if dc != c {
                        tau_succ[c as usize].insert(dc);
                    }
                } else {
                    vis[c as usize].insert((a, dc));
                }
            }
        }
        let tau_succ: Vec<Vec<u32>> = tau_succ.into_iter().map(|s| s.into_iter().collect()).collect();
        let vis: Vec<Vec<(u32, u32)>> = vis.into_iter().map(|s| s.into_iter().collect()).collect();

        let mut block = vec![0u32; m];
        let mut nblocks = 1usize;
        let mut history = vec![block.clone()];
        loop {
            let mut reach: Vec<Vec<u32>> = vec![Vec::new(); m];
            for &c in &order {
                let c = c as usize;
                let mut r = vec![block[c]];
                for &d in &tau_succ[c] {
                    r.extend_from_slice(&reach[d as usize]);
                }
                r.sort_unstable();
                r.dedup();
                reach[c] = r;
            }
            let mut weak: Vec<Vec<u64>> = vec![Vec::new(); m];
            for &c in &order {
                let c = c as usize;
                let mut w = Vec::new();
                for &(a, d) in &vis[c] {
                    w.extend(reach[d as usize].iter().map(|&b| ((a as u64) << 32) | b as u64));
                }
                for &d in &tau_succ[c] {
                    w.extend_from_slice(&weak[d as usize]);
                }
                w.sort_unstable();
                w.dedup();
                weak[c] = w;
            }
            let mut ids: HashMap<(u32, &[u64], &[u32]), u32> = HashMap::new();
            let mut next = vec![0u32; m];
            for c in 0..m {
                let key = (block[c], weak[c].as_slice(), reach[c].as_slice());
                let len = ids.len() as u32;
                next[c] = *ids.entry(key).or_insert(len);
            }
            let count = ids.len();
            drop(ids);
            let stable = count == nblocks;
            block = next;
            nblocks = count;
            if stable {
                break;
            }
            history.push(block.clone());
        }
        Refinement {
            graph,
            comp,
            tau_succ,
            vis,
            history,
        }
    }

    fn final_blocks(&self) -> &[u32] {
        self.history.last().unwrap()
    }

    fn tau_closure(&self, c: u32) -> BTreeSet<u32> {
        let mut seen = BTreeSet::from([c]);
        let mut stack = vec![c];
        while let Some(u) = stack.pop() {
            for &d in &self.tau_succ[u as usize] {
                if seen.insert(d) {
                    stack.push(d);
                }
            }
        }
        seen
    }

    /// Components reachable by `τ* a τ*`, or `τ*` when `a` is τ.
    fn weak_moves(&self, c: u32, a: u32) -> BTreeSet<u32> {
        let pre = self.tau_closure(c);
        if Some(a) == self.graph.tau {
            return pre;
        }
        let mut out = BTreeSet::new();
        for &u in &pre {
            for &(b, d) in &self.vis[u as usize] {
                if b == a {
                    out.extend(self.tau_closure(d));
                }
            }
        }
        out
    }

    fn signature(&self, c: u32, level: usize) -> BTreeSet<(u32, u32)> {
        let blocks = &self.history[level];
        let mut labels: BTreeSet<u32> = BTreeSet::new();
        for u in self.tau_closure(c) {
            labels.extend(self.vis[u as usize].iter().map(|&(a, _)| a));
        }
        let mut out = BTreeSet::new();
        for a in labels {
            for d in self.weak_moves(c, a) {
                out.insert((a, blocks[d as usize]));
            }
        }
        let tau = self.graph.tau.unwrap_or(u32::MAX);
        for d in self.tau_closure(c) {
            out.insert((tau, blocks[d as usize]));
        }
        out
    }

    /// Smallest level at which two components are in different blocks.
    fn split_level(&self, p: u32, q: u32) -> Option<usize> {
        self.history
            .iter()
            .position(|b| b[p as usize] != b[q as usize])
    }
}

struct CertBuilder<'a> {
    r: &'a Refinement,
    /// Representative vertex (global id) per component.
    rep: Vec<u32>,
    offsets: [usize; 2],
    budget: usize,
}

impl CertBuilder<'_> {
    fn side_of(&self, global: u32) -> Side {
        if (global as usize) < self.offsets[1] {
            Side::Left
        } else {
            Side::Right
        }
    }

    fn local(&self, global: u32) -> VertexId {
        match self.side_of(global) {
            Side::Left => global,
            Side::Right => global - self.offsets[1] as u32,
        }
    }

    /// Builds a tree separating components `p` (left) and `q` (right).
    fn build(&mut self, p: u32, q: u32, left_v: u32, right_v: u32) -> Distinguisher {
        let r = self.r;
        let k = r.split_level(p, q).expect("components are separated");
        assert!(k > 0);
        let sp = r.signature(p, k - 1);
        let sq = r.signature(q, k - 1);
        let tau = r.graph.tau.unwrap_or(u32::MAX);
        let rank = |&(a, b): &(u32, u32)| (a == tau, a, b);
        let pick = |mine: &BTreeSet<(u32, u32)>, theirs: &BTreeSet<(u32, u32)>| {
            mine.difference(theirs).min_by_key(|e| rank(e)).copied()
        };
        let (attacker, (a, blk)) = match (pick(&sp, &sq), pick(&sq, &sp)) {
            (Some(x), Some(y)) => {
                if rank(&x) <= rank(&y) {
                    (Side::Left, x)
                } else {
                    (Side::Right, y)
                }
            }
            (Some(x), None) => (Side::Left, x),
            (None, Some(y)) => (Side::Right, y),
            (None, None) => unreachable!("signatures differ below the split level"),
        };
        let (att, def) = match attacker {
            Side::Left => (p, q),
            Side::Right => (q, p),
        };
        let level = &r.history[k - 1];
        let target = r
            .weak_moves(att, a)
            .into_iter()
            .find(|&d| level[d as usize] == blk)
            .expect("attacker move exists");
        let answers: Vec<u32> = r.weak_moves(def, a).into_iter().collect();
        let mut responses = Vec::new();
        let mut truncated = false;
        for d in answers {
            if self.budget == 0 {
                truncated = true;
                break;
            }
            self.budget -= 1;
            let (lp, rq) = match attacker {
                Side::Left => (target, d),
                Side::Right => (d, target),
            };
            let sub = self.build(lp, rq, self.rep[lp as usize], self.rep[rq as usize]);
            responses.push((self.local(self.rep[d as usize]), sub));
        }
        Distinguisher {
            left: self.local(left_v),
            right: self.local(right_v),
            attacker,
            action: r.graph.labels[a as usize].clone(),
            target: self.local(self.rep[target as usize]),
            responses,
            truncated,
        }
    }
}

/// Decides weak bisimilarity of the two roots.
pub fn weak_bisim(l1: &RealizationLts, l2: &RealizationLts) -> BisimVerdict {
    let (graph, offsets) = Graph::union(&[l1, l2]);
    let r = Refinement::run(graph);
    let blocks = r.final_blocks();
    let root1 = offsets[0];
    let root2 = offsets[1];
    let c1 = r.comp[root1];
    let c2 = r.comp[root2];
    if blocks[c1 as usize] == blocks[c2 as usize] {
        let reach1 = l1.reachable();
        let reach2 = l2.reachable();
        let class = |global: usize, reachable: bool| reachable.then(|| blocks[r.comp[global] as usize]);
        let left = (0..l1.num_vertices()).map(|v| class(v + offsets[0], reach1[v])).collect();
        let right = (0..l2.num_vertices()).map(|v| class(v + offsets[1], reach2[v])).collect();
        return BisimVerdict::Equivalent(Relation { left, right });
    }
    let mut rep = vec![u32::MAX; r.tau_succ.len()];
    for (v, &c) in r.comp.iter().enumerate() {
        if rep[c as usize] == u32::MAX {
            rep[c as usize] = v as u32;
        }
    }
    let mut b = CertBuilder {
        r: &r,
        rep,
        offsets: [offsets[0], offsets[1]],
        budget: 64,
    };
    BisimVerdict::Inequivalent(b.build(c1, c2, root1 as u32, root2 as u32))
}

/// Weak-bisimilarity classes of the vertices of a single LTS.
pub fn weak_classes(l: &RealizationLts) -> Vec<u32> {
    let (graph, _) = Graph::union(&[l]);
    let r = Refinement::run(graph);
    let blocks = r.final_blocks();
    r.comp.iter().map(|&c| blocks[c as usize]).collect()
}

/// Quotient of the reachable part by weak bisimilarity. The root stays a
/// separate vertex; τ-steps inside a class are dropped.
pub fn minimize(l: &RealizationLts) -> RealizationLts {
    let classes = weak_classes(l);
    let reach = l.reachable();
    let mut qid: HashMap<u32, u32> = HashMap::new();
    let mut vals = vec![None];
    let mut map = vec![u32::MAX; l.num_vertices()];
    map[0] = 0;
    for v in 1..l.num_vertices() {
        if !reach[v] {
            continue;
        }
        let id = *qid.entry(classes[v]).or_insert_with(|| {
            vals.push(l.raw_values(v as VertexId).map(std::sync::Arc::from));
            vals.len() as u32 - 1
        });
        map[v] = id;
    }
    let mut edges = Vec::new();
    for (s, a, d) in l.edges() {
        if !reach[s as usize] {
            continue;
        }
        let (qs, qd) = (map[s as usize], map[d as usize]);
        if a.is_tau() && qs == qd && s != 0 {
            continue;
        }
        edges.push((qs, a.clone(), qd));
    }
    let mut labels: Vec<Action> = Vec::new();
    let mut lid: HashMap<Action, u32> = HashMap::new();
    let es = edges
        .into_iter()
        .map(|(s, a, d)| {
            let id = *lid.entry(a.clone()).or_insert_with(|| {
                labels.push(a);
                labels.len() as u32 - 1
            });
            (s, id, d)
        })
        .collect();
    RealizationLts::from_parts(
        l.process.clone(),
        l.vars.clone(),
        vals,
        labels,
        es,
        l.finals().clone(),
    )
}

/// Weak successors of `v` under `a` computed directly on an LTS.
fn weak_succ(l: &RealizationLts, v: VertexId, a: &Action) -> BTreeSet<VertexId> {
    let closure = |start: &BTreeSet<VertexId>| {
        let mut seen = start.clone();
        let mut queue: VecDeque<VertexId> = start.iter().copied().collect();
        while let Some(u) = queue.pop_front() {
            for &(b, d) in l.succ(u) {
                if l.label(b).is_tau() && seen.insert(d) {
                    queue.push_back(d);
                }
            }
        }
        seen
    };
    let pre = closure(&BTreeSet::from([v]));
    if a.is_tau() {
        return pre;
    }
    let mut mid = BTreeSet::new();
    for &u in &pre {
        for &(b, d) in l.succ(u) {
            if l.label(b) == a {
                mid.insert(d);
            }
        }
    }
    closure(&mid)
}

/// Verifies that `rel` relates the roots and satisfies the transfer
/// conditions in both directions. Independent of the refinement engine.
pub fn check_relation(l1: &RealizationLts, l2: &RealizationLts, rel: &Relation) -> Result<(), String> {
    if !rel.related(l1.root(), l2.root()) {
        return Err("roots are not related".into());
    }
    let mut cache: [HashMap<(VertexId, Action), BTreeSet<VertexId>>; 2] = [HashMap::new(), HashMap::new()];
    let mut by_class: [BTreeMap<u32, Vec<VertexId>>; 2] = [BTreeMap::new(), BTreeMap::new()];
    for (side, cls) in [&rel.left, &rel.right].into_iter().enumerate() {
        for (v, c) in cls.iter().enumerate() {
            if let Some(c) = c {
                by_class[side].entry(*c).or_default().push(v as VertexId);
            }
        }
    }
    for (class, lefts) in &by_class[0] {
        let Some(rights) = by_class[1].get(class) else {
            continue;
        };
        for &s in lefts {
            for &t in rights {
                for (side, (x, y, la, lb)) in [(s, t, l1, l2), (t, s, l2, l1)].into_iter().enumerate() {
                    for &(a, x2) in la.succ(x) {
                        let act = la.label(a).clone();
                        let answers = cache[1 - side]
                            .entry((y, act.clone()))
                            .or_insert_with(|| weak_succ(lb, y, &act));
                        let ok = answers.iter().any(|&y2| {
                            if side == 0 {
                                rel.related(x2, y2)
                            } else {
                                rel.related(y2, x2)
                            }
                        });
                        if !ok {
                            return Err(format!(
                                "pair ({s}, {t}): move {act} of the {} side to {x2} is unmatched",
                                if side == 0 { "left" } else { "right" }
                            ));
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Checks that a distinguishing tree is a genuine strategy on the two LTSs.
pub fn replay(l1: &RealizationLts, l2: &RealizationLts, d: &Distinguisher) -> Result<(), String> {
    let (att_l, def_l, att_v, def_v) = match d.attacker {
        Side::Left => (l1, l2, d.left, d.right),
        Side::Right => (l2, l1, d.right, d.left),
    };
    if !weak_succ(att_l, att_v, &d.action).contains(&d.target) {
        return Err(format!("attacker cannot reach {} by {}", d.target, d.action));
    }
    let answers = weak_succ(def_l, def_v, &d.action);
    if d.responses.is_empty() {
        return if answers.is_empty() {
            Ok(())
        } else {
            Err(format!("defender can answer {} but the tree claims otherwise", d.action))
        };
    }
    for (v, sub) in &d.responses {
        if !answers.contains(v) {
            return Err(format!("response {v} is not a weak {}-successor", d.action));
        }
        let (l, r) = match d.attacker {
            Side::Left => (d.target, *v),
            Side::Right => (*v, d.target),
        };
        if (sub.left, sub.right) != (l, r) {
            return Err("subtree does not continue from the answered pair".into());
        }
        replay(l1, l2, sub)?;
    }
    Ok(())
}

/// Labels of a distinguishing tree's principal path rendered for reports.
pub fn describe_path(d: &Distinguisher) -> String {
    d.principal_path()
        .iter()
        .map(|(s, a)| format!("{s}:{a}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Channel names appearing in an LTS.
pub fn channels(l: &RealizationLts) -> BTreeSet<Name> {
    l.labels()
        .iter()
        .filter_map(|a| match a {
            Action::Recv(c, _) | Action::Send(c, _) => Some(c.clone()),
            Action::Tau => None,
        })
        .collect()
}
