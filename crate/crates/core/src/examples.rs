//! Generators for the worked case studies: the one-place squarer, set
//! separation and the sliding-window protocol.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::algebra::CompositionExpr;
use crate::error::{Error, Result};
use crate::modelfmt::{parse_model, Model};
use crate::process::Process;
use crate::semantics::{lockstep_pairs, realize, RealizeOptions};
use crate::symbolic::{eval_term, Domain, Name, Term};

fn build(text: &str) -> Result<Model> {
    parse_model(text).map_err(|e| Error::Parameter(format!("generated model does not parse: {e}")))
}

fn int_domain(d: &Domain) -> Result<(i64, i64)> {
    match d {
        Domain::Int { lo, hi } => Ok((*lo, *hi)),
        other => Err(Error::Parameter(format!("expected an integer domain, got {other}"))),
    }
}

fn join<I: IntoIterator<Item = String>>(items: I, sep: &str) -> String {
    items.into_iter().collect::<Vec<_>>().join(sep)
}

fn buffer_text(n: usize) -> String {
    let mut t = String::new();
    let xs = join((0..n).map(|k| format!("x_{k}: Pay")), ", ");
    let _ = writeln!(t, "process B {{");
    let _ = writeln!(t, "  var r: Idx, s: Idx, u: Idx, {xs};");
    let _ = writeln!(t, "  init r == 0 && s == 0 && u == 0;");
    let _ = writeln!(t, "  states B;\n  start B;");
    for k in 0..n {
        let _ = writeln!(
            t,
            "  in_{k}: B -> B : [u < {} && s == {k}] (In?x_{k}; s := add_mod(s, 1, {n}); u := u + 1);",
            n - 1
        );
    }
    for k in 0..n {
        let _ = writeln!(
            t,
            "  out_{k}: B -> B : [u > 0 && r == {k}] (Out!x_{k}; r := add_mod(r, 1, {n}); u := u - 1);"
        );
    }
    t.push_str("}\n");
    t
}

/// The n-slot FIFO buffer holding at most n-1 items, with arrays unrolled
/// into one variable per slot.
pub fn gen_buffer(n: usize, payload: &Domain) -> Result<Process> {
    if n < 2 {
        return Err(Error::Parameter(format!("buffer size must be at least 2, got {n}")));
    }
    let text = format!(
        "domain Pay = {payload}\ndomain Idx = int 0..{}\nchannel In : Pay\n{}",
        n - 1,
        buffer_text(n)
    );
    Ok(build(&text)?.processes.remove("B").expect("generated buffer"))
}

/// Squarer model over `int 0..1`.
pub fn gen_square() -> Result<Model> {
    gen_square_with(&Domain::int(0, 1))
}

pub fn gen_square_with(payload: &Domain) -> Result<Model> {
    let (lo, hi) = int_domain(payload)?;
    let prods = [lo * lo, lo * hi, hi * hi];
    let (plo, phi) = (*prods.iter().min().unwrap(), *prods.iter().max().unwrap());
    let text = format!(
        r#"model square
domain Pay = int {lo}..{hi}
domain Prod = int {plo}..{phi}
channel In : Pay
channel In1 : Pay
channel In2 : Pay
channel Out1 : Pay
channel Out2 : Pay
channel pass : Pay
channel pass1 : Pay
channel pass2 : Pay
channel Out : Prod

process Dup {{
  var z: Pay;
  states a b c;
  start a;
  t1: a -> b : (In?z);
  t2: b -> c : (Out1!z);
  t3: c -> a : (Out2!z);
}}

process Mul {{
  var x: Pay, y: Pay;
  states A B C;
  start A;
  t1: A -> B : (In1?x);
  t2: B -> C : (In2?y);
  t3: C -> A : (Out!(x * y));
}}

process Buf {{
  var x: Pay;
  states p0 p1;
  start p0;
  t1: p0 -> p1 : (In?x);
  t2: p1 -> p0 : (Out!x);
}}

process Square_Spec {{
  var z: Pay;
  states q0 q1;
  start q0;
  t1: q0 -> q1 : (In?z);
  t2: q1 -> q0 : (Out!(z * z));
}}

process Square3 {{
  var x: Pay, y: Pay, z: Pay;
  states A1 A2 A3;
  start A1;
  t1: A1 -> A2 : (In?z; x := z; y := z);
  t2: A2 -> A1 : (Out!(x * y));
  t3: A2 -> A3 : (In?z);
  t4: A3 -> A2 : (Out!(x * y); x := z; y := z);
}}

process SpecR3 {{
  var u: Pay, v: Pay;
  states a1 a2 a3;
  start a1;
  e1: a1 -> a2 : (In?u);
  e2: a2 -> a1 : (v := u; Out!(v * v));
  e3: a2 -> a3 : (v := u; In?u);
  e4: a3 -> a2 : (Out!(v * v));
}}

system Square = (Dup[pass1/Out1, pass2/Out2] | Mul[pass1/In1, pass2/In2]) \ {{pass1, pass2}}
system Square_Spec' = (Buf[pass/Out] | Square_Spec[pass/In]) \ {{pass}}

certificate sq (Square3, SpecR3) {{
  (A1, a1): true;
  (A2, a2): x == y && y == z && z == u;
  (A3, a3): x == y && y == v && z == u;
  maxlen 2
}}
"#
    );
    build(&text)
}

fn separation_text(lo: i64, hi: i64, cs: usize, cl: usize, small_init: &str, large_init: &str) -> String {
    format!(
        r#"model separation
domain W = int {lo}..{hi}
channel alpha : W
channel beta : W

process Small {{
  var S: list<W> cap {cs}, U': list<W> cap {cs}, mx: W, x: W;
  init {small_init} && U' == [] && mx == {lo} && x == {lo};
  states A B C D;
  start A;
  final C;
  t1: A -> D : (mx := max(S); alpha!mx; S := remove(S, mx));
  t2: D -> B : (beta?x; S := append(S, x); mx := max(S));
  t3: B -> C : [x >= mx] (U' := S);
  t4: B -> A : [x < mx] ();
}}

process Large {{
  var L: list<W> cap {cl}, V': list<W> cap {cl}, mn: W, y: W;
  init {large_init} && V' == [] && mn == {lo} && y == {lo};
  states a b c d;
  start a;
  final c;
  t1: a -> d : (alpha?y; L := append(L, y); mn := min(L));
  t2: d -> b : (beta!mn; L := remove(L, mn); mn := min(L));
  t3: b -> c : [y <= mn] (V' := L);
  t4: b -> a : [y > mn] ();
}}

system Separation = (Small | Large) \ {{alpha, beta}}
"#
    )
}

/// Set separation between `Small` (holding `u`) and `Large` (holding `v`).
pub fn gen_separation(u: &[i64], v: &[i64]) -> Result<Model> {
    if u.is_empty() || v.is_empty() {
        return Err(Error::Parameter("both sets must be non-empty".into()));
    }
    let su: BTreeSet<i64> = u.iter().copied().collect();
    let sv: BTreeSet<i64> = v.iter().copied().collect();
    if su.len() != u.len() || sv.len() != v.len() || !su.is_disjoint(&sv) {
        return Err(Error::Parameter("sets must be duplicate-free and disjoint".into()));
    }
    let lo = *su.iter().chain(&sv).min().unwrap();
    let hi = *su.iter().chain(&sv).max().unwrap();
    let list = |s: &[i64]| format!("[{}]", join(s.iter().map(|x| x.to_string()), ", "));
    build(&separation_text(
        lo,
        hi,
        u.len() + 1,
        v.len() + 1,
        &format!("S == {}", list(u)),
        &format!("L == {}", list(v)),
    ))
}

/// Set separation started from every pair of non-empty lists of at most
/// `size` elements over the universe `lo..hi`, duplicates and overlaps
/// included.
pub fn gen_separation_universe(lo: i64, hi: i64, size: usize) -> Result<Model> {
    if lo > hi || size == 0 {
        return Err(Error::Parameter("universe and list size must be non-empty".into()));
    }
    build(&separation_text(
        lo,
        hi,
        size + 1,
        size + 1,
        &format!("S != [] && len(S) <= {size}"),
        &format!("L != [] && len(L) <= {size}"),
    ))
}

fn sub1(e: &str, n: usize) -> String {
    format!("sub_mod({e}, 1, {n})")
}

fn agent_text(a: usize, n: usize) -> String {
    let mut t = String::new();
    let xs = join((0..n).map(|k| format!("x_{k}: Pay")), ", ");
    let ack = sub1("r", n);
    let _ = writeln!(t, "process Agent{a} {{");
    let _ = writeln!(
        t,
        "  var {xs}, b: Seq, s: Seq, r: Seq, w: Seq, i: Count, en: bool, f: Frame;"
    );
    let xinit = join((0..n).map(|k| format!(" && x_{k} == 0")), "");
    let _ = writeln!(
        t,
        "  init en && w == 0 && b == 0 && s == 0 && r == 0 && i == 0 && f == star{xinit};"
    );
    let _ = writeln!(t, "  states J Q Q1 E L L1 R R1;\n  start J;");
    for k in 0..n {
        let _ = writeln!(t, "  in_{k}: J -> Q : [en && s == {k}] (In{a}?x_{k});");
    }
    for k in 0..n {
        let _ = writeln!(t, "  send_{k}: Q -> Q1 : [s == {k}] (C{a}!phi(x_{k}, {k}, {ack}));");
    }
    let _ = writeln!(
        t,
        "  start: Q1 -> E : (start{a}!s; s := add_mod(s, 1, {n}); w := w + 1);"
    );
    let _ = writeln!(t, "  enable: E -> J : (en := w < {}; f := star; i := 0);", n - 1);
    let _ = writeln!(t, "  timeout: J -> L : (timeout{a}?i; s := b; i := 1);");
    for k in 0..n {
        let _ = writeln!(t, "  resend_{k}: L -> L1 : [i <= w && s == {k}] (C{a}!phi(x_{k}, {k}, {ack}));");
    }
    let _ = writeln!(
        t,
        "  restart: L1 -> L : (start{a}!s; s := add_mod(s, 1, {n}); i := i + 1);"
    );
    let _ = writeln!(t, "  resent: L -> E : [i > w] ();");
    let _ = writeln!(t, "  receive: J -> R : (C{a}?f);");
    let _ = writeln!(t, "  corrupt: R -> E : [f == star] ();");
    let _ = writeln!(
        t,
        "  deliver: R -> R1 : [f != star && seq(f) == r] (Out{a}!info(f); r := add_mod(r, 1, {n}));"
    );
    let _ = writeln!(t, "  duplicate: R -> R1 : [f != star && seq(f) != r] ();");
    let _ = writeln!(
        t,
        "  acked: R1 -> R1 : [f != star && in_interval(ack(f), b, s, {n})] (w := w - 1; stop{a}!b; b := add_mod(b, 1, {n}));"
    );
    let _ = writeln!(t, "  unacked: R1 -> E : [f == star || !in_interval(ack(f), b, s, {n})] ();");
    t.push_str("}\n");
    t
}

fn timer_text(a: usize, n: usize) -> String {
    let mut t = String::new();
    let ts = join((0..n).map(|k| format!("t_{k}: bool")), ", ");
    let _ = writeln!(t, "process Timer{a} {{");
    let _ = writeln!(t, "  var {ts}, ti: Seq;");
    let tinit = join((0..n).map(|k| format!("!t_{k}")), " && ");
    let _ = writeln!(t, "  init {tinit} && ti == 0;");
    let _ = writeln!(t, "  states T;\n  start T;");
    let on = join((0..n).map(|k| format!("t_{k} := t_{k} || ti == {k}")), "; ");
    let off = join((0..n).map(|k| format!("t_{k} := t_{k} && ti != {k}")), "; ");
    let _ = writeln!(t, "  start: T -> T : (start{a}?ti; {on}; ti := 0);");
    let _ = writeln!(t, "  stop: T -> T : (stop{a}?ti; {off}; ti := 0);");
    for k in 0..n {
        let _ = writeln!(t, "  timeout_{k}: T -> T : [t_{k}] (timeout{a}!{k}; t_{k} := false);");
    }
    t.push_str("}\n");
    t
}

fn channel_text(cap: usize) -> String {
    let mut t = String::new();
    t.push_str("process Channel {\n  var M1: Queue, M2: Queue, g1: Frame, g2: Frame;\n");
    t.push_str("  init M1 == [] && M2 == [] && g1 == star && g2 == star;\n  states K;\n  start K;\n");
    for (m, from, to) in [(1, 1, 2), (2, 2, 1)] {
        let _ = writeln!(
            t,
            "  accept{m}: K -> K : [len(M{m}) < {cap}] (C{from}?g{m}; M{m} := append(M{m}, g{m}); g{m} := star);"
        );
        let _ = writeln!(t, "  deliver{m}: K -> K : [M{m} != []] (C{to}!head(M{m}); M{m} := tail(M{m}));");
        let _ = writeln!(t, "  corrupt{m}: K -> K : [M{m} != []] (C{to}!star; M{m} := tail(M{m}));");
        let _ = writeln!(t, "  lose{m}: K -> K : [M{m} != []] (M{m} := tail(M{m}));");
    }
    t.push_str("}\n");
    t
}

fn simplified_text(n: usize, cap: usize) -> String {
    let mut t = String::new();
    let xs = join((0..n).map(|k| format!("x_{k}: Pay")), ", ");
    let _ = writeln!(t, "process P {{");
    let _ = writeln!(t, "  var {xs}, b: Seq, s: Seq, r: Seq, w: Seq, M1: Queue, M2: Queue;");
    let _ = writeln!(t, "  init b == 0 && s == 0 && r == 0 && w == 0 && M1 == [] && M2 == [];");
    let _ = writeln!(t, "  states P;\n  start P;");
    for k in 0..n {
        let _ = writeln!(
            t,
            "  in_{k}: P -> P : [w < {} && s == {k} && len(M1) < {cap}] (In?x_{k}; M1 := append(M1, phi(x_{k}, {k}, 0)); s := add_mod(s, 1, {n}); w := w + 1);",
            n - 1
        );
    }
    let _ = writeln!(
        t,
        "  out: P -> P : [M1 != [] && seq(head(M1)) == r] (Out!info(head(M1)); r := add_mod(r, 1, {n}); M1 := tail(M1));"
    );
    let _ = writeln!(
        t,
        "  ack: P -> P : [M2 != [] && in_interval(ack(head(M2)), b, s, {n})] (b := add_mod(ack(head(M2)), 1, {n}); w := sub_mod(s, b, {n}); M2 := tail(M2));"
    );
    for b in 0..n {
        for k in 1..n {
            if k > cap {
                continue;
            }
            let appends = join(
                (0..k).map(|j| {
                    let idx = (b + j) % n;
                    format!("M1 := append(M1, phi(x_{idx}, {idx}, 0))")
                }),
                "; ",
            );
            let _ = writeln!(
                t,
                "  resend_{b}_{k}: P -> P : [b == {b} && w >= {k} && len(M1) <= {}] ({appends});",
                cap - k
            );
        }
    }
    let _ = writeln!(t, "  lose1: P -> P : [M1 != []] (M1 := tail(M1));");
    let _ = writeln!(t, "  lose2: P -> P : [M2 != []] (M2 := tail(M2));");
    let _ = writeln!(
        t,
        "  reply: P -> P : [len(M2) < {cap}] (M2 := append(M2, phi(0, 0, {})));",
        sub1("r", n)
    );
    t.push_str("}\n");
    t
}

/// Certificate conjuncts relating `P` to the buffer `B` whose variables are
/// renamed to `bx_k`, `br`, `bs`, `u`.
pub fn window_conjuncts(n: usize) -> Result<Vec<(String, Term)>> {
    let b1 = sub1("b", n);
    let r1 = sub1("r", n);
    let info = join(
        (0..n).map(|k| format!("(seq(f) == {k} -> info(f) == bx_{k})")),
        " && ",
    );
    let sub = join(
        (0..n).map(|i| format!("(in_interval({i}, r, s, {n}) -> in_interval({i}, b, s, {n}))")),
        " && ",
    );
    let raw = [
        ("head-in-order", "M1 != [] && seq(head(M1)) == r -> u > 0".to_string()),
        ("payload-copies", format!("forall f in M1: {info}")),
        (
            "acks-in-range",
            format!("forall f in M2: sub_mod(ack(f), {b1}, {n}) <= sub_mod({r1}, {b1}, {n})"),
        ),
        ("undelivered-in-window", sub),
        ("window-size", format!("w == sub_mod(s, b, {n}) && w <= {}", n - 1)),
        ("buffer-size", format!("u == sub_mod(s, r, {n}) && u <= w")),
        ("acks-monotone", format!("mono_incr_mod(M2, {b1}, {r1}, {n})")),
    ];
    raw.into_iter()
        .map(|(k, src)| {
            crate::modelfmt::parse_term(&src)
                .map(|t| (k.to_string(), t))
                .map_err(|e| Error::Parameter(format!("conjunct {k}: {e}")))
        })
        .collect()
}

/// The buffer with its variables renamed apart from `P`.
pub fn renamed_buffer(n: usize, payload: &Domain) -> Result<Process> {
    let b = gen_buffer(n, payload)?;
    let mut map = BTreeMap::new();
    for k in 0..n {
        map.insert(Name::new(&format!("x_{k}")), Name::new(&format!("bx_{k}")));
    }
    map.insert(Name::new("r"), Name::new("br"));
    map.insert(Name::new("s"), Name::new("bs"));
    Ok(b.rename_vars(&map))
}

/// Sliding-window protocol with window n, payload domain and channel capacity.
pub fn gen_sliding_window(n: usize, payload: &Domain, cap: usize) -> Result<Model> {
    if n < 2 {
        return Err(Error::Parameter(format!("window modulus must be at least 2, got {n}")));
    }
    if cap < 1 {
        return Err(Error::Parameter("channel capacity must be at least 1".into()));
    }
    let mut t = String::new();
    let _ = writeln!(t, "model sliding_window");
    let _ = writeln!(t, "domain Pay = {payload}");
    let _ = writeln!(t, "domain Seq = int 0..{}", n - 1);
    let _ = writeln!(t, "domain Idx = int 0..{}", n - 1);
    let _ = writeln!(t, "domain Count = int 0..{n}");
    let _ = writeln!(t, "domain Frame = frame(Pay, Seq, Seq)");
    let _ = writeln!(t, "domain Queue = list<Frame> cap {cap}");
    for c in ["In", "In1", "In2"] {
        let _ = writeln!(t, "channel {c} : Pay");
    }
    for c in ["C1", "C2"] {
        let _ = writeln!(t, "channel {c} : Frame");
    }
    for a in 1..=2 {
        for c in ["start", "stop", "timeout"] {
            let _ = writeln!(t, "channel {c}{a} : Seq");
        }
    }
    t.push('\n');
    t.push_str(&agent_text(1, n));
    t.push_str(&agent_text(2, n));
    t.push_str(&timer_text(1, n));
    t.push_str(&timer_text(2, n));
    t.push_str(&channel_text(cap));
    t.push_str(&simplified_text(n, cap));
    let hidden = "C1, C2, start1, stop1, timeout1, start2, stop2, timeout2";
    let _ = writeln!(
        t,
        "system Protocol = (Agent1 | Timer1 | Channel | Agent2 | Timer2) \\ {{{hidden}}}"
    );
    let _ = writeln!(t, "system Protocol1 = Protocol / {{In2, Out1}}");
    let mut m = build(&t)?;
    m.add_process(renamed_buffer(n, payload)?);
    m.add_system("Buffer", CompositionExpr::id("B").rename([("In1", "In"), ("Out2", "Out")]));
    let conj = Term::and_all(window_conjuncts(n)?.into_iter().map(|(_, c)| c));
    m.add_certificate(crate::certificate::Certificate::new("window", "P", "B").with_entry("P", "B", conj));
    Ok(m)
}

/// A conjunct that fails at a reachable pair of the lockstep product.
#[derive(Clone, Debug)]
pub struct Violation {
    pub conjunct: String,
    pub left: String,
    pub right: String,
}

/// Outcome of sweeping the lockstep product of `P` and `B`.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub pairs: usize,
    pub violations: Vec<Violation>,
}

/// Evaluates each conjunct at every lockstep-reachable pair of `P` and the
/// renamed `B`; at most one violation is kept per conjunct.
pub fn sweep_conjuncts(m: &Model, conjuncts: &[(String, Term)]) -> Result<Sweep> {
    let opts = RealizeOptions::default();
    let l1 = realize(&m.process("P")?, &opts)?;
    let l2 = realize(&m.process("B")?, &opts)?;
    let pairs = lockstep_pairs(&l1, &l2);
    let mut violations: Vec<Violation> = Vec::new();
    let mut count = 0;
    for &(a, b) in &pairs {
        let (Some(mut xi), Some(xi2)) = (l1.valuation(a), l2.valuation(b)) else {
            continue;
        };
        count += 1;
        xi.extend(xi2);
        for (name, c) in conjuncts {
            if violations.iter().any(|v| &v.conjunct == name) {
                continue;
            }
            if eval_term(c, &xi).ok().and_then(|v| v.as_bool()) != Some(true) {
                violations.push(Violation {
                    conjunct: name.clone(),
                    left: l1.describe(a),
                    right: l2.describe(b),
                });
            }
        }
    }
    Ok(Sweep { pairs: count, violations })
}
