//! Randomized check that every applicable simplification step preserves weak
//! bisimilarity of small generated processes.

use std::fmt::Write as _;

use mpgraph::bisim::{describe_path, weak_bisim, BisimVerdict};
use mpgraph::modelfmt::{parse_model, serialize_model, Model};
use mpgraph::simplify::{drop_unessential, fuse, remove_state, removal_order, simplify, Mode, Strategy};
use mpgraph::symbolic::Domains;
use mpgraph::{realize, Process, RealizeOptions, Result, Term};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HEADER: &str = "domain D2 = int 0..1\ndomain D3 = int 0..2\nchannel a : D2\nchannel b : D3\n";

#[derive(Clone, Debug)]
pub struct Failure {
    pub case: usize,
    pub case_seed: u64,
    pub step: String,
    pub path: String,
    /// The minimized process as model text.
    pub model: String,
}

#[derive(Clone, Debug, Default)]
pub struct HarnessReport {
    pub cases: usize,
    pub steps_checked: usize,
    pub failures: Vec<Failure>,
}

impl HarnessReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

struct Var {
    name: &'static str,
    size: i64,
}

fn expr_for(rng: &mut ChaCha8Rng, vars: &[Var], size: i64) -> String {
    let fitting: Vec<&Var> = vars.iter().filter(|v| v.size <= size).collect();
    if fitting.is_empty() || rng.gen_bool(0.3) {
        return rng.gen_range(0..size).to_string();
    }
    let v = fitting.choose(rng).unwrap();
    if rng.gen_bool(0.5) {
        v.name.to_string()
    } else {
        format!("add_mod({}, 1, {})", v.name, v.size)
    }
}

fn guard(rng: &mut ChaCha8Rng, vars: &[Var]) -> String {
    if vars.is_empty() || rng.gen_bool(0.4) {
        return String::new();
    }
    let v = vars.choose(rng).unwrap();
    let k = rng.gen_range(0..v.size);
    match rng.gen_range(0..4) {
        0 => format!("[{} == {k}] ", v.name),
        1 => format!("[{} != {k}] ", v.name),
        2 => format!("[{} < {}] ", v.name, k.max(1)),
        _ if vars.len() == 2 => "[x == y] ".to_string(),
        _ => format!("[{} == {k}] ", v.name),
    }
}

fn assignment(rng: &mut ChaCha8Rng, vars: &[Var]) -> Option<String> {
    let v = vars.choose(rng)?;
    Some(format!("{} := {}", v.name, expr_for(rng, vars, v.size)))
}

/// A random process with at most 5 states and 2 variables over 2 or 3 values,
/// as model text declaring process `R`.
pub fn random_model_text(rng: &mut ChaCha8Rng) -> String {
    let nvars = rng.gen_range(0..=2);
    let vars: Vec<Var> = ["x", "y"][..nvars]
        .iter()
        .map(|&name| Var {
            name,
            size: rng.gen_range(2..=3),
        })
        .collect();
    let nstates = rng.gen_range(2..=5);
    let states: Vec<String> = (0..nstates).map(|i| format!("s{i}")).collect();
    let mut t = String::from(HEADER);
    t.push_str("process R {\n");
    if !vars.is_empty() {
        let decl: Vec<String> = vars.iter().map(|v| format!("{}: D{}", v.name, v.size)).collect();
        let _ = writeln!(t, "  var {};", decl.join(", "));
        let init: Vec<String> = vars
            .iter()
            .filter(|_| rng.gen_bool(0.7))
            .map(|v| format!("{} == 0", v.name))
            .collect();
        if !init.is_empty() {
            let _ = writeln!(t, "  init {};", init.join(" && "));
        }
    }
    let _ = writeln!(t, "  states {};\n  start s0;", states.join(" "));
    if nstates > 2 && rng.gen_bool(0.25) {
        let _ = writeln!(t, "  final {};", states[rng.gen_range(1..nstates)]);
    }
    let ntrans = rng.gen_range(1..=7);
    for k in 0..ntrans {
        let src = &states[rng.gen_range(0..nstates)];
        let dst = &states[rng.gen_range(0..nstates)];
        let g = guard(rng, &vars);
        let input_target = vars.iter().filter(|v| v.size >= 2).collect::<Vec<_>>();
        let mut body: Vec<String> = Vec::new();
        match rng.gen_range(0..3) {
            0 if !input_target.is_empty() => {
                body.push(format!("a?{}", input_target.choose(rng).unwrap().name));
            }
            1 => body.push(format!("b!{}", expr_for(rng, &vars, 3))),
            _ => {}
        }
        if rng.gen_bool(0.5) {
            body.extend(assignment(rng, &vars));
        }
        let _ = writeln!(t, "  t{k}: {src} -> {dst} : {g}({});", body.join("; "));
    }
    t.push_str("}\n");
    t
}

fn equivalent(p: &Process, q: &Process, chans: &Domains) -> Result<Option<String>> {
    let opts = RealizeOptions {
        channel_domains: chans.clone(),
        ..RealizeOptions::default()
    };
    let l1 = realize(p, &opts)?;
    let l2 = realize(q, &opts)?;
    Ok(match weak_bisim(&l1, &l2) {
        BisimVerdict::Equivalent(_) => None,
        BisimVerdict::Inequivalent(d) => Some(describe_path(&d)),
    })
}

/// Every applicable step on `p`, labelled, with its result.
fn steps(p: &Process, mode: Mode) -> Result<Vec<(String, Process)>> {
    let mut out = Vec::new();
    for s in removal_order(p) {
        if let Ok(q) = remove_state(p, &s, mode)? {
            out.push((format!("remove state {s}"), q));
        }
    }
    let f = fuse(p);
    if f != *p {
        out.push(("fuse".to_string(), f));
    }
    let d = drop_unessential(p);
    if d != *p {
        out.push(("drop unessential assignments".to_string(), d));
    }
    let (full, log) = simplify(p, Strategy { mode })?;
    if !log.is_empty() {
        out.push(("full simplification".to_string(), full));
    }
    Ok(out)
}

/// The first step that breaks equivalence, with the distinguishing path.
fn first_failure(p: &Process, chans: &Domains, mode: Mode, checked: &mut usize) -> Result<Option<(String, String)>> {
    for (label, q) in steps(p, mode)? {
        *checked += 1;
        if let Some(path) = equivalent(p, &q, chans)? {
            return Ok(Some((label, path)));
        }
    }
    Ok(None)
}

fn shrink_candidates(p: &Process) -> Vec<Process> {
    let mut out = Vec::new();
    for i in 0..p.transitions.len() {
        let mut q = p.clone();
        q.transitions.remove(i);
        out.push(q);
    }
    for i in 0..p.transitions.len() {
        if !p.transitions[i].op.guard.is_true() {
            let mut q = p.clone();
            q.transitions[i].op.guard = Term::tt();
            out.push(q);
        }
        for j in 0..p.transitions[i].op.body.len() {
            let mut q = p.clone();
            q.transitions[i].op.body.remove(j);
            out.push(q);
        }
    }
    for s in &p.states {
        if *s != p.start && !p.transitions.iter().any(|t| &t.src == s || &t.dst == s) {
            let mut q = p.clone();
            q.states.retain(|x| x != s);
            q.finals.retain(|x| x != s);
            out.push(q);
        }
    }
    if !p.init.is_true() {
        let mut q = p.clone();
        q.init = Term::tt();
        out.push(q);
    }
    out
}

/// Greedily shrinks `p` while some step still breaks equivalence.
fn minimize(p: &Process, chans: &Domains, mode: Mode) -> Process {
    let mut cur = p.clone();
    'outer: loop {
        for q in shrink_candidates(&cur) {
            if !q.validate().is_empty() {
                continue;
            }
            if let Ok(Some(_)) = first_failure(&q, chans, mode, &mut 0) {
                cur = q;
                continue 'outer;
            }
        }
        return cur;
    }
}

fn render(m: &Model, p: Process) -> String {
    let mut out = m.clone();
    out.processes.clear();
    out.add_process(p);
    serialize_model(&out)
}

/// Runs `cases` random processes; case `i` is generated from `seed + i`.
/// Failures carry a greedily minimized process.
pub fn run_harness(cases: usize, seed: u64, mode: Mode) -> Result<HarnessReport> {
    let mut report = HarnessReport {
        cases,
        ..HarnessReport::default()
    };
    for case in 0..cases {
        let case_seed = seed.wrapping_add(case as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(case_seed);
        let text = random_model_text(&mut rng);
        let m = parse_model(&text).map_err(|e| mpgraph::Error::Parameter(format!("generated model: {e}\n{text}")))?;
        let p = m.processes["R"].clone();
        let chans = m.channel_domains();
        if first_failure(&p, &chans, mode, &mut report.steps_checked)?.is_some() {
            let small = minimize(&p, &chans, mode);
            let (step, path) = first_failure(&small, &chans, mode, &mut 0)?.expect("minimization keeps the failure");
            report.failures.push(Failure {
                case,
                case_seed,
                step,
                path,
                model: render(&m, small),
            });
        }
    }
    Ok(report)
}
