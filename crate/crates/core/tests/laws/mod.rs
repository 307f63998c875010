use std::collections::{BTreeMap, BTreeSet};

use mpgraph::algebra::{rename, restrict};
use mpgraph::operators::run_operator;
use mpgraph::symbolic::{eval_term, Domains, Func};
use mpgraph::{AtomicOp, Error, Name, Operator, Process, Term, Valuation, Value};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

const VARS: [&str; 3] = ["x", "y", "z"];
const CHANS: [&str; 5] = ["a", "b", "c", "d", "e"];

fn int_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![(-3i64..=3).prop_map(Term::int), prop::sample::select(&VARS[..]).prop_map(Term::var)];
    leaf.prop_recursive(3, 12, 2, |inner| {
        (prop::sample::select(vec![Func::Add, Func::Sub, Func::Mul]), inner.clone(), inner)
            .prop_map(|(f, a, b)| Term::bin(f, a, b))
    })
}

fn formula() -> impl Strategy<Value = Term> {
    let cmp = prop::sample::select(vec![Func::Eq, Func::Ne, Func::Lt, Func::Le, Func::Gt, Func::Ge]);
    let atom = prop_oneof![
        1 => any::<bool>().prop_map(|b| if b { Term::tt() } else { Term::ff() }),
        4 => (cmp, int_term(), int_term()).prop_map(|(f, a, b)| Term::bin(f, a, b)),
    ];
    atom.prop_recursive(2, 8, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Term::not),
            (prop::sample::select(vec![Func::And, Func::Or, Func::Implies]), inner.clone(), inner)
                .prop_map(|(f, a, b)| Term::bin(f, a, b)),
        ]
    })
}

fn assign() -> impl Strategy<Value = AtomicOp> {
    (prop::sample::select(&VARS[..]), int_term()).prop_map(|(x, e)| AtomicOp::assign(x, e))
}

fn comm() -> impl Strategy<Value = AtomicOp> {
    prop_oneof![
        (prop::sample::select(&CHANS[..4]), prop::sample::select(&VARS[..])).prop_map(|(c, x)| AtomicOp::input(c, x)),
        (prop::sample::select(&CHANS[..4]), int_term()).prop_map(|(c, e)| AtomicOp::output(c, e)),
    ]
}

fn operator(communicates: bool) -> impl Strategy<Value = Operator> {
    let c = if communicates { comm().prop_map(Some).boxed() } else { Just(None).boxed() };
    (formula(), prop::collection::vec(assign(), 0..3), c, any::<prop::sample::Index>()).prop_map(
        |(g, mut body, c, at)| {
            if let Some(c) = c {
                let i = at.index(body.len() + 1);
                body.insert(i, c);
            }
            Operator::new(g, body)
        },
    )
}

fn any_operator() -> impl Strategy<Value = Operator> {
    any::<bool>().prop_flat_map(operator)
}

fn valuation() -> impl Strategy<Value = Valuation> {
    prop::collection::vec(-3i64..=3, 3)
        .prop_map(|vs| VARS.iter().zip(vs).map(|(x, v)| (Name::new(x), Value::Int(v))).collect())
}

fn truth(b: &Term, xi: &Valuation) -> bool {
    eval_term(b, xi).unwrap().as_bool().unwrap()
}

fn input_of(op: &Operator, d: i64) -> Option<Value> {
    op.body
        .iter()
        .any(|ao| matches!(ao, AtomicOp::Input { .. }))
        .then_some(Value::Int(d))
}

/// Both operators are enabled at exactly the same valuations and then act
/// identically.
fn same_behaviour(o1: &Operator, o2: &Operator, xi: &Valuation, d: i64) -> Result<(), TestCaseError> {
    let doms = Domains::new();
    let r1 = run_operator(xi, o1, input_of(o1, d).as_ref(), &doms);
    let r2 = run_operator(xi, o2, input_of(o2, d).as_ref(), &doms);
    match (r1, r2) {
        (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
        (Err(Error::GuardFalse), Err(Error::GuardFalse)) => {}
        (a, b) => prop_assert!(false, "{o1} gives {a:?} but {o2} gives {b:?}"),
    }
    Ok(())
}

/// Whether some variable read by `b` after `op` holds the received value,
/// tracked by running `op` symbolically with the input as a fresh marker.
fn reads_received_value(op: &Operator, b: &Term) -> bool {
    let mut cur: BTreeMap<Name, Term> = VARS.iter().map(|x| (Name::new(x), Term::var(*x))).collect();
    for ao in &op.body {
        match ao {
            AtomicOp::Input { var, .. } => {
                cur.insert(var.clone(), Term::var("received"));
            }
            AtomicOp::Assign { var, expr } => {
                let mut e = expr.clone();
                for x in VARS {
                    e = e.substitute(&Name::new(x), &Term::var(format!("{x}'"))).unwrap();
                }
                for x in VARS {
                    e = e.substitute(&Name::new(&format!("{x}'")), &cur[&Name::new(x)]).unwrap();
                }
                cur.insert(var.clone(), e);
            }
            AtomicOp::Output { .. } => {}
        }
    }
    VARS.iter().any(|x| b.mentions(&Name::new(x)) && cur[&Name::new(x)].mentions(&Name::new("received")))
}

fn process() -> impl Strategy<Value = Process> {
    prop::collection::vec((0..3usize, any_operator(), 0..3usize), 0..6).prop_map(|ts| {
        let mut p = Process::new("P", "s0");
        for s in ["s1", "s2"] {
            p.add_state(s);
        }
        for (src, op, dst) in ts {
            p.add_transition(None, &format!("s{src}"), op, &format!("s{dst}"));
        }
        p
    })
}

fn chan_set() -> impl Strategy<Value = BTreeSet<Name>> {
    prop::collection::btree_set(prop::sample::select(&CHANS[..]).prop_map(Name::new), 0..4)
}

fn chan_map() -> impl Strategy<Value = BTreeMap<Name, Name>> {
    prop::collection::btree_map(
        prop::sample::select(&CHANS[..]).prop_map(Name::new),
        prop::sample::select(&CHANS[..]).prop_map(Name::new),
        0..5,
    )
}

fn wp_is_sound((op, b, xi, d): (Operator, Term, Valuation, i64)) -> Result<(), TestCaseError> {
    let Some(w) = op.wp(&b).unwrap() else {
        prop_assert!(reads_received_value(&op, &b));
        return Ok(());
    };
    let after = run_operator(&xi, &op, input_of(&op, d).as_ref(), &Domains::new());
    match after {
        Ok((_, next)) => prop_assert_eq!(truth(&w, &xi), truth(&b, &next)),
        Err(Error::GuardFalse) => prop_assert!(!truth(&w, &xi)),
        Err(e) => prop_assert!(false, "{e}"),
    }
    Ok(())
}

fn concat_is_associative(((o1, o2, o3), xi, d): ((Operator, Operator, Operator), Valuation, i64)) -> Result<(), TestCaseError> {
    let left = o1.concat(&o2).unwrap().map(|o| o.concat(&o3).unwrap());
    let right = o2.concat(&o3).unwrap().map(|o| o1.concat(&o).unwrap());
    match (left.flatten(), right.flatten()) {
        (Some(l), Some(r)) => {
            prop_assert_eq!(&l.body, &r.body);
            same_behaviour(&l, &r, &xi, d)?;
        }
        (None, None) => {}
        (Some(o), None) | (None, Some(o)) => prop_assert!(o.guard.is_false(), "definedness differs at {o}"),
    }
    Ok(())
}

fn wp_distributes_over_concat(((o1, o2), b, xi): ((Operator, Operator), Term, Valuation)) -> Result<(), TestCaseError> {
    let Some(o12) = o1.concat(&o2).unwrap() else { return Ok(()) };
    let lhs = o12.wp(&b).unwrap();
    let rhs = o2.wp(&b).unwrap().and_then(|w| o1.wp(&w).unwrap());
    match (lhs, rhs) {
        (Some(l), Some(r)) => prop_assert_eq!(truth(&l, &xi), truth(&r, &xi)),
        (None, None) => {}
        (Some(w), None) | (None, Some(w)) => {
            prop_assert!(w.is_false() || o1.guard.is_false() || o2.guard.is_false(), "definedness differs at {w}")
        }
    }
    Ok(())
}

fn restriction_composes_by_union((p, l1, l2): (Process, BTreeSet<Name>, BTreeSet<Name>)) -> Result<(), TestCaseError> {
    let both: BTreeSet<Name> = l1.union(&l2).cloned().collect();
    prop_assert_eq!(restrict(&restrict(&p, &l1), &l2), restrict(&p, &both));
    Ok(())
}

fn renaming_composes((p, f, g): (Process, BTreeMap<Name, Name>, BTreeMap<Name, Name>)) -> Result<(), TestCaseError> {
    let apply = |m: &BTreeMap<Name, Name>, c: &Name| m.get(c).cloned().unwrap_or_else(|| c.clone());
    let h: BTreeMap<Name, Name> = CHANS
        .iter()
        .map(|c| {
            let c = Name::new(c);
            let img = apply(&g, &apply(&f, &c));
            (c, img)
        })
        .collect();
    prop_assert_eq!(rename(&rename(&p, &f), &g), rename(&p, &h));
    Ok(())
}

fn runner(cases: u32, seed: u64) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    TestRunner::new_with_rng(config, proptest::test_runner::TestRng::from_seed(proptest::test_runner::RngAlgorithm::ChaCha, &bytes))
}

fn verdict<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

pub const LAWS: [&str; 5] = [
    "wp soundness",
    "concat associativity",
    "wp/concat exchange",
    "restriction union",
    "renaming composition",
];

/// Runs law `i` of `LAWS` on `cases` random inputs.
pub fn check_law(i: usize, cases: u32, seed: u64) -> Result<(), String> {
    let mut r = runner(cases, seed);
    match i {
        0 => verdict(r.run(&(any_operator(), formula(), valuation(), -3i64..=3), wp_is_sound)),
        1 => verdict(r.run(
            &(
                (0..4usize).prop_flat_map(|k| (operator(k == 0), operator(k == 1), operator(k == 2))),
                valuation(),
                -3i64..=3,
            ),
            concat_is_associative,
        )),
        2 => verdict(r.run(
            &(any::<bool>().prop_flat_map(|k| (operator(k), operator(false))), formula(), valuation()),
            wp_distributes_over_concat,
        )),
        3 => verdict(r.run(&(process(), chan_set(), chan_set()), restriction_composes_by_union)),
        4 => verdict(r.run(&(process(), chan_map(), chan_map()), renaming_composes)),
        _ => Err(format!("no law {i}")),
    }
}
