use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use mpgraph::bisim::{describe_path, weak_bisim, BisimVerdict};
use mpgraph::modelfmt::{lts_to_dot, parse_model, parse_term, serialize_model, Model};
use mpgraph::semantics::deadlocks;
use mpgraph::simplify::{simplify, Mode, Strategy};
use mpgraph::{realize, Process, RealizationLts, RealizeOptions};

use crate::harness::run_harness;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INEQUIVALENT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_SEMANTIC: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Parser, Debug)]
#[command(name = "mpp", version, about = "Compose, simplify, realize and compare message-passing processes")]
struct Cli {
    /// Seed for the randomized harness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Suppress reports; only exit codes and requested artifacts remain.
    #[arg(long, global = true)]
    quiet: bool,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate every process, system and certificate.
    Check { file: PathBuf },
    /// Evaluate a system to a single process.
    Compose {
        file: PathBuf,
        #[arg(long)]
        system: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simplify a process or system.
    Simplify {
        file: PathBuf,
        #[arg(long)]
        process: String,
        /// Print every applied step.
        #[arg(long)]
        log: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Realize a process as a labelled transition system.
    Lts {
        file: PathBuf,
        #[arg(long)]
        process: String,
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        full_enumeration: bool,
    },
    /// List deadlocked vertices of the reachable realization.
    Deadlocks {
        file: PathBuf,
        #[arg(long)]
        process: String,
    },
    /// Decide weak bisimilarity of two processes.
    Bisim {
        file: PathBuf,
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
    },
    /// Check a certificate's obligations.
    Cert {
        file: PathBuf,
        #[arg(long)]
        certificate: String,
        #[arg(long)]
        maxlen: Option<usize>,
    },
    /// Weakest precondition of a transition's operator.
    Wp {
        file: PathBuf,
        #[arg(long)]
        process: String,
        #[arg(long)]
        transition: String,
        #[arg(long)]
        formula: String,
    },
    /// Check on random small processes that simplification steps preserve
    /// weak bisimilarity.
    Harness {
        #[arg(long, default_value_t = 500)]
        cases: usize,
        /// Check state removal under the rule's own side conditions only.
        #[arg(long)]
        verbatim: bool,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<mpgraph::Error> for Failure {
    fn from(e: mpgraph::Error) -> Self {
        Failure::new(EXIT_SEMANTIC, format!("error: {e}"))
    }
}

type Outcome = Result<i32, Failure>;

struct Ctx<'a> {
    out: &'a mut dyn Write,
    quiet: bool,
    machine: bool,
}

impl Ctx<'_> {
    fn report(&mut self, text: impl FnOnce() -> String, machine: impl FnOnce() -> String) {
        if self.quiet {
            return;
        }
        let s = if self.machine { machine() } else { text() };
        let _ = self.out.write_all(s.as_bytes());
        if !s.ends_with('\n') {
            let _ = self.out.write_all(b"\n");
        }
    }
}

/// Runs `mpp` on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let mut ctx = Ctx {
        out,
        quiet: cli.quiet,
        machine: cli.format == Format::Machine,
    };
    match dispatch(&cli, &mut ctx) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "{}", f.message);
            f.code
        }
    }
}

fn load(path: &Path) -> Result<Model, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: cannot read: {e}", path.display())))?;
    parse_model(&text).map_err(|e| Failure::new(EXIT_PARSE, format!("{}:{e}", path.display())))
}

fn lookup(m: &Model, name: &str) -> Result<Process, Failure> {
    if !m.has_process(name) {
        return Err(Failure::new(EXIT_SEMANTIC, format!("error: unknown process or system {name}")));
    }
    Ok(m.process(name)?)
}

fn opts(m: &Model, full: bool) -> RealizeOptions {
    RealizeOptions {
        full_enumeration: full,
        channel_domains: m.channel_domains(),
        ..RealizeOptions::default()
    }
}

/// The model's declarations with `p` as its only process.
fn single(m: &Model, p: Process) -> Model {
    Model {
        name: m.name.clone(),
        comment: m.comment.clone(),
        domains: m.domains.clone(),
        channels: m.channels.clone(),
        processes: [(p.name.clone(), p)].into_iter().collect(),
        ..Model::default()
    }
}

fn emit_model(ctx: &mut Ctx, m: &Model, out: Option<&Path>) -> Result<(), Failure> {
    let text = serialize_model(m) + "\n";
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: cannot write: {e}", path.display()))),
        None => {
            let _ = ctx.out.write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn shape(p: &Process) -> (usize, usize) {
    (p.states.len(), p.transitions.len())
}

fn dispatch(cli: &Cli, ctx: &mut Ctx) -> Outcome {
    match &cli.command {
        Command::Check { file } => {
            let m = load(file)?;
            let diags = m.diagnostics();
            if !diags.is_empty() {
                let body: Vec<String> = diags.iter().map(|d| format!("{}: {d}", file.display())).collect();
                return Err(Failure::new(EXIT_SEMANTIC, body.join("\n")));
            }
            for c in m.certificates.values() {
                for side in [&c.left, &c.right] {
                    lookup(&m, side.as_str())?;
                }
            }
            let (p, s, c) = (m.processes.len(), m.systems.len(), m.certificates.len());
            ctx.report(
                || format!("ok: {p} processes, {s} systems, {c} certificates"),
                || format!("status=ok\nprocesses={p}\nsystems={s}\ncertificates={c}"),
            );
            Ok(EXIT_OK)
        }
        Command::Compose { file, system, out } => {
            let m = load(file)?;
            if !m.has_process(system) {
                return Err(Failure::new(EXIT_SEMANTIC, format!("error: unknown system {system}")));
            }
            let c = m.composition(system)?;
            let (ns, nt) = shape(&c.process);
            emit_model(ctx, &single(&m, c.process), out.as_deref())?;
            if out.is_some() {
                ctx.report(
                    || format!("{system}: {ns} states, {nt} transitions"),
                    || format!("process={system}\nstates={ns}\ntransitions={nt}"),
                );
            }
            Ok(EXIT_OK)
        }
        Command::Simplify { file, process, log, out } => {
            let m = load(file)?;
            let p = lookup(&m, process)?;
            let (q, steps) = simplify(&p, Strategy::default())?;
            if *log {
                ctx.report(
                    || steps.iter().map(|s| format!("# {s}\n")).collect(),
                    || steps.iter().map(|s| format!("step.rule{}={}\n", s.rule, s.detail)).collect(),
                );
            }
            let (ns, nt) = shape(&q);
            emit_model(ctx, &single(&m, q), out.as_deref())?;
            if out.is_some() {
                ctx.report(
                    || format!("{process}: {ns} states, {nt} transitions after {} steps", steps.len()),
                    || format!("process={process}\nstates={ns}\ntransitions={nt}\nsteps={}", steps.len()),
                );
            }
            Ok(EXIT_OK)
        }
        Command::Lts {
            file,
            process,
            dot,
            full_enumeration,
        } => {
            let m = load(file)?;
            let p = lookup(&m, process)?;
            let l = realize(&p, &opts(&m, *full_enumeration))?;
            if let Some(path) = dot {
                std::fs::write(path, lts_to_dot(&l))
                    .map_err(|e| Failure::new(EXIT_USAGE, format!("{}: cannot write: {e}", path.display())))?;
            }
            let reach = l.reachable().iter().filter(|&&r| r).count();
            let (v, e) = (l.num_vertices(), l.num_edges());
            ctx.report(
                || format!("{process}: {v} vertices ({reach} reachable), {e} edges"),
                || format!("process={process}\nvertices={v}\nreachable={reach}\nedges={e}"),
            );
            Ok(EXIT_OK)
        }
        Command::Deadlocks { file, process } => {
            let m = load(file)?;
            let p = lookup(&m, process)?;
            let l = realize(&p, &opts(&m, false))?;
            let dead = deadlocks(&l);
            ctx.report(
                || {
                    let mut s = format!("{} deadlocked vertices\n", dead.len());
                    for &v in &dead {
                        s.push_str(&format!("  {}\n", l.describe(v)));
                    }
                    s
                },
                || {
                    let mut s = format!("deadlocks={}\n", dead.len());
                    for &v in &dead {
                        s.push_str(&format!("vertex={}\n", l.describe(v)));
                    }
                    s
                },
            );
            Ok(EXIT_OK)
        }
        Command::Bisim { file, left, right } => {
            let m = load(file)?;
            let (p1, p2) = (lookup(&m, left)?, lookup(&m, right)?);
            let o = opts(&m, false);
            let (l1, l2) = (realize(&p1, &o)?, realize(&p2, &o)?);
            Ok(bisim_report(ctx, &l1, &l2, left, right))
        }
        Command::Cert {
            file,
            certificate,
            maxlen,
        } => {
            let mut m = load(file)?;
            let Some(c) = m.certificates.get_mut(certificate.as_str()) else {
                return Err(Failure::new(EXIT_SEMANTIC, format!("error: unknown certificate {certificate}")));
            };
            if let Some(k) = maxlen {
                c.maxlen = *k;
            }
            let r = m.check_certificate(certificate)?;
            ctx.report(|| r.render_text(), || r.render_machine());
            Ok(if r.passed() { EXIT_OK } else { EXIT_INEQUIVALENT })
        }
        Command::Wp {
            file,
            process,
            transition,
            formula,
        } => {
            let m = load(file)?;
            let p = lookup(&m, process)?;
            let t = p.transition(transition).ok_or_else(|| {
                Failure::new(EXIT_SEMANTIC, format!("error: {process} has no transition {transition}"))
            })?;
            let b = parse_term(formula).map_err(|e| Failure::new(EXIT_PARSE, format!("--formula:{e}")))?;
            let b = m.resolve_term(&b);
            b.check_formula(&p.full_domains())
                .map_err(|e| Failure::new(EXIT_PARSE, format!("--formula: {e}")))?;
            let shown = match t.op.wp(&b)? {
                Some(w) => w.to_string(),
                None => "UNDEFINED".to_string(),
            };
            ctx.report(|| shown.clone(), || format!("wp={shown}"));
            Ok(EXIT_OK)
        }
        Command::Harness { cases, verbatim } => {
            let mode = if *verbatim { Mode::Verbatim } else { Mode::Sound };
            let r = run_harness(*cases, cli.seed, mode)?;
            let seed = cli.seed;
            ctx.report(
                || {
                    let mut s = format!(
                        "{} cases, {} steps checked, {} failures (seed {seed})\n",
                        r.cases,
                        r.steps_checked,
                        r.failures.len()
                    );
                    for f in &r.failures {
                        s.push_str(&format!(
                            "case {} (seed {}): {} breaks equivalence: {}\n{}\n",
                            f.case, f.case_seed, f.step, f.path, f.model
                        ));
                    }
                    s
                },
                || {
                    let mut s = format!(
                        "cases={}\nsteps={}\nfailures={}\nseed={seed}\n",
                        r.cases,
                        r.steps_checked,
                        r.failures.len()
                    );
                    for f in &r.failures {
                        s.push_str(&format!("failure.case={} seed={} step={}\n", f.case, f.case_seed, f.step));
                    }
                    s
                },
            );
            Ok(if r.passed() { EXIT_OK } else { EXIT_INEQUIVALENT })
        }
    }
}

fn bisim_report(ctx: &mut Ctx, l1: &RealizationLts, l2: &RealizationLts, left: &str, right: &str) -> i32 {
    match weak_bisim(l1, l2) {
        BisimVerdict::Equivalent(rel) => {
            let pairs = rel.pairs().len();
            ctx.report(
                || format!("{left} and {right} are weakly bisimilar ({pairs} related vertex pairs)"),
                || format!("verdict=equivalent\nleft_vertices={}\nright_vertices={}\npairs={pairs}", l1.num_vertices(), l2.num_vertices()),
            );
            EXIT_OK
        }
        BisimVerdict::Inequivalent(d) => {
            let path = describe_path(&d);
            ctx.report(
                || format!("{left} and {right} are not weakly bisimilar\ndistinguishing moves: {path}\n{}", d.render(l1, l2)),
                || format!("verdict=inequivalent\nleft_vertices={}\nright_vertices={}\npath={path}", l1.num_vertices(), l2.num_vertices()),
            );
            EXIT_INEQUIVALENT
        }
    }
}
