//! SMT-LIB 2 encoding of refinements and solver clients.
//!
//! Refinement text uses two theory-neutral helpers, `len` and `rev`. In the
//! `seq` theory they become `seq.len` and a recursive reversal over `Seq`; in
//! the `dtlia` theory they become recursive functions over a `List`
//! datatype, monomorphized per element sort.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rustc_hash::FxHashMap;
use serde::Serialize;
use wait_timeout::ChildExt;

use crate::error::{Error, Result};
use crate::kb::Theory;
use crate::refine::{CtxEntry, Frag, Refinement};
use crate::term::{Term, VarId};
use crate::types;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SolverVerdict {
    Sat,
    Unsat,
    Unknown,
    Timeout,
    ProcessError(String),
}

/// Solver process start-up is not part of the solving budget; the process
/// is killed once this much time beyond the budget has passed.
pub const STARTUP_GRACE: Duration = Duration::from_millis(250);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Sort {
    Int,
    Bool,
    List(Box<Sort>),
    /// Uninterpreted sort `U<k>` for type variables and foreign base types.
    Abstract(usize),
}

impl Sort {
    fn smt(&self, theory: Theory) -> String {
        match self {
            Sort::Int => "Int".into(),
            Sort::Bool => "Bool".into(),
            Sort::List(e) => match theory {
                Theory::Seq => format!("(Seq {})", e.smt_elem(theory)),
                Theory::Dtlia => format!("(List {})", e.smt(theory)),
            },
            Sort::Abstract(k) => format!("U{k}"),
        }
    }

    /// Sort of a list element. Under `seq`, lists nested in a sequence are
    /// datatype lists: z3 gives up on free sequences of sequences.
    fn smt_elem(&self, theory: Theory) -> String {
        match (self, theory) {
            (Sort::List(e), Theory::Seq) => format!("(Lst {})", e.smt_elem(theory)),
            _ => self.smt(theory),
        }
    }

    fn nested(&self) -> bool {
        matches!(self, Sort::List(e) if matches!(**e, Sort::List(_)))
    }

    /// Suffix used to monomorphize helpers.
    fn tag(&self) -> String {
        match self {
            Sort::Int => "int".into(),
            Sort::Bool => "bool".into(),
            Sort::List(e) => format!("list_{}", e.tag()),
            Sort::Abstract(k) => format!("u{k}"),
        }
    }
}

/// Assigns sorts to types, numbering abstract sorts in order of appearance.
#[derive(Default)]
struct Sorts {
    abstracts: Vec<Term>,
}

impl Sorts {
    fn of(&mut self, ty: &Term) -> Result<Sort> {
        if types::pred_args(ty).is_some() {
            return Err(Error::Smt(format!(
                "predicate type {} has no SMT sort",
                types::type_to_string(ty)
            )));
        }
        if let Some(e) = types::list_elem(ty) {
            return Ok(Sort::List(Box::new(self.of(e)?)));
        }
        match ty.as_const() {
            Some("int") | Some("nat") => return Ok(Sort::Int),
            Some("bool") => return Ok(Sort::Bool),
            _ => {}
        }
        let k = match self.abstracts.iter().position(|t| t == ty) {
            Some(k) => k,
            None => {
                self.abstracts.push(ty.clone());
                self.abstracts.len() - 1
            }
        };
        Ok(Sort::Abstract(k))
    }
}

fn encode_int(n: i64) -> String {
    if n < 0 {
        format!("(- {})", n.unsigned_abs())
    } else {
        n.to_string()
    }
}

fn encode_sorted(term: &Term, sort: &Sort, theory: Theory) -> Result<String> {
    let mismatch = || Error::Smt(format!("value {term} does not fit sort {}", sort.smt(theory)));
    match sort {
        Sort::Int => match term {
            Term::Int(n) => Ok(encode_int(*n)),
            _ => Err(mismatch()),
        },
        Sort::Bool => match term.as_const() {
            Some(b @ ("true" | "false")) => Ok(b.to_string()),
            _ => Err(mismatch()),
        },
        Sort::List(elem) => {
            let items = term.list_items().ok_or_else(mismatch)?;
            let enc: Vec<String> = items
                .iter()
                .map(|i| encode_elem(i, elem, theory))
                .collect::<Result<_>>()?;
            Ok(match theory {
                Theory::Dtlia => enc
                    .iter()
                    .rev()
                    .fold(format!("(as nil {})", sort.smt(theory)), |acc, x| {
                        format!("(cons {x} {acc})")
                    }),
                Theory::Seq => match enc.len() {
                    0 => format!("(as seq.empty {})", sort.smt(theory)),
                    1 => format!("(seq.unit {})", enc[0]),
                    _ => format!(
                        "(seq.++ {})",
                        enc.iter()
                            .map(|x| format!("(seq.unit {x})"))
                            .collect::<Vec<_>>()
                            .join(" ")
                    ),
                },
            })
        }
        Sort::Abstract(_) => Err(Error::Smt(format!("no literal syntax for {term} of an abstract sort"))),
    }
}

fn encode_elem(term: &Term, sort: &Sort, theory: Theory) -> Result<String> {
    let (Sort::List(elem), Theory::Seq) = (sort, theory) else {
        return encode_sorted(term, sort, theory);
    };
    let items = term
        .list_items()
        .ok_or_else(|| Error::Smt(format!("value {term} does not fit sort {}", sort.smt_elem(theory))))?;
    let enc: Vec<String> = items
        .iter()
        .map(|i| encode_elem(i, elem, theory))
        .collect::<Result<_>>()?;
    Ok(enc
        .iter()
        .rev()
        .fold(format!("(as lnil {})", sort.smt_elem(theory)), |acc, x| {
            format!("(lcons {x} {acc})")
        }))
}

/// SMT-LIB literal for a ground value of a concrete type.
pub fn encode_value(term: &Term, ty: &Term, theory: Theory) -> Result<String> {
    if !term.is_ground() {
        return Err(Error::Smt(format!("value {term} is not ground")));
    }
    let sort = Sorts::default().of(ty)?;
    encode_sorted(term, &sort, theory)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmtProblem {
    pub theory: Theory,
    pub logic: Option<String>,
    /// Datatype and sort declarations.
    pub decls: Vec<String>,
    /// User definitions, verbatim.
    pub preamble: Vec<String>,
    /// Monomorphized helper definitions, deduplicated.
    pub helpers: Vec<String>,
    pub vars: Vec<String>,
    pub values: Vec<String>,
    pub goal: String,
    pub timeout_ms: u64,
}

impl SmtProblem {
    pub fn text(&self) -> String {
        let mut out = String::new();
        if let Some(l) = &self.logic {
            out.push_str(&format!("(set-logic {l})\n"));
        }
        out.push_str(&self.body());
        out
    }

    /// Everything after the logic declaration.
    pub fn body(&self) -> String {
        let mut out = String::new();
        for section in [&self.decls, &self.preamble, &self.helpers, &self.vars, &self.values] {
            for line in section {
                out.push_str(line);
                out.push('\n');
            }
        }
        out.push_str(&format!("(assert {})\n(check-sat)\n", self.goal));
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum SExpr {
    Atom(String),
    Slot(VarId),
    List(Vec<SExpr>),
}

fn tokenize_leaf(frags: &[Frag]) -> Result<Vec<SExpr>> {
    // Flat token stream: "(" and ")" are atoms here, grouped afterwards.
    let mut toks = Vec::new();
    for f in frags {
        match f {
            Frag::Slot(Term::Var(v)) => toks.push(SExpr::Slot(*v)),
            Frag::Slot(t) => return Err(Error::Smt(format!("slot {t} is not a context variable"))),
            Frag::Text(t) => {
                let mut cur = String::new();
                for c in t.chars() {
                    if c == '(' || c == ')' || c.is_whitespace() {
                        if !cur.is_empty() {
                            toks.push(SExpr::Atom(std::mem::take(&mut cur)));
                        }
                        if !c.is_whitespace() {
                            toks.push(SExpr::Atom(c.to_string()));
                        }
                    } else {
                        cur.push(c);
                    }
                }
                if !cur.is_empty() {
                    toks.push(SExpr::Atom(cur));
                }
            }
        }
    }
    let mut stack: Vec<Vec<SExpr>> = vec![Vec::new()];
    for t in toks {
        match &t {
            SExpr::Atom(a) if a == "(" => stack.push(Vec::new()),
            SExpr::Atom(a) if a == ")" => {
                let done = stack.pop().filter(|_| !stack.is_empty());
                let done = done.ok_or_else(|| Error::Smt("unbalanced `)` in refinement".into()))?;
                stack.last_mut().expect("outer level").push(SExpr::List(done));
            }
            _ => stack.last_mut().expect("outer level").push(t),
        }
    }
    if stack.len() != 1 {
        return Err(Error::Smt("unbalanced `(` in refinement".into()));
    }
    Ok(stack.pop().expect("outer level"))
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Helper {
    Length,
    Snoc,
    Rev,
}

struct Emitter<'a> {
    theory: Theory,
    sorts: FxHashMap<VarId, Sort>,
    names: FxHashMap<VarId, String>,
    helpers: Vec<(Helper, Sort)>,
    _ctx: &'a [CtxEntry],
}

impl Emitter<'_> {
    fn need(&mut self, h: Helper, elem: &Sort) {
        if h == Helper::Rev && self.theory == Theory::Dtlia {
            self.need(Helper::Snoc, elem);
        }
        let key = (h, elem.clone());
        if !self.helpers.contains(&key) {
            self.helpers.push(key);
        }
    }

    fn sort_of(&self, e: &SExpr) -> Result<Sort> {
        match e {
            SExpr::Slot(v) => self
                .sorts
                .get(v)
                .cloned()
                .ok_or_else(|| Error::Smt("slot variable missing from context".into())),
            SExpr::List(items) => match items.as_slice() {
                [SExpr::Atom(f), x] if is_rev(f) => self.sort_of(x),
                _ => Err(Error::Smt("cannot infer the sort of a helper argument".into())),
            },
            SExpr::Atom(_) => Err(Error::Smt("cannot infer the sort of a helper argument".into())),
        }
    }

    fn elem_sort(&self, e: &SExpr) -> Result<Sort> {
        match self.sort_of(e)? {
            Sort::List(el) => Ok(*el),
            other => Err(Error::Smt(format!(
                "list helper applied to sort {}",
                other.smt(self.theory)
            ))),
        }
    }

    fn render(&mut self, e: &SExpr, out: &mut String) -> Result<()> {
        match e {
            SExpr::Atom(a) => out.push_str(a),
            SExpr::Slot(v) => out.push_str(
                self.names
                    .get(v)
                    .ok_or_else(|| Error::Smt("slot variable missing from context".into()))?,
            ),
            SExpr::List(items) => {
                if let [SExpr::Atom(f), x] = items.as_slice() {
                    let helper = if is_len(f) {
                        Some(Helper::Length)
                    } else if is_rev(f) {
                        Some(Helper::Rev)
                    } else {
                        None
                    };
                    if let Some(h) = helper {
                        let elem = self.elem_sort(x)?;
                        let fname = match (h, self.theory) {
                            (Helper::Length, Theory::Seq) => "seq.len".to_string(),
                            _ => {
                                self.need(h, &elem);
                                helper_name(h, self.theory, &elem)
                            }
                        };
                        out.push('(');
                        out.push_str(&fname);
                        out.push(' ');
                        self.render(x, out)?;
                        out.push(')');
                        return Ok(());
                    }
                }
                out.push('(');
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    self.render(it, out)?;
                }
                out.push(')');
            }
        }
        Ok(())
    }

    fn goal(&mut self, r: &Refinement, out: &mut String) -> Result<()> {
        match r {
            Refinement::True => out.push_str("true"),
            Refinement::Leaf(frags) => {
                let exprs = tokenize_leaf(frags)?;
                match exprs.as_slice() {
                    [single] => self.render(single, out)?,
                    [] => out.push_str("true"),
                    many => {
                        out.push_str("(and");
                        for e in many {
                            out.push(' ');
                            self.render(e, out)?;
                        }
                        out.push(')');
                    }
                }
            }
            Refinement::And(a, b) | Refinement::Or(a, b) => {
                out.push_str(if matches!(r, Refinement::And(..)) {
                    "(and "
                } else {
                    "(or "
                });
                self.goal(a, out)?;
                out.push(' ');
                self.goal(b, out)?;
                out.push(')');
            }
        }
        Ok(())
    }
}

fn is_len(f: &str) -> bool {
    matches!(f, "len" | "seq.len" | "dt_length" | "length")
}

fn is_rev(f: &str) -> bool {
    matches!(f, "rev" | "dt_rev" | "dt_reverse")
}

fn helper_name(h: Helper, theory: Theory, elem: &Sort) -> String {
    let base = match (h, theory) {
        (Helper::Length, _) => "dt_length",
        (Helper::Snoc, _) => "dt_snoc",
        (Helper::Rev, Theory::Dtlia) => "dt_rev",
        (Helper::Rev, Theory::Seq) => "seq_rev",
    };
    format!("{base}_{}", elem.tag())
}

fn helper_definition(h: Helper, theory: Theory, elem: &Sort) -> String {
    let list = Sort::List(Box::new(elem.clone())).smt(theory);
    let e = elem.smt(theory);
    let name = helper_name(h, theory, elem);
    match (h, theory) {
        (Helper::Length, _) => format!(
            "(define-fun-rec {name} ((x {list})) Int (ite (= x (as nil {list})) 0 (+ 1 ({name} (tl x)))))"
        ),
        (Helper::Snoc, _) => format!(
            "(define-fun-rec {name} ((x {list}) (e {e})) {list} (ite (= x (as nil {list})) (cons e (as nil {list})) (cons (hd x) ({name} (tl x) e))))"
        ),
        (Helper::Rev, Theory::Dtlia) => {
            let snoc = helper_name(Helper::Snoc, theory, elem);
            format!(
                "(define-fun-rec {name} ((x {list})) {list} (ite (= x (as nil {list})) (as nil {list}) ({snoc} ({name} (tl x)) (hd x))))"
            )
        }
        (Helper::Rev, Theory::Seq) => format!(
            "(define-fun-rec {name} ((x {list})) {list} (ite (= (seq.len x) 0) (as seq.empty {list}) (seq.++ ({name} (seq.extract x 1 (- (seq.len x) 1))) (seq.unit (seq.nth x 0)))))"
        ),
    }
}

/// Element lists under `seq`. Named apart from `List`, which some z3
/// builds predefine outside a set logic.
pub const SEQ_ELEM_DATATYPE: &str = "(declare-datatypes ((Lst 1)) ((par (T) ((lnil) (lcons (lhd T) (ltl (Lst T)))))))";

pub const LIST_DATATYPE: &str = "(declare-datatypes ((List 1)) ((par (T) ((nil) (cons (hd T) (tl (List T)))))))";

/// The `set-logic` a theory needs; `seq` runs under the solver default.
pub fn logic_for(theory: Theory) -> Option<&'static str> {
    (theory == Theory::Dtlia).then_some("UFDTLIA")
}

/// Translate a context and refinement into a self-contained SMT problem.
/// Output is a pure function of the inputs.
pub fn emit_smtlib(
    ctx: &[CtxEntry],
    refinement: &Refinement,
    theory: Theory,
    preamble: &[String],
    timeout_ms: u64,
) -> Result<SmtProblem> {
    let mut sorts = Sorts::default();
    let mut em = Emitter {
        theory,
        sorts: FxHashMap::default(),
        names: FxHashMap::default(),
        helpers: Vec::new(),
        _ctx: ctx,
    };
    let mut vars = Vec::new();
    let mut values = Vec::new();
    for (k, entry) in ctx.iter().enumerate() {
        let sort = sorts.of(&entry.ty)?;
        let name = format!("v{k}");
        vars.push(format!("(declare-const {name} {})", sort.smt(theory)));
        if let Some(v) = &entry.value {
            // Values of abstract sorts stay unconstrained.
            if let Ok(lit) = encode_sorted(v, &sort, theory) {
                values.push(format!("(assert (= {name} {lit}))"));
            }
        }
        em.sorts.insert(entry.var, sort);
        em.names.insert(entry.var, name);
    }
    let mut goal = String::new();
    em.goal(refinement, &mut goal)?;
    let mut decls = Vec::new();
    if theory == Theory::Dtlia {
        decls.push(LIST_DATATYPE.to_string());
    } else if em.sorts.values().any(Sort::nested) || em.helpers.iter().any(|(_, e)| matches!(e, Sort::List(_))) {
        decls.push(SEQ_ELEM_DATATYPE.to_string());
    }
    for k in 0..sorts.abstracts.len() {
        decls.push(format!("(declare-sort U{k} 0)"));
    }
    let helpers = em
        .helpers
        .iter()
        .map(|(h, s)| helper_definition(*h, theory, s))
        .collect();
    Ok(SmtProblem {
        theory,
        logic: logic_for(theory).map(str::to_string),
        decls,
        preamble: preamble.to_vec(),
        helpers,
        vars,
        values,
        goal,
        timeout_ms,
    })
}

/// Whether the solver command can be started at all.
pub fn solver_available(cmd: &str) -> bool {
    matches!(invoke_solver_text("(check-sat)\n", cmd, 5_000), SolverVerdict::Sat)
}

pub fn invoke_solver(problem: &SmtProblem, cmd: &str) -> SolverVerdict {
    invoke_solver_text(&problem.text(), cmd, problem.timeout_ms)
}

/// Run the solver once on `text` and classify the first verdict token.
///
/// For z3 the budget is also passed as its own soft timeout, so it answers
/// `unknown` rather than running until it is killed.
pub fn invoke_solver_text(text: &str, cmd: &str, timeout_ms: u64) -> SolverVerdict {
    let argv = match solver_argv(cmd, timeout_ms) {
        Ok(a) => a,
        Err(v) => return v,
    };
    let mut child = match Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => return SolverVerdict::ProcessError(format!("cannot start `{}`: {e}", argv[0])),
    };
    if let Some(mut stdin) = child.stdin.take() {
        if let Err(e) = stdin.write_all(text.as_bytes()) {
            let _ = child.kill();
            let _ = child.wait();
            return SolverVerdict::ProcessError(format!("writing to solver: {e}"));
        }
    }
    let deadline = Duration::from_millis(timeout_ms) + STARTUP_GRACE;
    match child.wait_timeout(deadline) {
        Ok(Some(_)) => {}
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            return SolverVerdict::Timeout;
        }
        Err(e) => return SolverVerdict::ProcessError(format!("waiting for solver: {e}")),
    }
    let mut out = String::new();
    if let Some(mut stdout) = child.stdout.take() {
        let _ = stdout.read_to_string(&mut out);
    }
    classify(&out)
}

fn solver_argv(cmd: &str, timeout_ms: u64) -> std::result::Result<Vec<String>, SolverVerdict> {
    let mut argv = match shell_words::split(cmd) {
        Ok(a) if !a.is_empty() => a,
        _ => return Err(SolverVerdict::ProcessError(format!("invalid solver command `{cmd}`"))),
    };
    let is_z3 = std::path::Path::new(&argv[0])
        .file_name()
        .is_some_and(|n| n == "z3" || n == "z3.exe");
    if is_z3 && !argv.iter().any(|a| a.starts_with("-t:") || a.starts_with("-T:")) {
        argv.push(format!("-t:{timeout_ms}"));
    }
    Ok(argv)
}

const DONE: &str = "@@milsynth-done";

struct Live {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    queries: usize,
}

/// z3 slows down as popped scopes accumulate; a fresh process per this
/// many queries is cheaper overall.
const RECYCLE_AFTER: usize = 64;

/// A long-lived solver process fed one problem at a time, each inside its
/// own `(push)`/`(pop)` scope. Starting a process, or `(reset)`, per query
/// costs far more than most queries. The logic is declared once per
/// process; the session restarts the process after a timeout or failure.
pub struct SolverSession {
    cmd: String,
    timeout_ms: u64,
    logic: Option<String>,
    live: Option<Live>,
}

impl SolverSession {
    pub fn new(cmd: &str, timeout_ms: u64, logic: Option<&str>) -> SolverSession {
        SolverSession {
            cmd: cmd.to_string(),
            timeout_ms,
            logic: logic.map(str::to_string),
            live: None,
        }
    }

    fn start(&self) -> std::result::Result<Live, SolverVerdict> {
        let argv = solver_argv(&self.cmd, self.timeout_ms)?;
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SolverVerdict::ProcessError(format!("cannot start `{}`: {e}", argv[0])))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut live = Live {
            child,
            stdin,
            lines,
            queries: 0,
        };
        if let Some(l) = &self.logic {
            if let Err(e) = writeln!(live.stdin, "(set-logic {l})") {
                let _ = live.child.kill();
                let _ = live.child.wait();
                return Err(SolverVerdict::ProcessError(format!("writing to solver: {e}")));
            }
        }
        Ok(live)
    }

    fn stop(&mut self) {
        if let Some(mut l) = self.live.take() {
            let _ = l.child.kill();
            let _ = l.child.wait();
        }
    }

    /// Solve one problem body (no logic declaration) ending in `(check-sat)`.
    pub fn check_text(&mut self, text: &str) -> SolverVerdict {
        if self.live.is_none() {
            match self.start() {
                Ok(l) => self.live = Some(l),
                Err(v) => return v,
            }
        }
        let live = self.live.as_mut().expect("started above");
        live.queries += 1;
        let msg = format!("(push)\n{text}(pop)\n(echo \"{DONE}\")\n");
        if let Err(e) = live.stdin.write_all(msg.as_bytes()).and_then(|_| live.stdin.flush()) {
            self.stop();
            return SolverVerdict::ProcessError(format!("writing to solver: {e}"));
        }
        let deadline = Instant::now() + Duration::from_millis(self.timeout_ms) + STARTUP_GRACE;
        let mut out = String::new();
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match live.lines.recv_timeout(left) {
                Ok(line) if line.trim().trim_matches('"') == DONE => {
                    if live.queries >= RECYCLE_AFTER {
                        self.stop();
                    }
                    return classify(&out);
                }
                Ok(line) => {
                    out.push_str(&line);
                    out.push('\n');
                }
                Err(RecvTimeoutError::Timeout) => {
                    self.stop();
                    return SolverVerdict::Timeout;
                }
                Err(RecvTimeoutError::Disconnected) => {
                    self.stop();
                    return SolverVerdict::ProcessError(format!("solver exited; output `{}`", out.trim()));
                }
            }
        }
    }
}

impl Drop for SolverSession {
    fn drop(&mut self) {
        self.stop();
    }
}

fn classify(out: &str) -> SolverVerdict {
    for line in out.lines().map(str::trim) {
        if line.starts_with("(error") {
            return SolverVerdict::ProcessError(line.to_string());
        }
    }
    for line in out.lines().map(str::trim) {
        match line {
            "sat" => return SolverVerdict::Sat,
            "unsat" => return SolverVerdict::Unsat,
            "unknown" => return SolverVerdict::Unknown,
            "timeout" => return SolverVerdict::Timeout,
            _ => {}
        }
    }
    SolverVerdict::ProcessError(format!("no verdict in solver output `{}`", out.trim()))
}

#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct SmtStats {
    /// Checks whose refinement was trivially true.
    pub trivial: u64,
    pub calls: u64,
    pub cache_hits: u64,
    pub sat: u64,
    pub unsat: u64,
    pub unknown: u64,
    pub timeouts: u64,
    pub errors: u64,
    pub solver_ms: f64,
}

impl SmtStats {
    pub fn record(&mut self, v: &SolverVerdict, elapsed: Duration) {
        self.calls += 1;
        self.solver_ms += elapsed.as_secs_f64() * 1000.0;
        match v {
            SolverVerdict::Sat => self.sat += 1,
            SolverVerdict::Unsat => self.unsat += 1,
            SolverVerdict::Unknown => self.unknown += 1,
            SolverVerdict::Timeout => self.timeouts += 1,
            SolverVerdict::ProcessError(_) => self.errors += 1,
        }
    }
}

/// Verdicts keyed by problem text. Only definite answers are stored.
#[derive(Clone, Default)]
pub struct VerdictCache {
    inner: Arc<Mutex<FxHashMap<String, SolverVerdict>>>,
}

impl VerdictCache {
    pub fn get(&self, text: &str) -> Option<SolverVerdict> {
        self.inner.lock().ok()?.get(text).cloned()
    }

    pub fn put(&self, text: String, v: &SolverVerdict) {
        if matches!(v, SolverVerdict::Sat | SolverVerdict::Unsat) {
            if let Ok(mut m) = self.inner.lock() {
                m.insert(text, v.clone());
            }
        }
    }

    pub fn len(&self) -> usize {
        self.inner.lock().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Run a problem through the cache and the solver.
pub fn check_cached(
    problem: &SmtProblem,
    session: &mut SolverSession,
    cache: &VerdictCache,
    stats: &mut SmtStats,
) -> SolverVerdict {
    let text = problem.text();
    if let Some(v) = cache.get(&text) {
        stats.cache_hits += 1;
        return v;
    }
    let start = Instant::now();
    let v = session.check_text(&problem.body());
    stats.record(&v, start.elapsed());
    cache.put(text, &v);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::fresh_var;
    use crate::types::{base, list_of};

    fn int_list() -> Term {
        list_of(base("int"))
    }

    fn entry(v: &Term, ty: Term, value: Option<Term>) -> CtxEntry {
        CtxEntry {
            var: v.as_var().unwrap(),
            ty,
            value,
        }
    }

    fn len_eq(a: &Term, b: &Term) -> Refinement {
        Refinement::leaf(vec![
            Frag::Text("(= (len ".into()),
            Frag::Slot(a.clone()),
            Frag::Text(") (len ".into()),
            Frag::Slot(b.clone()),
            Frag::Text("))".into()),
        ])
    }

    #[test]
    fn encodes_values() {
        let l = Term::int_list(&[1, 2]);
        assert_eq!(
            encode_value(&l, &int_list(), Theory::Dtlia).unwrap(),
            "(cons 1 (cons 2 (as nil (List Int))))"
        );
        assert_eq!(
            encode_value(&Term::nil(), &int_list(), Theory::Dtlia).unwrap(),
            "(as nil (List Int))"
        );
        assert_eq!(encode_value(&Term::Int(7), &base("int"), Theory::Seq).unwrap(), "7");
        assert_eq!(
            encode_value(&Term::Int(-3), &base("int"), Theory::Seq).unwrap(),
            "(- 3)"
        );
        assert_eq!(
            encode_value(&l, &int_list(), Theory::Seq).unwrap(),
            "(seq.++ (seq.unit 1) (seq.unit 2))"
        );
        assert!(encode_value(&Term::Int(1), &int_list(), Theory::Seq).is_err());
    }

    #[test]
    fn seq_length_rendering() {
        let (a, b) = (fresh_var(), fresh_var());
        let ctx = vec![entry(&a, int_list(), None), entry(&b, int_list(), None)];
        let p = emit_smtlib(&ctx, &len_eq(&a, &b), Theory::Seq, &[], 30).unwrap();
        assert!(p.text().contains("(= (seq.len v0) (seq.len v1))"));
        assert!(p.logic.is_none());
    }

    #[test]
    fn dtlia_monomorphizes_once() {
        let (a, b) = (fresh_var(), fresh_var());
        let ctx = vec![entry(&a, int_list(), None), entry(&b, int_list(), None)];
        let p = emit_smtlib(&ctx, &len_eq(&a, &b), Theory::Dtlia, &[], 30).unwrap();
        let text = p.text();
        assert_eq!(text.matches("(define-fun-rec dt_length_int").count(), 1);
        assert!(text.contains("(= (dt_length_int v0) (dt_length_int v1))"));
        assert!(text.starts_with("(set-logic UFDTLIA)"));
    }

    #[test]
    fn missing_slot_is_an_error() {
        let (a, b) = (fresh_var(), fresh_var());
        let ctx = vec![entry(&a, int_list(), None)];
        assert!(emit_smtlib(&ctx, &len_eq(&a, &b), Theory::Seq, &[], 30).is_err());
    }

    #[test]
    fn predicate_types_are_rejected() {
        let a = fresh_var();
        let ctx = vec![entry(&a, types::pred_type(vec![base("int")]), None)];
        assert!(emit_smtlib(&ctx, &Refinement::True, Theory::Seq, &[], 30).is_err());
    }

    #[test]
    fn abstract_sorts_are_declared() {
        let (a, b) = (fresh_var(), fresh_var());
        let x = fresh_var();
        let ctx = vec![entry(&a, list_of(x.clone()), None), entry(&b, list_of(x), None)];
        let p = emit_smtlib(&ctx, &len_eq(&a, &b), Theory::Dtlia, &[], 30).unwrap();
        assert!(p.decls.contains(&"(declare-sort U0 0)".to_string()));
        assert!(p.text().contains("dt_length_u0"));
    }

    #[test]
    fn emission_is_deterministic() {
        let (a, b) = (fresh_var(), fresh_var());
        let ctx = vec![
            entry(&a, int_list(), Some(Term::int_list(&[1, 2]))),
            entry(&b, int_list(), None),
        ];
        let r = Refinement::and(len_eq(&a, &b), Refinement::text("(> 1 0)"));
        let p1 = emit_smtlib(&ctx, &r, Theory::Dtlia, &[], 30).unwrap().text();
        let p2 = emit_smtlib(&ctx, &r, Theory::Dtlia, &[], 30).unwrap().text();
        assert_eq!(p1, p2);
        let names_ok = p1
            .split(|c: char| c.is_whitespace() || c == '(' || c == ')')
            .all(|w| !w.starts_with('v') || w[1..].parse::<usize>().is_ok() || !w[1..].chars().all(char::is_numeric));
        assert!(names_ok);
    }

    #[test]
    fn classifies_output() {
        assert_eq!(classify("sat\n"), SolverVerdict::Sat);
        assert_eq!(classify("unsat\n"), SolverVerdict::Unsat);
        assert_eq!(classify("unknown\n"), SolverVerdict::Unknown);
        assert!(matches!(
            classify("(error \"x\")\nsat\n"),
            SolverVerdict::ProcessError(_)
        ));
        assert!(matches!(classify(""), SolverVerdict::ProcessError(_)));
    }

    #[test]
    fn spawn_failure_is_process_error() {
        let v = invoke_solver_text("(check-sat)", "/nonexistent/solver-binary", 30);
        assert!(matches!(v, SolverVerdict::ProcessError(_)));
        assert!(!solver_available("/nonexistent/solver-binary"));
    }

    #[test]
    fn cache_keeps_only_definite_verdicts() {
        let c = VerdictCache::default();
        c.put("a".into(), &SolverVerdict::Unknown);
        c.put("b".into(), &SolverVerdict::Unsat);
        assert_eq!(c.get("a"), None);
        assert_eq!(c.get("b"), Some(SolverVerdict::Unsat));
    }

    fn z3() -> Option<&'static str> {
        let cmd = crate::kb::DEFAULT_SOLVER;
        if solver_available(cmd) {
            Some(cmd)
        } else {
            eprintln!("skipping: `{cmd}` is not available");
            None
        }
    }

    fn leaf(parts: &[&str], slots: &[&Term]) -> Refinement {
        let mut frags = Vec::new();
        for (k, p) in parts.iter().enumerate() {
            frags.push(Frag::Text(p.to_string()));
            if let Some(v) = slots.get(k) {
                frags.push(Frag::Slot((*v).clone()));
            }
        }
        Refinement::leaf(frags)
    }

    fn solve(ctx: &[CtxEntry], r: &Refinement, theory: Theory, session: &mut SolverSession) -> SolverVerdict {
        let p = emit_smtlib(ctx, r, theory, &[], 2_000).unwrap();
        session.check_text(&p.body())
    }

    #[test]
    fn empty_list_has_no_length_three() {
        let Some(cmd) = z3() else { return };
        let a = fresh_var();
        let ctx = vec![entry(&a, int_list(), Some(Term::nil()))];
        let r = leaf(&["(= (len ", ") 3)"], &[&a]);
        for theory in [Theory::Seq, Theory::Dtlia] {
            let mut s = SolverSession::new(cmd, 2_000, logic_for(theory));
            assert_eq!(solve(&ctx, &r, theory, &mut s), SolverVerdict::Unsat, "{theory:?}");
        }
        let p = emit_smtlib(&ctx, &r, Theory::Dtlia, &[], 2_000).unwrap();
        assert!(p.goal.contains("(= (dt_length_int v0) 3)"), "{}", p.goal);
    }

    #[test]
    fn session_scopes_do_not_leak() {
        let Some(cmd) = z3() else { return };
        let mut s = SolverSession::new(cmd, 2_000, None);
        // Each query re-declares x; without pop the second would be an error.
        for k in 0..(RECYCLE_AFTER * 2 + 3) {
            let want = if k % 2 == 0 {
                SolverVerdict::Sat
            } else {
                SolverVerdict::Unsat
            };
            let goal = if k % 2 == 0 { "(> x 0)" } else { "(and (> x 0) (< x 0))" };
            let text = format!("(declare-const x Int)\n(assert {goal})\n(check-sat)\n");
            assert_eq!(s.check_text(&text), want, "query {k}");
        }
        assert!(matches!(
            s.check_text("(assert (= y 1))\n(check-sat)\n"),
            SolverVerdict::ProcessError(_)
        ));
        assert_eq!(s.check_text("(check-sat)\n"), SolverVerdict::Sat);
    }

    #[test]
    fn nested_lists_use_the_element_datatype_under_seq() {
        let ll = list_of(int_list());
        let v = Term::list([Term::int_list(&[1]), Term::nil()]);
        assert_eq!(
            encode_value(&v, &ll, Theory::Seq).unwrap(),
            "(seq.++ (seq.unit (lcons 1 (as lnil (Lst Int)))) (seq.unit (as lnil (Lst Int))))"
        );
        let a = fresh_var();
        let p = emit_smtlib(&[entry(&a, ll, Some(v))], &Refinement::True, Theory::Seq, &[], 30).unwrap();
        assert!(p.decls.contains(&SEQ_ELEM_DATATYPE.to_string()));
        assert!(p.vars[0].ends_with("(Seq (Lst Int)))"), "{}", p.vars[0]);
    }

    /// Seq and datatype encodings must agree with each other and with a
    /// direct evaluation on ground lists.
    #[test]
    fn theories_agree_on_ground_contexts() {
        use rand::{Rng, SeedableRng};
        let Some(cmd) = z3() else { return };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut seq = SolverSession::new(cmd, 2_000, logic_for(Theory::Seq));
        let mut dt = SolverSession::new(cmd, 2_000, logic_for(Theory::Dtlia));
        let ints = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<i64> {
            (0..rng.gen_range(0..=3)).map(|_| rng.gen_range(0..=2)).collect()
        };
        for round in 0..120 {
            let nested = round % 4 == 3;
            let (xs, ys): (Vec<Vec<i64>>, Vec<Vec<i64>>) = if nested {
                let n = rng.gen_range(0..=2);
                let m = rng.gen_range(0..=2);
                (
                    (0..n).map(|_| ints(&mut rng)).collect(),
                    (0..m).map(|_| ints(&mut rng)).collect(),
                )
            } else {
                (vec![ints(&mut rng)], vec![ints(&mut rng)])
            };
            let (ty, va, vb) = if nested {
                let enc = |v: &[Vec<i64>]| Term::list(v.iter().map(|x| Term::int_list(x)));
                (list_of(int_list()), enc(&xs), enc(&ys))
            } else {
                (int_list(), Term::int_list(&xs[0]), Term::int_list(&ys[0]))
            };
            let (a, b) = (fresh_var(), fresh_var());
            let ctx = vec![entry(&a, ty.clone(), Some(va)), entry(&b, ty, Some(vb))];
            let (la, lb) = if nested {
                (xs.len(), ys.len())
            } else {
                (xs[0].len(), ys[0].len())
            };
            let mut rx = xs.clone();
            if nested {
                rx.reverse();
            } else {
                rx[0].reverse();
            }
            let cases = [
                (leaf(&["(= (+ (len ", ") 1) (len ", "))"], &[&a, &b]), la + 1 == lb),
                (leaf(&["(= (rev ", ") ", ")"], &[&a, &b]), rx == ys),
                (leaf(&["(= ", " ", ")"], &[&a, &b]), xs == ys),
            ];
            for (r, truth) in cases {
                let want = if truth {
                    SolverVerdict::Sat
                } else {
                    SolverVerdict::Unsat
                };
                assert_eq!(solve(&ctx, &r, Theory::Seq, &mut seq), want, "seq {xs:?} {ys:?} {r:?}");
                assert_eq!(
                    solve(&ctx, &r, Theory::Dtlia, &mut dt),
                    want,
                    "dtlia {xs:?} {ys:?} {r:?}"
                );
            }
        }
    }
}
