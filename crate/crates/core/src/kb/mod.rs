//! Background knowledge, metarules, examples and the problem file format.

mod builtins;
mod parse;
mod print;
mod stdlib;

use std::fmt;
use std::str::FromStr;

use rustc_hash::FxHashMap;

pub use builtins::{solve_prim, Builtin};
pub use parse::{parse_atom, parse_problem};
pub use print::print_problem;
pub use stdlib::{stdlib_problem, STDLIB};

use crate::error::{Error, Result};
use crate::refine::{Frag, Refinement};
use crate::term::{Atom, Term, VarId};
use crate::types;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    Untyped,
    #[default]
    Typed,
    Refined,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Untyped, Mode::Typed, Mode::Refined];

    pub fn typed(self) -> bool {
        self != Mode::Untyped
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Untyped => "untyped",
            Mode::Typed => "typed",
            Mode::Refined => "refined",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "untyped" => Ok(Mode::Untyped),
            "typed" => Ok(Mode::Typed),
            "refined" => Ok(Mode::Refined),
            other => Err(Error::Problem(format!("unknown mode `{other}`"))),
        }
    }
}

/// SMT theory used to encode refinements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Theory {
    /// Built-in sequences.
    #[default]
    Seq,
    /// Algebraic list datatype with recursive helper functions.
    Dtlia,
}

impl Theory {
    pub fn as_str(self) -> &'static str {
        match self {
            Theory::Seq => "seq",
            Theory::Dtlia => "dtlia",
        }
    }
}

impl FromStr for Theory {
    type Err = Error;
    fn from_str(s: &str) -> Result<Theory> {
        match s {
            "seq" => Ok(Theory::Seq),
            "dtlia" => Ok(Theory::Dtlia),
            other => Err(Error::Problem(format!("unknown smt theory `{other}`"))),
        }
    }
}

pub const DEFAULT_SOLVER: &str = "z3 -in";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Options {
    pub max_clauses: usize,
    pub mode: Mode,
    pub smt_timeout_ms: u64,
    pub smt_theory: Theory,
    pub solver_cmd: String,
    /// Goals nested deeper than this fail.
    pub max_depth: usize,
    /// Abandon the search after this many decisions.
    pub step_limit: Option<u64>,
    /// Also check refinements right after a fresh invention.
    pub check_after_sub: bool,
}

impl Default for Options {
    fn default() -> Options {
        Options {
            max_clauses: 3,
            mode: Mode::Typed,
            smt_timeout_ms: 30,
            smt_theory: Theory::Seq,
            solver_cmd: DEFAULT_SOLVER.to_string(),
            max_depth: 60,
            step_limit: None,
            check_after_sub: false,
        }
    }
}

impl Options {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| Error::Problem(format!("option {key} expects a number, got `{v}`")))
        };
        match key {
            "max_clauses" => self.max_clauses = num(value)? as usize,
            "mode" => self.mode = value.parse()?,
            "smt_timeout_ms" => self.smt_timeout_ms = num(value)?,
            "smt_theory" => self.smt_theory = value.parse()?,
            "solver_cmd" => self.solver_cmd = value.to_string(),
            "max_depth" => self.max_depth = num(value)? as usize,
            "step_limit" => self.step_limit = Some(num(value)?),
            "check_after_sub" => {
                self.check_after_sub = match value {
                    "true" => true,
                    "false" => false,
                    v => return Err(Error::Problem(format!("check_after_sub expects true/false, got `{v}`"))),
                }
            }
            other => return Err(Error::Problem(format!("unknown option `{other}`"))),
        }
        Ok(())
    }

    /// Options that differ from the defaults, as key/value text.
    pub fn non_default(&self) -> Vec<(&'static str, String)> {
        let d = Options::default();
        let mut out = Vec::new();
        if self.max_clauses != d.max_clauses {
            out.push(("max_clauses", self.max_clauses.to_string()));
        }
        if self.mode != d.mode {
            out.push(("mode", self.mode.to_string()));
        }
        if self.smt_timeout_ms != d.smt_timeout_ms {
            out.push(("smt_timeout_ms", self.smt_timeout_ms.to_string()));
        }
        if self.smt_theory != d.smt_theory {
            out.push(("smt_theory", self.smt_theory.as_str().to_string()));
        }
        if self.solver_cmd != d.solver_cmd {
            out.push(("solver_cmd", self.solver_cmd.clone()));
        }
        if self.max_depth != d.max_depth {
            out.push(("max_depth", self.max_depth.to_string()));
        }
        if let Some(l) = self.step_limit {
            out.push(("step_limit", l.to_string()));
        }
        if self.check_after_sub {
            out.push(("check_after_sub", "true".to_string()));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Evaluator {
    Builtin(Builtin),
    /// Finite relation; rows are ground tuples in declaration order.
    Table(Vec<Vec<Term>>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimDecl {
    pub name: String,
    pub arity: usize,
    /// Predicate type `pred(T1,..,Tn)`.
    pub ty: Term,
    /// Placeholder variables standing for the arguments in `refinement`.
    pub params: Vec<Term>,
    pub refinement: Refinement,
    pub eval: Evaluator,
}

impl PrimDecl {
    pub fn new(name: &str, ty: Term, eval: Evaluator) -> PrimDecl {
        let arity = types::pred_args(&ty).map_or(0, <[Term]>::len);
        PrimDecl {
            name: name.to_string(),
            arity,
            ty,
            params: (0..arity).map(|_| crate::term::fresh_var()).collect(),
            refinement: Refinement::True,
            eval,
        }
    }

    /// Attach a refinement whose slots are argument positions.
    pub fn with_refinement(mut self, positional: Vec<PosFrag>) -> PrimDecl {
        self.refinement = Refinement::leaf(
            positional
                .into_iter()
                .map(|f| match f {
                    PosFrag::Text(t) => Frag::Text(t),
                    PosFrag::Arg(i) => Frag::Slot(self.params[i].clone()),
                })
                .collect(),
        );
        self
    }
}

/// Refinement fragment addressing arguments by position.
#[derive(Clone, Debug)]
pub enum PosFrag {
    Text(String),
    Arg(usize),
}

/// A clause of an interpreted (higher-order) background predicate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterpretedClause {
    pub exists: Vec<VarId>,
    pub head: Atom,
    pub head_type: Term,
    pub body: Vec<(Atom, Term)>,
}

impl InterpretedClause {
    pub fn name(&self) -> &str {
        self.head.pred.as_const().unwrap_or("")
    }
}

/// Refinement shared by every clause of an interpreted predicate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InterpRef {
    pub name: String,
    pub params: Vec<Term>,
    pub refinement: Refinement,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Metarule {
    pub name: String,
    pub exists: Vec<VarId>,
    pub head: Atom,
    pub head_type: Term,
    pub body: Vec<(Atom, Term)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Problem {
    pub prims: Vec<PrimDecl>,
    pub interpreted: Vec<InterpretedClause>,
    pub interp_refs: Vec<InterpRef>,
    pub metarules: Vec<Metarule>,
    pub pos: Vec<Atom>,
    pub neg: Vec<Atom>,
    pub example_type: Option<Term>,
    /// SMT-LIB text emitted verbatim before every refinement query.
    pub smt_defines: Vec<String>,
    pub options: Options,
}

impl Problem {
    pub fn prim(&self, name: &str, arity: usize) -> Option<&PrimDecl> {
        self.prims.iter().find(|p| p.name == name && p.arity == arity)
    }

    pub fn is_interpreted(&self, name: &str) -> bool {
        self.interpreted.iter().any(|c| c.name() == name)
    }

    pub fn interp_ref(&self, name: &str) -> Option<&InterpRef> {
        self.interp_refs.iter().find(|r| r.name == name)
    }

    pub fn metarule(&self, name: &str) -> Option<&Metarule> {
        self.metarules.iter().find(|m| m.name == name)
    }

    /// Name of the example predicate.
    pub fn example_pred(&self) -> Option<&str> {
        self.pos.first().or(self.neg.first()).and_then(|a| a.pred.as_const())
    }

    /// Append another problem's declarations; options of `self` are kept.
    pub fn extend(&mut self, other: Problem) {
        self.prims.extend(other.prims);
        self.interpreted.extend(other.interpreted);
        self.interp_refs.extend(other.interp_refs);
        self.metarules.extend(other.metarules);
        self.pos.extend(other.pos);
        self.neg.extend(other.neg);
        if self.example_type.is_none() {
            self.example_type = other.example_type;
        }
        self.smt_defines.extend(other.smt_defines);
    }

    /// Structural checks that do not depend on declaration order.
    pub fn validate(&self) -> Result<()> {
        let mut seen: FxHashMap<(&str, usize), ()> = FxHashMap::default();
        for p in &self.prims {
            if seen.insert((&p.name, p.arity), ()).is_some() {
                return Err(Error::DuplicatePrim {
                    name: p.name.clone(),
                    arity: p.arity,
                });
            }
            if let Evaluator::Table(rows) = &p.eval {
                for row in rows {
                    if row.len() != p.arity {
                        return Err(Error::Arity {
                            what: format!("fact of {}", p.name),
                            expected: p.arity,
                            found: row.len(),
                        });
                    }
                }
            }
            if let Evaluator::Builtin(b) = &p.eval {
                if b.arity() != p.arity {
                    return Err(Error::Arity {
                        what: format!("builtin {} for {}", b.name(), p.name),
                        expected: b.arity(),
                        found: p.arity,
                    });
                }
            }
        }
        for c in &self.interpreted {
            check_annotated("interpreted clause", &c.head, &c.head_type)?;
            for (a, t) in &c.body {
                check_annotated("interpreted body atom", a, t)?;
            }
        }
        for m in &self.metarules {
            check_annotated("metarule head", &m.head, &m.head_type)?;
            for (a, t) in &m.body {
                check_annotated("metarule body atom", a, t)?;
            }
            for v in &m.exists {
                let mut vars = Vec::new();
                m.head.collect_vars(&mut vars);
                for (a, _) in &m.body {
                    a.collect_vars(&mut vars);
                }
                if !vars.contains(v) {
                    return Err(Error::Problem(format!(
                        "metarule {}: existential variable does not occur in the clause",
                        m.name
                    )));
                }
            }
        }
        let pred = self.example_pred();
        for e in self.pos.iter().chain(&self.neg) {
            if !e.is_ground() {
                return Err(Error::Problem(format!("example {e} is not ground")));
            }
            if e.pred.as_const() != pred {
                return Err(Error::Problem("examples must share one predicate symbol".into()));
            }
            if let Some(t) = &self.example_type {
                check_annotated("example", e, t)?;
            }
        }
        Ok(())
    }
}

fn check_annotated(what: &str, atom: &Atom, ty: &Term) -> Result<()> {
    let n = types::pred_args(ty)
        .ok_or_else(|| Error::Problem(format!("{what} {atom}: type is not a predicate type")))?
        .len();
    if n != atom.arity() {
        return Err(Error::Arity {
            what: format!("type of {what} {atom}"),
            expected: atom.arity(),
            found: n,
        });
    }
    Ok(())
}
