//! The meta-interpretive search.
//!
//! Goals are proved leftmost-first by four ordered disjuncts: a primitive
//! call, expansion of an interpreted clause, reuse of an invented clause, and
//! invention of a new clause from a metarule. The search is written in
//! continuation-passing style over a trail of bindings, so backtracking is
//! `undo` plus popping the derivation nodes a disjunct pushed.
//!
//! In typed modes every goal carries a derivation type (how the examples
//! constrain it) and a general type (how the background knowledge constrains
//! it). Type checks run before the decision counter is advanced, so a pruned
//! alternative costs no step.

mod extract;

use std::collections::BTreeMap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use serde::Serialize;

pub use extract::{clause_to_string, LearnedClause, LearnedProgram};

use crate::error::{Error, Result};
use crate::kb::{solve_prim, InterpretedClause, Metarule, Mode, Problem};
use crate::refine::{self, SmtChecker};
use crate::smt::SmtStats;
use crate::term::{Atom, Bindings, Clause, Renamer, Sym, Term};
use crate::types::{self, combine_types, type_unify, unify_with_copy, TypedAtom};

/// Whether the search should keep going after a continuation returns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Flow {
    Continue,
    Stop,
}

macro_rules! stop_on {
    ($e:expr) => {
        if let Flow::Stop = $e {
            return Flow::Stop;
        }
    };
}

#[derive(Clone, Debug)]
pub(crate) struct Ancestor {
    atom: Atom,
    next: Option<Rc<Ancestor>>,
}

#[derive(Clone, Debug)]
pub(crate) struct Goal {
    pub id: u64,
    pub atom: Atom,
    /// Derivation type and general type; `None` in untyped mode.
    pub types: Option<(Term, Term)>,
    pub depth: usize,
    /// Index into `Engine::roots` of the example this goal serves.
    pub root: usize,
    ancestors: Option<Rc<Ancestor>>,
}

impl Goal {
    pub fn dt(&self) -> Option<&Term> {
        self.types.as_ref().map(|(d, _)| d)
    }
}

pub(crate) type GoalList = Option<Rc<GoalCell>>;

pub(crate) struct GoalCell {
    goal: Goal,
    next: GoalList,
}

fn push_front(goals: &[Goal], rest: &GoalList) -> GoalList {
    goals.iter().rev().fold(rest.clone(), |next, g| {
        Some(Rc::new(GoalCell { goal: g.clone(), next }))
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum NodeKind {
    /// A new invented clause.
    Sub,
    /// Reuse of an invented clause.
    Inv,
    /// Expansion of an interpreted clause.
    Inter,
}

/// One step of the derivation trace.
#[derive(Clone, Debug)]
pub(crate) struct Node {
    pub kind: NodeKind,
    pub goal_id: u64,
    pub atom: Atom,
    /// General type of the clause head; for `Sub` nodes this is the stored
    /// type later invocations are checked against.
    pub gt: Option<Term>,
    /// Head predicate symbol (invented name or interpreted name).
    pub symbol: Sym,
    pub meta: Option<Rc<Metarule>>,
    pub subs: Vec<Term>,
    pub body: Vec<Goal>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EngineStats {
    /// Primitive evaluations by predicate name.
    pub prim_evals: BTreeMap<String, u64>,
    /// Goals that entered the search with a derivation type that was not an
    /// instance of their general type (checked in debug builds only).
    pub type_invariant_violations: u64,
}

/// How a learn invocation ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnOutcome {
    Found,
    /// The search space up to `max_clauses` holds no consistent program.
    NotFound,
    /// The configured step limit was reached first.
    StepLimit,
}

#[derive(Clone, Debug, Serialize)]
pub struct LearnResult {
    pub outcome: LearnOutcome,
    #[serde(skip)]
    pub program: Option<LearnedProgram>,
    pub steps: u64,
    #[serde(serialize_with = "ser_ms")]
    pub elapsed: Duration,
    pub smt: SmtStats,
    pub stats: EngineStats,
}

fn ser_ms<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1000.0)
}

impl LearnResult {
    pub fn program_text(&self) -> Option<String> {
        self.program.as_ref().map(LearnedProgram::text)
    }
}

/// Attach the example type as derivation type and a fresh, unconstrained
/// general type.
pub fn decorate_types(example: &Atom, example_type: &Term) -> Result<TypedAtom> {
    let n = types::pred_args(example_type)
        .ok_or_else(|| Error::Problem("example type must be a predicate type".into()))?
        .len();
    if n != example.arity() {
        return Err(Error::Arity {
            what: format!("example {example}"),
            expected: n,
            found: example.arity(),
        });
    }
    Ok(TypedAtom {
        atom: example.clone(),
        dt: Renamer::new().term(example_type),
        gt: crate::term::fresh_var(),
    })
}

type Cont<'a, 'p> = dyn FnMut(&mut Engine<'p>) -> Flow + 'a;
type ProgramHook<'p> = Box<dyn FnMut(&LearnedProgram) + 'p>;

/// A search session over one problem.
pub struct Engine<'p> {
    pb: &'p Problem,
    mode: Mode,
    pub(crate) b: Bindings,
    pub(crate) nodes: Vec<Node>,
    pub(crate) sub_count: usize,
    pub(crate) bound: usize,
    pub(crate) invent: bool,
    steps: u64,
    step_limit: Option<u64>,
    limit_hit: bool,
    next_goal: u64,
    pub(crate) roots: Vec<Goal>,
    metarules: Vec<Rc<Metarule>>,
    interpreted: Vec<Rc<InterpretedClause>>,
    example_pred: Sym,
    max_depth: usize,
    checker: Option<SmtChecker>,
    stats: EngineStats,
    found: Option<LearnedProgram>,
    on_program: Option<ProgramHook<'p>>,
}

impl<'p> Engine<'p> {
    /// Create a session. Refined mode fails fast when the solver cannot run.
    pub fn new(pb: &'p Problem, mode: Mode) -> Result<Engine<'p>> {
        let checker = if mode == Mode::Refined {
            Some(SmtChecker::new(&pb.options, &pb.smt_defines)?)
        } else {
            None
        };
        Ok(Engine {
            pb,
            mode,
            b: Bindings::new(),
            nodes: Vec::new(),
            sub_count: 0,
            bound: pb.options.max_clauses,
            invent: true,
            steps: 0,
            step_limit: pb.options.step_limit,
            limit_hit: false,
            next_goal: 0,
            roots: Vec::new(),
            metarules: pb.metarules.iter().cloned().map(Rc::new).collect(),
            interpreted: pb.interpreted.iter().cloned().map(Rc::new).collect(),
            example_pred: Sym::from(pb.example_pred().unwrap_or("p")),
            max_depth: pb.options.max_depth,
            checker,
            stats: EngineStats::default(),
            found: None,
            on_program: None,
        })
    }

    pub fn problem(&self) -> &'p Problem {
        self.pb
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn stats(&self) -> &EngineStats {
        &self.stats
    }

    pub fn smt_stats(&self) -> SmtStats {
        self.checker.as_ref().map(|c| c.stats.clone()).unwrap_or_default()
    }

    pub fn set_invention(&mut self, on: bool) {
        self.invent = on;
    }

    /// Add an invented clause to the program before the search starts: the
    /// named metarule instantiated with `subs` for its existential variables.
    pub fn add_clause_node(&mut self, metarule: &Metarule, subs: Vec<Term>, gt: Option<Term>) -> Result<()> {
        if subs.len() != metarule.exists.len() {
            return Err(Error::Arity {
                what: format!("substitution for metarule {}", metarule.name),
                expected: metarule.exists.len(),
                found: subs.len(),
            });
        }
        let meta = Rc::new(metarule.clone());
        let (head, body) = instantiate(&meta, &subs);
        let symbol = match self.b.shallow(&head.pred) {
            Term::Const(s) => s.clone(),
            _ => return Err(Error::Problem("clause head predicate must be named".into())),
        };
        let gt = if self.mode.typed() {
            Some(gt.unwrap_or_else(|| Renamer::new().term(&meta.head_type)))
        } else {
            None
        };
        let body = body.into_iter().map(|a| self.detached_goal(a)).collect();
        self.nodes.push(Node {
            kind: NodeKind::Sub,
            goal_id: u64::MAX,
            atom: head,
            gt,
            symbol,
            meta: Some(meta),
            subs,
            body,
        });
        self.sub_count += 1;
        Ok(())
    }

    /// Add a fully named clause, e.g. from a learned program.
    pub fn add_clause(&mut self, clause: &Clause) -> Result<()> {
        let fresh = |n: usize| types::pred_type((0..n).map(|_| crate::term::fresh_var()).collect());
        let meta = Metarule {
            name: "clause".to_string(),
            exists: Vec::new(),
            head: clause.head.clone(),
            head_type: fresh(clause.head.arity()),
            body: clause.body.iter().map(|a| (a.clone(), fresh(a.arity()))).collect(),
        };
        self.add_clause_node(&meta, Vec::new(), None)
    }

    fn detached_goal(&mut self, atom: Atom) -> Goal {
        self.next_goal += 1;
        Goal {
            id: self.next_goal,
            atom,
            types: None,
            depth: 0,
            root: 0,
            ancestors: None,
        }
    }

    fn root_goal(&mut self, example: &Atom) -> Result<Goal> {
        let types = if self.mode.typed() {
            let ty = self
                .pb
                .example_type
                .as_ref()
                .ok_or_else(|| Error::Problem("typed modes need an example_type".into()))?;
            let t = decorate_types(example, ty)?;
            Some((t.dt, t.gt))
        } else {
            None
        };
        self.next_goal += 1;
        let g = Goal {
            id: self.next_goal,
            atom: example.clone(),
            types,
            depth: 0,
            root: self.roots.len(),
            ancestors: None,
        };
        self.roots.push(g.clone());
        Ok(g)
    }

    /// Prove one ground atom against the current program without invention.
    pub fn prove_example(&mut self, example: &Atom) -> Result<bool> {
        let saved = self.invent;
        self.invent = false;
        let g = self.root_goal(example)?;
        let goals = push_front(&[g], &None);
        let flow = self.solve(&goals, &mut |_| Flow::Stop);
        self.roots.pop();
        self.invent = saved;
        Ok(flow == Flow::Stop && !self.limit_hit)
    }

    /// Grand refinement of a fresh goal with the given derivation type,
    /// against the current program.
    pub fn goal_refinement(
        &mut self,
        atom: &Atom,
        dt: Option<&Term>,
    ) -> Result<(refine::VariableContext, refine::Refinement)> {
        self.next_goal += 1;
        let g = Goal {
            id: self.next_goal,
            atom: atom.clone(),
            types: dt.map(|d| (d.clone(), crate::term::fresh_var())),
            depth: 0,
            root: 0,
            ancestors: None,
        };
        refine::grand_refinement(self, &g)
    }

    fn tick(&mut self) -> bool {
        self.steps += 1;
        if self.step_limit.is_some_and(|l| self.steps > l) {
            self.limit_hit = true;
            return false;
        }
        true
    }

    fn fresh_goal(&mut self, parent: &Goal, t: TypedAtom, typed: bool) -> Goal {
        self.next_goal += 1;
        Goal {
            id: self.next_goal,
            atom: t.atom,
            types: typed.then_some((t.dt, t.gt)),
            depth: parent.depth + 1,
            root: parent.root,
            ancestors: Some(Rc::new(Ancestor {
                atom: parent.atom.clone(),
                next: parent.ancestors.clone(),
            })),
        }
    }

    fn body_goals(&mut self, parent: &Goal, body: Vec<Atom>, dts: Vec<Term>, gts: Vec<Term>) -> Option<Vec<Goal>> {
        let typed = parent.types.is_some();
        let combined = if typed {
            let d: Vec<_> = body.iter().cloned().zip(dts).collect();
            let g: Vec<_> = body.iter().cloned().zip(gts).collect();
            combine_types(&d, &g, &self.b).ok()?
        } else {
            body.into_iter()
                .map(|atom| TypedAtom {
                    atom,
                    dt: Term::Int(0),
                    gt: Term::Int(0),
                })
                .collect()
        };
        Some(
            combined
                .into_iter()
                .map(|t| self.fresh_goal(parent, t, typed))
                .collect(),
        )
    }

    /// A goal whose walked atom is a variant of a walked ancestor can only
    /// loop; such goals fail.
    fn loops(&self, g: &Goal) -> bool {
        let mut cur = g.ancestors.as_deref();
        while let Some(a) = cur {
            if a.atom.arity() == g.atom.arity()
                && self.b.shallow(&a.atom.pred) == self.b.shallow(&g.atom.pred)
                && self.b.variant_atoms(&a.atom, &g.atom)
            {
                return true;
            }
            cur = a.next.as_deref();
        }
        false
    }

    fn is_invented(&self, name: &str) -> bool {
        self.nodes.iter().any(|n| n.kind == NodeKind::Sub && &*n.symbol == name)
    }

    fn invented_name(&self) -> Sym {
        let mut seen: Vec<&str> = Vec::new();
        for n in &self.nodes {
            if n.kind == NodeKind::Sub && n.symbol != self.example_pred && !seen.contains(&&*n.symbol) {
                seen.push(&n.symbol);
            }
        }
        let mut k = seen.len() + 1;
        loop {
            let name = format!("{}_{k}", self.example_pred);
            if !seen.contains(&name.as_str()) {
                return Sym::from(name);
            }
            k += 1;
        }
    }

    fn is_pred_symbol(&self, name: &str) -> bool {
        *self.example_pred == *name
            || self.pb.prims.iter().any(|p| p.name == name)
            || self.interpreted.iter().any(|c| c.name() == name)
            || self.is_invented(name)
    }

    /// Existential metarule variables stand for predicates: each is either
    /// unbound or bound to a predicate symbol.
    fn subs_ok(&self) -> bool {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Sub).all(|n| {
            n.subs.iter().all(|s| match self.b.shallow(s) {
                Term::Var(_) => true,
                Term::Const(c) => self.is_pred_symbol(c),
                _ => false,
            })
        })
    }

    /// Whether an unbound predicate variable is a metarule existential of
    /// the current program. Other variables hold data, not predicates.
    fn is_existential(&self, pred: &Term) -> bool {
        let Some(v) = self.b.representative(pred) else {
            return false;
        };
        self.nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Sub)
            .any(|n| n.subs.iter().any(|s| self.b.representative(s) == Some(v)))
    }

    fn keep_after_check(&mut self, root: usize) -> bool {
        if self.checker.is_none() {
            return true;
        }
        let goal = self.roots[root].clone();
        refine::check_refinement(self, &goal)
    }

    pub(crate) fn checker_mut(&mut self) -> Option<&mut SmtChecker> {
        self.checker.as_mut()
    }

    pub(crate) fn solve(&mut self, goals: &GoalList, k: &mut Cont<'_, 'p>) -> Flow {
        match goals {
            None => k(self),
            Some(cell) => {
                let cell = cell.clone();
                self.prove_aux(&cell.goal, &cell.next, k)
            }
        }
    }

    fn prove_aux(&mut self, g: &Goal, rest: &GoalList, k: &mut Cont<'_, 'p>) -> Flow {
        if self.limit_hit {
            return Flow::Stop;
        }
        if g.depth > self.max_depth {
            return Flow::Continue;
        }
        if cfg!(debug_assertions) {
            if let Some((dt, gt)) = &g.types {
                if !types::instance_of(dt, gt, &self.b) {
                    self.stats.type_invariant_violations += 1;
                }
            }
        }
        let arity = g.atom.arity();
        match self.b.shallow(&g.atom.pred).clone() {
            Term::Const(name) => {
                if self.loops(g) {
                    return Flow::Continue;
                }
                if let Some(i) = self.pb.prims.iter().position(|p| *p.name == *name && p.arity == arity) {
                    return self.try_prim(i, g, rest, k);
                }
                if self.interpreted.iter().any(|c| c.name() == &*name) {
                    return self.try_interpreted(g, rest, k);
                }
                stop_on!(self.try_reuse(g, rest, k));
                if name == self.example_pred || self.is_invented(&name) {
                    return self.try_invent(g, rest, k);
                }
                Flow::Continue
            }
            Term::Var(_) => {
                if !self.is_existential(&g.atom.pred) {
                    return Flow::Continue;
                }
                for i in 0..self.pb.prims.len() {
                    if self.pb.prims[i].arity == arity {
                        stop_on!(self.try_prim(i, g, rest, k));
                    }
                }
                stop_on!(self.try_interpreted(g, rest, k));
                stop_on!(self.try_reuse(g, rest, k));
                self.try_invent(g, rest, k)
            }
            _ => Flow::Continue,
        }
    }

    /// Disjunct 1: call a primitive.
    fn try_prim(&mut self, i: usize, g: &Goal, rest: &GoalList, k: &mut Cont<'_, 'p>) -> Flow {
        let decl = &self.pb.prims[i];
        let cp = self.b.checkpoint();
        if !self.b.unify(&g.atom.pred, &Term::constant(&decl.name), false) {
            return Flow::Continue;
        }
        if let Some((dt, gt)) = &g.types {
            let ok = type_unify(dt, &Renamer::new().term(&decl.ty), &mut self.b)
                && type_unify(gt, &Renamer::new().term(&decl.ty), &mut self.b);
            if !ok {
                self.b.undo(cp);
                return Flow::Continue;
            }
        }
        if !self.keep_after_check(g.root) {
            self.b.undo(cp);
            return Flow::Continue;
        }
        if !self.tick() {
            self.b.undo(cp);
            return Flow::Stop;
        }
        *self.stats.prim_evals.entry(decl.name.clone()).or_default() += 1;
        let mut flow = Flow::Continue;
        for cand in solve_prim(decl, &g.atom.args, &self.b) {
            let cp2 = self.b.checkpoint();
            let ok = g.atom.args.iter().zip(&cand).all(|(a, c)| self.b.unify(a, c, false));
            if ok && self.subs_ok() {
                flow = self.solve(rest, k);
            }
            self.b.undo(cp2);
            if flow == Flow::Stop {
                break;
            }
        }
        self.b.undo(cp);
        flow
    }

    /// Disjunct 2: expand an interpreted clause.
    fn try_interpreted(&mut self, g: &Goal, rest: &GoalList, k: &mut Cont<'_, 'p>) -> Flow {
        let arity = g.atom.arity();
        for ci in 0..self.interpreted.len() {
            let clause = self.interpreted[ci].clone();
            if clause.head.arity() != arity {
                continue;
            }
            if let Term::Const(name) = self.b.shallow(&g.atom.pred) {
                if **name != *clause.name() {
                    continue;
                }
            }
            let cp = self.b.checkpoint();
            let mut r = Renamer::new();
            let head = r.atom(&clause.head);
            let body: Vec<Atom> = clause.body.iter().map(|(a, _)| r.atom(a)).collect();
            if !self.b.unify_atoms(&g.atom, &head, false) || !self.subs_ok() {
                self.b.undo(cp);
                continue;
            }
            let (mut dts, mut gts) = (Vec::new(), Vec::new());
            if let Some((dt, gt)) = &g.types {
                let (mut rd, mut rg) = (Renamer::new(), Renamer::new());
                let ok = type_unify(dt, &rd.term(&clause.head_type), &mut self.b)
                    && type_unify(gt, &rg.term(&clause.head_type), &mut self.b);
                if !ok {
                    self.b.undo(cp);
                    continue;
                }
                dts = clause.body.iter().map(|(_, t)| rd.term(t)).collect();
                gts = clause.body.iter().map(|(_, t)| rg.term(t)).collect();
            }
            let Some(body_goals) = self.body_goals(g, body, dts, gts) else {
                self.b.undo(cp);
                continue;
            };
            let pushed = self.mode == Mode::Refined;
            if pushed {
                let subs = clause
                    .exists
                    .iter()
                    .map(|v| r.image(*v).cloned().unwrap_or_else(crate::term::fresh_var))
                    .collect();
                self.nodes.push(Node {
                    kind: NodeKind::Inter,
                    goal_id: g.id,
                    atom: g.atom.clone(),
                    gt: g.types.as_ref().map(|(_, t)| t.clone()),
                    symbol: Sym::from(clause.name()),
                    meta: None,
                    subs,
                    body: body_goals.clone(),
                });
                if !self.keep_after_check(g.root) {
                    self.nodes.pop();
                    self.b.undo(cp);
                    continue;
                }
            }
            let flow = if self.tick() {
                self.solve(&push_front(&body_goals, rest), k)
            } else {
                Flow::Stop
            };
            if pushed {
                self.nodes.pop();
            }
            self.b.undo(cp);
            stop_on!(flow);
        }
        Flow::Continue
    }

    /// Disjunct 3: reuse an invented clause, newest first.
    fn try_reuse(&mut self, g: &Goal, rest: &GoalList, k: &mut Cont<'_, 'p>) -> Flow {
        let candidates: Vec<usize> = (0..self.nodes.len())
            .rev()
            .filter(|&i| self.nodes[i].kind == NodeKind::Sub)
            .collect();
        for i in candidates {
            let node = &self.nodes[i];
            if node.atom.arity() != g.atom.arity() {
                continue;
            }
            if let Term::Const(name) = self.b.shallow(&g.atom.pred) {
                if *name != node.symbol {
                    continue;
                }
            }
            let meta = node.meta.clone().expect("sub nodes carry their metarule");
            let subs = node.subs.clone();
            let stored_gt = node.gt.clone();
            let cp = self.b.checkpoint();
            if let (Some((dt, gt)), Some(stored)) = (&g.types, &stored_gt) {
                let ok = unify_with_copy(dt, stored, &mut self.b) && type_unify(gt, stored, &mut self.b);
                if !ok {
                    self.b.undo(cp);
                    continue;
                }
            }
            let Some((body_goals, _)) = self.instantiate_for(g, &meta, &subs) else {
                self.b.undo(cp);
                continue;
            };
            let pushed = self.mode == Mode::Refined;
            if pushed {
                self.nodes.push(Node {
                    kind: NodeKind::Inv,
                    goal_id: g.id,
                    atom: g.atom.clone(),
                    gt: stored_gt.clone(),
                    symbol: self.nodes[i].symbol.clone(),
                    meta: Some(meta),
                    subs,
                    body: body_goals.clone(),
                });
                if !self.keep_after_check(g.root) {
                    self.nodes.pop();
                    self.b.undo(cp);
                    continue;
                }
            }
            let flow = if self.tick() {
                self.solve(&push_front(&body_goals, rest), k)
            } else {
                Flow::Stop
            };
            if pushed {
                self.nodes.pop();
            }
            self.b.undo(cp);
            stop_on!(flow);
        }
        Flow::Continue
    }

    /// Unify the goal with an instance of `meta` under `subs` and build the
    /// typed body goals. Returns the body and the head symbol.
    fn instantiate_for(&mut self, g: &Goal, meta: &Metarule, subs: &[Term]) -> Option<(Vec<Goal>, Term)> {
        let mut r = Renamer::new();
        for (v, s) in meta.exists.iter().zip(subs) {
            r.seed(*v, s.clone());
        }
        let head = r.atom(&meta.head);
        let body: Vec<Atom> = meta.body.iter().map(|(a, _)| r.atom(a)).collect();
        if !self.b.unify_atoms(&g.atom, &head, false) || !self.subs_ok() {
            return None;
        }
        let (mut dts, mut gts) = (Vec::new(), Vec::new());
        if let Some((dt, gt)) = &g.types {
            let (mut rd, mut rg) = (Renamer::new(), Renamer::new());
            let ok = type_unify(dt, &rd.term(&meta.head_type), &mut self.b)
                && type_unify(gt, &rg.term(&meta.head_type), &mut self.b);
            if !ok {
                return None;
            }
            dts = meta.body.iter().map(|(_, t)| rd.term(t)).collect();
            gts = meta.body.iter().map(|(_, t)| rg.term(t)).collect();
        }
        let goals = self.body_goals(g, body, dts, gts)?;
        Some((goals, head.pred))
    }

    /// Disjunct 4: invent a clause from each metarule in turn.
    fn try_invent(&mut self, g: &Goal, rest: &GoalList, k: &mut Cont<'_, 'p>) -> Flow {
        if !self.invent || self.sub_count >= self.bound {
            return Flow::Continue;
        }
        for mi in 0..self.metarules.len() {
            let meta = self.metarules[mi].clone();
            if meta.head.arity() != g.atom.arity() {
                continue;
            }
            let cp = self.b.checkpoint();
            let subs: Vec<Term> = meta.exists.iter().map(|_| crate::term::fresh_var()).collect();
            let Some((body_goals, head_pred)) = self.instantiate_for(g, &meta, &subs) else {
                self.b.undo(cp);
                continue;
            };
            let symbol = match self.b.shallow(&head_pred).clone() {
                Term::Const(s) => s,
                Term::Var(_) => {
                    let name = self.invented_name();
                    self.b.unify(&head_pred, &Term::Const(name.clone()), false);
                    name
                }
                _ => {
                    self.b.undo(cp);
                    continue;
                }
            };
            self.nodes.push(Node {
                kind: NodeKind::Sub,
                goal_id: g.id,
                atom: g.atom.clone(),
                gt: g.types.as_ref().map(|(_, t)| t.clone()),
                symbol,
                meta: Some(meta),
                subs,
                body: body_goals.clone(),
            });
            self.sub_count += 1;
            let mut flow = Flow::Continue;
            let mut proceed = self.tick();
            if !proceed {
                flow = Flow::Stop;
            } else if self.pb.options.check_after_sub && !self.keep_after_check(g.root) {
                proceed = false;
            }
            if proceed {
                flow = self.solve(&push_front(&body_goals, rest), k);
            }
            self.sub_count -= 1;
            self.nodes.pop();
            self.b.undo(cp);
            stop_on!(flow);
        }
        Flow::Continue
    }

    /// Called once every positive example is proved: reject programs that
    /// prove a negative example or leave an existential variable open.
    fn on_positives_proved(&mut self) -> Flow {
        let negs = self.pb.neg.clone();
        for neg in &negs {
            let entailed = match self.prove_example(neg) {
                Ok(e) => e,
                Err(_) => return Flow::Continue,
            };
            if self.limit_hit {
                return Flow::Stop;
            }
            if entailed {
                return Flow::Continue;
            }
        }
        let open = self
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Sub)
            .any(|n| n.subs.iter().any(|s| !self.b.walk(s).is_ground()));
        if open {
            return Flow::Continue;
        }
        let program = extract::extract_program(self);
        match self.on_program.as_mut() {
            Some(hook) => {
                hook(&program);
                Flow::Continue
            }
            None => {
                self.found = Some(program);
                Flow::Stop
            }
        }
    }

    fn run(&mut self) -> Result<()> {
        let examples = self.pb.pos.clone();
        for bound in 1..=self.pb.options.max_clauses {
            self.bound = bound;
            self.roots.clear();
            let goals: Vec<Goal> = examples.iter().map(|e| self.root_goal(e)).collect::<Result<_>>()?;
            let list = push_front(&goals, &None);
            let flow = self.solve(&list, &mut |e: &mut Engine<'p>| e.on_positives_proved());
            if flow == Flow::Stop {
                break;
            }
        }
        Ok(())
    }
}

/// Instantiate a metarule with its existential variables fixed by `subs`.
pub(crate) fn instantiate(meta: &Metarule, subs: &[Term]) -> (Atom, Vec<Atom>) {
    let mut r = Renamer::new();
    for (v, s) in meta.exists.iter().zip(subs) {
        r.seed(*v, s.clone());
    }
    let head = r.atom(&meta.head);
    let body = meta.body.iter().map(|(a, _)| r.atom(a)).collect();
    (head, body)
}

fn finish(engine: Engine<'_>, start: Instant) -> LearnResult {
    let outcome = if engine.found.is_some() {
        LearnOutcome::Found
    } else if engine.limit_hit {
        LearnOutcome::StepLimit
    } else {
        LearnOutcome::NotFound
    };
    LearnResult {
        outcome,
        steps: engine.steps,
        elapsed: start.elapsed(),
        smt: engine.smt_stats(),
        stats: engine.stats.clone(),
        program: engine.found,
    }
}

/// Search for the smallest program consistent with the examples, trying
/// clause bounds `1..=max_clauses` in turn. Uses the mode in the options.
pub fn learn(problem: &Problem) -> Result<LearnResult> {
    learn_in(problem, problem.options.mode)
}

pub fn learn_in(problem: &Problem, mode: Mode) -> Result<LearnResult> {
    problem.validate()?;
    let start = Instant::now();
    let mut engine = Engine::new(problem, mode)?;
    engine.run()?;
    Ok(finish(engine, start))
}

/// Traverse the whole search space, reporting every consistent program met.
pub fn learn_exhaustive<'p>(
    problem: &'p Problem,
    mode: Mode,
    on_program: impl FnMut(&LearnedProgram) + 'p,
) -> Result<LearnResult> {
    problem.validate()?;
    let start = Instant::now();
    let mut engine = Engine::new(problem, mode)?;
    engine.on_program = Some(Box::new(on_program));
    engine.run()?;
    Ok(finish(engine, start))
}

/// Whether `atom` follows from the program and the background knowledge,
/// with no further invention.
pub fn entails(problem: &Problem, program: &[Clause], atom: &Atom) -> Result<bool> {
    let mut engine = Engine::new(problem, Mode::Untyped)?;
    engine.step_limit = None;
    for c in program {
        engine.add_clause(c)?;
    }
    engine.prove_example(atom)
}

/// The first answer to `atom` under the program, with its variables
/// instantiated, or `None` if there is none.
pub fn query_first(problem: &Problem, program: &[Clause], atom: &Atom) -> Result<Option<Atom>> {
    let mut engine = Engine::new(problem, Mode::Untyped)?;
    engine.step_limit = None;
    engine.invent = false;
    for c in program {
        engine.add_clause(c)?;
    }
    let g = engine.root_goal(atom)?;
    let goals = push_front(&[g], &None);
    let mut answer = None;
    engine.solve(&goals, &mut |e: &mut Engine<'_>| {
        answer = Some(e.b.walk_atom(atom));
        Flow::Stop
    });
    Ok(answer)
}
