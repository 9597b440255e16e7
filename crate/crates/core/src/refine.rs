//! Refinement propositions and the grand refinement of a derivation.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use rustc_hash::FxHashMap;

use crate::engine::{Engine, Goal, NodeKind};
use crate::error::{Error, Result};
use crate::kb::{Options, Theory};
use crate::smt::{
    check_cached, emit_smtlib, logic_for, solver_available, SmtStats, SolverSession, SolverVerdict, VerdictCache,
};
use crate::term::{fresh_var_id, Atom, Bindings, Renamer, Sym, Term, VarId};
use crate::types::{self, type_unify};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frag {
    Text(String),
    /// A variable slot; after grand-refinement construction it is always a
    /// `Term::Var` naming a context entry.
    Slot(Term),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Refinement {
    True,
    Leaf(Vec<Frag>),
    And(Box<Refinement>, Box<Refinement>),
    Or(Box<Refinement>, Box<Refinement>),
}

impl Refinement {
    /// A leaf; the literal text `true` collapses to `True`.
    pub fn leaf(frags: Vec<Frag>) -> Refinement {
        match frags.as_slice() {
            [] => Refinement::True,
            [Frag::Text(t)] if t.trim() == "true" => Refinement::True,
            _ => Refinement::Leaf(frags),
        }
    }

    pub fn text(t: &str) -> Refinement {
        Refinement::leaf(vec![Frag::Text(t.to_string())])
    }

    pub fn and(a: Refinement, b: Refinement) -> Refinement {
        match (a, b) {
            (Refinement::True, x) | (x, Refinement::True) => x,
            (a, b) => Refinement::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: Refinement, b: Refinement) -> Refinement {
        match (a, b) {
            (Refinement::True, _) | (_, Refinement::True) => Refinement::True,
            (a, b) => Refinement::Or(Box::new(a), Box::new(b)),
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Refinement::True)
    }

    /// Parse template text with `?Name` slots resolved by `slot`.
    pub fn parse_template(text: &str, mut slot: impl FnMut(&str) -> Result<Term>) -> Result<Refinement> {
        let mut frags = Vec::new();
        let mut lit = String::new();
        let mut chars = text.char_indices().peekable();
        while let Some((_, c)) = chars.next() {
            if c != '?' {
                lit.push(c);
                continue;
            }
            let mut name = String::new();
            while let Some(&(_, n)) = chars.peek() {
                if n.is_ascii_alphanumeric() || n == '_' {
                    name.push(n);
                    chars.next();
                } else {
                    break;
                }
            }
            if name.is_empty() {
                return Err(Error::Problem("`?` must be followed by a variable name".into()));
            }
            if !lit.is_empty() {
                frags.push(Frag::Text(std::mem::take(&mut lit)));
            }
            frags.push(Frag::Slot(slot(&name)?));
        }
        if !lit.is_empty() {
            frags.push(Frag::Text(lit));
        }
        Ok(Refinement::leaf(frags))
    }

    /// Render with slots printed as `?<name>`.
    pub fn template_text(&self, mut name: impl FnMut(&Term) -> String) -> String {
        let mut out = String::new();
        self.write_template(&mut name, &mut out);
        out
    }

    fn write_template(&self, name: &mut impl FnMut(&Term) -> String, out: &mut String) {
        match self {
            Refinement::True => out.push_str("true"),
            Refinement::Leaf(frags) => {
                for f in frags {
                    match f {
                        Frag::Text(t) => out.push_str(t),
                        Frag::Slot(t) => {
                            out.push('?');
                            out.push_str(&name(t));
                        }
                    }
                }
            }
            Refinement::And(a, b) | Refinement::Or(a, b) => {
                out.push_str(if matches!(self, Refinement::And(..)) {
                    "(and "
                } else {
                    "(or "
                });
                a.write_template(name, out);
                out.push(' ');
                b.write_template(name, out);
                out.push(')');
            }
        }
    }

    /// Rewrite every slot term.
    pub fn map_slots(&self, f: &mut impl FnMut(&Term) -> Term) -> Refinement {
        match self {
            Refinement::True => Refinement::True,
            Refinement::Leaf(frags) => Refinement::Leaf(
                frags
                    .iter()
                    .map(|fr| match fr {
                        Frag::Text(t) => Frag::Text(t.clone()),
                        Frag::Slot(t) => Frag::Slot(f(t)),
                    })
                    .collect(),
            ),
            Refinement::And(a, b) => Refinement::And(Box::new(a.map_slots(f)), Box::new(b.map_slots(f))),
            Refinement::Or(a, b) => Refinement::Or(Box::new(a.map_slots(f)), Box::new(b.map_slots(f))),
        }
    }

    /// Substitute declaration parameters by actual arguments.
    pub fn instantiate(&self, params: &[Term], args: &[Term]) -> Refinement {
        self.map_slots(&mut |t| match params.iter().position(|p| p == t) {
            Some(i) => args[i].clone(),
            None => t.clone(),
        })
    }

    pub fn slots(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        self.collect_slots(&mut out);
        out
    }

    fn collect_slots<'a>(&'a self, out: &mut Vec<&'a Term>) {
        match self {
            Refinement::True => {}
            Refinement::Leaf(frags) => out.extend(frags.iter().filter_map(|f| match f {
                Frag::Slot(t) => Some(t),
                Frag::Text(_) => None,
            })),
            Refinement::And(a, b) | Refinement::Or(a, b) => {
                a.collect_slots(out);
                b.collect_slots(out);
            }
        }
    }
}

/// One typed variable of a grand refinement.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtxEntry {
    pub var: VarId,
    /// Fully walked type; remaining type variables are left abstract.
    pub ty: Term,
    /// Ground value, if the variable is already instantiated.
    pub value: Option<Term>,
}

pub type VariableContext = Vec<CtxEntry>;

/// Solver settings plus a verdict cache shared by every checker using the
/// same solver command.
pub struct SmtChecker {
    pub cmd: String,
    pub theory: Theory,
    pub timeout_ms: u64,
    pub preamble: Vec<String>,
    cache: VerdictCache,
    session: SolverSession,
    pub stats: SmtStats,
}

fn shared_state(cmd: &str) -> (bool, VerdictCache) {
    static STATE: OnceLock<Mutex<HashMap<String, (bool, VerdictCache)>>> = OnceLock::new();
    let map = STATE.get_or_init(Default::default);
    let mut m = map.lock().unwrap_or_else(|p| p.into_inner());
    m.entry(cmd.to_string())
        .or_insert_with(|| (solver_available(cmd), VerdictCache::default()))
        .clone()
}

impl SmtChecker {
    /// Fails with a configuration error when the solver cannot be run.
    pub fn new(options: &Options, preamble: &[String]) -> Result<SmtChecker> {
        let (available, cache) = shared_state(&options.solver_cmd);
        if !available {
            return Err(Error::Config(format!(
                "SMT solver `{}` is not available; refined mode needs one",
                options.solver_cmd
            )));
        }
        Ok(SmtChecker {
            cmd: options.solver_cmd.clone(),
            theory: options.smt_theory,
            timeout_ms: options.smt_timeout_ms,
            preamble: preamble.to_vec(),
            cache,
            session: SolverSession::new(
                &options.solver_cmd,
                options.smt_timeout_ms,
                logic_for(options.smt_theory),
            ),
            stats: SmtStats::default(),
        })
    }

    /// Solve one grand refinement. Only a definite `unsat` prunes.
    pub fn check(&mut self, ctx: &[CtxEntry], r: &Refinement) -> SolverVerdict {
        if r.is_true() {
            self.stats.trivial += 1;
            return SolverVerdict::Sat;
        }
        match emit_smtlib(ctx, r, self.theory, &self.preamble, self.timeout_ms) {
            Ok(p) => check_cached(&p, &mut self.session, &self.cache, &mut self.stats),
            Err(e) => {
                self.stats.errors += 1;
                SolverVerdict::ProcessError(e.to_string())
            }
        }
    }
}

/// Builds the context and proposition for one root goal.
struct Builder<'a, 'p> {
    e: &'a mut Engine<'p>,
    ctx: VariableContext,
    by_goal: FxHashMap<u64, usize>,
    visiting: Vec<Sym>,
    /// Equalities between context types. Declaration copies are undone
    /// after each leaf, so the types they equate are kept here.
    tyb: Bindings,
}

impl Builder<'_, '_> {
    fn goal(&mut self, atom: &Atom, dt: Option<&Term>, id: u64) -> Refinement {
        let Some(&ni) = self.by_goal.get(&id) else {
            return self.leaf(atom, dt);
        };
        let node = &self.e.nodes[ni];
        let kind = node.kind;
        let symbol = node.symbol.clone();
        let body: Vec<(Atom, Option<Term>, u64)> = node
            .body
            .iter()
            .map(|g| (g.atom.clone(), g.dt().cloned(), g.id))
            .collect();
        let mut r = if kind == NodeKind::Inter {
            self.interp_ref(&symbol, atom, dt)
        } else {
            Refinement::True
        };
        for (a, d, gid) in body {
            r = Refinement::and(r, self.goal(&a, d.as_ref(), gid));
        }
        r
    }

    /// Refinement of a goal with no expansion in the derivation.
    fn leaf(&mut self, atom: &Atom, dt: Option<&Term>) -> Refinement {
        let name = match self.e.b.walk(&atom.pred) {
            Term::Const(n) => n,
            _ => return Refinement::True,
        };
        let pb = self.e.problem();
        if let Some(decl) = pb.prim(&name, atom.arity()) {
            if decl.refinement.is_true() {
                return Refinement::True;
            }
            return self.instantiated(&decl.refinement, &decl.params, &decl.ty, atom, dt);
        }
        if pb.is_interpreted(&name) {
            return self.interp_ref(&name, atom, dt);
        }
        let closed = !self.e.invent || self.e.sub_count >= self.e.bound;
        if closed && !self.visiting.contains(&name) {
            return self.definitions(&name, atom, dt);
        }
        Refinement::True
    }

    fn interp_ref(&mut self, name: &str, atom: &Atom, dt: Option<&Term>) -> Refinement {
        let pb = self.e.problem();
        let (Some(r), Some(clause)) = (pb.interp_ref(name), pb.interpreted.iter().find(|c| c.name() == name)) else {
            return Refinement::True;
        };
        if r.refinement.is_true() || r.params.len() != atom.arity() {
            return Refinement::True;
        }
        self.instantiated(&r.refinement, &r.params, &clause.head_type, atom, dt)
    }

    /// Instantiate a declared refinement on the goal arguments, typing them
    /// by unifying the goal's derivation type with a copy of `decl_ty`.
    fn instantiated(
        &mut self,
        r: &Refinement,
        params: &[Term],
        decl_ty: &Term,
        atom: &Atom,
        dt: Option<&Term>,
    ) -> Refinement {
        let cp = self.e.b.checkpoint();
        let fresh = Renamer::new().term(decl_ty);
        if let Some(d) = dt {
            if !type_unify(d, &fresh, &mut self.e.b) {
                self.e.b.undo(cp);
                return Refinement::True;
            }
        }
        let arg_types: Vec<Term> = types::pred_args(&self.e.b.walk(&fresh))
            .map(<[Term]>::to_vec)
            .unwrap_or_default();
        let keys: Vec<Term> = atom
            .args
            .iter()
            .enumerate()
            .map(|(i, a)| self.key(a, arg_types.get(i)))
            .collect();
        self.e.b.undo(cp);
        r.instantiate(params, &keys)
    }

    /// Or over the clauses of a defined symbol that can no longer grow.
    fn definitions(&mut self, name: &Sym, atom: &Atom, dt: Option<&Term>) -> Refinement {
        let defs: Vec<usize> = (0..self.e.nodes.len())
            .filter(|&i| self.e.nodes[i].kind == NodeKind::Sub && self.e.nodes[i].symbol == *name)
            .collect();
        self.visiting.push(name.clone());
        let mut out: Option<Refinement> = None;
        for i in defs {
            let meta = self.e.nodes[i].meta.clone().expect("sub nodes carry their metarule");
            let subs = self.e.nodes[i].subs.clone();
            let cp = self.e.b.checkpoint();
            let mut r = Renamer::new();
            for (v, s) in meta.exists.iter().zip(&subs) {
                r.seed(*v, s.clone());
            }
            for (h, a) in meta.head.args.iter().zip(&atom.args) {
                if let Term::Var(v) = h {
                    if r.image(*v).is_none() {
                        r.seed(*v, a.clone());
                    }
                }
            }
            let head = r.atom(&meta.head);
            let mut ok = self.e.b.unify_atoms(&head, atom, false);
            let mut body_types = Vec::new();
            if let (true, Some(d)) = (ok, dt) {
                let mut rd = Renamer::new();
                ok = type_unify(d, &rd.term(&meta.head_type), &mut self.e.b);
                body_types = meta.body.iter().map(|(_, t)| Some(rd.term(t))).collect();
            }
            if ok {
                let mut branch = Refinement::True;
                for (k, (b, _)) in meta.body.iter().enumerate() {
                    let ba = r.atom(b);
                    let bt = body_types.get(k).cloned().flatten();
                    branch = Refinement::and(branch, self.leaf(&ba, bt.as_ref()));
                }
                out = Some(match out {
                    None => branch,
                    Some(prev) => Refinement::or(prev, branch),
                });
            }
            self.e.b.undo(cp);
        }
        self.visiting.pop();
        // No applicable clause means the goal cannot succeed.
        out.unwrap_or_else(|| Refinement::text("false"))
    }

    /// Context variable standing for one argument.
    fn key(&mut self, arg: &Term, ty: Option<&Term>) -> Term {
        let ty = match ty.map(|t| self.e.b.walk(t)) {
            Some(t) if types::pred_args(&t).is_none() => t,
            // Not representable: the slot stays outside the context.
            _ => return Term::Var(fresh_var_id()),
        };
        let w = self.e.b.walk(arg);
        if let Term::Var(v) = w {
            match self.ctx.iter_mut().find(|c| c.var == v) {
                Some(c) => {
                    let known = self.tyb.walk(&c.ty);
                    let new = self.tyb.walk(&ty);
                    self.tyb.unify(&known, &new, true);
                }
                None => self.ctx.push(CtxEntry {
                    var: v,
                    ty,
                    value: None,
                }),
            }
            return w;
        }
        let value = w.is_ground().then_some(w);
        if value.is_some() {
            if let Some(c) = self.ctx.iter().find(|c| c.value == value && c.ty == ty) {
                return Term::Var(c.var);
            }
        }
        let v = fresh_var_id();
        self.ctx.push(CtxEntry { var: v, ty, value });
        Term::Var(v)
    }
}

/// The conjunction of refinements along the current derivation of `root`,
/// with its typed variable context.
///
/// Expanded goals contribute their subgoals; primitive and interpreted leaves
/// contribute their declared refinements; calls to an invented predicate
/// whose definition is final contribute the disjunction of its clauses.
/// Anything still open contributes `true`, so the result only weakens what
/// the finished derivation will require.
pub(crate) fn grand_refinement(e: &mut Engine<'_>, root: &Goal) -> Result<(VariableContext, Refinement)> {
    let by_goal = e
        .nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| n.goal_id != u64::MAX)
        .map(|(i, n)| (n.goal_id, i))
        .collect();
    let mut b = Builder {
        e,
        ctx: Vec::new(),
        by_goal,
        visiting: Vec::new(),
        tyb: Bindings::new(),
    };
    let r = b.goal(&root.atom, root.dt(), root.id);
    let (mut ctx, tyb) = (b.ctx, b.tyb);
    for c in &mut ctx {
        c.ty = tyb.walk(&e.b.walk(&c.ty));
    }
    Ok((ctx, r))
}

/// False only when the solver proves the current derivation of `root`
/// cannot be completed.
pub(crate) fn check_refinement(e: &mut Engine<'_>, root: &Goal) -> bool {
    let Ok((ctx, r)) = grand_refinement(e, root) else {
        return true;
    };
    match e.checker_mut() {
        Some(c) => c.check(&ctx, &r) != SolverVerdict::Unsat,
        None => true,
    }
}
