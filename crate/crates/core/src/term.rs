//! Logic terms, trail-based bindings and unification.
//!
//! Terms are immutable trees with cheaply clonable shared children. Variable
//! identity is an integer drawn from a process-wide counter, so ids issued by
//! the parser, by renaming and by the search engine never collide.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rustc_hash::FxHashMap;

pub type VarId = u64;
pub type Sym = Arc<str>;

static NEXT_VAR: AtomicU64 = AtomicU64::new(1);

/// Issue a variable id that has never been handed out before.
pub fn fresh_var_id() -> VarId {
    NEXT_VAR.fetch_add(1, Ordering::Relaxed)
}

pub fn fresh_var() -> Term {
    Term::Var(fresh_var_id())
}

pub const NIL: &str = "nil";
pub const CONS: &str = "cons";

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(VarId),
    Const(Sym),
    Int(i64),
    Compound(Sym, Arc<[Term]>),
}

impl Term {
    pub fn constant(name: &str) -> Term {
        Term::Const(Arc::from(name))
    }

    pub fn compound(functor: &str, args: Vec<Term>) -> Term {
        Term::Compound(Arc::from(functor), args.into())
    }

    pub fn nil() -> Term {
        Term::Compound(Arc::from(NIL), Arc::from(Vec::new()))
    }

    pub fn cons(head: Term, tail: Term) -> Term {
        Term::compound(CONS, vec![head, tail])
    }

    /// Build a proper list, or a partial one when `tail` is given.
    pub fn list_with_tail(items: impl IntoIterator<Item = Term>, tail: Term) -> Term {
        let items: Vec<Term> = items.into_iter().collect();
        items.into_iter().rev().fold(tail, |acc, item| Term::cons(item, acc))
    }

    pub fn list(items: impl IntoIterator<Item = Term>) -> Term {
        Term::list_with_tail(items, Term::nil())
    }

    pub fn int_list(items: &[i64]) -> Term {
        Term::list(items.iter().map(|&i| Term::Int(i)))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn as_var(&self) -> Option<VarId> {
        match self {
            Term::Var(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_const(&self) -> Option<&str> {
        match self {
            Term::Const(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Term::Compound(f, args) if &**f == NIL && args.is_empty())
    }

    pub fn as_cons(&self) -> Option<(&Term, &Term)> {
        match self {
            Term::Compound(f, args) if &**f == CONS && args.len() == 2 => Some((&args[0], &args[1])),
            _ => None,
        }
    }

    /// Elements of a proper list. Does not walk bindings.
    pub fn list_items(&self) -> Option<Vec<Term>> {
        let mut out = Vec::new();
        let mut cur = self;
        loop {
            if cur.is_nil() {
                return Some(out);
            }
            let (h, t) = cur.as_cons()?;
            out.push(h.clone());
            cur = t;
        }
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Const(_) | Term::Int(_) => true,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
        }
    }

    pub fn collect_vars(&self, out: &mut Vec<VarId>) {
        match self {
            Term::Var(v) => {
                if !out.contains(v) {
                    out.push(*v)
                }
            }
            Term::Compound(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            _ => {}
        }
    }

    pub fn occurs(&self, v: VarId) -> bool {
        match self {
            Term::Var(w) => *w == v,
            Term::Compound(_, args) => args.iter().any(|a| a.occurs(v)),
            _ => false,
        }
    }

    /// Replace variables through `f`; variables mapped to `None` stay as they are.
    pub fn map_vars(&self, f: &mut impl FnMut(VarId) -> Option<Term>) -> Term {
        match self {
            Term::Var(v) => f(*v).unwrap_or_else(|| self.clone()),
            Term::Compound(functor, args) => {
                if args.is_empty() {
                    return self.clone();
                }
                Term::Compound(functor.clone(), args.iter().map(|a| a.map_vars(f)).collect())
            }
            _ => self.clone(),
        }
    }
}

/// An atom `p(t1,..,tn)` whose predicate position is a constant symbol or,
/// for higher-order atoms, a variable.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Atom {
    pub pred: Term,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(pred: Term, args: Vec<Term>) -> Atom {
        Atom { pred, args }
    }

    pub fn named(pred: &str, args: Vec<Term>) -> Atom {
        Atom {
            pred: Term::constant(pred),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.pred.is_ground() && self.args.iter().all(Term::is_ground)
    }

    pub fn map_vars(&self, f: &mut impl FnMut(VarId) -> Option<Term>) -> Atom {
        Atom {
            pred: self.pred.map_vars(f),
            args: self.args.iter().map(|a| a.map_vars(f)).collect(),
        }
    }

    pub fn collect_vars(&self, out: &mut Vec<VarId>) {
        self.pred.collect_vars(out);
        self.args.iter().for_each(|a| a.collect_vars(out));
    }
}

/// Position in the trail; undoing to it restores the bindings exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Checkpoint(usize);

/// Variable bindings with an undo trail. A variable is bound at most once
/// between undos, so undo is truncate-and-remove.
#[derive(Default, Clone)]
pub struct Bindings {
    map: FxHashMap<VarId, Term>,
    trail: Vec<VarId>,
}

impl fmt::Debug for Bindings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut entries: Vec<_> = self.map.iter().collect();
        entries.sort_by_key(|(k, _)| **k);
        f.debug_map().entries(entries).finish()
    }
}

impl PartialEq for Bindings {
    fn eq(&self, other: &Self) -> bool {
        self.map == other.map && self.trail == other.trail
    }
}

impl Bindings {
    pub fn new() -> Bindings {
        Bindings::default()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint(self.trail.len())
    }

    pub fn undo(&mut self, cp: Checkpoint) {
        for v in self.trail.drain(cp.0..) {
            self.map.remove(&v);
        }
    }

    pub fn lookup(&self, v: VarId) -> Option<&Term> {
        self.map.get(&v)
    }

    pub fn bind(&mut self, v: VarId, t: Term) {
        debug_assert!(!self.map.contains_key(&v), "variable {v} rebound without undo");
        self.map.insert(v, t);
        self.trail.push(v);
    }

    /// Dereference the top of a term.
    pub fn shallow<'a>(&'a self, mut t: &'a Term) -> &'a Term {
        while let Term::Var(v) = t {
            match self.map.get(v) {
                Some(next) => t = next,
                None => break,
            }
        }
        t
    }

    /// Last variable in the binding chain starting at `t`, if `t` is a variable.
    pub fn representative(&self, t: &Term) -> Option<VarId> {
        let mut v = t.as_var()?;
        while let Some(next) = self.map.get(&v) {
            match next {
                Term::Var(w) => v = *w,
                _ => break,
            }
        }
        Some(v)
    }

    /// Fully resolve a term: every bound variable is replaced transitively.
    pub fn walk(&self, t: &Term) -> Term {
        match self.shallow(t) {
            Term::Compound(f, args) if !args.is_empty() => {
                Term::Compound(f.clone(), args.iter().map(|a| self.walk(a)).collect())
            }
            other => other.clone(),
        }
    }

    pub fn walk_atom(&self, a: &Atom) -> Atom {
        Atom {
            pred: self.walk(&a.pred),
            args: a.args.iter().map(|t| self.walk(t)).collect(),
        }
    }

    fn occurs_in(&self, v: VarId, t: &Term) -> bool {
        match self.shallow(t) {
            Term::Var(w) => *w == v,
            Term::Compound(_, args) => args.iter().any(|a| self.occurs_in(v, a)),
            _ => false,
        }
    }

    /// Unify two terms. On failure the bindings are left exactly as before.
    pub fn unify(&mut self, a: &Term, b: &Term, occurs_check: bool) -> bool {
        let cp = self.checkpoint();
        if self.unify_inner(a, b, occurs_check) {
            true
        } else {
            self.undo(cp);
            false
        }
    }

    fn unify_inner(&mut self, a: &Term, b: &Term, occurs_check: bool) -> bool {
        let mut stack: Vec<(Term, Term)> = vec![(a.clone(), b.clone())];
        while let Some((x, y)) = stack.pop() {
            let x = self.shallow(&x).clone();
            let y = self.shallow(&y).clone();
            match (&x, &y) {
                (Term::Var(v), Term::Var(w)) if v == w => {}
                (Term::Var(v), other) | (other, Term::Var(v)) => {
                    if occurs_check && self.occurs_in(*v, other) {
                        return false;
                    }
                    self.bind(*v, other.clone());
                }
                (Term::Const(p), Term::Const(q)) => {
                    if p != q {
                        return false;
                    }
                }
                (Term::Int(p), Term::Int(q)) => {
                    if p != q {
                        return false;
                    }
                }
                (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                    if f != g || xs.len() != ys.len() {
                        return false;
                    }
                    for (s, t) in xs.iter().zip(ys.iter()) {
                        stack.push((s.clone(), t.clone()));
                    }
                }
                _ => return false,
            }
        }
        true
    }

    pub fn unify_atoms(&mut self, a: &Atom, b: &Atom, occurs_check: bool) -> bool {
        if a.args.len() != b.args.len() {
            return false;
        }
        let cp = self.checkpoint();
        let ok = self.unify_inner(&a.pred, &b.pred, occurs_check)
            && a.args
                .iter()
                .zip(&b.args)
                .all(|(s, t)| self.unify_inner(s, t, occurs_check));
        if !ok {
            self.undo(cp);
        }
        ok
    }

    /// Structural equality of two terms up to consistent variable renaming,
    /// after resolving bindings.
    pub fn variant(&self, a: &Term, b: &Term) -> bool {
        let mut fwd = FxHashMap::default();
        let mut back = FxHashMap::default();
        self.variant_inner(a, b, &mut fwd, &mut back)
    }

    pub fn variant_atoms(&self, a: &Atom, b: &Atom) -> bool {
        if a.args.len() != b.args.len() {
            return false;
        }
        let mut fwd = FxHashMap::default();
        let mut back = FxHashMap::default();
        self.variant_inner(&a.pred, &b.pred, &mut fwd, &mut back)
            && a.args
                .iter()
                .zip(&b.args)
                .all(|(s, t)| self.variant_inner(s, t, &mut fwd, &mut back))
    }

    fn variant_inner(
        &self,
        a: &Term,
        b: &Term,
        fwd: &mut FxHashMap<VarId, VarId>,
        back: &mut FxHashMap<VarId, VarId>,
    ) -> bool {
        match (self.shallow(a), self.shallow(b)) {
            (Term::Var(v), Term::Var(w)) => {
                let f = *fwd.entry(*v).or_insert(*w);
                let g = *back.entry(*w).or_insert(*v);
                f == *w && g == *v
            }
            (Term::Const(p), Term::Const(q)) => p == q,
            (Term::Int(p), Term::Int(q)) => p == q,
            (Term::Compound(f, xs), Term::Compound(g, ys)) => {
                f == g
                    && xs.len() == ys.len()
                    && xs
                        .iter()
                        .zip(ys.iter())
                        .all(|(s, t)| self.variant_inner(s, t, fwd, back))
            }
            _ => false,
        }
    }
}

/// Maps template variables to fresh ones, consistently across every term
/// passed through the same renamer.
#[derive(Default, Debug)]
pub struct Renamer {
    map: FxHashMap<VarId, Term>,
}

impl Renamer {
    pub fn new() -> Renamer {
        Renamer::default()
    }

    /// Pre-seed a variable's image, e.g. to tie existential variables of a
    /// metarule to an existing meta-substitution.
    pub fn seed(&mut self, v: VarId, image: Term) {
        self.map.insert(v, image);
    }

    pub fn term(&mut self, t: &Term) -> Term {
        t.map_vars(&mut |v| Some(self.map.entry(v).or_insert_with(fresh_var).clone()))
    }

    pub fn atom(&mut self, a: &Atom) -> Atom {
        Atom {
            pred: self.term(&a.pred),
            args: a.args.iter().map(|t| self.term(t)).collect(),
        }
    }

    pub fn image(&self, v: VarId) -> Option<&Term> {
        self.map.get(&v)
    }
}

/// A definite clause `head :- body`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Clause {
    pub head: Atom,
    pub body: Vec<Atom>,
}

/// Copy a clause with every variable replaced by a fresh one.
pub fn rename_apart(clause: &Clause) -> Clause {
    let mut r = Renamer::new();
    Clause {
        head: r.atom(&clause.head),
        body: clause.body.iter().map(|a| r.atom(a)).collect(),
    }
}

// ---------------------------------------------------------------------------
// Printing

/// Names variables in order of first appearance: A, B, .., Z, A1, ..
#[derive(Default)]
pub struct VarNamer {
    names: FxHashMap<VarId, String>,
    letters: &'static str,
}

impl VarNamer {
    pub fn terms() -> VarNamer {
        VarNamer {
            names: FxHashMap::default(),
            letters: "ABCDEFGHIJKLMNOPQRSTUVWXYZ",
        }
    }

    pub fn types() -> VarNamer {
        VarNamer {
            names: FxHashMap::default(),
            letters: "XYZWUVSTRQPONMLKJIHGFEDCBA",
        }
    }

    pub fn with_names(names: impl IntoIterator<Item = (VarId, String)>, letters_for_types: bool) -> VarNamer {
        let mut n = if letters_for_types {
            VarNamer::types()
        } else {
            VarNamer::terms()
        };
        n.names.extend(names);
        n
    }

    pub fn name(&mut self, v: VarId) -> String {
        if let Some(n) = self.names.get(&v) {
            return n.clone();
        }
        let letters: Vec<char> = self.letters.chars().collect();
        let mut k = self.names.len();
        let name = loop {
            let candidate = if k < letters.len() {
                letters[k].to_string()
            } else {
                format!("{}{}", letters[k % letters.len()], k / letters.len())
            };
            if !self.names.values().any(|n| *n == candidate) {
                break candidate;
            }
            k += 1;
        };
        self.names.insert(v, name.clone());
        name
    }

    pub fn term(&mut self, t: &Term) -> String {
        let mut s = String::new();
        self.write_term(t, &mut s);
        s
    }

    pub fn atom(&mut self, a: &Atom) -> String {
        let mut s = String::new();
        self.write_atom(a, &mut s);
        s
    }

    pub fn write_atom(&mut self, a: &Atom, out: &mut String) {
        self.write_term(&a.pred, out);
        out.push('(');
        for (i, t) in a.args.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            self.write_term(t, out);
        }
        out.push(')');
    }

    pub fn write_term(&mut self, t: &Term, out: &mut String) {
        match t {
            Term::Var(v) => out.push_str(&self.name(*v)),
            Term::Const(c) => out.push_str(c),
            Term::Int(i) => out.push_str(&i.to_string()),
            Term::Compound(_, _) if t.is_nil() => out.push_str("[]"),
            Term::Compound(_, _) if t.as_cons().is_some() => {
                out.push('[');
                let mut cur = t;
                let mut first = true;
                while let Some((h, tl)) = cur.as_cons() {
                    if !first {
                        out.push(',');
                    }
                    first = false;
                    self.write_term(h, out);
                    cur = tl;
                }
                if !cur.is_nil() {
                    out.push('|');
                    self.write_term(cur, out);
                }
                out.push(']');
            }
            Term::Compound(f, args) => {
                out.push_str(f);
                if !args.is_empty() {
                    out.push('(');
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            out.push(',');
                        }
                        self.write_term(a, out);
                    }
                    out.push(')');
                }
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_debug_term(self, &mut s);
        f.write_str(&s)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.pred)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

// Variables print as `_G<id>` so distinct ids stay distinguishable.
fn write_debug_term(t: &Term, out: &mut String) {
    let mut namer = VarNamer::terms();
    let mut vars = Vec::new();
    t.collect_vars(&mut vars);
    for v in vars {
        namer.names.insert(v, format!("_G{v}"));
    }
    namer.write_term(t, out);
}
