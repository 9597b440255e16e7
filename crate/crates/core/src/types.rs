//! Polymorphic types, represented as ordinary terms so that the same
//! unification machinery serves values and types.
//!
//! A base type is `Const(name)`, a type variable is `Var`, `list(T)` is a
//! compound, and a predicate type `[T1,..,Tn]` is the compound `pred(T1,..,Tn)`.

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::term::{Atom, Bindings, Renamer, Term, VarId, VarNamer};

pub const PRED: &str = "pred";
pub const LIST: &str = "list";

pub fn base(name: &str) -> Term {
    Term::constant(name)
}

pub fn list_of(elem: Term) -> Term {
    Term::compound(LIST, vec![elem])
}

pub fn pred_type(args: Vec<Term>) -> Term {
    Term::compound(PRED, args)
}

pub fn pred_args(t: &Term) -> Option<&[Term]> {
    match t {
        Term::Compound(f, args) if &**f == PRED => Some(args),
        _ => None,
    }
}

pub fn list_elem(t: &Term) -> Option<&Term> {
    match t {
        Term::Compound(f, args) if &**f == LIST && args.len() == 1 => Some(&args[0]),
        _ => None,
    }
}

/// Unify two types with the occurs check on.
pub fn type_unify(a: &Term, b: &Term, bindings: &mut Bindings) -> bool {
    bindings.unify(a, b, true)
}

/// True iff some substitution for the variables of `gt` makes it equal to
/// `dt`. Neither type is bound; the variables of `dt` act as constants.
pub fn instance_of(dt: &Term, gt: &Term, bindings: &Bindings) -> bool {
    let dt = bindings.walk(dt);
    let gt = Renamer::new().term(&bindings.walk(gt));
    let mut subst: FxHashMap<VarId, Term> = FxHashMap::default();
    matches(&gt, &dt, &mut subst)
}

fn matches(pattern: &Term, target: &Term, subst: &mut FxHashMap<VarId, Term>) -> bool {
    match (pattern, target) {
        (Term::Var(v), _) => match subst.get(v) {
            Some(image) => image == target,
            None => {
                subst.insert(*v, target.clone());
                true
            }
        },
        (Term::Compound(f, xs), Term::Compound(g, ys)) => {
            f == g && xs.len() == ys.len() && xs.iter().zip(ys.iter()).all(|(p, t)| matches(p, t, subst))
        }
        _ => pattern == target,
    }
}

/// Unify `dt` with a fresh copy of `gt`. Bindings made to variables of `dt`
/// persist; `gt` itself is never narrowed.
pub fn unify_with_copy(dt: &Term, gt: &Term, bindings: &mut Bindings) -> bool {
    let copy = Renamer::new().term(&bindings.walk(gt));
    type_unify(dt, &copy, bindings)
}

/// A body atom paired with its derivation type and general type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedAtom {
    pub atom: Atom,
    pub dt: Term,
    pub gt: Term,
}

/// Zip two singly typed instantiations of the same body.
pub fn combine_types(
    body_dt: &[(Atom, Term)],
    body_gt: &[(Atom, Term)],
    bindings: &Bindings,
) -> Result<Vec<TypedAtom>> {
    if body_dt.len() != body_gt.len() {
        return Err(Error::Invariant(format!(
            "combine_types: body lengths {} and {} differ",
            body_dt.len(),
            body_gt.len()
        )));
    }
    body_dt
        .iter()
        .zip(body_gt)
        .map(|((a, dt), (b, gt))| {
            if a != b && bindings.walk_atom(a) != bindings.walk_atom(b) {
                return Err(Error::Invariant(format!("combine_types: atoms {a} and {b} differ")));
            }
            Ok(TypedAtom {
                atom: a.clone(),
                dt: dt.clone(),
                gt: gt.clone(),
            })
        })
        .collect()
}

/// Print a type in surface syntax: `[list(X),X]`.
pub fn write_type(t: &Term, namer: &mut VarNamer, out: &mut String) {
    match t {
        Term::Var(v) => out.push_str(&namer.name(*v)),
        Term::Const(c) => out.push_str(c),
        Term::Int(i) => out.push_str(&i.to_string()),
        Term::Compound(f, args) => {
            let is_pred = &**f == PRED;
            if is_pred {
                out.push('[');
            } else {
                out.push_str(f);
                out.push('(');
            }
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_type(a, namer, out);
            }
            out.push(if is_pred { ']' } else { ')' });
        }
    }
}

pub fn type_to_string(t: &Term) -> String {
    let mut s = String::new();
    write_type(t, &mut VarNamer::types(), &mut s);
    s
}
