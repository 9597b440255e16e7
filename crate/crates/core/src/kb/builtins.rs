//! Evaluators for primitive predicates.
//!
//! Every evaluator produces candidate argument tuples for the currently
//! walked arguments; the caller unifies each tuple with the arguments in turn.
//! A relation that cannot be enumerated from the given instantiation yields
//! no candidates instead of an unbounded stream.

use std::fmt;
use std::str::FromStr;

use super::{Evaluator, PrimDecl};
use crate::error::{Error, Result};
use crate::term::{fresh_var, Bindings, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    Head,
    Tail,
    Reverse,
    /// `concat(A,B,C)`: C is A with element B appended.
    Concat,
    Succ,
    Id,
    ToZero,
    /// Remove the element at a 1-based index; shorter lists are unchanged.
    DropAt(usize),
}

impl Builtin {
    pub fn arity(self) -> usize {
        match self {
            Builtin::Concat => 3,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Head => "head",
            Builtin::Tail => "tail",
            Builtin::Reverse => "reverse",
            Builtin::Concat => "concat",
            Builtin::Succ => "succ",
            Builtin::Id => "id",
            Builtin::ToZero => "to_zero",
            Builtin::DropAt(_) => "drop_at",
        }
    }

    /// Parse `name` with an optional integer parameter.
    pub fn lookup(name: &str, param: Option<i64>) -> Result<Builtin> {
        let b = match (name, param) {
            ("drop_at", Some(i)) if i >= 1 => Builtin::DropAt(i as usize),
            ("drop_at", _) => return Err(Error::Problem("drop_at needs a positive index parameter".into())),
            (_, Some(_)) => return Err(Error::Problem(format!("builtin {name} takes no parameter"))),
            (other, None) => other.parse()?,
        };
        Ok(b)
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::DropAt(i) => write!(f, "drop_at({i})"),
            b => f.write_str(b.name()),
        }
    }
}

impl FromStr for Builtin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Builtin> {
        Ok(match s {
            "head" => Builtin::Head,
            "tail" => Builtin::Tail,
            "reverse" => Builtin::Reverse,
            "concat" => Builtin::Concat,
            "succ" => Builtin::Succ,
            "id" => Builtin::Id,
            "to_zero" => Builtin::ToZero,
            other => return Err(Error::Problem(format!("unknown builtin `{other}`"))),
        })
    }
}

/// Candidate tuples for `decl` applied to `args`, in a deterministic order.
pub fn solve_prim(decl: &PrimDecl, args: &[Term], bindings: &Bindings) -> Vec<Vec<Term>> {
    if args.len() != decl.arity {
        return Vec::new();
    }
    match &decl.eval {
        Evaluator::Table(rows) => rows.clone(),
        Evaluator::Builtin(b) => {
            let walked: Vec<Term> = args.iter().map(|a| bindings.walk(a)).collect();
            builtin_candidates(*b, &walked)
        }
    }
}

fn builtin_candidates(b: Builtin, args: &[Term]) -> Vec<Vec<Term>> {
    match b {
        Builtin::Head => {
            let (h, t) = (fresh_var(), fresh_var());
            vec![vec![Term::cons(h.clone(), t), h]]
        }
        Builtin::Tail => {
            let (h, t) = (fresh_var(), fresh_var());
            vec![vec![Term::cons(h, t.clone()), t]]
        }
        Builtin::Id => {
            let x = fresh_var();
            vec![vec![x.clone(), x]]
        }
        Builtin::ToZero => vec![vec![fresh_var(), Term::Int(0)]],
        Builtin::Succ => match (&args[0], &args[1]) {
            (Term::Int(a), _) => vec![vec![Term::Int(*a), Term::Int(a + 1)]],
            (_, Term::Int(b)) => vec![vec![Term::Int(b - 1), Term::Int(*b)]],
            _ => Vec::new(),
        },
        Builtin::Reverse => {
            if let Some(xs) = args[0].list_items() {
                let rev = Term::list(xs.into_iter().rev());
                vec![vec![args[0].clone(), rev]]
            } else if let Some(ys) = args[1].list_items() {
                let rev = Term::list(ys.into_iter().rev());
                vec![vec![rev, args[1].clone()]]
            } else {
                Vec::new()
            }
        }
        Builtin::Concat => {
            if let Some(mut xs) = args[0].list_items() {
                xs.push(args[1].clone());
                vec![vec![args[0].clone(), args[1].clone(), Term::list(xs)]]
            } else if let Some(mut zs) = args[2].list_items() {
                match zs.pop() {
                    Some(last) => vec![vec![Term::list(zs), last, args[2].clone()]],
                    None => Vec::new(),
                }
            } else {
                Vec::new()
            }
        }
        Builtin::DropAt(i) => match args[0].list_items() {
            Some(mut xs) => {
                if xs.len() >= i {
                    xs.remove(i - 1);
                }
                vec![vec![args[0].clone(), Term::list(xs)]]
            }
            None => Vec::new(),
        },
    }
}
