//! Algebraic properties of unification and type checking on random terms.

use milsynth::term::{fresh_var, Bindings, Renamer, Term};
use milsynth::types::{base, instance_of, list_of, pred_type, type_unify};
use proptest::prelude::*;

/// Terms over a pool of `vars` shared variables.
fn term(vars: Vec<Term>) -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        prop::sample::select(vars),
        (0..3i64).prop_map(Term::Int),
        prop::sample::select(vec!["a", "b"]).prop_map(Term::constant),
        Just(Term::nil()),
    ];
    leaf.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(h, t)| Term::cons(h, t)),
            prop::collection::vec(inner, 1..3).prop_map(|a| Term::compound("f", a)),
        ]
    })
}

fn ty(vars: Vec<Term>) -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        prop::sample::select(vars),
        prop::sample::select(vec!["int", "bool", "nat", "bottom"]).prop_map(base),
    ];
    leaf.prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(list_of),
            prop::collection::vec(inner, 1..3).prop_map(pred_type),
        ]
    })
}

fn pool(n: usize) -> Vec<Term> {
    (0..n).map(|_| fresh_var()).collect()
}

fn snapshot(b: &Bindings, vars: &[Term]) -> Vec<Term> {
    vars.iter().map(|v| b.walk(v)).collect()
}

proptest! {
    #[test]
    fn unification_is_symmetric((a, b) in Just(pool(3)).prop_flat_map(|v| (term(v.clone()), term(v)))) {
        let mut left = Bindings::new();
        let mut right = Bindings::new();
        let l = left.unify(&a, &b, true);
        let r = right.unify(&b, &a, true);
        prop_assert_eq!(l, r);
        if l {
            prop_assert_eq!(left.walk(&a), left.walk(&b));
            prop_assert!(right.variant(&left.walk(&a), &right.walk(&a)));
        }
    }

    #[test]
    fn undo_restores_bindings(
        vars in Just(pool(4)),
        seed in prop::collection::vec((0..4usize, 0..4usize), 1..6),
    ) {
        let mut b = Bindings::new();
        // Acyclic shapes only: without the occurs check a deep walk of a
        // cyclic binding would not terminate.
        let shapes = [Term::nil(), Term::Int(1), Term::cons(Term::Int(2), Term::nil()), vars[1].clone()];
        b.unify(&vars[2], &shapes[seed[0].1], false);
        let before = snapshot(&b, &vars);
        let len = b.len();
        let cp = b.checkpoint();
        for &(v, s) in &seed[1..] {
            b.unify(&vars[v], &shapes[s], false);
        }
        b.undo(cp);
        prop_assert_eq!(b.len(), len);
        prop_assert_eq!(snapshot(&b, &vars), before);
    }

    #[test]
    fn every_term_unifies_with_itself(t in term(pool(3))) {
        let mut b = Bindings::new();
        prop_assert!(b.unify(&t, &t, true));
        prop_assert!(b.is_empty());
    }

    /// `instance_of` only reads: the general type walks to the same tree
    /// before and after.
    #[test]
    fn instance_check_leaves_general_type(dt in ty(pool(2)), gt in ty(pool(2))) {
        let b = Bindings::new();
        let before = b.walk(&gt);
        let _ = instance_of(&dt, &gt, &b);
        prop_assert_eq!(b.walk(&gt), before);
    }

    /// After `a` and `b` unify, the result is an instance of `b` as it was.
    #[test]
    fn unification_specializes((a, b) in Just(pool(3)).prop_flat_map(|v| (ty(v.clone()), ty(v)))) {
        let mut bind = Bindings::new();
        if type_unify(&a, &b, &mut bind) {
            let original = Renamer::new().term(&b);
            prop_assert!(instance_of(&bind.walk(&a), &original, &Bindings::new()));
        }
    }
}

#[test]
fn type_occurs_check_excludes_infinite_types() {
    let x = fresh_var();
    let mut b = Bindings::new();
    assert!(!type_unify(&x, &list_of(x.clone()), &mut b));
    let mut v = Bindings::new();
    // Value unification runs without the occurs check unless asked.
    assert!(v.unify(&x, &Term::cons(Term::Int(1), x.clone()), false));
}
