//! The droplasts task: reference oracle and example generation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::term::{Atom, Term};

pub const PRED: &str = "droplasts";

/// Drop the last element of every inner list. Empty inner lists have no
/// last element, so the relation is undefined on them.
pub fn oracle(input: &[Vec<i64>]) -> Option<Vec<Vec<i64>>> {
    input
        .iter()
        .map(|xs| xs.split_last().map(|(_, init)| init.to_vec()))
        .collect()
}

pub fn to_term(lists: &[Vec<i64>]) -> Term {
    Term::list(lists.iter().map(|xs| Term::int_list(xs)))
}

pub fn from_term(t: &Term) -> Option<Vec<Vec<i64>>> {
    t.list_items()?
        .iter()
        .map(|inner| {
            inner
                .list_items()?
                .iter()
                .map(|x| match x {
                    Term::Int(n) => Some(*n),
                    _ => None,
                })
                .collect()
        })
        .collect()
}

/// Outer and inner lengths in 2..=5, elements in 0..=9.
pub fn random_input(rng: &mut impl Rng) -> Vec<Vec<i64>> {
    let outer = rng.gen_range(2..=5);
    (0..outer)
        .map(|_| {
            let inner = rng.gen_range(2..=5);
            (0..inner).map(|_| rng.gen_range(0..=9)).collect()
        })
        .collect()
}

pub fn example(input: &[Vec<i64>]) -> Atom {
    let out = oracle(input).expect("generated inner lists are non-empty");
    Atom::named(PRED, vec![to_term(input), to_term(&out)])
}

/// `count` positive examples, deterministic in `seed`.
pub fn gen_droplasts_examples(seed: u64, count: usize) -> Vec<Atom> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| example(&random_input(&mut rng))).collect()
}
