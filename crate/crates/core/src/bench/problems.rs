//! Problem builders for the five experiments.

use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use super::droplasts;
use crate::kb::{parse_problem, stdlib_problem, Problem};
use crate::term::{Atom, VarNamer};

const CHAIN: &str = "metarule chain [P,Q,R] P(A,B)::[X,Y] :- Q(A,C)::[X,Z], R(C,B)::[Z,Y].\n";

fn parse(text: &str) -> Problem {
    parse_problem(text).unwrap_or_else(|e| panic!("generated problem is malformed: {e}\n{text}"))
}

/// `pos p(0,1)` over one well-typed `to_zero` and `n` copies typed
/// `[bottom,bottom]`, with the chain metarule only.
pub fn exp1_problem(n: usize) -> Problem {
    let mut t = String::from("option max_clauses 3.\nprim to_zero/2 :: [int,int].\n");
    for i in 1..=n {
        writeln!(t, "prim to_zero_b{i}/2 :: [bottom,bottom] is to_zero.").unwrap();
    }
    t.push_str(CHAIN);
    t.push_str("example_type [int,int].\npos p(0,1).\n");
    parse(&t)
}

/// 25 `to_zero` copies of which `matching` are typed `[int,int]`.
pub fn exp2_problem(matching: usize) -> Problem {
    let mut t = String::from("option max_clauses 3.\n");
    for i in 1..=25 {
        let ty = if i <= matching { "int" } else { "bottom" };
        writeln!(t, "prim to_zero_{i}/2 :: [{ty},{ty}] is to_zero.").unwrap();
    }
    t.push_str(CHAIN);
    t.push_str("example_type [int,int].\npos p(0,1).\n");
    parse(&t)
}

const DROPLASTS_PRIMS: &str = "\
prim concat/3 :: [list(T),T,list(T)] <| (= (+ (len ?A) 1) (len ?C)) |>.
prim tail/2 :: [list(X),list(X)] <| (= (len ?A) (+ (len ?B) 1)) |>.
prim reverse/2 :: [list(X),list(X)] <| (= (rev ?A) ?B) |>.
";
const ID_PRIM: &str = "prim id/2 :: [X,X] <| (= ?A ?B) |>.\n";
const DUMB_PRIMS: &str = "\
prim dumb0/2 :: [list(nat),list(X)] <| true |>.
fact dumb0([0],[]).
prim dumb1/2 :: [list(nat),int] <| false |>.
fact dumb1([3,4],0).
prim dumb2/2 :: [list(int),int] <| false |>.
fact dumb2([2,3,4,5,6,7],0).
";

/// Metarule order used for every droplasts experiment.
pub const DROPLASTS_METARULES: [&str; 2] = ["chain", "curry"];

/// Droplasts background knowledge: concat, tail, reverse, optionally id and
/// the dumb predicates, map/reduceback/filter, chain and curry, plus
/// `extra` declarations.
pub fn droplasts_problem(with_id: bool, with_dumb: bool, extra: &str, examples: &[Atom]) -> Problem {
    let mut t = String::from(DROPLASTS_PRIMS);
    if with_id {
        t.push_str(ID_PRIM);
    }
    if with_dumb {
        t.push_str(DUMB_PRIMS);
    }
    t.push_str(extra);
    t.push_str("example_type [list(list(int)),list(list(int))].\n");
    for e in examples {
        writeln!(t, "pos {}.", VarNamer::terms().atom(e)).unwrap();
    }
    let mut p = parse(&t);
    let mut lib = stdlib_problem();
    lib.select_metarules(&DROPLASTS_METARULES);
    lib.select_interpreted(&["map", "reduceback", "filter"]);
    p.extend(lib);
    p
}

/// Types random background predicates are drawn from.
const RANDOM_TYPES: [&str; 6] = ["bool", "nat", "int", "list(int)", "list(list(int))", "list(list(X))"];

fn random_value(ty: &str, rng: &mut impl Rng) -> String {
    let ints = |rng: &mut dyn rand::RngCore, lo: i64| {
        let n = rng.gen_range(0..=3);
        let xs: Vec<String> = (0..n).map(|_| rng.gen_range(lo..=9).to_string()).collect();
        format!("[{}]", xs.join(","))
    };
    match ty {
        "bool" => ["true", "false"].choose(rng).unwrap().to_string(),
        "nat" => rng.gen_range(0..=9).to_string(),
        "int" => rng.gen_range(-5..=9).to_string(),
        "list(int)" => ints(rng, -5),
        _ => {
            let n = rng.gen_range(0..=3);
            let xs: Vec<String> = (0..n).map(|_| ints(rng, 0)).collect();
            format!("[{}]", xs.join(","))
        }
    }
}

/// `k` binary table predicates `bk1..bkk` with random types and one random
/// fact each whose values fit the declared types.
pub fn random_typed_prims(k: usize, rng: &mut impl Rng) -> String {
    let mut t = String::new();
    for j in 1..=k {
        let a = *RANDOM_TYPES.choose(rng).unwrap();
        let b = *RANDOM_TYPES.choose(rng).unwrap();
        let (va, vb) = (random_value(a, rng), random_value(b, rng));
        writeln!(t, "prim bk{j}/2 :: [{a},{b}].\nfact bk{j}({va},{vb}).").unwrap();
    }
    t
}

/// `k` index-drop predicates with random indices in 1..=5: lists shorter
/// than the index keep their length, longer ones lose one element.
pub fn random_drop_prims(k: usize, rng: &mut impl Rng) -> String {
    let mut t = String::new();
    for j in 1..=k {
        let i = rng.gen_range(1..=5);
        writeln!(
            t,
            "prim drop{j}/2 :: [list(X),list(X)] is drop_at({i}) \
             <| (ite (< (len ?A) {i}) (= (len ?B) (len ?A)) (= (len ?B) (- (len ?A) 1))) |>."
        )
        .unwrap();
    }
    t
}

pub fn exp3_problem(k: usize, examples: &[Atom], rng: &mut impl Rng) -> Problem {
    droplasts_problem(true, false, &random_typed_prims(k, rng), examples)
}

pub fn exp4_problem(k: usize, examples: &[Atom], rng: &mut impl Rng) -> Problem {
    droplasts_problem(true, false, &random_drop_prims(k, rng), examples)
}

pub fn exp5_problem(k: usize, examples: &[Atom], rng: &mut impl Rng) -> Problem {
    droplasts_problem(false, true, &random_drop_prims(k, rng), examples)
}

/// The three-clause droplasts program, up to invented names.
pub const DROPLASTS_LISTING: &str = "\
droplasts(A,B):-map(A,B,droplasts_1).
droplasts_1(A,B):-reverse(A,C),droplasts_2(C,B).
droplasts_2(A,B):-tail(A,C),reverse(C,B).";

pub fn droplasts_examples(seed: u64) -> Vec<Atom> {
    droplasts::gen_droplasts_examples(seed, 3)
}
