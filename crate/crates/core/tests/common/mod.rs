//! A small corpus of learning tasks shared by the integration tests.

#![allow(dead_code)]

use milsynth::kb::stdlib_problem;
use milsynth::{parse_problem, Problem};

/// Every corpus task is solved well within this many steps in both modes.
pub const STEP_LIMIT: u64 = 1_000_000;

pub struct Task {
    pub name: &'static str,
    pub text: &'static str,
    pub metarules: &'static [&'static str],
    /// Every predicate is declared with its true type, so the typed search
    /// prunes only what the untyped search would fail on anyway.
    pub fully_typed: bool,
}

impl Task {
    pub fn problem(&self) -> Problem {
        let mut p = parse_problem(self.text).unwrap_or_else(|e| panic!("{}: {e}", self.name));
        let mut lib = stdlib_problem();
        lib.select_metarules(self.metarules);
        p.extend(lib);
        p.options.step_limit = Some(STEP_LIMIT);
        p
    }
}

macro_rules! lists {
    () => {
        "prim head/2 :: [list(X),X].\nprim tail/2 :: [list(X),list(X)].\nprim reverse/2 :: [list(X),list(X)].\n"
    };
}

macro_rules! task {
    ($name:expr, [$($m:expr),*], $typed:expr, $($text:expr),+) => {
        Task { name: $name, text: concat!($($text),+), metarules: &[$($m),*], fully_typed: $typed }
    };
}

pub fn corpus() -> Vec<Task> {
    vec![
        task!(
            "last",
            ["chain"],
            true,
            lists!(),
            "example_type [list(int),int].\npos p([1,2,3],3).\npos p([4,5],5).\n"
        ),
        task!(
            "second",
            ["chain"],
            true,
            lists!(),
            "example_type [list(int),int].\npos p([1,2,3],2).\npos p([5,6],6).\nneg p([5,6],5).\n"
        ),
        task!(
            "third",
            ["chain"],
            true,
            lists!(),
            "example_type [list(int),int].\npos p([1,2,3],3).\npos p([7,8,9,4],9).\n"
        ),
        task!(
            "drop_two",
            ["chain"],
            true,
            lists!(),
            "example_type [list(int),list(int)].\npos p([1,2,3],[3]).\npos p([4,5,6,7],[6,7]).\n"
        ),
        task!(
            "plus_two",
            ["chain"],
            true,
            "prim succ/2 :: [int,int].\nexample_type [int,int].\npos p(1,3).\npos p(5,7).\nneg p(1,2).\n"
        ),
        task!(
            "penultimate",
            ["chain"],
            true,
            lists!(),
            "example_type [list(int),int].\npos p([1,2,3],2).\npos p([4,5,6,7],6).\n"
        ),
        task!(
            "one",
            ["chain"],
            true,
            "prim to_zero/2 :: [int,int].\nprim succ/2 :: [int,int].\n",
            "example_type [int,int].\npos p(5,1).\npos p(9,1).\n"
        ),
        task!(
            "map_succ",
            ["curry"],
            true,
            "prim succ/2 :: [int,int].\nexample_type [list(int),list(int)].\n",
            "pos p([1,2],[2,3]).\npos p([0],[1]).\n"
        ),
        task!(
            "map_head",
            ["curry"],
            true,
            lists!(),
            "example_type [list(list(int)),list(int)].\npos p([[1,2],[3]],[1,3]).\n"
        ),
        task!(
            "map_reverse",
            ["curry"],
            true,
            lists!(),
            "example_type [list(list(int)),list(list(int))].\npos p([[1,2],[3,4,5]],[[2,1],[5,4,3]]).\n"
        ),
        task!(
            "map_last",
            ["chain", "curry"],
            true,
            lists!(),
            "example_type [list(list(int)),list(int)].\npos p([[1,2],[3,4,5]],[2,5]).\n"
        ),
        task!(
            "filter_even",
            ["curry"],
            true,
            "prim even/1 :: [int].\nfact even(0).\nfact even(2).\nfact even(4).\n",
            "example_type [list(int),list(int)].\npos p([1,2,3,4],[2,4]).\npos p([0,1],[0]).\n"
        ),
        task!(
            "table_ident",
            ["ident"],
            true,
            "prim f/2 :: [int,int].\nfact f(1,2).\nfact f(3,4).\n",
            "prim g/2 :: [int,int].\nfact g(1,2).\nfact g(3,5).\n",
            "example_type [int,int].\npos p(1,2).\nneg p(3,4).\n"
        ),
        task!(
            "last_not_first",
            ["chain"],
            true,
            lists!(),
            "example_type [list(int),int].\npos p([1,2,1],1).\npos p([4,5],5).\nneg p([4,5],4).\n"
        ),
        task!(
            "reverse_tail",
            ["chain"],
            true,
            lists!(),
            "example_type [list(int),list(int)].\npos p([1,2,3],[2,1]).\npos p([4,5],[4]).\n"
        ),
        task!(
            "tailrec_last",
            ["tailrec", "ident"],
            true,
            "prim tail/2 :: [list(X),list(X)].\nprim single/2 :: [list(int),int].\n",
            "fact single([3],3).\nfact single([5],5).\nfact single([9],9).\n",
            "example_type [list(int),int].\npos p([1,2,3],3).\npos p([9],9).\n"
        ),
        // The dummy-typed copy misleads only the untyped search.
        task!(
            "bottom_decoy",
            ["chain"],
            false,
            "prim to_zero_b/2 :: [bottom,bottom] is to_zero.\nprim succ/2 :: [int,int].\n",
            "prim to_zero/2 :: [int,int].\n",
            "example_type [int,int].\npos p(5,1).\n"
        ),
        task!(
            "mistyped_table",
            ["ident", "chain"],
            false,
            "prim bad/2 :: [bool,bool].\nfact bad(1,2).\nprim succ/2 :: [int,int].\n",
            "example_type [int,int].\npos p(1,2).\n"
        ),
        task!(
            "precon",
            ["precon"],
            true,
            "prim even/1 :: [int].\nfact even(2).\nfact even(4).\nprim succ/2 :: [int,int].\n",
            "example_type [int,int].\npos p(2,3).\npos p(4,5).\nneg p(3,4).\n"
        ),
        task!(
            "droplasts_small",
            ["chain", "curry"],
            true,
            lists!(),
            "example_type [list(list(int)),list(list(int))].\n",
            "pos p([[1,2,3],[4,5]],[[1,2],[4]]).\npos p([[6,7]],[[6]]).\n"
        ),
    ]
}
