use super::{parse_problem, Problem};

/// Source of the standard library: map, reduceback, filter and the common
/// metarules ident, precon, curry, chain and tailrec.
pub const STDLIB: &str = include_str!("../../stdlib/stdlib.mil");

/// The standard library as a problem with no examples.
pub fn stdlib_problem() -> Problem {
    parse_problem(STDLIB).expect("bundled standard library parses")
}

impl Problem {
    /// Keep only the named metarules, in the order given.
    pub fn select_metarules(&mut self, names: &[&str]) {
        let all = std::mem::take(&mut self.metarules);
        self.metarules = names
            .iter()
            .filter_map(|n| all.iter().find(|m| m.name == *n).cloned())
            .collect();
    }

    /// Keep only interpreted definitions with the given names.
    pub fn select_interpreted(&mut self, names: &[&str]) {
        self.interpreted.retain(|c| names.contains(&c.name()));
        self.interp_refs.retain(|r| names.contains(&r.name.as_str()));
    }
}
