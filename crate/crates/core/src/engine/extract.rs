//! Turning a successful derivation into a readable program.

use std::fmt;

use super::{instantiate, Engine, NodeKind};
use crate::term::{Atom, Clause, Term, VarNamer};
use crate::types::{type_to_string, write_type};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LearnedClause {
    pub clause: Clause,
    pub metarule: String,
    /// Inferred general type of the head, in typed modes.
    pub gt: Option<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LearnedProgram {
    /// Clauses in invention order.
    pub clauses: Vec<LearnedClause>,
    /// General type of the example predicate's clause.
    pub program_type: Option<Term>,
}

/// `head:-b1,b2.` with variables named A, B, .. by first appearance.
pub fn clause_to_string(c: &Clause) -> String {
    let mut n = VarNamer::terms();
    let mut s = n.atom(&c.head);
    if !c.body.is_empty() {
        s.push_str(":-");
        let body: Vec<String> = c.body.iter().map(|a| n.atom(a)).collect();
        s.push_str(&body.join(","));
    }
    s.push('.');
    s
}

impl LearnedProgram {
    pub fn text(&self) -> String {
        self.clauses
            .iter()
            .map(|c| clause_to_string(&c.clause))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn plain_clauses(&self) -> Vec<Clause> {
        self.clauses.iter().map(|c| c.clause.clone()).collect()
    }

    pub fn type_text(&self) -> Option<String> {
        self.program_type.as_ref().map(type_to_string)
    }

    /// Clauses annotated with their inferred types, one per line.
    pub fn typed_text(&self) -> String {
        self.clauses
            .iter()
            .map(|c| {
                let text = clause_to_string(&c.clause);
                match &c.gt {
                    Some(t) => {
                        let mut s = String::new();
                        write_type(t, &mut VarNamer::types(), &mut s);
                        format!("{text}  % {s}")
                    }
                    None => text,
                }
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

impl fmt::Display for LearnedProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

pub(super) fn extract_program(e: &Engine<'_>) -> LearnedProgram {
    let walk_atom = |a: &Atom| e.b.walk_atom(a);
    let mut clauses = Vec::new();
    for n in e.nodes.iter().filter(|n| n.kind == NodeKind::Sub) {
        let meta = n.meta.as_ref().expect("sub nodes carry their metarule");
        let (head, body) = instantiate(meta, &n.subs);
        clauses.push(LearnedClause {
            clause: Clause {
                head: walk_atom(&head),
                body: body.iter().map(walk_atom).collect(),
            },
            metarule: meta.name.clone(),
            gt: n.gt.as_ref().map(|t| e.b.walk(t)),
        });
    }
    let program_type = clauses
        .iter()
        .find(|c| c.clause.head.pred.as_const() == Some(&*e.example_pred))
        .and_then(|c| c.gt.clone());
    LearnedProgram { clauses, program_type }
}
