//! Problem printer and alpha-canonical form.

use rustc_hash::FxHashMap;

use super::{Evaluator, InterpRef, InterpretedClause, Metarule, PrimDecl, Problem};
use crate::refine::Refinement;
use crate::term::{Atom, Term, VarId, VarNamer};
use crate::types::write_type;

struct Stmt {
    terms: VarNamer,
    types: VarNamer,
}

impl Stmt {
    fn new() -> Stmt {
        Stmt {
            terms: VarNamer::terms(),
            types: VarNamer::types(),
        }
    }

    fn ty(&mut self, t: &Term) -> String {
        let mut s = String::new();
        write_type(t, &mut self.types, &mut s);
        s
    }

    fn annotated(&mut self, a: &Atom, t: &Term) -> String {
        format!("{}::{}", self.terms.atom(a), self.ty(t))
    }

    fn body(&mut self, body: &[(Atom, Term)]) -> String {
        if body.is_empty() {
            return String::new();
        }
        let atoms: Vec<String> = body.iter().map(|(a, t)| self.annotated(a, t)).collect();
        format!(" :- {}", atoms.join(", "))
    }
}

fn option_value(v: &str) -> String {
    let plain = v
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
        && v.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if plain {
        v.to_string()
    } else {
        format!("\"{v}\"")
    }
}

fn print_prim(p: &PrimDecl, out: &mut String) {
    let mut st = Stmt::new();
    out.push_str(&format!("prim {}/{} :: {}", p.name, p.arity, st.ty(&p.ty)));
    if let Evaluator::Builtin(b) = &p.eval {
        let implied = p.name.parse::<super::Builtin>().ok() == Some(*b);
        if !implied {
            out.push_str(&format!(" is {b}"));
        }
    }
    if !p.refinement.is_true() {
        let text = p.refinement.template_text(|t| {
            let i = p.params.iter().position(|q| q == t).unwrap_or(0);
            ((b'A' + i as u8) as char).to_string()
        });
        out.push_str(&format!(" <| {text} |>"));
    }
    out.push_str(".\n");
    if let Evaluator::Table(rows) = &p.eval {
        for row in rows {
            let a = Atom::named(&p.name, row.clone());
            out.push_str(&format!("fact {}.\n", VarNamer::terms().atom(&a)));
        }
    }
}

fn print_interp(c: &InterpretedClause, out: &mut String) {
    let mut st = Stmt::new();
    out.push_str(&format!("interp {}", st.annotated(&c.head, &c.head_type)));
    if !c.exists.is_empty() {
        let names: Vec<String> = c.exists.iter().map(|v| st.terms.name(*v)).collect();
        out.push_str(&format!(" exists [{}]", names.join(",")));
    }
    out.push_str(&st.body(&c.body));
    out.push_str(".\n");
}

fn print_interp_ref(r: &InterpRef, out: &mut String) {
    let mut st = Stmt::new();
    let head = st.terms.atom(&Atom::named(&r.name, r.params.clone()));
    let text = r.refinement.template_text(|t| st.terms.term(t));
    out.push_str(&format!("interp_ref {head} <| {text} |>.\n"));
}

fn print_metarule(m: &Metarule, out: &mut String) {
    let mut st = Stmt::new();
    let names: Vec<String> = m.exists.iter().map(|v| st.terms.name(*v)).collect();
    out.push_str(&format!(
        "metarule {} [{}] {}{}.\n",
        m.name,
        names.join(","),
        st.annotated(&m.head, &m.head_type),
        st.body(&m.body)
    ));
}

/// Render a problem in the surface syntax accepted by `parse_problem`.
pub fn print_problem(p: &Problem) -> String {
    let mut out = String::new();
    for (k, v) in p.options.non_default() {
        out.push_str(&format!("option {k} {}.\n", option_value(&v)));
    }
    for d in &p.smt_defines {
        out.push_str(&format!("smt_define <| {d} |>.\n"));
    }
    p.prims.iter().for_each(|d| print_prim(d, &mut out));
    p.interpreted.iter().for_each(|c| print_interp(c, &mut out));
    p.interp_refs.iter().for_each(|r| print_interp_ref(r, &mut out));
    p.metarules.iter().for_each(|m| print_metarule(m, &mut out));
    if let Some(t) = &p.example_type {
        out.push_str(&format!("example_type {}.\n", Stmt::new().ty(t)));
    }
    for (kw, atoms) in [("pos", &p.pos), ("neg", &p.neg)] {
        for a in atoms {
            out.push_str(&format!("{kw} {}.\n", VarNamer::terms().atom(a)));
        }
    }
    out
}

/// Renumbers variables from zero in order of appearance.
#[derive(Default)]
struct Canon {
    map: FxHashMap<VarId, VarId>,
}

impl Canon {
    fn var(&mut self, v: VarId) -> VarId {
        let next = self.map.len() as VarId;
        *self.map.entry(v).or_insert(next)
    }

    fn term(&mut self, t: &Term) -> Term {
        t.map_vars(&mut |v| Some(Term::Var(self.var(v))))
    }

    fn atom(&mut self, a: &Atom) -> Atom {
        a.map_vars(&mut |v| Some(Term::Var(self.var(v))))
    }

    fn body(&mut self, body: &[(Atom, Term)]) -> Vec<(Atom, Term)> {
        body.iter().map(|(a, t)| (self.atom(a), self.term(t))).collect()
    }

    fn refinement(&mut self, r: &Refinement) -> Refinement {
        r.map_slots(&mut |t| self.term(t))
    }
}

impl Problem {
    /// A copy with every declaration's variables renumbered canonically, so
    /// alpha-equivalent problems compare equal.
    pub fn canonical(&self) -> Problem {
        let mut p = self.clone();
        for d in &mut p.prims {
            let mut c = Canon::default();
            d.params = d.params.iter().map(|t| c.term(t)).collect();
            d.ty = c.term(&d.ty);
            d.refinement = c.refinement(&d.refinement);
        }
        for cl in &mut p.interpreted {
            let mut c = Canon::default();
            cl.exists = cl.exists.iter().map(|v| c.var(*v)).collect();
            cl.head = c.atom(&cl.head);
            cl.head_type = c.term(&cl.head_type);
            cl.body = c.body(&cl.body);
        }
        for r in &mut p.interp_refs {
            let mut c = Canon::default();
            r.params = r.params.iter().map(|t| c.term(t)).collect();
            r.refinement = c.refinement(&r.refinement);
        }
        for m in &mut p.metarules {
            let mut c = Canon::default();
            m.exists = m.exists.iter().map(|v| c.var(*v)).collect();
            m.head = c.atom(&m.head);
            m.head_type = c.term(&m.head_type);
            m.body = c.body(&m.body);
        }
        if let Some(t) = &p.example_type {
            p.example_type = Some(Canon::default().term(t));
        }
        p
    }
}
