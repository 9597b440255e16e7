//! Problem-file parser.
//!
//! One statement per `.`-terminated declaration; `%` starts a comment.
//! Term variables and type variables live in separate namespaces, both
//! scoped to a single statement.

use rustc_hash::FxHashMap;

use super::{Builtin, Evaluator, InterpRef, InterpretedClause, Metarule, PrimDecl, Problem};
use crate::error::{Error, Result};
use crate::refine::Refinement;
use crate::term::{fresh_var, Atom, Term};
use crate::types;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Int(i64),
    Str(String),
    /// Raw text between `<|` and `|>`.
    Ref(String),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        col,
        msg: msg.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, c);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut col, ch);
            }
            continue;
        }
        let push = |out: &mut Vec<Spanned>, tok| out.push(Spanned { tok, line: l0, col: c0 });
        if c == '<' && chars.get(i + 1) == Some(&'|') {
            advance(&mut i, &mut line, &mut col, '<');
            advance(&mut i, &mut line, &mut col, '|');
            let mut body = String::new();
            loop {
                match chars.get(i) {
                    None => return Err(syntax(l0, c0, "unterminated refinement `<|`")),
                    Some('|') if chars.get(i + 1) == Some(&'>') => {
                        advance(&mut i, &mut line, &mut col, '|');
                        advance(&mut i, &mut line, &mut col, '>');
                        break;
                    }
                    Some(&ch) => {
                        body.push(ch);
                        advance(&mut i, &mut line, &mut col, ch);
                    }
                }
            }
            push(&mut out, Tok::Ref(body.trim().to_string()));
            continue;
        }
        if c == '"' {
            advance(&mut i, &mut line, &mut col, c);
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(syntax(l0, c0, "unterminated string")),
                    Some('"') => {
                        advance(&mut i, &mut line, &mut col, '"');
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        advance(&mut i, &mut line, &mut col, ch);
                    }
                }
            }
            push(&mut out, Tok::Str(s));
            continue;
        }
        let negative = c == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit);
        if c.is_ascii_digit() || negative {
            let mut s = String::new();
            s.push(c);
            advance(&mut i, &mut line, &mut col, c);
            while let Some(&d) = chars.get(i).filter(|d| d.is_ascii_digit()) {
                s.push(d);
                advance(&mut i, &mut line, &mut col, d);
            }
            let n = s
                .parse()
                .map_err(|_| syntax(l0, c0, format!("integer `{s}` out of range")))?;
            push(&mut out, Tok::Int(n));
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&d) = chars.get(i).filter(|d| d.is_alphanumeric() || **d == '_') {
                s.push(d);
                advance(&mut i, &mut line, &mut col, d);
            }
            let tok = if c.is_uppercase() || c == '_' {
                Tok::Var(s)
            } else {
                Tok::Ident(s)
            };
            push(&mut out, tok);
            continue;
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let p: &'static str = match two.as_str() {
            "::" => "::",
            ":-" => ":-",
            _ => match c {
                '(' => "(",
                ')' => ")",
                '[' => "[",
                ']' => "]",
                ',' => ",",
                '|' => "|",
                '.' => ".",
                '/' => "/",
                _ => return Err(syntax(l0, c0, format!("unexpected character `{c}`"))),
            },
        };
        for ch in p.chars() {
            advance(&mut i, &mut line, &mut col, ch);
        }
        push(&mut out, Tok::Punct(p));
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    term_vars: FxHashMap<String, Term>,
    type_vars: FxHashMap<String, Term>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (l, c) = self.here();
        Err(syntax(l, c, msg))
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<()> {
        if self.eat(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.bump() {
            Tok::Ident(s) => Ok(s),
            other => {
                self.pos -= usize::from(other != Tok::Eof);
                self.err(format!("expected a name, found {}", describe(&other)))
            }
        }
    }

    fn int(&mut self) -> Result<i64> {
        match self.bump() {
            Tok::Int(n) => Ok(n),
            other => {
                self.pos -= usize::from(other != Tok::Eof);
                self.err(format!("expected an integer, found {}", describe(&other)))
            }
        }
    }

    fn reset_scope(&mut self) {
        self.term_vars.clear();
        self.type_vars.clear();
    }

    fn term_var(&mut self, name: &str) -> Term {
        if name == "_" {
            return fresh_var();
        }
        self.term_vars.entry(name.to_string()).or_insert_with(fresh_var).clone()
    }

    fn type_var(&mut self, name: &str) -> Term {
        if name == "_" {
            return fresh_var();
        }
        self.type_vars.entry(name.to_string()).or_insert_with(fresh_var).clone()
    }

    fn comma_list<T>(&mut self, close: &str, mut item: impl FnMut(&mut Self) -> Result<T>) -> Result<Vec<T>> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat(close) {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn term(&mut self) -> Result<Term> {
        match self.bump() {
            Tok::Var(v) => Ok(self.term_var(&v)),
            Tok::Int(n) => Ok(Term::Int(n)),
            Tok::Ident(f) => {
                if self.eat("(") {
                    let args = self.comma_list(")", Self::term)?;
                    Ok(Term::compound(&f, args))
                } else {
                    Ok(Term::constant(&f))
                }
            }
            Tok::Punct("[") => {
                if self.eat("]") {
                    return Ok(Term::nil());
                }
                let mut items = vec![self.term()?];
                while self.eat(",") {
                    items.push(self.term()?);
                }
                let tail = if self.eat("|") { self.term()? } else { Term::nil() };
                self.expect("]")?;
                Ok(Term::list_with_tail(items, tail))
            }
            other => {
                self.pos -= usize::from(other != Tok::Eof);
                self.err(format!("expected a term, found {}", describe(&other)))
            }
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let pred = match self.bump() {
            Tok::Ident(p) => Term::constant(&p),
            Tok::Var(v) => self.term_var(&v),
            other => {
                self.pos -= usize::from(other != Tok::Eof);
                return self.err(format!("expected an atom, found {}", describe(&other)));
            }
        };
        self.expect("(")?;
        let args = self.comma_list(")", Self::term)?;
        Ok(Atom::new(pred, args))
    }

    fn ty(&mut self) -> Result<Term> {
        match self.bump() {
            Tok::Var(v) => Ok(self.type_var(&v)),
            Tok::Ident(b) => {
                if self.eat("(") {
                    let args = self.comma_list(")", Self::ty)?;
                    Ok(Term::compound(&b, args))
                } else {
                    Ok(types::base(&b))
                }
            }
            Tok::Punct("[") => Ok(types::pred_type(self.comma_list("]", Self::ty)?)),
            other => {
                self.pos -= usize::from(other != Tok::Eof);
                self.err(format!("expected a type, found {}", describe(&other)))
            }
        }
    }

    fn pred_ty(&mut self) -> Result<Term> {
        if !self.is_punct("[") {
            return self.err("expected a predicate type `[...]`");
        }
        self.ty()
    }

    fn annotated(&mut self) -> Result<(Atom, Term)> {
        let a = self.atom()?;
        self.expect("::")?;
        let t = self.pred_ty()?;
        Ok((a, t))
    }

    fn body(&mut self) -> Result<Vec<(Atom, Term)>> {
        let mut out = Vec::new();
        if self.eat(":-") {
            out.push(self.annotated()?);
            while self.eat(",") {
                out.push(self.annotated()?);
            }
        }
        Ok(out)
    }

    fn var_list(&mut self) -> Result<Vec<Term>> {
        self.expect("[")?;
        self.comma_list("]", |p| match p.bump() {
            Tok::Var(v) => Ok(p.term_var(&v)),
            other => {
                p.pos -= usize::from(other != Tok::Eof);
                p.err(format!("expected a variable, found {}", describe(&other)))
            }
        })
    }

    fn refinement_tok(&mut self) -> Option<String> {
        if let Tok::Ref(r) = self.peek().clone() {
            self.pos += 1;
            Some(r)
        } else {
            None
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Var(s) => format!("variable `{s}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::Str(s) => format!("\"{s}\""),
        Tok::Ref(_) => "a refinement".to_string(),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".to_string(),
    }
}

struct PendingPrim {
    decl: PrimDecl,
    explicit_eval: bool,
}

/// Parse a single atom such as `p([1,2],X)`, optionally ending in `.`.
/// Variables with the same name share one term variable.
pub fn parse_atom(text: &str) -> Result<Atom> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        term_vars: FxHashMap::default(),
        type_vars: FxHashMap::default(),
    };
    let a = p.atom()?;
    p.eat(".");
    match p.peek() {
        Tok::Eof => Ok(a),
        t => p.err(format!("unexpected {} after atom", describe(t))),
    }
}

/// Parse a problem file.
pub fn parse_problem(text: &str) -> Result<Problem> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        term_vars: FxHashMap::default(),
        type_vars: FxHashMap::default(),
    };
    let mut problem = Problem::default();
    let mut prims: Vec<PendingPrim> = Vec::new();
    let mut facts: Vec<(Atom, usize, usize)> = Vec::new();

    while *p.peek() != Tok::Eof {
        p.reset_scope();
        let (line, col) = p.here();
        let kw = p.ident()?;
        match kw.as_str() {
            "prim" => prims.push(parse_prim(&mut p, line, col)?),
            "interp" => {
                let (head, head_type) = p.annotated()?;
                let exists = if matches!(p.peek(), Tok::Ident(s) if s == "exists") {
                    p.bump();
                    p.var_list()?.iter().filter_map(Term::as_var).collect()
                } else {
                    Vec::new()
                };
                if head.pred.as_const().is_none() {
                    return Err(syntax(line, col, "interpreted clause head needs a predicate name"));
                }
                let body = p.body()?;
                problem.interpreted.push(InterpretedClause {
                    exists,
                    head,
                    head_type,
                    body,
                });
            }
            "interp_ref" => {
                let head = p.atom()?;
                let Some(name) = head.pred.as_const().map(str::to_string) else {
                    return Err(syntax(line, col, "interp_ref needs a predicate name"));
                };
                let Some(text) = p.refinement_tok() else {
                    return p.err("expected a refinement `<| ... |>`");
                };
                let vars = p.term_vars.clone();
                let refinement = Refinement::parse_template(&text, |n| {
                    vars.get(n)
                        .cloned()
                        .ok_or_else(|| syntax(line, col, format!("slot ?{n} is not an argument of {name}")))
                })?;
                problem.interp_refs.push(InterpRef {
                    name,
                    params: head.args,
                    refinement,
                });
            }
            "metarule" => {
                let name = p.ident()?;
                let exists = p.var_list()?.iter().filter_map(Term::as_var).collect();
                let (head, head_type) = p.annotated()?;
                let body = p.body()?;
                problem.metarules.push(Metarule {
                    name,
                    exists,
                    head,
                    head_type,
                    body,
                });
            }
            "pos" | "neg" => {
                let a = p.atom()?;
                if kw == "pos" {
                    problem.pos.push(a);
                } else {
                    problem.neg.push(a);
                }
            }
            "example_type" => problem.example_type = Some(p.pred_ty()?),
            "option" => {
                let key = p.ident()?;
                let value = match p.bump() {
                    Tok::Ident(s) | Tok::Str(s) | Tok::Var(s) => s,
                    Tok::Int(n) => n.to_string(),
                    other => {
                        p.pos -= usize::from(other != Tok::Eof);
                        return p.err(format!("expected an option value, found {}", describe(&other)));
                    }
                };
                problem
                    .options
                    .set(&key, &value)
                    .map_err(|e| syntax(line, col, e.to_string()))?;
            }
            "fact" => facts.push((p.atom()?, line, col)),
            "smt_define" => match p.refinement_tok() {
                Some(text) => problem.smt_defines.push(text),
                None => return p.err("expected `<| ... |>` after smt_define"),
            },
            other => return Err(syntax(line, col, format!("unknown statement `{other}`"))),
        }
        p.expect(".")?;
    }

    for (fact, line, col) in facts {
        let name = fact.pred.as_const().unwrap_or_default().to_string();
        let Some(pp) = prims
            .iter_mut()
            .find(|pp| pp.decl.name == name && pp.decl.arity == fact.arity())
        else {
            return Err(syntax(
                line,
                col,
                format!("fact for undeclared primitive {name}/{}", fact.arity()),
            ));
        };
        if !fact.is_ground() {
            return Err(syntax(line, col, "facts must be ground"));
        }
        match &mut pp.decl.eval {
            Evaluator::Table(rows) if !pp.explicit_eval => rows.push(fact.args),
            _ => {
                return Err(syntax(
                    line,
                    col,
                    format!("{name} has a builtin evaluator and cannot take facts"),
                ))
            }
        }
    }
    problem.prims = prims.into_iter().map(|pp| pp.decl).collect();
    problem.validate()?;
    Ok(problem)
}

fn parse_prim(p: &mut Parser, line: usize, col: usize) -> Result<PendingPrim> {
    let name = p.ident()?;
    p.expect("/")?;
    let arity = p.int()?;
    p.expect("::")?;
    let ty = p.pred_ty()?;
    let type_arity = types::pred_args(&ty).map_or(0, <[Term]>::len);
    if arity < 0 || type_arity != arity as usize {
        return Err(Error::Arity {
            what: format!("type of primitive {name}"),
            expected: arity.max(0) as usize,
            found: type_arity,
        });
    }
    let (eval, explicit_eval) = if matches!(p.peek(), Tok::Ident(s) if s == "is") {
        p.bump();
        let b = p.ident()?;
        let param = if p.eat("(") {
            let n = p.int()?;
            p.expect(")")?;
            Some(n)
        } else {
            None
        };
        let builtin = Builtin::lookup(&b, param).map_err(|e| syntax(line, col, e.to_string()))?;
        (Evaluator::Builtin(builtin), true)
    } else {
        match name.parse::<Builtin>() {
            Ok(b) if b.arity() == arity as usize => (Evaluator::Builtin(b), false),
            _ => (Evaluator::Table(Vec::new()), false),
        }
    };
    let mut decl = PrimDecl::new(&name, ty, eval);
    if let Some(text) = p.refinement_tok() {
        let params = decl.params.clone();
        decl.refinement = Refinement::parse_template(&text, |slot| {
            let mut cs = slot.chars();
            match (cs.next(), cs.next()) {
                (Some(c), None) if c.is_ascii_uppercase() => {
                    let i = (c as u8 - b'A') as usize;
                    params
                        .get(i)
                        .cloned()
                        .ok_or_else(|| syntax(line, col, format!("slot ?{slot} exceeds arity of {name}")))
                }
                _ => Err(syntax(
                    line,
                    col,
                    format!("primitive slots are ?A, ?B, ...; found ?{slot}"),
                )),
            }
        })?;
    }
    Ok(PendingPrim { decl, explicit_eval })
}
