//! Terms and formulas of a first-order language, their parser, satisfaction
//! over finite structures, prenex conversion and the characteristic
//! existential sentence of a finite subset.
//!
//! The concrete grammar (ASCII, whitespace-insensitive):
//!
//! ```text
//! formula := "forall" VAR "." formula | "exists" VAR "." formula | disj
//! disj    := conj ( "|" conj )*
//! conj    := unit ( "&" unit )*
//! unit    := "!" unit | "(" formula ")" | atom
//! atom    := term "=" term | term "!=" term | RELNAME "(" term ("," term)* ")"
//! term    := primary ( "*" primary )*
//! primary := CONSTNAME | VAR | FUNCNAME "(" term ("," term)* ")" | "(" term ")"
//! ```
//!
//! Names are `[A-Za-z0-9_]+` and resolve against the signature; constants
//! shadow variables. `t != u` is sugar for `!(t = u)`. The infix `*` is sugar
//! for the signature's unique binary function and exists so equations can be
//! written the usual way (`x*x = y`).

use std::collections::BTreeSet;
use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::fostruct::{FiniteStructure, Signature, StructureError};

/// A term of the language.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Variable(String),
    Constant(String),
    Apply(String, Vec<Term>),
}

impl Term {
    /// Nesting depth of function applications.
    pub fn level(&self) -> usize {
        match self {
            Term::Variable(_) | Term::Constant(_) => 0,
            Term::Apply(_, args) => 1 + args.iter().map(Term::level).max().unwrap_or(0),
        }
    }

    pub fn constants(&self) -> BTreeSet<String> {
        match self {
            Term::Variable(_) => BTreeSet::new(),
            Term::Constant(c) => BTreeSet::from([c.clone()]),
            Term::Apply(_, args) => args.iter().flat_map(Term::constants).collect(),
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        match self {
            Term::Variable(v) => BTreeSet::from([v.clone()]),
            Term::Constant(_) => BTreeSet::new(),
            Term::Apply(_, args) => args.iter().flat_map(Term::variables).collect(),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Variable(v) => write!(f, "{v}"),
            Term::Constant(c) => write!(f, "{c}"),
            Term::Apply(func, args) => {
                write!(f, "{func}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A first-order formula over a signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Equal(Term, Term),
    Relation(String, Vec<Term>),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
}

/// Level, degree and constant set of a formula, per the standard recursive
/// definitions: atomic formulas have degree 0; negation and quantifiers add
/// one; conjunction and disjunction add the degrees of the operands.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metadata {
    pub level: usize,
    pub degree: usize,
    pub constants: BTreeSet<String>,
}

pub fn metadata(f: &Formula) -> Metadata {
    match f {
        Formula::Equal(a, b) => Metadata {
            level: a.level().max(b.level()),
            degree: 0,
            constants: a.constants().union(&b.constants()).cloned().collect(),
        },
        Formula::Relation(_, terms) => Metadata {
            level: terms.iter().map(Term::level).max().unwrap_or(0),
            degree: 0,
            constants: terms.iter().flat_map(Term::constants).collect(),
        },
        Formula::Not(g) | Formula::Exists(_, g) | Formula::Forall(_, g) => {
            let inner = metadata(g);
            Metadata {
                level: inner.level,
                degree: inner.degree + 1,
                constants: inner.constants,
            }
        }
        Formula::And(a, b) | Formula::Or(a, b) => {
            let ma = metadata(a);
            let mb = metadata(b);
            Metadata {
                level: ma.level.max(mb.level),
                degree: ma.degree + mb.degree,
                constants: ma.constants.union(&mb.constants).cloned().collect(),
            }
        }
    }
}

impl Formula {
    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            Formula::Equal(a, b) => a.variables().union(&b.variables()).cloned().collect(),
            Formula::Relation(_, terms) => terms.iter().flat_map(Term::variables).collect(),
            Formula::Not(g) => g.free_vars(),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.free_vars().union(&b.free_vars()).cloned().collect()
            }
            Formula::Exists(v, g) | Formula::Forall(v, g) => {
                let mut vars = g.free_vars();
                vars.remove(v);
                vars
            }
        }
    }

    pub fn is_sentence(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Left-associated conjunction of a non-empty clause list.
    pub fn and_all(mut clauses: Vec<Formula>) -> Option<Formula> {
        if clauses.is_empty() {
            return None;
        }
        let mut acc = clauses.remove(0);
        for c in clauses {
            acc = Formula::And(Box::new(acc), Box::new(c));
        }
        Some(acc)
    }
}

// Rendering precedence: formula 0, disj 1, conj 2, unit 3.
fn render(f: &Formula, out: &mut fmt::Formatter<'_>, level: u8) -> fmt::Result {
    let own = match f {
        Formula::Exists(..) | Formula::Forall(..) => 0,
        Formula::Or(..) => 1,
        Formula::And(..) => 2,
        _ => 3,
    };
    if own < level {
        write!(out, "(")?;
        render(f, out, 0)?;
        return write!(out, ")");
    }
    match f {
        Formula::Equal(a, b) => write!(out, "{a} = {b}"),
        Formula::Relation(r, terms) => {
            write!(out, "{r}(")?;
            for (i, t) in terms.iter().enumerate() {
                if i > 0 {
                    write!(out, ", ")?;
                }
                write!(out, "{t}")?;
            }
            write!(out, ")")
        }
        Formula::Not(g) => match g.as_ref() {
            Formula::Equal(a, b) => write!(out, "{a} != {b}"),
            _ => {
                write!(out, "!")?;
                render(g, out, 3)
            }
        },
        Formula::And(a, b) => {
            render(a, out, 2)?;
            write!(out, " & ")?;
            render(b, out, 2)
        }
        Formula::Or(a, b) => {
            render(a, out, 1)?;
            write!(out, " | ")?;
            render(b, out, 1)
        }
        Formula::Exists(v, g) => {
            write!(out, "exists {v} . ")?;
            render(g, out, 0)
        }
        Formula::Forall(v, g) => {
            write!(out, "forall {v} . ")?;
            render(g, out, 0)
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        render(self, f, 0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{message} (at offset {offset})")]
pub struct ParseError {
    pub message: String,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Name(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Amp,
    Pipe,
    Bang,
    Eq,
    Neq,
    Star,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            ',' => {
                out.push((Tok::Comma, i));
                i += 1;
            }
            '.' => {
                out.push((Tok::Dot, i));
                i += 1;
            }
            '&' => {
                out.push((Tok::Amp, i));
                i += 1;
            }
            '|' => {
                out.push((Tok::Pipe, i));
                i += 1;
            }
            '*' => {
                out.push((Tok::Star, i));
                i += 1;
            }
            '=' => {
                out.push((Tok::Eq, i));
                i += 1;
            }
            '!' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    out.push((Tok::Neq, i));
                    i += 2;
                } else {
                    out.push((Tok::Bang, i));
                    i += 1;
                }
            }
            _ if c.is_ascii_alphanumeric() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((Tok::Name(text[start..i].to_string()), start));
            }
            _ => {
                return Err(ParseError {
                    message: format!("unexpected character `{c}`"),
                    offset: i,
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    sig: &'a Signature,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(_, o)| *o)
            .unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let tok = self.tokens.get(self.pos).map(|(t, _)| t.clone());
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn err(&self, message: String) -> ParseError {
        ParseError {
            message,
            offset: self.offset(),
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        if let Some(Tok::Name(name)) = self.peek() {
            if name == "forall" || name == "exists" {
                let kind = name.clone();
                self.pos += 1;
                let var = match self.bump() {
                    Some(Tok::Name(v)) => v,
                    _ => return Err(self.err("expected a variable name".into())),
                };
                if self.sig.has_constant(&var)
                    || self.sig.function_arity(&var).is_some()
                    || self.sig.relation_arity(&var).is_some()
                {
                    return Err(self.err(format!(
                        "cannot quantify over `{var}`: it names a signature symbol"
                    )));
                }
                self.expect(Tok::Dot, "`.` after the quantified variable")?;
                let body = self.formula()?;
                return Ok(if kind == "forall" {
                    Formula::Forall(var, Box::new(body))
                } else {
                    Formula::Exists(var, Box::new(body))
                });
            }
        }
        self.disj()
    }

    fn disj(&mut self) -> Result<Formula, ParseError> {
        let mut acc = self.conj()?;
        while self.peek() == Some(&Tok::Pipe) {
            self.pos += 1;
            let rhs = self.conj()?;
            acc = Formula::Or(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn conj(&mut self) -> Result<Formula, ParseError> {
        let mut acc = self.unit()?;
        while self.peek() == Some(&Tok::Amp) {
            self.pos += 1;
            let rhs = self.unit()?;
            acc = Formula::And(Box::new(acc), Box::new(rhs));
        }
        Ok(acc)
    }

    fn unit(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.pos += 1;
                let inner = self.unit()?;
                Ok(Formula::Not(Box::new(inner)))
            }
            Some(Tok::LParen) => {
                // Could be a parenthesized formula or a parenthesized term
                // starting an atom, e.g. `(x*x)*0 = y`. Try the formula
                // reading first and fall back on the atom.
                let snapshot = self.pos;
                self.pos += 1;
                if let Ok(inner) = self.formula() {
                    if self.peek() == Some(&Tok::RParen) {
                        self.pos += 1;
                        match self.peek() {
                            Some(Tok::Eq) | Some(Tok::Neq) | Some(Tok::Star) => {
                                self.pos = snapshot; // it was a term after all
                            }
                            _ => return Ok(inner),
                        }
                    } else {
                        self.pos = snapshot;
                    }
                } else {
                    self.pos = snapshot;
                }
                self.atom()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula, ParseError> {
        if let Some(Tok::Name(name)) = self.peek() {
            if self.sig.relation_arity(name).is_some() {
                let name = name.clone();
                let arity = self.sig.relation_arity(&name).unwrap();
                self.pos += 1;
                self.expect(Tok::LParen, "`(` after relation name")?;
                let terms = self.term_list()?;
                self.expect(Tok::RParen, "`)` closing relation arguments")?;
                if terms.len() != arity {
                    return Err(self.err(format!(
                        "relation `{name}` expects {arity} arguments, got {}",
                        terms.len()
                    )));
                }
                return Ok(Formula::Relation(name, terms));
            }
        }
        let lhs = self.term()?;
        match self.bump() {
            Some(Tok::Eq) => {
                let rhs = self.term()?;
                Ok(Formula::Equal(lhs, rhs))
            }
            Some(Tok::Neq) => {
                let rhs = self.term()?;
                Ok(Formula::Not(Box::new(Formula::Equal(lhs, rhs))))
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected `=` or `!=` after a term".into()))
            }
        }
    }

    fn term_list(&mut self) -> Result<Vec<Term>, ParseError> {
        let mut terms = vec![self.term()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            terms.push(self.term()?);
        }
        Ok(terms)
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let mut acc = self.primary()?;
        while self.peek() == Some(&Tok::Star) {
            let offset = self.offset();
            self.pos += 1;
            let rhs = self.primary()?;
            let binary: Vec<&str> = self
                .sig
                .functions()
                .filter(|(_, a)| *a == 2)
                .map(|(n, _)| n)
                .collect();
            let func = match binary.as_slice() {
                [one] => (*one).to_string(),
                [] => {
                    return Err(ParseError {
                        message: "`*` needs a binary function in the signature".into(),
                        offset,
                    })
                }
                _ => {
                    return Err(ParseError {
                        message: format!(
                            "`*` is ambiguous: signature has binary functions {}",
                            binary.join(", ")
                        ),
                        offset,
                    })
                }
            };
            acc = Term::Apply(func, vec![acc, rhs]);
        }
        Ok(acc)
    }

    fn primary(&mut self) -> Result<Term, ParseError> {
        match self.bump() {
            Some(Tok::LParen) => {
                let inner = self.term()?;
                self.expect(Tok::RParen, "`)` closing a term")?;
                Ok(inner)
            }
            Some(Tok::Name(name)) => {
                if let Some(arity) = self.sig.function_arity(&name) {
                    self.expect(Tok::LParen, &format!("`(` after function `{name}`"))?;
                    let args = self.term_list()?;
                    self.expect(Tok::RParen, "`)` closing function arguments")?;
                    if args.len() != arity {
                        return Err(self.err(format!(
                            "function `{name}` expects {arity} arguments, got {}",
                            args.len()
                        )));
                    }
                    Ok(Term::Apply(name, args))
                } else if self.sig.has_constant(&name) {
                    Ok(Term::Constant(name))
                } else if self.sig.relation_arity(&name).is_some() {
                    self.pos -= 1;
                    Err(self.err(format!("relation `{name}` used in term position")))
                } else {
                    Ok(Term::Variable(name))
                }
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected a term".into()))
            }
        }
    }
}

/// Parses `text` against `sig`, resolving every name.
pub fn parse(text: &str, sig: &Signature) -> Result<Formula, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        sig,
        end: text.len(),
    };
    let formula = parser.formula()?;
    if parser.pos != parser.tokens.len() {
        return Err(parser.err("trailing input after formula".into()));
    }
    Ok(formula)
}

/// Parses a single equation `term = term`; anything else is rejected.
pub fn parse_equation(text: &str, sig: &Signature) -> Result<(Term, Term), ParseError> {
    match parse(text, sig)? {
        Formula::Equal(a, b) => Ok((a, b)),
        _ => Err(ParseError {
            message: "expected an equation of the form `term = term`".into(),
            offset: 0,
        }),
    }
}

/// An assignment of carrier elements (by id) to variable names.
pub type Assignment = BTreeMap<String, String>;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("variable `{0}` has no assigned value")]
    Unassigned(String),
    #[error("structure does not interpret symbol `{0}`")]
    UnknownSymbol(String),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

pub(crate) fn eval_term(
    m: &FiniteStructure,
    term: &Term,
    env: &mut Vec<(String, usize)>,
) -> Result<usize, EvalError> {
    match term {
        Term::Variable(v) => env
            .iter()
            .rev()
            .find(|(name, _)| name == v)
            .map(|(_, e)| *e)
            .ok_or_else(|| EvalError::Unassigned(v.clone())),
        Term::Constant(c) => m
            .const_elem(c)
            .ok_or_else(|| EvalError::UnknownSymbol(c.clone())),
        Term::Apply(f, args) => {
            let mut values = Vec::with_capacity(args.len());
            for a in args {
                values.push(eval_term(m, a, env)?);
            }
            m.func_value(f, &values)
                .ok_or_else(|| EvalError::UnknownSymbol(f.clone()))
        }
    }
}

fn eval_inner(
    m: &FiniteStructure,
    f: &Formula,
    env: &mut Vec<(String, usize)>,
) -> Result<bool, EvalError> {
    match f {
        Formula::Equal(a, b) => Ok(eval_term(m, a, env)? == eval_term(m, b, env)?),
        Formula::Relation(r, terms) => {
            if m.signature().relation_arity(r).is_none() {
                return Err(EvalError::UnknownSymbol(r.clone()));
            }
            let mut tuple = Vec::with_capacity(terms.len());
            for t in terms {
                tuple.push(eval_term(m, t, env)?);
            }
            Ok(m.rel_contains(r, &tuple))
        }
        Formula::Not(g) => Ok(!eval_inner(m, g, env)?),
        Formula::And(a, b) => Ok(eval_inner(m, a, env)? && eval_inner(m, b, env)?),
        Formula::Or(a, b) => Ok(eval_inner(m, a, env)? || eval_inner(m, b, env)?),
        Formula::Exists(v, g) => {
            for e in 0..m.size() {
                env.push((v.clone(), e));
                let holds = eval_inner(m, g, env)?;
                env.pop();
                if holds {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Formula::Forall(v, g) => {
            for e in 0..m.size() {
                env.push((v.clone(), e));
                let holds = eval_inner(m, g, env)?;
                env.pop();
                if !holds {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

/// Satisfaction of `f` in `m` under `a`; quantifiers range over the carrier.
pub fn eval(m: &FiniteStructure, f: &Formula, a: &Assignment) -> Result<bool, EvalError> {
    let mut env = Vec::with_capacity(a.len() + 4);
    for (var, id) in a {
        env.push((var.clone(), m.require_elem(id)?));
    }
    eval_inner(m, f, &mut env)
}

/// Satisfaction of a sentence (no free variables).
pub fn eval_sentence(m: &FiniteStructure, f: &Formula) -> Result<bool, EvalError> {
    eval(m, f, &Assignment::new())
}

// ---------------------------------------------------------------------------
// Prenex normal form
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quant {
    Exists,
    Forall,
}

fn wrap(prefix: Vec<(Quant, String)>, matrix: Formula) -> Formula {
    let mut out = matrix;
    for (q, v) in prefix.into_iter().rev() {
        out = match q {
            Quant::Exists => Formula::Exists(v, Box::new(out)),
            Quant::Forall => Formula::Forall(v, Box::new(out)),
        };
    }
    out
}

fn split_prefix(mut f: Formula) -> (Vec<(Quant, String)>, Formula) {
    let mut prefix = Vec::new();
    loop {
        match f {
            Formula::Exists(v, g) => {
                prefix.push((Quant::Exists, v));
                f = *g;
            }
            Formula::Forall(v, g) => {
                prefix.push((Quant::Forall, v));
                f = *g;
            }
            _ => return (prefix, f),
        }
    }
}

/// Naive substitution of a variable name; safe on quantifier-free formulas.
fn subst_matrix(f: &Formula, from: &str, to: &str) -> Formula {
    fn subst_term(t: &Term, from: &str, to: &str) -> Term {
        match t {
            Term::Variable(v) if v == from => Term::Variable(to.into()),
            Term::Variable(_) | Term::Constant(_) => t.clone(),
            Term::Apply(f, args) => Term::Apply(
                f.clone(),
                args.iter().map(|a| subst_term(a, from, to)).collect(),
            ),
        }
    }
    match f {
        Formula::Equal(a, b) => {
            Formula::Equal(subst_term(a, from, to), subst_term(b, from, to))
        }
        Formula::Relation(r, terms) => Formula::Relation(
            r.clone(),
            terms.iter().map(|t| subst_term(t, from, to)).collect(),
        ),
        Formula::Not(g) => Formula::Not(Box::new(subst_matrix(g, from, to))),
        Formula::And(a, b) => Formula::And(
            Box::new(subst_matrix(a, from, to)),
            Box::new(subst_matrix(b, from, to)),
        ),
        Formula::Or(a, b) => Formula::Or(
            Box::new(subst_matrix(a, from, to)),
            Box::new(subst_matrix(b, from, to)),
        ),
        Formula::Exists(..) | Formula::Forall(..) => {
            unreachable!("substitution is only applied below the prefix")
        }
    }
}

fn all_names(f: &Formula, out: &mut BTreeSet<String>) {
    fn term_names(t: &Term, out: &mut BTreeSet<String>) {
        match t {
            Term::Variable(v) => {
                out.insert(v.clone());
            }
            Term::Constant(c) => {
                out.insert(c.clone());
            }
            Term::Apply(f, args) => {
                out.insert(f.clone());
                for a in args {
                    term_names(a, out);
                }
            }
        }
    }
    match f {
        Formula::Equal(a, b) => {
            term_names(a, out);
            term_names(b, out);
        }
        Formula::Relation(r, terms) => {
            out.insert(r.clone());
            for t in terms {
                term_names(t, out);
            }
        }
        Formula::Not(g) => all_names(g, out),
        Formula::And(a, b) | Formula::Or(a, b) => {
            all_names(a, out);
            all_names(b, out);
        }
        Formula::Exists(v, g) | Formula::Forall(v, g) => {
            out.insert(v.clone());
            all_names(g, out);
        }
    }
}

struct FreshNames {
    used: BTreeSet<String>,
}

impl FreshNames {
    fn fresh(&mut self, base: &str) -> String {
        let mut n = 1;
        loop {
            let candidate = format!("{base}_{n}");
            if self.used.insert(candidate.clone()) {
                return candidate;
            }
            n += 1;
        }
    }
}

/// Rename every binder of `prefix` to a brand-new name, innermost first, so
/// the renamed prefix can be concatenated with anything without capture.
fn freshen_prefix(
    prefix: Vec<(Quant, String)>,
    matrix: Formula,
    names: &mut FreshNames,
) -> (Vec<(Quant, String)>, Formula) {
    let mut matrix = matrix;
    let mut renamed: Vec<(Quant, String)> = Vec::with_capacity(prefix.len());
    for (q, v) in prefix.into_iter().rev() {
        let fresh = names.fresh(&v);
        matrix = subst_matrix(&matrix, &v, &fresh);
        renamed.push((q, fresh));
    }
    renamed.reverse();
    (renamed, matrix)
}

fn pnf(f: &Formula, names: &mut FreshNames) -> Formula {
    match f {
        Formula::Equal(..) | Formula::Relation(..) => f.clone(),
        Formula::Not(g) => {
            let (prefix, matrix) = split_prefix(pnf(g, names));
            let flipped: Vec<(Quant, String)> = prefix
                .into_iter()
                .map(|(q, v)| {
                    let q = match q {
                        Quant::Exists => Quant::Forall,
                        Quant::Forall => Quant::Exists,
                    };
                    (q, v)
                })
                .collect();
            wrap(flipped, Formula::Not(Box::new(matrix)))
        }
        Formula::And(a, b) | Formula::Or(a, b) => {
            let is_and = matches!(f, Formula::And(..));
            let (pa, ma) = split_prefix(pnf(a, names));
            let (pb, mb) = split_prefix(pnf(b, names));
            let (pa, ma) = freshen_prefix(pa, ma, names);
            let (pb, mb) = freshen_prefix(pb, mb, names);
            let mut prefix = pa;
            prefix.extend(pb);
            let matrix = if is_and {
                Formula::And(Box::new(ma), Box::new(mb))
            } else {
                Formula::Or(Box::new(ma), Box::new(mb))
            };
            wrap(prefix, matrix)
        }
        Formula::Exists(v, g) => {
            let inner = pnf(g, names);
            Formula::Exists(v.clone(), Box::new(inner))
        }
        Formula::Forall(v, g) => {
            let inner = pnf(g, names);
            Formula::Forall(v.clone(), Box::new(inner))
        }
    }
}

/// Prenex normal form: all quantifiers pulled to the front, bound variables
/// renamed apart, logically equivalent to the input.
pub fn to_prenex(f: &Formula) -> Formula {
    let mut used = BTreeSet::new();
    all_names(f, &mut used);
    let mut names = FreshNames { used };
    let out = pnf(f, &mut names);
    // A binder reused along a single quantifier path (e.g. `exists x exists
    // x`) survives pnf; rename such shadowed binders apart.
    let (prefix, matrix) = split_prefix(out);
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut final_prefix: Vec<(Quant, String)> = Vec::with_capacity(prefix.len());
    let mut renames: Vec<(usize, String, String)> = Vec::new();
    for (i, (q, v)) in prefix.into_iter().enumerate() {
        if seen.contains(&v) {
            let fresh = names.fresh(&v);
            renames.push((i, v.clone(), fresh.clone()));
            seen.insert(fresh.clone());
            final_prefix.push((q, fresh));
        } else {
            seen.insert(v.clone());
            final_prefix.push((q, v));
        }
    }
    // Matrix occurrences always belong to the innermost binder of a name, so
    // apply renames innermost-first.
    let mut matrix = matrix;
    let mut by_name: BTreeMap<String, String> = BTreeMap::new();
    for (_, from, to) in renames.iter().rev() {
        if !by_name.contains_key(from) {
            by_name.insert(from.clone(), to.clone());
        }
    }
    for (from, to) in by_name {
        matrix = subst_matrix(&matrix, &from, &to);
    }
    wrap(final_prefix, matrix)
}

/// Shape of a sentence's prenex quantifier prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantification {
    Universal,
    Existential,
    Neither,
}

#[derive(Debug, Error)]
#[error("formula has free variables: {0:?}")]
pub struct NotASentence(pub Vec<String>);

/// Classifies a sentence by its prenex prefix. A quantifier-free sentence is
/// vacuously both universal and existential; it is reported universal.
pub fn classify(f: &Formula) -> Result<Quantification, NotASentence> {
    let free = f.free_vars();
    if !free.is_empty() {
        return Err(NotASentence(free.into_iter().collect()));
    }
    let (prefix, _) = split_prefix(to_prenex(f));
    let mut saw_exists = false;
    let mut saw_forall = false;
    for (q, _) in &prefix {
        match q {
            Quant::Exists => saw_exists = true,
            Quant::Forall => saw_forall = true,
        }
    }
    Ok(match (saw_forall, saw_exists) {
        (true, true) => Quantification::Neither,
        (false, true) => Quantification::Existential,
        _ => Quantification::Universal,
    })
}

// ---------------------------------------------------------------------------
// Characteristic existential sentence
// ---------------------------------------------------------------------------

/// The existential sentence describing the ordered subset `s` of `m` up to
/// L-isomorphism.
///
/// The sentence is `exists x1 ... xk` of the conjunction, in this fixed
/// order:
///
/// 1. pairwise inequations between the bound variables;
/// 2. the constant diagram of each element: `x_i = c` for every constant it
///    interprets, plus either `!delta(x_i)` (when the signature carries the
///    `delta` predicate) or `x_i != c` clauses excluding the others;
/// 3. per function, the value clauses: `f(x...) = x_s` when the value is the
///    element `m_s` of `s`, `f(x...) = c` when the value interprets a
///    constant, and the exclusion clauses `f(x...) != x_j` when the value
///    lands outside `s` and the constants;
/// 4. per relation, the full positive and negative diagram on `s`.
///
/// `m` itself satisfies the sentence with the witness `x_i = m_i`, and a
/// structure `N` satisfies it exactly when `s` has an L-isomorphic partner
/// inside `N`.
pub fn characteristic_sentence(
    m: &FiniteStructure,
    s: &[String],
) -> Result<Formula, StructureError> {
    let mut elems: Vec<usize> = Vec::with_capacity(s.len());
    for id in s {
        let e = m.require_elem(id)?;
        if !elems.contains(&e) {
            elems.push(e);
        }
    }
    let var_prefix = pick_var_prefix(m.signature());
    let vars: Vec<String> = (1..=elems.len())
        .map(|i| format!("{var_prefix}{i}"))
        .collect();
    if elems.is_empty() {
        let v = format!("{var_prefix}1");
        return Ok(Formula::Exists(
            v.clone(),
            Box::new(Formula::Equal(Term::Variable(v.clone()), Term::Variable(v))),
        ));
    }
    let var = |i: usize| Term::Variable(vars[i].clone());
    let k = elems.len();
    let mut clauses: Vec<Formula> = Vec::new();

    // pairwise distinctness
    for i in 0..k {
        for j in i + 1..k {
            clauses.push(Formula::Not(Box::new(Formula::Equal(var(i), var(j)))));
        }
    }

    // constant diagram
    let has_delta = m.signature().relation_arity("delta") == Some(1);
    for (i, e) in elems.iter().enumerate() {
        let interpreted: BTreeSet<&str> = m.constants_of(*e).into_iter().collect();
        for sym in m.signature().constants() {
            if interpreted.contains(sym) {
                clauses.push(Formula::Equal(var(i), Term::Constant(sym.into())));
            }
        }
        if interpreted.is_empty() && has_delta {
            clauses.push(Formula::Not(Box::new(Formula::Relation(
                "delta".into(),
                vec![var(i)],
            ))));
        } else {
            for sym in m.signature().constants() {
                if !interpreted.contains(sym) {
                    clauses.push(Formula::Not(Box::new(Formula::Equal(
                        var(i),
                        Term::Constant(sym.into()),
                    ))));
                }
            }
        }
    }

    // function value clauses
    let functions: Vec<(String, usize)> = m
        .signature()
        .functions()
        .map(|(n, a)| (n.to_string(), a))
        .collect();
    for (symbol, arity) in &functions {
        for tuple in crate::fostruct::index_tuples(k, *arity) {
            let args: Vec<usize> = tuple.iter().map(|i| elems[*i]).collect();
            let Some(value) = m.func_value(symbol, &args) else {
                continue;
            };
            let app = Term::Apply(symbol.clone(), tuple.iter().map(|i| var(*i)).collect());
            if let Some(pos) = elems.iter().position(|e| *e == value) {
                clauses.push(Formula::Equal(app, var(pos)));
            } else if let Some(sym) = m.constants_of(value).first() {
                clauses.push(Formula::Equal(app, Term::Constant((*sym).into())));
            } else {
                for j in 0..k {
                    clauses.push(Formula::Not(Box::new(Formula::Equal(
                        app.clone(),
                        var(j),
                    ))));
                }
            }
        }
    }

    // relation diagram
    let relations: Vec<(String, usize)> = m
        .signature()
        .relations()
        .map(|(n, a)| (n.to_string(), a))
        .collect();
    for (symbol, arity) in &relations {
        for tuple in crate::fostruct::index_tuples(k, *arity) {
            let actual: Vec<usize> = tuple.iter().map(|i| elems[*i]).collect();
            let atom =
                Formula::Relation(symbol.clone(), tuple.iter().map(|i| var(*i)).collect());
            if m.rel_contains(symbol, &actual) {
                clauses.push(atom);
            } else {
                clauses.push(Formula::Not(Box::new(atom)));
            }
        }
    }

    let mut body = Formula::and_all(clauses).expect("k >= 1 always yields clauses");
    for v in vars.into_iter().rev() {
        body = Formula::Exists(v, Box::new(body));
    }
    Ok(body)
}

/// Witness assignment `x_i -> m_i` for the characteristic sentence of `s`.
pub fn characteristic_witness(m: &FiniteStructure, s: &[String]) -> Assignment {
    let prefix = pick_var_prefix(m.signature());
    let mut seen = Vec::new();
    for id in s {
        if !seen.contains(id) {
            seen.push(id.clone());
        }
    }
    seen.into_iter()
        .enumerate()
        .map(|(i, id)| (format!("{prefix}{}", i + 1), id))
        .collect()
}

fn pick_var_prefix(sig: &Signature) -> &'static str {
    'outer: for prefix in ["x", "y", "v", "w"] {
        let clash = |name: &str| {
            name.starts_with(prefix)
                && name[prefix.len()..].chars().all(|c| c.is_ascii_digit())
                && name.len() > prefix.len()
        };
        for c in sig.constants() {
            if clash(c) {
                continue 'outer;
            }
        }
        for (f, _) in sig.functions() {
            if clash(f) {
                continue 'outer;
            }
        }
        for (r, _) in sig.relations() {
            if clash(r) {
                continue 'outer;
            }
        }
        return prefix;
    }
    "zz_var"
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn assign(pairs: &[(&str, &str)]) -> Assignment {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn parse_axiom_like_sentence() {
        let dinf = fixtures::pg_dinf();
        let sig = dinf.structure().signature();
        let f = parse("forall x . (M(x,1,x) & M(1,x,x))", sig).unwrap();
        match &f {
            Formula::Forall(v, body) => {
                assert_eq!(v, "x");
                assert!(matches!(body.as_ref(), Formula::And(..)));
            }
            other => panic!("unexpected shape: {other:?}"),
        }
    }

    #[test]
    fn free_variables_are_tracked() {
        let dinf = fixtures::pg_dinf();
        let f = parse("exists z . M(x,y,z)", dinf.structure().signature()).unwrap();
        let free: Vec<String> = f.free_vars().into_iter().collect();
        assert_eq!(free, vec!["x".to_string(), "y".to_string()]);
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let dinf = fixtures::pg_dinf();
        let err = parse("M(x,1)", dinf.structure().signature()).unwrap_err();
        assert!(err.message.contains("expects 3 arguments"));
    }

    #[test]
    fn unknown_character_position_is_reported() {
        let dinf = fixtures::pg_dinf();
        let err = parse("M(x, #)", dinf.structure().signature()).unwrap_err();
        assert_eq!(err.offset, 5);
    }

    #[test]
    fn metadata_of_atomic_equation() {
        let dinf = fixtures::pg_dinf();
        let sig = dinf.structure().signature();
        let f = parse("x = 1", sig).unwrap();
        let md = metadata(&f);
        assert_eq!((md.level, md.degree), (0, 0));
        assert_eq!(md.constants, BTreeSet::from(["1".to_string()]));
    }

    #[test]
    fn metadata_counts_negation_degree() {
        let dinf = fixtures::pg_dinf();
        let f = parse("x != 1", dinf.structure().signature()).unwrap();
        assert_eq!(metadata(&f).degree, 1);
    }

    #[test]
    fn metadata_level_of_nested_application() {
        let dinf = fixtures::pg_dinf();
        let f = parse("inv(inv(x)) = x", dinf.structure().signature()).unwrap();
        let md = metadata(&f);
        assert_eq!((md.level, md.degree), (2, 0));
        assert!(md.constants.is_empty());
    }

    #[test]
    fn eval_group_inverse_sentence() {
        let m = fixtures::z3_group();
        let f = parse(
            "forall x . exists y . mul(x,y) = 0",
            m.signature(),
        )
        .unwrap();
        assert!(eval_sentence(&m, &f).unwrap());
    }

    #[test]
    fn eval_d_straddles_factors() {
        let dinf = fixtures::pg_dinf();
        let st = dinf.structure();
        let f = parse("D(x, y)", st.signature()).unwrap();
        assert!(!eval(st, &f, &assign(&[("x", "a"), ("y", "b")])).unwrap());
    }

    #[test]
    fn eval_existential_product() {
        let dinf = fixtures::pg_dinf();
        let st = dinf.structure();
        let f = parse("exists z . M(x, x, z)", st.signature()).unwrap();
        assert!(eval(st, &f, &assign(&[("x", "a")])).unwrap());
    }

    #[test]
    fn eval_unassigned_variable_is_an_error() {
        let dinf = fixtures::pg_dinf();
        let st = dinf.structure();
        let f = parse("D(x, y)", st.signature()).unwrap();
        assert!(matches!(
            eval(st, &f, &assign(&[("x", "a")])),
            Err(EvalError::Unassigned(v)) if v == "y"
        ));
    }

    #[test]
    fn prenex_pushes_negation_through() {
        let dinf = fixtures::pg_dinf();
        let sig = dinf.structure().signature();
        let f = parse("!(exists x . x = 1)", sig).unwrap();
        let p = to_prenex(&f);
        assert_eq!(p.to_string(), "forall x . x != 1");
    }

    #[test]
    fn prenex_renames_apart() {
        let dinf = fixtures::pg_dinf();
        let sig = dinf.structure().signature();
        let f = parse("(exists x . x = 1) & (exists x . x = y)", sig).unwrap();
        let p = to_prenex(&f);
        let (quantified, _) = (p.to_string(), ());
        assert!(quantified.starts_with("exists "));
        // two distinct binders
        let free = p.free_vars();
        assert_eq!(free, BTreeSet::from(["y".to_string()]));
        if let Formula::Exists(v1, inner) = &p {
            if let Formula::Exists(v2, _) = inner.as_ref() {
                assert_ne!(v1, v2);
                return;
            }
        }
        panic!("expected two existential binders, got {p}");
    }

    #[test]
    fn prenex_is_fixed_point_on_prenex_input() {
        let dinf = fixtures::pg_dinf();
        let sig = dinf.structure().signature();
        let f = parse("forall x . exists y . M(x, y, 1)", sig).unwrap();
        assert_eq!(to_prenex(&f), f);
    }

    #[test]
    fn prenex_preserves_evaluation() {
        let dinf = fixtures::pg_dinf();
        let st = dinf.structure();
        let sig = st.signature();
        let formulas = [
            "!(exists x . M(x, x, 1))",
            "(exists x . x = 1) & (exists x . x = y)",
            "(forall x . D(x, x)) | !(forall z . M(z, 1, z))",
            "!(forall x . exists y . M(x, y, 1) & !D(x, y))",
        ];
        for text in formulas {
            let f = parse(text, sig).unwrap();
            let p = to_prenex(&f);
            for val in st.carrier() {
                let a = assign(&[("y", val)]);
                assert_eq!(
                    eval(st, &f, &a).unwrap(),
                    eval(st, &p, &a).unwrap(),
                    "{text} with y={val}"
                );
            }
        }
    }

    #[test]
    fn classify_prefix_shapes() {
        let dinf = fixtures::pg_dinf();
        let sig = dinf.structure().signature();
        let universal = parse("forall x . forall y . (D(x,y) | !D(x,y))", sig).unwrap();
        assert_eq!(classify(&universal).unwrap(), Quantification::Universal);
        let existential = parse("exists x . x != 1", sig).unwrap();
        assert_eq!(classify(&existential).unwrap(), Quantification::Existential);
        let mixed = parse("forall x . exists y . M(x,y,1)", sig).unwrap();
        assert_eq!(classify(&mixed).unwrap(), Quantification::Neither);
        let open = parse("D(x, x)", sig).unwrap();
        assert!(classify(&open).is_err());
    }

    #[test]
    fn characteristic_sentence_of_involution() {
        let dinf = fixtures::pg_dinf();
        let st = dinf.structure();
        let f = characteristic_sentence(st, &["a".into()]).unwrap();
        assert_eq!(
            f.to_string(),
            "exists x1 . x1 != 1 & inv(x1) = x1 & D(x1, x1) & !M(x1, x1, x1)"
        );
        assert_eq!(classify(&f).unwrap(), Quantification::Existential);
        assert!(eval_sentence(st, &f).unwrap());
    }

    #[test]
    fn characteristic_sentence_of_identity() {
        let dinf = fixtures::pg_dinf();
        let st = dinf.structure();
        let f = characteristic_sentence(st, &["1".into()]).unwrap();
        assert_eq!(
            f.to_string(),
            "exists x1 . x1 = 1 & inv(x1) = x1 & D(x1, x1) & M(x1, x1, x1)"
        );
        assert!(eval_sentence(st, &f).unwrap());
    }

    #[test]
    fn characteristic_sentence_empty_subset_is_trivially_true() {
        let dinf = fixtures::pg_dinf();
        let st = dinf.structure();
        let f = characteristic_sentence(st, &[]).unwrap();
        assert!(eval_sentence(st, &f).unwrap());
        assert_eq!(classify(&f).unwrap(), Quantification::Existential);
    }

    #[test]
    fn duality_laws_hold_on_fixtures() {
        let dinf = fixtures::pg_dinf();
        let st = dinf.structure();
        let sig = st.signature();
        let f = parse("D(x, x)", sig).unwrap();
        let g = parse("M(x, x, 1)", sig).unwrap();
        for val in st.carrier() {
            let a = assign(&[("x", val)]);
            let or = Formula::Or(Box::new(f.clone()), Box::new(g.clone()));
            let de_morgan = Formula::Not(Box::new(Formula::And(
                Box::new(Formula::Not(Box::new(f.clone()))),
                Box::new(Formula::Not(Box::new(g.clone()))),
            )));
            assert_eq!(
                eval(st, &or, &a).unwrap(),
                eval(st, &de_morgan, &a).unwrap()
            );
        }
        let forall = parse("forall x . D(x, x)", sig).unwrap();
        let not_exists_not = parse("!(exists x . !D(x, x))", sig).unwrap();
        assert_eq!(
            eval_sentence(st, &forall).unwrap(),
            eval_sentence(st, &not_exists_not).unwrap()
        );
    }
}
