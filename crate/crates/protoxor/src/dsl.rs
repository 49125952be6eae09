//! The protocol description language.
//!
//! Line-oriented, with `#` comments:
//!
//! ```text
//! protocol nsl_xor
//! vars A B : agent
//! vars NA NB : nonce
//! fresh NA NB
//! secret NA NB
//! 1. A -> B : penc([1, NA, A], pk(B))
//! 2. B -> A : penc([2, xor(NA, B), NB], pk(A))
//! 3. A -> B : penc([3, NB], pk(B))
//! ```
//!
//! Terms use `[..]` for sequences, `penc/senc/pk/sh/hash/sig` function
//! syntax, `xor(..)` or the infix `t1 xor t2`, bare numerals for tag
//! constants and `0` for the xor unity. Unification documents hold
//! `lhs = rhs` lines; solve documents hold `constraint t : e1 ; e2`
//! lines. In those two formats undeclared capitalized identifiers
//! default to nonce variables and lowercase ones to text constants,
//! except `eps`, which is always the attacker.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::constraints::{Constraint, ConstraintSeq};
use crate::protocol::{Message, Protocol, SessionPlan, StrandPlan};
use crate::sort::{Sort, TypeExpr};
use crate::term::{Cst, Term, Var, ATTACKER};
use crate::unify::UnificationProblem;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("undeclared identifier `{name}` at line {line}")]
    UndeclaredIdentifier { name: String, line: usize },
    #[error("sort mismatch at line {line}: {msg}")]
    SortMismatch { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    Structure { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(String),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Semi,
    Colon,
    Dot,
    Arrow,
    Equals,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::Int(s) => write!(f, "{s}"),
            Tok::LBracket => write!(f, "["),
            Tok::RBracket => write!(f, "]"),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::Comma => write!(f, ","),
            Tok::Semi => write!(f, ";"),
            Tok::Colon => write!(f, ":"),
            Tok::Dot => write!(f, "."),
            Tok::Arrow => write!(f, "->"),
            Tok::Equals => write!(f, "="),
        }
    }
}

fn lex(line: &str, lineno: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    let bytes: Vec<char> = line.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let col = i + 1;
        match c {
            '#' => break,
            c if c.is_whitespace() => {
                i += 1;
            }
            '[' => {
                out.push((Tok::LBracket, col));
                i += 1;
            }
            ']' => {
                out.push((Tok::RBracket, col));
                i += 1;
            }
            '(' => {
                out.push((Tok::LParen, col));
                i += 1;
            }
            ')' => {
                out.push((Tok::RParen, col));
                i += 1;
            }
            ',' => {
                out.push((Tok::Comma, col));
                i += 1;
            }
            ';' => {
                out.push((Tok::Semi, col));
                i += 1;
            }
            ':' => {
                out.push((Tok::Colon, col));
                i += 1;
            }
            '.' => {
                out.push((Tok::Dot, col));
                i += 1;
            }
            '=' => {
                out.push((Tok::Equals, col));
                i += 1;
            }
            '-' if bytes.get(i + 1) == Some(&'>') => {
                out.push((Tok::Arrow, col));
                i += 2;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                out.push((Tok::Int(bytes[start..i].iter().collect()), col));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_alphanumeric() || bytes[i] == '_' || bytes[i] == '\'')
                {
                    i += 1;
                }
                out.push((Tok::Ident(bytes[start..i].iter().collect()), col));
            }
            other => {
                return Err(ParseError::Syntax {
                    line: lineno,
                    col,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(out)
}

/// Identifier environment: declared variables and constants.
#[derive(Debug, Clone, Default)]
pub struct Env {
    pub vars: BTreeMap<String, Var>,
    pub consts: BTreeMap<String, Cst>,
    /// Loose mode infers undeclared identifiers instead of failing.
    pub loose: bool,
}

impl Env {
    fn lookup(&mut self, name: &str, line: usize) -> Result<Term, ParseError> {
        if let Some(v) = self.vars.get(name) {
            return Ok(Term::Variable(v.clone()));
        }
        if let Some(c) = self.consts.get(name) {
            return Ok(Term::Constant(c.clone()));
        }
        if name == ATTACKER {
            return Ok(crate::term::attacker());
        }
        if self.loose {
            let t = if name.chars().next().is_some_and(|c| c.is_uppercase()) {
                let v = Var::new(name, Sort::Nonce);
                self.vars.insert(name.to_string(), v.clone());
                Term::Variable(v)
            } else {
                let c = Cst::new(name, Sort::Text);
                self.consts.insert(name.to_string(), c.clone());
                Term::Constant(c)
            };
            return Ok(t);
        }
        Err(ParseError::UndeclaredIdentifier { name: name.to_string(), line })
    }
}

struct TermParser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    line: usize,
}

impl<'a> TermParser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(0, |(_, c)| *c)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: &Tok) -> Result<(), ParseError> {
        match self.bump() {
            Some(t) if &t == want => Ok(()),
            got => Err(ParseError::Syntax {
                line: self.line,
                col: self.col(),
                msg: format!(
                    "expected `{want}`, found {}",
                    got.map_or("end of line".to_string(), |t| format!("`{t}`"))
                ),
            }),
        }
    }

    fn term(&mut self, env: &mut Env) -> Result<Term, ParseError> {
        let first = self.primary(env)?;
        let mut parts = vec![first];
        while matches!(self.peek(), Some(Tok::Ident(s)) if s == "xor") {
            self.bump();
            parts.push(self.primary(env)?);
        }
        Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Term::xor(parts) })
    }

    fn args(&mut self, env: &mut Env) -> Result<Vec<Term>, ParseError> {
        self.expect(&Tok::LParen)?;
        let mut out = vec![self.term(env)?];
        while self.peek() == Some(&Tok::Comma) {
            self.bump();
            out.push(self.term(env)?);
        }
        self.expect(&Tok::RParen)?;
        Ok(out)
    }

    fn agent_arg(&self, t: Term, op: &str) -> Result<Term, ParseError> {
        if t.type_of() == TypeExpr::Atomic(Sort::Agent) || t.is_variable() {
            // variables of other sorts are still rejected
            if let Term::Variable(v) = &t {
                if v.ty != TypeExpr::Atomic(Sort::Agent) {
                    return Err(ParseError::SortMismatch {
                        line: self.line,
                        msg: format!("`{op}` takes agents, got {} : {}", t, v.ty),
                    });
                }
            }
            Ok(t)
        } else {
            Err(ParseError::SortMismatch {
                line: self.line,
                msg: format!("`{op}` takes agents, got {t}"),
            })
        }
    }

    fn fixed_arity(&self, name: &str, n: usize, got: usize) -> Result<(), ParseError> {
        if n != got {
            return Err(ParseError::Syntax {
                line: self.line,
                col: self.col(),
                msg: format!("`{name}` takes {n} argument(s), got {got}"),
            });
        }
        Ok(())
    }

    fn primary(&mut self, env: &mut Env) -> Result<Term, ParseError> {
        match self.bump() {
            Some(Tok::LBracket) => {
                if self.peek() == Some(&Tok::RBracket) {
                    self.bump();
                    return Ok(Term::seq(vec![]));
                }
                let mut elems = vec![self.term(env)?];
                while self.peek() == Some(&Tok::Comma) {
                    self.bump();
                    elems.push(self.term(env)?);
                }
                self.expect(&Tok::RBracket)?;
                Ok(Term::seq(elems))
            }
            Some(Tok::Int(s)) => {
                if s == "0" {
                    Ok(Term::Zero)
                } else {
                    Ok(Term::cst(s, Sort::Tag))
                }
            }
            Some(Tok::Ident(name)) => {
                if self.peek() == Some(&Tok::LParen) {
                    let args = self.args(env)?;
                    let got = args.len();
                    let mut it = args.into_iter();
                    match name.as_str() {
                        "penc" => {
                            self.fixed_arity("penc", 2, got)?;
                            Ok(Term::penc(it.next().unwrap(), it.next().unwrap()))
                        }
                        "senc" => {
                            self.fixed_arity("senc", 2, got)?;
                            Ok(Term::senc(it.next().unwrap(), it.next().unwrap()))
                        }
                        "pk" => {
                            self.fixed_arity("pk", 1, got)?;
                            let a = self.agent_arg(it.next().unwrap(), "pk")?;
                            Ok(Term::pk(a))
                        }
                        "sh" => {
                            self.fixed_arity("sh", 2, got)?;
                            let a = self.agent_arg(it.next().unwrap(), "sh")?;
                            let b = self.agent_arg(it.next().unwrap(), "sh")?;
                            Ok(Term::sh(a, b))
                        }
                        "hash" => {
                            self.fixed_arity("hash", 1, got)?;
                            Ok(Term::hash(it.next().unwrap()))
                        }
                        "sig" => {
                            self.fixed_arity("sig", 2, got)?;
                            Ok(Term::sig(it.next().unwrap(), it.next().unwrap()))
                        }
                        "xor" => Ok(Term::xor(it.collect())),
                        other => Err(ParseError::Syntax {
                            line: self.line,
                            col: self.col(),
                            msg: format!("unknown operator `{other}`"),
                        }),
                    }
                } else {
                    env.lookup(&name, self.line)
                }
            }
            got => Err(ParseError::Syntax {
                line: self.line,
                col: self.col(),
                msg: format!(
                    "expected a term, found {}",
                    got.map_or("end of line".to_string(), |t| format!("`{t}`"))
                ),
            }),
        }
    }
}

fn parse_term_line(
    toks: &[(Tok, usize)],
    line: usize,
    env: &mut Env,
) -> Result<Term, ParseError> {
    let mut p = TermParser { toks, pos: 0, line };
    let t = p.term(env)?;
    if p.pos != toks.len() {
        return Err(ParseError::Syntax {
            line,
            col: p.col(),
            msg: "trailing input after term".into(),
        });
    }
    Ok(t)
}

fn ident_list(toks: &[(Tok, usize)], line: usize) -> Result<Vec<String>, ParseError> {
    let mut names = Vec::new();
    for (t, col) in toks {
        match t {
            Tok::Ident(s) => names.push(s.clone()),
            Tok::Comma => {}
            other => {
                return Err(ParseError::Syntax {
                    line,
                    col: *col,
                    msg: format!("expected identifiers, found `{other}`"),
                })
            }
        }
    }
    Ok(names)
}

/// Splits declaration lines of the form `<names> : <sort>`.
fn decl_line(
    toks: &[(Tok, usize)],
    line: usize,
) -> Result<(Vec<String>, Sort), ParseError> {
    let colon = toks.iter().position(|(t, _)| *t == Tok::Colon).ok_or(ParseError::Syntax {
        line,
        col: 0,
        msg: "declaration needs `: <sort>`".into(),
    })?;
    let names = ident_list(&toks[..colon], line)?;
    let sort = match toks.get(colon + 1) {
        Some((Tok::Ident(s), col)) => Sort::parse(s).ok_or(ParseError::Syntax {
            line,
            col: *col,
            msg: format!("unknown sort `{s}`"),
        })?,
        _ => {
            return Err(ParseError::Syntax { line, col: 0, msg: "missing sort".into() })
        }
    };
    if toks.len() != colon + 2 {
        return Err(ParseError::Syntax {
            line,
            col: 0,
            msg: "trailing input after sort".into(),
        });
    }
    Ok((names, sort))
}

/// Parses a protocol document.
pub fn parse_protocol(text: &str) -> Result<Protocol, ParseError> {
    let mut env = Env::default();
    let mut name: Option<String> = None;
    let mut fresh: Vec<String> = Vec::new();
    let mut secret: Vec<String> = Vec::new();
    let mut messages: Vec<Message> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let toks = lex(raw, line)?;
        if toks.is_empty() {
            continue;
        }
        match &toks[0].0 {
            Tok::Ident(kw) if kw == "protocol" => match toks.get(1) {
                Some((Tok::Ident(n), _)) if toks.len() == 2 => name = Some(n.clone()),
                _ => {
                    return Err(ParseError::Syntax {
                        line,
                        col: toks[0].1,
                        msg: "expected `protocol <name>`".into(),
                    })
                }
            },
            Tok::Ident(kw) if kw == "vars" => {
                let (names, sort) = decl_line(&toks[1..], line)?;
                for n in names {
                    env.vars.insert(n.clone(), Var::new(n, sort));
                }
            }
            Tok::Ident(kw) if kw == "consts" => {
                let (names, sort) = decl_line(&toks[1..], line)?;
                for n in names {
                    env.consts.insert(n.clone(), Cst::new(n, sort));
                }
            }
            Tok::Ident(kw) if kw == "fresh" => {
                fresh.extend(ident_list(&toks[1..], line)?);
            }
            Tok::Ident(kw) if kw == "secret" => {
                secret.extend(ident_list(&toks[1..], line)?);
            }
            Tok::Int(n) => {
                // <n>. <sender> -> <receiver> : <term>
                let expected = messages.len() + 1;
                if n != &expected.to_string() {
                    return Err(ParseError::Structure {
                        line,
                        msg: format!("message numbering must be contiguous; expected {expected}"),
                    });
                }
                let mut p = TermParser { toks: &toks[1..], pos: 0, line };
                p.expect(&Tok::Dot)?;
                let sender = match p.bump() {
                    Some(Tok::Ident(s)) => s,
                    _ => {
                        return Err(ParseError::Syntax {
                            line,
                            col: p.col(),
                            msg: "expected sender role".into(),
                        })
                    }
                };
                p.expect(&Tok::Arrow)?;
                let receiver = match p.bump() {
                    Some(Tok::Ident(s)) => s,
                    _ => {
                        return Err(ParseError::Syntax {
                            line,
                            col: p.col(),
                            msg: "expected receiver role".into(),
                        })
                    }
                };
                p.expect(&Tok::Colon)?;
                for who in [&sender, &receiver] {
                    match env.vars.get(who) {
                        Some(v) if v.ty == TypeExpr::Atomic(Sort::Agent) => {}
                        Some(_) => {
                            return Err(ParseError::SortMismatch {
                                line,
                                msg: format!("role `{who}` must be an agent variable"),
                            })
                        }
                        None => {
                            return Err(ParseError::UndeclaredIdentifier {
                                name: who.clone(),
                                line,
                            })
                        }
                    }
                }
                let term = p.term(&mut env)?;
                if p.pos != toks.len() - 1 {
                    return Err(ParseError::Syntax {
                        line,
                        col: p.col(),
                        msg: "trailing input after message term".into(),
                    });
                }
                messages.push(Message { index: expected, sender, receiver, term });
            }
            other => {
                return Err(ParseError::Syntax {
                    line,
                    col: toks[0].1,
                    msg: format!("unexpected `{other}`"),
                })
            }
        }
    }

    let name = name.ok_or(ParseError::Structure {
        line: 0,
        msg: "missing `protocol <name>` header".into(),
    })?;
    let lookup_vars = |names: &[String]| -> Result<std::collections::BTreeSet<Var>, ParseError> {
        names
            .iter()
            .map(|n| {
                env.vars
                    .get(n)
                    .cloned()
                    .ok_or(ParseError::UndeclaredIdentifier { name: n.clone(), line: 0 })
            })
            .collect()
    };
    let fresh = lookup_vars(&fresh)?;
    let secret = lookup_vars(&secret)?;
    let mut p = Protocol::from_script(name, messages, fresh, secret).map_err(|e| {
        ParseError::Structure { line: 0, msg: e.to_string() }
    })?;
    // keep the full declaration environment, including unused names
    for (n, v) in env.vars {
        p.decls.entry(n).or_insert(v);
    }
    for (n, c) in env.consts {
        p.const_decls.entry(n).or_insert(c);
    }
    Ok(p)
}

/// Parses a unification document: declarations followed by `lhs = rhs`
/// lines forming one problem.
pub fn parse_unify_doc(text: &str) -> Result<(UnificationProblem, Env), ParseError> {
    let mut env = Env { loose: true, ..Env::default() };
    let mut equations = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let toks = lex(raw, line)?;
        if toks.is_empty() {
            continue;
        }
        match &toks[0].0 {
            Tok::Ident(kw) if kw == "vars" => {
                let (names, sort) = decl_line(&toks[1..], line)?;
                for n in names {
                    env.vars.insert(n.clone(), Var::new(n, sort));
                }
            }
            Tok::Ident(kw) if kw == "consts" => {
                let (names, sort) = decl_line(&toks[1..], line)?;
                for n in names {
                    env.consts.insert(n.clone(), Cst::new(n, sort));
                }
            }
            _ => {
                let eq = toks
                    .iter()
                    .position(|(t, _)| *t == Tok::Equals)
                    .ok_or(ParseError::Syntax {
                        line,
                        col: toks[0].1,
                        msg: "expected `lhs = rhs`".into(),
                    })?;
                let lhs = parse_term_line(&toks[..eq], line, &mut env)?;
                let rhs = parse_term_line(&toks[eq + 1..], line, &mut env)?;
                equations.push((lhs, rhs));
            }
        }
    }
    if equations.is_empty() {
        return Err(ParseError::Structure { line: 0, msg: "no equations".into() });
    }
    Ok((UnificationProblem::new(equations), env))
}

/// Parses a solve document: declarations followed by
/// `constraint <target> : <elem> ; <elem> ; ...` lines.
pub fn parse_solve_doc(text: &str) -> Result<(ConstraintSeq, Env), ParseError> {
    let mut env = Env { loose: true, ..Env::default() };
    let mut constraints = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let toks = lex(raw, line)?;
        if toks.is_empty() {
            continue;
        }
        match &toks[0].0 {
            Tok::Ident(kw) if kw == "vars" => {
                let (names, sort) = decl_line(&toks[1..], line)?;
                for n in names {
                    env.vars.insert(n.clone(), Var::new(n, sort));
                }
            }
            Tok::Ident(kw) if kw == "consts" => {
                let (names, sort) = decl_line(&toks[1..], line)?;
                for n in names {
                    env.consts.insert(n.clone(), Cst::new(n, sort));
                }
            }
            Tok::Ident(kw) if kw == "constraint" => {
                let rest = &toks[1..];
                let colon =
                    rest.iter().position(|(t, _)| *t == Tok::Colon).ok_or(ParseError::Syntax {
                        line,
                        col: toks[0].1,
                        msg: "expected `constraint <target> : <elements>`".into(),
                    })?;
                let target = parse_term_line(&rest[..colon], line, &mut env)?;
                let mut elements = Vec::new();
                let mut start = colon + 1;
                let tail = rest;
                for j in colon + 1..=tail.len() {
                    if j == tail.len() || tail[j].0 == Tok::Semi {
                        if start < j {
                            elements.push(parse_term_line(&tail[start..j], line, &mut env)?);
                        }
                        start = j + 1;
                    }
                }
                constraints.push(Constraint::new(target, elements));
            }
            other => {
                return Err(ParseError::Syntax {
                    line,
                    col: toks[0].1,
                    msg: format!("unexpected `{other}`"),
                })
            }
        }
    }
    Ok((ConstraintSeq::new(constraints), env))
}

/// Parses a session plan like `A[A=a]; B[A=a, B=b]` against a protocol.
/// Constants take the sort of the variable they bind.
pub fn parse_plan(p: &Protocol, text: &str) -> Result<SessionPlan, ParseError> {
    let toks = lex(text, 1)?;
    let mut plan = Vec::new();
    let mut pos = 0;
    while pos < toks.len() {
        let role = match &toks[pos].0 {
            Tok::Ident(r) => r.clone(),
            other => {
                return Err(ParseError::Syntax {
                    line: 1,
                    col: toks[pos].1,
                    msg: format!("expected role name, found `{other}`"),
                })
            }
        };
        pos += 1;
        let mut bindings = BTreeMap::new();
        if toks.get(pos).map(|(t, _)| t) == Some(&Tok::LBracket) {
            pos += 1;
            while toks.get(pos).map(|(t, _)| t) != Some(&Tok::RBracket) {
                let var_name = match toks.get(pos) {
                    Some((Tok::Ident(v), _)) => v.clone(),
                    _ => {
                        return Err(ParseError::Syntax {
                            line: 1,
                            col: 0,
                            msg: "expected `Var=const` in plan".into(),
                        })
                    }
                };
                pos += 1;
                if toks.get(pos).map(|(t, _)| t) != Some(&Tok::Equals) {
                    return Err(ParseError::Syntax {
                        line: 1,
                        col: 0,
                        msg: "expected `=` in plan binding".into(),
                    });
                }
                pos += 1;
                let cst_name = match toks.get(pos) {
                    Some((Tok::Ident(c), _)) => c.clone(),
                    Some((Tok::Int(c), _)) => c.clone(),
                    _ => {
                        return Err(ParseError::Syntax {
                            line: 1,
                            col: 0,
                            msg: "expected constant name in plan binding".into(),
                        })
                    }
                };
                pos += 1;
                let var = p.decls.get(&var_name).ok_or(ParseError::UndeclaredIdentifier {
                    name: var_name.clone(),
                    line: 1,
                })?;
                let sort = match &var.ty {
                    TypeExpr::Atomic(s) => *s,
                    _ => Sort::Text,
                };
                bindings.insert(var_name, Cst::new(cst_name, sort));
                if toks.get(pos).map(|(t, _)| t) == Some(&Tok::Comma) {
                    pos += 1;
                }
            }
            pos += 1; // closing bracket
        }
        plan.push(StrandPlan { role, bindings });
        if toks.get(pos).map(|(t, _)| t) == Some(&Tok::Semi) {
            pos += 1;
        }
    }
    Ok(plan)
}

/// Renders a term in the document syntax (inverse of the term parser).
pub fn term_to_dsl(t: &Term) -> String {
    match t {
        Term::Zero => "0".into(),
        Term::Constant(c) => c.name.clone(),
        Term::Variable(v) => v.name.clone(),
        Term::Sequence(es) => {
            let inner: Vec<String> = es.iter().map(term_to_dsl).collect();
            format!("[{}]", inner.join(", "))
        }
        Term::PEnc(p, k) => format!("penc({}, {})", term_to_dsl(p), term_to_dsl(k)),
        Term::SEnc(p, k) => format!("senc({}, {})", term_to_dsl(p), term_to_dsl(k)),
        Term::Pk(a) => format!("pk({})", term_to_dsl(a)),
        Term::Sh(a, b) => format!("sh({}, {})", term_to_dsl(a), term_to_dsl(b)),
        Term::Hash(b) => format!("hash({})", term_to_dsl(b)),
        Term::Sig(b, k) => format!("sig({}, {})", term_to_dsl(b), term_to_dsl(k)),
        Term::Xor(parts) => {
            let inner: Vec<String> = parts.iter().map(term_to_dsl).collect();
            format!("xor({})", inner.join(", "))
        }
    }
}

/// Renders a protocol as a parseable document.
pub fn print_protocol(p: &Protocol) -> String {
    let mut out = format!("protocol {}\n", p.name);
    // group declared variables by sort
    let mut by_sort: BTreeMap<Sort, Vec<String>> = BTreeMap::new();
    for v in p.vars() {
        if let TypeExpr::Atomic(s) = v.ty {
            by_sort.entry(s).or_default().push(v.name.clone());
        }
    }
    for (sort, names) in &by_sort {
        out.push_str(&format!("vars {} : {}\n", names.join(" , "), sort));
    }
    // non-numeric constants need declarations
    let mut cby_sort: BTreeMap<Sort, Vec<String>> = BTreeMap::new();
    for c in p.constants() {
        if c.name.chars().all(|ch| ch.is_ascii_digit()) && c.sort == Sort::Tag {
            continue;
        }
        if c.name == ATTACKER && c.sort == Sort::Agent {
            continue;
        }
        cby_sort.entry(c.sort).or_default().push(c.name.clone());
    }
    for (sort, names) in &cby_sort {
        out.push_str(&format!("consts {} : {}\n", names.join(" , "), sort));
    }
    if !p.fresh_vars.is_empty() {
        let names: Vec<_> = p.fresh_vars.iter().map(|v| v.name.clone()).collect();
        out.push_str(&format!("fresh {}\n", names.join(" , ")));
    }
    if !p.secret_vars.is_empty() {
        let names: Vec<_> = p.secret_vars.iter().map(|v| v.name.clone()).collect();
        out.push_str(&format!("secret {}\n", names.join(" , ")));
    }
    for m in &p.messages {
        out.push_str(&format!(
            "{}. {} -> {} : {}\n",
            m.index,
            m.sender,
            m.receiver,
            term_to_dsl(&m.term)
        ));
    }
    out
}
