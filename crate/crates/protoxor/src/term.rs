//! The message algebra.
//!
//! Terms are kept in canonical form with respect to the algebraic laws of
//! exclusive-or (associativity, commutativity, unity, nilpotence) and the
//! commutativity of shared keys:
//!
//! * xor nodes are flattened, their summands sorted by the total term
//!   order, equal summands cancelled pairwise, the empty sum collapsed to
//!   `Zero` and the singleton sum to its summand;
//! * `sh` arguments are sorted so `sh(a,b)` and `sh(b,a)` share one
//!   representation.
//!
//! All public constructors maintain these invariants, so structural
//! equality on `Term` coincides with equality modulo the xor theory.

use std::collections::BTreeSet;
use std::fmt;

use crate::sort::{OpTag, Sort, TypeExpr};

/// A typed variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub name: String,
    pub ty: TypeExpr,
}

impl Var {
    pub fn new(name: impl Into<String>, sort: Sort) -> Var {
        Var { name: name.into(), ty: TypeExpr::Atomic(sort) }
    }

    pub fn with_type(name: impl Into<String>, ty: TypeExpr) -> Var {
        Var { name: name.into(), ty }
    }
}

/// A sorted constant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cst {
    pub name: String,
    pub sort: Sort,
}

impl Cst {
    pub fn new(name: impl Into<String>, sort: Sort) -> Cst {
        Cst { name: name.into(), sort }
    }
}

/// Name of the attacker constant.
pub const ATTACKER: &str = "eps";

/// The attacker's agent constant.
pub fn attacker() -> Term {
    Term::Constant(Cst::new(ATTACKER, Sort::Agent))
}

/// A message term in canonical form.
///
/// The variant order below fixes the total term order used for xor
/// summand sorting and `sh` argument sorting.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    /// The xor unity.
    Zero,
    Constant(Cst),
    Variable(Var),
    Sequence(Vec<Term>),
    PEnc(Box<Term>, Box<Term>),
    SEnc(Box<Term>, Box<Term>),
    Pk(Box<Term>),
    Sh(Box<Term>, Box<Term>),
    Hash(Box<Term>),
    Sig(Box<Term>, Box<Term>),
    /// Canonical xor node: flattened, sorted, >= 2 summands, no `Zero`
    /// and no nested xor among the summands.
    Xor(Vec<Term>),
}

/// The two elementary theories terms can be pure in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Theory {
    /// Pairing, encryption, keys, hash and signature.
    Std,
    /// Exclusive-or with its unity.
    Acun,
}

impl Term {
    pub fn var(name: impl Into<String>, sort: Sort) -> Term {
        Term::Variable(Var::new(name, sort))
    }

    pub fn cst(name: impl Into<String>, sort: Sort) -> Term {
        Term::Constant(Cst::new(name, sort))
    }

    /// Tag constant, e.g. the component number `1`.
    pub fn tag(name: impl fmt::Display) -> Term {
        Term::cst(name.to_string(), Sort::Tag)
    }

    pub fn seq(elems: Vec<Term>) -> Term {
        Term::Sequence(elems)
    }

    pub fn penc(plain: Term, key: Term) -> Term {
        Term::PEnc(Box::new(plain), Box::new(key))
    }

    pub fn senc(plain: Term, key: Term) -> Term {
        Term::SEnc(Box::new(plain), Box::new(key))
    }

    pub fn pk(agent: Term) -> Term {
        Term::Pk(Box::new(agent))
    }

    /// Builds a shared key with canonically ordered arguments.
    pub fn sh(a: Term, b: Term) -> Term {
        if b < a {
            Term::Sh(Box::new(b), Box::new(a))
        } else {
            Term::Sh(Box::new(a), Box::new(b))
        }
    }

    pub fn hash(body: Term) -> Term {
        Term::Hash(Box::new(body))
    }

    pub fn sig(body: Term, ver_key: Term) -> Term {
        Term::Sig(Box::new(body), Box::new(ver_key))
    }

    /// Builds the canonical xor of the given terms: nested xors are
    /// flattened, `Zero` dropped, equal summands cancelled mod 2 and the
    /// rest sorted.
    pub fn xor(parts: Vec<Term>) -> Term {
        let mut summands: Vec<Term> = Vec::new();
        let mut stack: Vec<Term> = parts.into_iter().rev().collect();
        while let Some(p) = stack.pop() {
            match p {
                Term::Zero => {}
                Term::Xor(inner) => stack.extend(inner.into_iter().rev()),
                other => summands.push(other),
            }
        }
        summands.sort();
        // cancel pairs
        let mut kept: Vec<Term> = Vec::with_capacity(summands.len());
        for s in summands {
            if kept.last() == Some(&s) {
                kept.pop();
            } else {
                kept.push(s);
            }
        }
        match kept.len() {
            0 => Term::Zero,
            1 => kept.pop().unwrap(),
            _ => Term::Xor(kept),
        }
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Term::Constant(_))
    }

    /// Atoms are variables, constants and the unity.
    pub fn is_atom(&self) -> bool {
        matches!(self, Term::Variable(_) | Term::Constant(_) | Term::Zero)
    }

    /// Rewrites a possibly non-canonical term into canonical form,
    /// bottom-up. Idempotent; terms built through the public
    /// constructors are already fixpoints.
    pub fn canonicalize(&self) -> Term {
        match self {
            Term::Zero | Term::Constant(_) | Term::Variable(_) => self.clone(),
            Term::Sequence(es) => Term::seq(es.iter().map(Term::canonicalize).collect()),
            Term::PEnc(p, k) => Term::penc(p.canonicalize(), k.canonicalize()),
            Term::SEnc(p, k) => Term::senc(p.canonicalize(), k.canonicalize()),
            Term::Pk(a) => Term::pk(a.canonicalize()),
            Term::Sh(a, b) => Term::sh(a.canonicalize(), b.canonicalize()),
            Term::Hash(b) => Term::hash(b.canonicalize()),
            Term::Sig(b, k) => Term::sig(b.canonicalize(), k.canonicalize()),
            Term::Xor(parts) => Term::xor(parts.iter().map(Term::canonicalize).collect()),
        }
    }

    /// Direct arguments of the root constructor.
    pub fn args(&self) -> Vec<&Term> {
        match self {
            Term::Zero | Term::Constant(_) | Term::Variable(_) => Vec::new(),
            Term::Sequence(es) | Term::Xor(es) => es.iter().collect(),
            Term::PEnc(p, k) | Term::SEnc(p, k) | Term::Sig(p, k) => vec![p, k],
            Term::Pk(a) | Term::Hash(a) => vec![a],
            Term::Sh(a, b) => vec![a, b],
        }
    }

    /// Reflexive-transitive closure of the direct-argument relation,
    /// descending into keys, hash bodies and xor summands alike.
    pub fn subterms(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        self.collect_subterms(&mut out);
        out
    }

    fn collect_subterms(&self, out: &mut BTreeSet<Term>) {
        if out.insert(self.clone()) {
            for a in self.args() {
                a.collect_subterms(out);
            }
        }
    }

    /// Whether `t` is a subterm of `self`.
    pub fn has_subterm(&self, t: &Term) -> bool {
        self == t || self.args().iter().any(|a| a.has_subterm(t))
    }

    /// The readable-payload subterms: descends into sequence elements,
    /// encryption plaintexts and xor summands, but never into keys, hash
    /// bodies or signature bodies.
    pub fn interms(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        self.collect_interms(&mut out);
        out
    }

    fn collect_interms(&self, out: &mut BTreeSet<Term>) {
        out.insert(self.clone());
        match self {
            Term::Sequence(es) | Term::Xor(es) => {
                for e in es {
                    e.collect_interms(out);
                }
            }
            Term::PEnc(p, _) | Term::SEnc(p, _) => p.collect_interms(out),
            _ => {}
        }
    }

    /// Whether `t` is an interm of `self`.
    pub fn has_interm(&self, t: &Term) -> bool {
        if self == t {
            return true;
        }
        match self {
            Term::Sequence(es) | Term::Xor(es) => es.iter().any(|e| e.has_interm(t)),
            Term::PEnc(p, _) | Term::SEnc(p, _) => p.has_interm(t),
            _ => false,
        }
    }

    /// Structural type: the constructor applied to argument types.
    pub fn type_of(&self) -> TypeExpr {
        match self {
            Term::Zero => TypeExpr::Atomic(Sort::Zero),
            Term::Constant(c) => TypeExpr::Atomic(c.sort),
            Term::Variable(v) => v.ty.clone(),
            Term::Sequence(es) => {
                TypeExpr::Constructed(OpTag::Sequence, es.iter().map(Term::type_of).collect())
            }
            Term::PEnc(p, k) => TypeExpr::Constructed(OpTag::PEnc, vec![p.type_of(), k.type_of()]),
            Term::SEnc(p, k) => TypeExpr::Constructed(OpTag::SEnc, vec![p.type_of(), k.type_of()]),
            Term::Pk(a) => TypeExpr::Constructed(OpTag::Pk, vec![a.type_of()]),
            Term::Sh(a, b) => TypeExpr::Constructed(OpTag::Sh, vec![a.type_of(), b.type_of()]),
            Term::Hash(b) => TypeExpr::Constructed(OpTag::Hash, vec![b.type_of()]),
            Term::Sig(b, k) => TypeExpr::Constructed(OpTag::Sig, vec![b.type_of(), k.type_of()]),
            // xor is commutative, so its type is order-insensitive
            Term::Xor(parts) => {
                let mut tys: Vec<TypeExpr> = parts.iter().map(Term::type_of).collect();
                tys.sort();
                TypeExpr::Constructed(OpTag::Xor, tys)
            }
        }
    }

    /// Which theory the root constructor belongs to; atoms belong to
    /// both and report `None`.
    pub fn root_theory(&self) -> Option<Theory> {
        match self {
            Term::Variable(_) | Term::Constant(_) => None,
            Term::Zero | Term::Xor(_) => Some(Theory::Acun),
            _ => Some(Theory::Std),
        }
    }

    /// Purity: every constructor in the term belongs to the theory's
    /// signature. Variables and constants are pure in both theories;
    /// `Zero` belongs to the xor theory.
    pub fn is_pure(&self, theory: Theory) -> bool {
        match self.root_theory() {
            None => true,
            Some(t) if t != theory => false,
            Some(_) => self.args().iter().all(|a| a.is_pure(theory)),
        }
    }

    /// Maximal subterms rooted in the other theory's signature.
    pub fn alien_subterms(&self, theory: Theory) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        self.collect_aliens(theory, &mut out);
        out
    }

    fn collect_aliens(&self, theory: Theory, out: &mut BTreeSet<Term>) {
        match self.root_theory() {
            None => {}
            Some(t) if t != theory => {
                out.insert(self.clone());
            }
            Some(_) => {
                for a in self.args() {
                    a.collect_aliens(theory, out);
                }
            }
        }
    }

    /// All variables occurring in the term.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Term::Variable(v) => {
                out.insert(v.clone());
            }
            _ => {
                for a in self.args() {
                    a.collect_vars(out);
                }
            }
        }
    }

    pub fn constants(&self) -> BTreeSet<Cst> {
        let mut out = BTreeSet::new();
        self.collect_csts(&mut out);
        out
    }

    fn collect_csts(&self, out: &mut BTreeSet<Cst>) {
        match self {
            Term::Constant(c) => {
                out.insert(c.clone());
            }
            _ => {
                for a in self.args() {
                    a.collect_csts(out);
                }
            }
        }
    }

    pub fn contains_var(&self, v: &Var) -> bool {
        match self {
            Term::Variable(w) => w == v,
            _ => self.args().iter().any(|a| a.contains_var(v)),
        }
    }

    /// The encrypted components: all subterms that are encryptions,
    /// hashes or signatures.
    pub fn encrypted_subterms(&self) -> BTreeSet<Term> {
        self.subterms()
            .into_iter()
            .filter(|t| {
                matches!(t, Term::PEnc(..) | Term::SEnc(..) | Term::Hash(_) | Term::Sig(..))
            })
            .collect()
    }

    /// Renames every variable through `f`, keeping types.
    pub fn rename_vars(&self, f: &impl Fn(&Var) -> Var) -> Term {
        match self {
            Term::Variable(v) => Term::Variable(f(v)),
            Term::Zero | Term::Constant(_) => self.clone(),
            Term::Sequence(es) => Term::seq(es.iter().map(|e| e.rename_vars(f)).collect()),
            Term::PEnc(p, k) => Term::penc(p.rename_vars(f), k.rename_vars(f)),
            Term::SEnc(p, k) => Term::senc(p.rename_vars(f), k.rename_vars(f)),
            Term::Pk(a) => Term::pk(a.rename_vars(f)),
            Term::Sh(a, b) => Term::sh(a.rename_vars(f), b.rename_vars(f)),
            Term::Hash(b) => Term::hash(b.rename_vars(f)),
            Term::Sig(b, k) => Term::sig(b.rename_vars(f), k.rename_vars(f)),
            Term::Xor(parts) => Term::xor(parts.iter().map(|p| p.rename_vars(f)).collect()),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Zero => write!(f, "0"),
            Term::Constant(c) => write!(f, "{}", c.name),
            Term::Variable(v) => write!(f, "{}", v.name),
            Term::Sequence(es) => {
                write!(f, "[")?;
                for (i, e) in es.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, "]")
            }
            Term::PEnc(p, k) => write!(f, "{{{p}}}_{k}"),
            Term::SEnc(p, k) => write!(f, "{{|{p}|}}_{k}"),
            Term::Pk(a) => write!(f, "pk({a})"),
            Term::Sh(a, b) => write!(f, "sh({a}, {b})"),
            Term::Hash(b) => write!(f, "hash({b})"),
            Term::Sig(b, k) => write!(f, "sig({b}, {k})"),
            Term::Xor(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " (+) ")?;
                    }
                    if matches!(p, Term::Sequence(_)) || p.is_atom() {
                        write!(f, "{p}")?;
                    } else {
                        write!(f, "({p})")?;
                    }
                }
                Ok(())
            }
        }
    }
}
