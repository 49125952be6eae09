//! Substitutions: finite maps from variables to terms.
//!
//! Substitutions built through `bind`/`compose` stay idempotent: no
//! domain variable occurs in any range term, so applying twice equals
//! applying once.

use std::collections::BTreeMap;
use std::fmt;

use crate::term::{Term, Var};

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution {
    bindings: BTreeMap<Var, Term>,
}

impl Substitution {
    pub fn new() -> Substitution {
        Substitution::default()
    }

    pub fn singleton(v: Var, t: Term) -> Substitution {
        let mut s = Substitution::new();
        s.bindings.insert(v, t);
        s
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Var, Term)>) -> Substitution {
        Substitution { bindings: pairs.into_iter().collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.bindings.get(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.bindings.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Var> {
        self.bindings.keys()
    }

    /// Homomorphic application followed by canonicalization: constants
    /// are unchanged, bound variables are replaced, compound terms are
    /// rebuilt (which restores the canonical xor and shared-key forms).
    pub fn apply(&self, t: &Term) -> Term {
        if self.is_empty() {
            return t.clone();
        }
        match t {
            Term::Zero | Term::Constant(_) => t.clone(),
            Term::Variable(v) => self.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Sequence(es) => Term::seq(es.iter().map(|e| self.apply(e)).collect()),
            Term::PEnc(p, k) => Term::penc(self.apply(p), self.apply(k)),
            Term::SEnc(p, k) => Term::senc(self.apply(p), self.apply(k)),
            Term::Pk(a) => Term::pk(self.apply(a)),
            Term::Sh(a, b) => Term::sh(self.apply(a), self.apply(b)),
            Term::Hash(b) => Term::hash(self.apply(b)),
            Term::Sig(b, k) => Term::sig(self.apply(b), self.apply(k)),
            Term::Xor(parts) => Term::xor(parts.iter().map(|p| self.apply(p)).collect()),
        }
    }

    /// Composition: `compose(s, t)` applies like "first s, then t".
    /// Ranges of `s` are instantiated through `t`; bindings of `t` for
    /// variables outside dom(s) are kept. Trivial x -> x bindings are
    /// dropped so the result stays idempotent.
    pub fn compose(&self, later: &Substitution) -> Substitution {
        let mut out = BTreeMap::new();
        for (v, t) in &self.bindings {
            let nt = later.apply(t);
            if nt != Term::Variable(v.clone()) {
                out.insert(v.clone(), nt);
            }
        }
        for (v, t) in &later.bindings {
            if !self.bindings.contains_key(v) && *t != Term::Variable(v.clone()) {
                out.insert(v.clone(), t.clone());
            }
        }
        Substitution { bindings: out }
    }

    /// Extends with one binding, instantiating existing ranges.
    /// The binding must pass the occurs check beforehand.
    pub fn bind(&self, v: Var, t: Term) -> Substitution {
        self.compose(&Substitution::singleton(v, t))
    }

    /// Keeps only bindings for variables satisfying the predicate.
    pub fn restrict(&self, keep: impl Fn(&Var) -> bool) -> Substitution {
        Substitution {
            bindings: self
                .bindings
                .iter()
                .filter(|(v, _)| keep(v))
                .map(|(v, t)| (v.clone(), t.clone()))
                .collect(),
        }
    }

    /// A substitution is well-typed when every binding replaces a
    /// variable by a term of the same structural type.
    pub fn is_well_typed(&self) -> bool {
        self.bindings.iter().all(|(v, t)| t.type_of() == v.ty)
    }

    /// Applies a variable renaming to both sides of every binding.
    pub fn rename_vars(&self, f: &impl Fn(&Var) -> Var) -> Substitution {
        Substitution {
            bindings: self
                .bindings
                .iter()
                .map(|(v, t)| (f(v), t.rename_vars(f)))
                .collect(),
        }
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (v, t)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{t}/{}", v.name)?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sort::Sort;

    fn nv(name: &str) -> Var {
        Var::new(name, Sort::Nonce)
    }
    fn av(name: &str) -> Var {
        Var::new(name, Sort::Agent)
    }

    #[test]
    fn apply_cancels_after_substitution() {
        // NA (+) b under {na (+) eps (+) b / NA} collapses to na (+) eps.
        let na_var = Term::Variable(nv("NA"));
        let b = Term::cst("b", Sort::Agent);
        let na = Term::cst("na", Sort::Nonce);
        let eps = Term::cst("eps", Sort::Agent);
        let s = Substitution::singleton(
            nv("NA"),
            Term::xor(vec![na.clone(), eps.clone(), b.clone()]),
        );
        let t = Term::xor(vec![na_var, b.clone()]);
        assert_eq!(s.apply(&t), Term::xor(vec![na, eps]));
    }

    #[test]
    fn apply_leaves_constants_alone() {
        let c = Term::cst("c", Sort::Text);
        let s = Substitution::singleton(nv("X"), Term::cst("na", Sort::Nonce));
        assert_eq!(s.apply(&c), c);
    }

    #[test]
    fn apply_is_homomorphic() {
        let msg = Term::penc(
            Term::seq(vec![
                Term::tag(1),
                Term::Variable(nv("NA")),
                Term::Variable(av("A")),
            ]),
            Term::pk(Term::Variable(av("B"))),
        );
        let s = Substitution::from_pairs([
            (av("A"), Term::cst("a", Sort::Agent)),
            (av("B"), Term::cst("b", Sort::Agent)),
        ]);
        assert_eq!(
            s.apply(&msg),
            Term::penc(
                Term::seq(vec![
                    Term::tag(1),
                    Term::Variable(nv("NA")),
                    Term::cst("a", Sort::Agent),
                ]),
                Term::pk(Term::cst("b", Sort::Agent)),
            )
        );
    }

    #[test]
    fn composition_law() {
        let t = Term::xor(vec![
            Term::Variable(nv("X")),
            Term::Variable(nv("Y")),
            Term::cst("c", Sort::Nonce),
        ]);
        let s1 = Substitution::singleton(nv("X"), Term::Variable(nv("Y")));
        let s2 = Substitution::singleton(nv("Y"), Term::cst("d", Sort::Nonce));
        assert_eq!(s2.apply(&s1.apply(&t)), s1.compose(&s2).apply(&t));
    }

    #[test]
    fn idempotence_after_compose() {
        let s = Substitution::singleton(nv("X"), Term::Variable(nv("Y")))
            .compose(&Substitution::singleton(nv("Y"), Term::cst("d", Sort::Nonce)));
        let t = Term::seq(vec![Term::Variable(nv("X")), Term::Variable(nv("Y"))]);
        assert_eq!(s.apply(&t), s.apply(&s.apply(&t)));
    }

    #[test]
    fn well_typedness() {
        assert!(Substitution::new().is_well_typed());
        let ill = Substitution::singleton(
            nv("NA"),
            Term::xor(vec![
                Term::cst("na", Sort::Nonce),
                Term::cst("eps", Sort::Agent),
                Term::cst("b", Sort::Agent),
            ]),
        );
        assert!(!ill.is_well_typed());
        let ok = Substitution::from_pairs([
            (nv("NB"), Term::cst("nb", Sort::Nonce)),
            (av("B"), Term::cst("eps", Sort::Agent)),
        ]);
        assert!(ok.is_well_typed());
    }

    #[test]
    fn types_commute_with_well_typed_substitution() {
        let msg = Term::penc(
            Term::seq(vec![Term::tag(2), Term::Variable(nv("NA")), Term::Variable(av("B"))]),
            Term::pk(Term::Variable(av("A"))),
        );
        let s = Substitution::from_pairs([
            (nv("NA"), Term::cst("na", Sort::Nonce)),
            (av("B"), Term::cst("b", Sort::Agent)),
        ]);
        assert!(s.is_well_typed());
        assert_eq!(s.apply(&msg).type_of(), msg.type_of());
    }
}
