//! Equational unification: syntactic unification for the standard
//! operators, elimination over the two-element field for exclusive-or,
//! and their disjoint combination.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::subst::Substitution;
use crate::term::Term;

pub mod acun;
pub mod bsca;
pub mod syntactic;

pub use acun::unify_acun;
pub use bsca::{
    combine, enumerate_identifications, purify, split_and_abstract, unify_sua, unify_sua_traced,
    BscaBranch, BscaConfig, BscaTrace, Identification, PurifiedEquation,
};
pub use syntactic::{unify_free, unify_std};

/// A finite set of oriented equations to be solved in some theory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnificationProblem {
    pub equations: Vec<(Term, Term)>,
}

impl UnificationProblem {
    pub fn new(equations: Vec<(Term, Term)>) -> UnificationProblem {
        UnificationProblem { equations }
    }

    pub fn single(lhs: Term, rhs: Term) -> UnificationProblem {
        UnificationProblem { equations: vec![(lhs, rhs)] }
    }

    pub fn vars(&self) -> BTreeSet<crate::term::Var> {
        let mut out = BTreeSet::new();
        for (l, r) in &self.equations {
            out.extend(l.vars());
            out.extend(r.vars());
        }
        out
    }

    pub fn constants(&self) -> BTreeSet<crate::term::Cst> {
        let mut out = BTreeSet::new();
        for (l, r) in &self.equations {
            out.extend(l.constants());
            out.extend(r.constants());
        }
        out
    }
}

impl fmt::Display for UnificationProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{ ")?;
        for (i, (l, r)) in self.equations.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l} =? {r}")?;
        }
        write!(f, " }}")
    }
}

/// A complete set of unifiers. Empty means non-unifiable.
pub type UnifierSet = BTreeSet<Substitution>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UnifyError {
    /// A term fell outside the fragment the called solver accepts.
    #[error("problem is not pure for the requested theory: {0}")]
    ImpureProblem(String),
    /// The exhaustive branch enumeration would exceed its configured cap.
    #[error("combination search exceeded its cap: {0}")]
    CapExceeded(String),
}

/// Reason a syntactic unification branch failed. Non-unifiability is
/// reported as an empty unifier set by the public entry points; these
/// carry the witnessing clash for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClashReason {
    /// A variable occurs in the term it would be bound to.
    OccursViolation(Term, Term),
    /// Distinct root constructors or distinct constants.
    SignatureClash(Term, Term),
}
