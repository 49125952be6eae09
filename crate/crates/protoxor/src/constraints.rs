//! Symbolic constraints and the reduction rules that decide them.
//!
//! A constraint `m : T` asks whether the attacker can derive the target
//! `m` from the term set `T`. A sequence of constraints is satisfiable
//! when rule applications turn it into simple constraints (variable
//! targets) only; the substitution accumulated along the way is the
//! attack substitution.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::subst::Substitution;
use crate::term::{attacker, Term};
use crate::unify::{unify_sua, BscaConfig, UnificationProblem, UnifierSet, UnifyError};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Constraint {
    pub target: Term,
    pub term_set: BTreeSet<Term>,
}

impl Constraint {
    pub fn new(target: Term, term_set: impl IntoIterator<Item = Term>) -> Constraint {
        Constraint { target, term_set: term_set.into_iter().collect() }
    }

    /// Simple constraints have a variable target.
    pub fn is_simple(&self) -> bool {
        self.target.is_variable()
    }

    pub fn apply(&self, s: &Substitution) -> Constraint {
        Constraint {
            target: s.apply(&self.target),
            term_set: self.term_set.iter().map(|t| s.apply(t)).collect(),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} : {{", self.target)?;
        for (i, t) in self.term_set.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstraintSeq {
    pub constraints: Vec<Constraint>,
    pub accumulated: Substitution,
}

impl ConstraintSeq {
    pub fn new(constraints: Vec<Constraint>) -> ConstraintSeq {
        ConstraintSeq { constraints, accumulated: Substitution::new() }
    }

    pub fn is_simple(&self) -> bool {
        self.constraints.iter().all(Constraint::is_simple)
    }

    /// Index of the active constraint: the first non-simple one.
    pub fn active_index(&self) -> Option<usize> {
        self.constraints.iter().position(|c| !c.is_simple())
    }

    /// The active constraint, if the sequence is not fully simple.
    pub fn active(&self) -> Result<&Constraint, RuleError> {
        self.active_index().map(|i| &self.constraints[i]).ok_or(RuleError::AllSimple)
    }

    pub fn apply(&self, s: &Substitution) -> ConstraintSeq {
        ConstraintSeq {
            constraints: self.constraints.iter().map(|c| c.apply(s)).collect(),
            accumulated: self.accumulated.compose(s),
        }
    }

    pub fn vars(&self) -> BTreeSet<crate::term::Var> {
        let mut out = BTreeSet::new();
        for c in &self.constraints {
            out.extend(c.target.vars());
            for t in &c.term_set {
                out.extend(t.vars());
            }
        }
        out
    }

    /// Whether the active constraint is in normal shape: no sequence as
    /// the target or as a term-set element, and no bare variables in the
    /// term set. Fully simple sequences count as normal.
    pub fn is_normal(&self) -> bool {
        match self.active_index() {
            None => true,
            Some(i) => {
                let c = &self.constraints[i];
                !matches!(c.target, Term::Sequence(_))
                    && c.term_set
                        .iter()
                        .all(|t| !matches!(t, Term::Sequence(_)) && !t.is_variable())
            }
        }
    }
}

impl fmt::Display for ConstraintSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.constraints.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Brings the active constraint into normal shape: sequence targets are
/// split into one constraint per element, sequence elements of the term
/// set are flattened, and stand-alone variables are dropped from the
/// term set (a free variable can always be instantiated with something
/// already derivable, so it adds nothing). Idempotent.
pub fn normalize(cs: &ConstraintSeq) -> ConstraintSeq {
    let mut out = cs.clone();
    loop {
        let Some(i) = out.active_index() else { return out };
        let c = out.constraints[i].clone();
        if let Term::Sequence(parts) = &c.target {
            let replacement: Vec<Constraint> = parts
                .iter()
                .map(|p| Constraint { target: p.clone(), term_set: c.term_set.clone() })
                .collect();
            out.constraints.splice(i..=i, replacement);
            continue;
        }
        let needs_flatten = c.term_set.iter().any(|t| matches!(t, Term::Sequence(_)));
        let needs_elim = c.term_set.iter().any(Term::is_variable);
        if !needs_flatten && !needs_elim {
            return out;
        }
        let mut set = BTreeSet::new();
        let mut stack: Vec<Term> = c.term_set.into_iter().collect();
        while let Some(t) = stack.pop() {
            match t {
                Term::Sequence(parts) => stack.extend(parts),
                Term::Variable(_) => {}
                other => {
                    set.insert(other);
                }
            }
        }
        out.constraints[i].term_set = set;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleName {
    Un,
    Ksub,
    Sdec,
    Pdec,
    Penc,
    Senc,
    Hash,
    Sig,
    XorL,
    XorR,
    Concat,
    Split,
}

impl fmt::Display for RuleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RuleName::Un => "un",
            RuleName::Ksub => "ksub",
            RuleName::Sdec => "sdec",
            RuleName::Pdec => "pdec",
            RuleName::Penc => "penc",
            RuleName::Senc => "senc",
            RuleName::Hash => "hash",
            RuleName::Sig => "sig",
            RuleName::XorL => "xor_l",
            RuleName::XorR => "xor_r",
            RuleName::Concat => "concat",
            RuleName::Split => "split",
        };
        f.write_str(s)
    }
}

/// Parameter for rules that pick a term-set element or a summand subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Choice {
    None,
    /// The chosen term-set element.
    Element(Term),
    /// For the xor target rule: the summands peeled off.
    Subset(Vec<Term>),
    /// For the xor term-set rule: the chosen element and the summands
    /// kept on the derivable side.
    ElementSubset(Term, Vec<Term>),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("every constraint is already simple")]
    AllSimple,
    #[error("the sequence must be normalized before applying a rule")]
    NotNormal,
    #[error("rule {0} is not applicable here")]
    NotApplicable(RuleName),
    #[error(transparent)]
    Unify(#[from] UnifyError),
}

/// Applies one reduction rule to the active constraint. Returns one
/// successor per branch: most rules are deterministic, while `un` and
/// `ksub` branch over the unifiers found and are the only rules that
/// extend the accumulated substitution.
pub fn apply_rule(
    rule: RuleName,
    cs: &ConstraintSeq,
    choice: &Choice,
    bsca: &BscaConfig,
) -> Result<Vec<(ConstraintSeq, Substitution)>, RuleError> {
    apply_rule_with(rule, cs, choice, &mut |p| unify_sua(p, bsca))
}

/// Like [`apply_rule`], with the unifier provider supplied by the caller
/// (the search engine memoizes it).
pub fn apply_rule_with(
    rule: RuleName,
    cs: &ConstraintSeq,
    choice: &Choice,
    unify: &mut dyn FnMut(&UnificationProblem) -> Result<UnifierSet, UnifyError>,
) -> Result<Vec<(ConstraintSeq, Substitution)>, RuleError> {
    if !cs.is_normal() {
        return Err(RuleError::NotNormal);
    }
    let i = cs.active_index().ok_or(RuleError::AllSimple)?;
    let c = cs.constraints[i].clone();
    let not_applicable = || Err(RuleError::NotApplicable(rule));

    // replaces the active constraint with the given ones
    let replace = |with: Vec<Constraint>| -> ConstraintSeq {
        let mut out = cs.clone();
        out.constraints.splice(i..=i, with);
        out
    };

    match rule {
        RuleName::Concat => match &c.target {
            Term::Sequence(parts) => {
                let cons = parts
                    .iter()
                    .map(|p| Constraint { target: p.clone(), term_set: c.term_set.clone() })
                    .collect();
                Ok(vec![(replace(cons), Substitution::new())])
            }
            _ => not_applicable(),
        },
        RuleName::Split => match choice {
            Choice::Element(e @ Term::Sequence(parts)) if c.term_set.contains(e) => {
                let mut set = c.term_set.clone();
                set.remove(e);
                set.extend(parts.iter().cloned());
                Ok(vec![(replace(vec![Constraint { target: c.target, term_set: set }]),
                    Substitution::new())])
            }
            _ => not_applicable(),
        },
        RuleName::Penc => match &c.target {
            Term::PEnc(p, k) => {
                let cons = vec![
                    Constraint { target: (**k).clone(), term_set: c.term_set.clone() },
                    Constraint { target: (**p).clone(), term_set: c.term_set.clone() },
                ];
                Ok(vec![(replace(cons), Substitution::new())])
            }
            _ => not_applicable(),
        },
        RuleName::Senc => match &c.target {
            Term::SEnc(p, k) => {
                let cons = vec![
                    Constraint { target: (**k).clone(), term_set: c.term_set.clone() },
                    Constraint { target: (**p).clone(), term_set: c.term_set.clone() },
                ];
                Ok(vec![(replace(cons), Substitution::new())])
            }
            _ => not_applicable(),
        },
        RuleName::Hash => match &c.target {
            Term::Hash(b) => Ok(vec![(
                replace(vec![Constraint { target: (**b).clone(), term_set: c.term_set }]),
                Substitution::new(),
            )]),
            _ => not_applicable(),
        },
        RuleName::Sig => match &c.target {
            Term::Sig(b, _) => Ok(vec![(
                replace(vec![Constraint { target: (**b).clone(), term_set: c.term_set }]),
                Substitution::new(),
            )]),
            _ => not_applicable(),
        },
        RuleName::Pdec => match choice {
            Choice::Element(e) if c.term_set.contains(e) => match e {
                Term::PEnc(p, k) if **k == Term::pk(attacker()) => {
                    let mut set = c.term_set.clone();
                    set.remove(e);
                    set.insert((**p).clone());
                    Ok(vec![(
                        replace(vec![Constraint { target: c.target, term_set: set }]),
                        Substitution::new(),
                    )])
                }
                _ => not_applicable(),
            },
            _ => not_applicable(),
        },
        RuleName::Sdec => match choice {
            Choice::Element(e) if c.term_set.contains(e) => match e {
                Term::SEnc(p, k) => {
                    let mut rest = c.term_set.clone();
                    rest.remove(e);
                    let mut extended = rest.clone();
                    extended.insert((**p).clone());
                    extended.insert((**k).clone());
                    let cons = vec![
                        Constraint { target: (**k).clone(), term_set: rest },
                        Constraint { target: c.target, term_set: extended },
                    ];
                    Ok(vec![(replace(cons), Substitution::new())])
                }
                _ => not_applicable(),
            },
            _ => not_applicable(),
        },
        RuleName::XorL => match (&c.target, choice) {
            (Term::Xor(parts), Choice::Subset(peeled)) => {
                if peeled.is_empty() || peeled.len() >= parts.len() {
                    return not_applicable();
                }
                let mut rest = parts.clone();
                for p in peeled {
                    match rest.iter().position(|x| x == p) {
                        Some(j) => {
                            rest.remove(j);
                        }
                        None => return not_applicable(),
                    }
                }
                let cons = vec![
                    Constraint { target: Term::xor(rest), term_set: c.term_set.clone() },
                    Constraint { target: Term::xor(peeled.clone()), term_set: c.term_set },
                ];
                Ok(vec![(replace(cons), Substitution::new())])
            }
            _ => not_applicable(),
        },
        RuleName::XorR => match choice {
            Choice::ElementSubset(e, kept) if c.term_set.contains(e) => match e {
                Term::Xor(parts) => {
                    if kept.is_empty() || kept.len() >= parts.len() {
                        return not_applicable();
                    }
                    let mut rest = parts.clone();
                    for p in kept {
                        match rest.iter().position(|x| x == p) {
                            Some(j) => {
                                rest.remove(j);
                            }
                            None => return not_applicable(),
                        }
                    }
                    let mut set = c.term_set.clone();
                    set.remove(e);
                    let mut extended = set.clone();
                    extended.insert(Term::xor(kept.clone()));
                    let cons = vec![
                        Constraint { target: Term::xor(rest), term_set: set },
                        Constraint { target: c.target, term_set: extended },
                    ];
                    Ok(vec![(replace(cons), Substitution::new())])
                }
                _ => not_applicable(),
            },
            _ => not_applicable(),
        },
        RuleName::Un => match choice {
            Choice::Element(e) if c.term_set.contains(e) => {
                let problem = UnificationProblem::single(c.target.clone(), e.clone());
                let unifiers = unify(&problem)?;
                let mut out = Vec::new();
                for tau in unifiers {
                    let mut child = cs.clone();
                    child.constraints.remove(i);
                    out.push((child.apply(&tau), tau));
                }
                Ok(out)
            }
            _ => not_applicable(),
        },
        RuleName::Ksub => match choice {
            Choice::Element(e) if c.term_set.contains(e) => match e {
                Term::PEnc(_, k) => {
                    let problem =
                        UnificationProblem::single((**k).clone(), Term::pk(attacker()));
                    let unifiers = unify(&problem)?;
                    let mut out = Vec::new();
                    for tau in unifiers {
                        out.push((cs.apply(&tau), tau));
                    }
                    Ok(out)
                }
                _ => not_applicable(),
            },
            _ => not_applicable(),
        },
    }
}
