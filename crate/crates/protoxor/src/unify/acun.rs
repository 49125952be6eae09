//! Elementary unification in the exclusive-or theory.
//!
//! Inputs are xor combinations of atoms (variables, constants, the
//! unity). Each equation `s =? t` holds exactly when the mod-2 sum
//! `s (+) t` normalizes to zero, so the problem is a linear system over
//! the two-element field with constants as independent basis vectors.
//! Gaussian elimination yields either a single most general unifier
//! (pivot variables expressed over free variables and constants) or
//! non-unifiability. The free variables of the problem serve as the
//! solution-space parameters.

use std::collections::BTreeSet;

use crate::subst::Substitution;
use crate::term::{Cst, Term, Var};
use crate::unify::{UnificationProblem, UnifierSet, UnifyError};

/// One row of the system: a parity set of variables and constants whose
/// xor must equal zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Row {
    vars: BTreeSet<Var>,
    csts: BTreeSet<Cst>,
}

impl Row {
    fn xor_assign(&mut self, other: &Row) {
        self.vars = self.vars.symmetric_difference(&other.vars).cloned().collect();
        self.csts = self.csts.symmetric_difference(&other.csts).cloned().collect();
    }

    fn is_trivial(&self) -> bool {
        self.vars.is_empty() && self.csts.is_empty()
    }
}

fn row_of(lhs: &Term, rhs: &Term) -> Result<Row, UnifyError> {
    let mut row = Row::default();
    for side in [lhs, rhs] {
        for atom in summands(side)? {
            match atom {
                Term::Zero => {}
                Term::Variable(v) => toggle(&mut row.vars, v),
                Term::Constant(c) => toggle(&mut row.csts, c),
                other => {
                    return Err(UnifyError::ImpureProblem(format!(
                        "non-atomic summand {other} in an xor-theory problem"
                    )))
                }
            }
        }
    }
    Ok(row)
}

fn toggle<T: Ord>(set: &mut BTreeSet<T>, item: T) {
    if !set.remove(&item) {
        set.insert(item);
    }
}

fn summands(t: &Term) -> Result<Vec<Term>, UnifyError> {
    match t {
        Term::Xor(parts) => Ok(parts.clone()),
        Term::Zero | Term::Variable(_) | Term::Constant(_) => Ok(vec![t.clone()]),
        other => Err(UnifyError::ImpureProblem(format!(
            "non-atomic term {other} in an xor-theory problem"
        ))),
    }
}

/// Complete unification over xor combinations of atoms. Returns at most
/// one unifier; the empty set signals non-unifiability.
pub fn unify_acun(problem: &UnificationProblem) -> Result<UnifierSet, UnifyError> {
    let mut rows: Vec<Row> = Vec::new();
    for (l, r) in &problem.equations {
        let row = row_of(l, r)?;
        if !row.is_trivial() {
            rows.push(row);
        }
    }

    // forward elimination, first variable of each row as pivot
    let mut pivots: Vec<(Var, Row)> = Vec::new();
    while let Some(mut row) = rows.pop() {
        for (pv, prow) in &pivots {
            if row.vars.contains(pv) {
                row.xor_assign(prow);
            }
        }
        if row.is_trivial() {
            continue;
        }
        match row.vars.iter().next().cloned() {
            None => return Ok(UnifierSet::new()), // ground contradiction
            Some(pivot) => {
                // eliminate the new pivot from earlier pivot rows
                for (_, prow) in pivots.iter_mut() {
                    if prow.vars.contains(&pivot) {
                        prow.xor_assign(&row);
                    }
                }
                pivots.push((pivot, row));
            }
        }
    }

    let mut subst = Substitution::new();
    for (pivot, row) in pivots {
        let mut parts: Vec<Term> = row
            .vars
            .iter()
            .filter(|v| **v != pivot)
            .cloned()
            .map(Term::Variable)
            .collect();
        parts.extend(row.csts.iter().cloned().map(Term::Constant));
        subst = subst.compose(&Substitution::singleton(pivot, Term::xor(parts)));
    }
    Ok([subst].into_iter().collect())
}
