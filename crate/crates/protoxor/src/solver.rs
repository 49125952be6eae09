//! Bounded exhaustive search for solutions of a constraint sequence.
//!
//! Depth-first over rule applications, normalizing before every step,
//! with duplicate states pruned by their canonical representation. The
//! search is exhaustive within its bounds; hitting a bound is reported
//! separately from "no solution", because only the former leaves the
//! answer open.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::constraints::{apply_rule_with, normalize, Choice, ConstraintSeq, RuleError, RuleName};
use crate::subst::Substitution;
use crate::term::{attacker, Term, Var};
use crate::unify::{unify_sua, BscaConfig, UnificationProblem, UnifierSet, UnifyError};

#[derive(Debug, Clone, Copy)]
pub struct SolveBounds {
    /// Rule applications along one branch.
    pub max_rule_apps: usize,
    /// Total search states expanded.
    pub max_branches: usize,
}

impl Default for SolveBounds {
    fn default() -> Self {
        SolveBounds { max_rule_apps: 64, max_branches: 100_000 }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    /// Accumulated substitutions of every branch that reached a fully
    /// simple sequence, restricted to the input's variables.
    pub solutions: BTreeSet<Substitution>,
    /// Whether any bound cut the search short.
    pub truncated: bool,
    pub states_explored: usize,
}

/// Search engine with a unification memo shared across calls.
pub struct Solver {
    pub bounds: SolveBounds,
    pub bsca: BscaConfig,
    memo: HashMap<(Term, Term), Result<UnifierSet, UnifyError>>,
}

impl Solver {
    pub fn new(bounds: SolveBounds, bsca: BscaConfig) -> Solver {
        Solver { bounds, bsca, memo: HashMap::new() }
    }

    fn unify_memo(&mut self, p: &UnificationProblem) -> Result<UnifierSet, UnifyError> {
        if p.equations.len() == 1 {
            let key = p.equations[0].clone();
            if let Some(r) = self.memo.get(&key) {
                return r.clone();
            }
            let r = unify_sua(p, &self.bsca);
            self.memo.insert(key, r.clone());
            return r;
        }
        unify_sua(p, &self.bsca)
    }

    /// Exhaustive bounded solving. The returned substitutions are
    /// restricted to the variables of `cs` and parameter variables are
    /// canonically renamed, so equal answers deduplicate.
    pub fn solve(&mut self, cs: &ConstraintSeq) -> SolveOutcome {
        let original_vars: BTreeSet<Var> = cs.vars();
        let root = normalize(cs);
        let mut solutions = BTreeSet::new();
        let mut truncated = false;
        let mut states = 0usize;
        let mut visited: HashSet<ConstraintSeq> = HashSet::new();
        let mut stack: Vec<(ConstraintSeq, usize)> = vec![(root.clone(), 0)];
        visited.insert(root);

        while let Some((state, depth)) = stack.pop() {
            states += 1;
            if states > self.bounds.max_branches {
                truncated = true;
                break;
            }
            if state.is_simple() {
                let sol = state.accumulated.restrict(|v| original_vars.contains(v));
                solutions.insert(crate::unify::bsca::rename_parameters(&sol, &original_vars));
                continue;
            }
            if depth >= self.bounds.max_rule_apps {
                truncated = true;
                continue;
            }
            let mut children = Vec::new();
            match self.expand(&state, &mut children) {
                Ok(()) => {}
                Err(UnifyError::CapExceeded(_)) => {
                    truncated = true;
                }
                Err(e) => panic!("unexpected unification failure: {e}"),
            }
            // reverse so the first-listed rule is explored first
            for child in children.into_iter().rev() {
                let child = normalize(&child);
                if visited.insert(child.clone()) {
                    stack.push((child, depth + 1));
                }
            }
        }
        SolveOutcome { solutions, truncated, states_explored: states }
    }

    /// Enumerates every applicable (rule, choice) pair on the active
    /// constraint, in the fixed order: unification first, then key
    /// substitution, destructors, constructors, and the xor rules.
    fn expand(
        &mut self,
        state: &ConstraintSeq,
        out: &mut Vec<ConstraintSeq>,
    ) -> Result<(), UnifyError> {
        let active = state.active().expect("expand called on a non-simple sequence").clone();
        let elements: Vec<Term> = active.term_set.iter().cloned().collect();

        let run = |rule: RuleName,
                       choice: &Choice,
                       memo: &mut Self,
                       out: &mut Vec<ConstraintSeq>|
         -> Result<(), UnifyError> {
            match apply_rule_with(rule, state, choice, &mut |p| memo.unify_memo(p)) {
                Ok(children) => {
                    out.extend(children.into_iter().map(|(c, _)| c));
                    Ok(())
                }
                Err(RuleError::Unify(e)) => Err(e),
                Err(_) => Ok(()),
            }
        };

        // un against every element
        for e in &elements {
            run(RuleName::Un, &Choice::Element(e.clone()), self, out)?;
        }
        // ksub on every asymmetric encryption whose key is not already the attacker's
        for e in &elements {
            if let Term::PEnc(_, k) = e {
                if **k != Term::pk(attacker()) {
                    run(RuleName::Ksub, &Choice::Element(e.clone()), self, out)?;
                }
            }
        }
        // destructors
        for e in &elements {
            if matches!(e, Term::SEnc(..)) {
                run(RuleName::Sdec, &Choice::Element(e.clone()), self, out)?;
            }
        }
        for e in &elements {
            if let Term::PEnc(_, k) = e {
                if **k == Term::pk(attacker()) {
                    run(RuleName::Pdec, &Choice::Element(e.clone()), self, out)?;
                }
            }
        }
        // constructors on the target
        for rule in [RuleName::Hash, RuleName::Sig, RuleName::Penc, RuleName::Senc] {
            run(rule, &Choice::None, self, out)?;
        }
        // xor on the target: every nonempty proper summand subset
        if let Term::Xor(parts) = &active.target {
            for mask in 1u64..((1u64 << parts.len()) - 1) {
                let peeled: Vec<Term> = parts
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| mask & (1 << j) != 0)
                    .map(|(_, t)| t.clone())
                    .collect();
                run(RuleName::XorL, &Choice::Subset(peeled), self, out)?;
            }
        }
        // xor on term-set elements
        for e in &elements {
            if let Term::Xor(parts) = e {
                for mask in 1u64..((1u64 << parts.len()) - 1) {
                    let kept: Vec<Term> = parts
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| mask & (1 << j) != 0)
                        .map(|(_, t)| t.clone())
                        .collect();
                    run(RuleName::XorR, &Choice::ElementSubset(e.clone(), kept), self, out)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::Constraint;
    use crate::sort::Sort;

    fn a() -> Term {
        Term::cst("a", Sort::Agent)
    }
    fn b() -> Term {
        Term::cst("b", Sort::Agent)
    }
    fn na() -> Term {
        Term::cst("na", Sort::Nonce)
    }
    fn nb() -> Term {
        Term::cst("nb", Sort::Nonce)
    }
    fn solver() -> Solver {
        Solver::new(SolveBounds::default(), BscaConfig::default())
    }

    #[test]
    fn verbatim_targets_solve_with_the_empty_substitution() {
        let cs = ConstraintSeq::new(vec![
            Constraint::new(na(), [na(), a()]),
            Constraint::new(a(), [na(), a(), b()]),
        ]);
        let out = solver().solve(&cs);
        assert!(!out.truncated);
        assert_eq!(out.solutions, [Substitution::new()].into_iter().collect());
    }

    #[test]
    fn underivable_target_has_no_solutions() {
        let cs = ConstraintSeq::new(vec![Constraint::new(
            nb(),
            [Term::penc(nb(), Term::pk(b())), a()],
        )]);
        let out = solver().solve(&cs);
        assert!(!out.truncated);
        assert!(out.solutions.is_empty());
    }

    #[test]
    fn attacker_encryption_is_opened() {
        let cs = ConstraintSeq::new(vec![Constraint::new(
            nb(),
            [Term::penc(Term::seq(vec![Term::tag(3), nb()]), Term::pk(attacker()))],
        )]);
        let out = solver().solve(&cs);
        assert_eq!(out.solutions.len(), 1);
    }

    #[test]
    fn key_substitution_opens_variable_keys() {
        // {nb}_pk(B) with B free: the attacker picks B = eps and decrypts
        let cs = ConstraintSeq::new(vec![Constraint::new(
            nb(),
            [Term::penc(nb(), Term::pk(Term::var("B", Sort::Agent)))],
        )]);
        let out = solver().solve(&cs);
        let expected =
            Substitution::singleton(Var::new("B", Sort::Agent), attacker());
        assert!(out.solutions.contains(&expected), "got {:?}", out.solutions);
    }

    #[test]
    fn xor_of_known_parts_is_derivable() {
        let cs = ConstraintSeq::new(vec![Constraint::new(Term::xor(vec![na(), b()]), [na(), b()])]);
        let out = solver().solve(&cs);
        assert!(out.solutions.contains(&Substitution::new()));
    }

    #[test]
    fn xor_element_peeling_recovers_a_summand() {
        // knowing na (+) nb and nb, the attacker derives na
        let cs = ConstraintSeq::new(vec![Constraint::new(
            na(),
            [Term::xor(vec![na(), nb()]), nb()],
        )]);
        let out = solver().solve(&cs);
        assert!(out.solutions.contains(&Substitution::new()), "got {:?}", out.solutions);
    }

    #[test]
    fn constructed_encryption_target() {
        // derive {na}_pk(b) from na and pk(b)
        let cs = ConstraintSeq::new(vec![Constraint::new(
            Term::penc(na(), Term::pk(b())),
            [na(), Term::pk(b())],
        )]);
        let out = solver().solve(&cs);
        assert!(out.solutions.contains(&Substitution::new()));
    }

    #[test]
    fn bound_exhaustion_is_flagged_not_silent() {
        let mut s = Solver::new(
            SolveBounds { max_rule_apps: 1, max_branches: 2 },
            BscaConfig::default(),
        );
        let cs = ConstraintSeq::new(vec![Constraint::new(
            Term::penc(Term::penc(na(), Term::pk(b())), Term::pk(b())),
            [a()],
        )]);
        let out = s.solve(&cs);
        assert!(out.truncated);
    }

    #[test]
    fn solving_is_deterministic() {
        let cs = ConstraintSeq::new(vec![Constraint::new(
            Term::xor(vec![na(), nb()]),
            [Term::xor(vec![na(), b()]), Term::xor(vec![nb(), b()]), b(), na(), nb()],
        )]);
        let o1 = solver().solve(&cs);
        let o2 = solver().solve(&cs);
        assert_eq!(o1.solutions, o2.solutions);
        assert_eq!(o1.states_explored, o2.states_explored);
    }
}
