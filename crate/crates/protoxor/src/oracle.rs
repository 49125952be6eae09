//! Independent ground-derivation check for solver solutions.
//!
//! Given a ground term set, decides whether a ground target is derivable
//! by the attacker operations: reading sequence elements, decrypting
//! with its own key or a derivable symmetric key, composing sequences,
//! encryptions, hashes and signatures, and xor-combining known material.
//! Written directly against the attacker operations, with its own little
//! parity-vector eliminator for the xor reasoning, so it shares no code
//! path with the unification machinery or the constraint solver it
//! cross-checks.

use std::collections::BTreeSet;

use crate::constraints::ConstraintSeq;
use crate::subst::Substitution;
use crate::term::{attacker, Term, Var};

/// Saturates the knowledge set under the destructive operations:
/// sequence projection, decryption under `pk` of the attacker,
/// symmetric decryption with derivable keys, and xor peeling.
fn saturate(initial: &BTreeSet<Term>) -> BTreeSet<Term> {
    let mut known = initial.clone();
    loop {
        let mut added = Vec::new();
        for t in &known {
            match t {
                Term::Sequence(es) => {
                    for e in es {
                        if !known.contains(e) {
                            added.push(e.clone());
                        }
                    }
                }
                Term::PEnc(p, k) => {
                    if **k == Term::pk(attacker()) && !known.contains(p) {
                        added.push((**p).clone());
                    }
                }
                Term::SEnc(p, k) => {
                    if !known.contains(p) && synthesizable(k, &known) {
                        added.push((**p).clone());
                    }
                }
                Term::Xor(parts) => {
                    // peel: any summand whose complement is synthesizable
                    for (i, part) in parts.iter().enumerate() {
                        if known.contains(part) {
                            continue;
                        }
                        let rest: Vec<Term> = parts
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| *j != i)
                            .map(|(_, x)| x.clone())
                            .collect();
                        if synthesizable(&Term::xor(rest), &known) {
                            added.push(part.clone());
                        }
                    }
                }
                _ => {}
            }
        }
        if added.is_empty() {
            return known;
        }
        known.extend(added);
    }
}

/// Whether `target` can be built from the saturated set by composition.
fn synthesizable(target: &Term, known: &BTreeSet<Term>) -> bool {
    if known.contains(target) {
        return true;
    }
    match target {
        Term::Sequence(es) => es.iter().all(|e| synthesizable(e, known)),
        Term::PEnc(p, k) | Term::SEnc(p, k) => {
            synthesizable(p, known) && synthesizable(k, known)
        }
        Term::Hash(b) | Term::Sig(b, _) => synthesizable(b, known),
        // keys are possessed, never computed from their arguments
        Term::Pk(_) | Term::Sh(..) => false,
        Term::Zero => true,
        Term::Xor(_) => xor_span_covers(target, known),
        Term::Constant(_) | Term::Variable(_) => false,
    }
}

/// Decides membership of `target` in the xor span of the known terms
/// (each viewed as a parity vector over non-xor basis terms), by plain
/// elimination over parity sets.
fn xor_span_covers(target: &Term, known: &BTreeSet<Term>) -> bool {
    fn vector_of(t: &Term) -> BTreeSet<Term> {
        match t {
            Term::Zero => BTreeSet::new(),
            Term::Xor(parts) => parts.iter().cloned().collect(),
            other => [other.clone()].into_iter().collect(),
        }
    }
    let mut goal = vector_of(target);
    // generators: known terms plus every synthesizable-by-composition
    // summand of the goal (composed parts can enter the sum too)
    let mut generators: Vec<BTreeSet<Term>> = known.iter().map(vector_of).collect();
    for part in vector_of(target) {
        if !known.contains(&part) && synthesizable(&part, known) {
            generators.push([part].into_iter().collect());
        }
    }
    // elimination: repeatedly cancel the largest basis term of the goal
    // with a generator containing it
    let mut used = vec![false; generators.len()];
    while let Some(pivot) = goal.iter().next_back().cloned() {
        let hit = generators
            .iter()
            .enumerate()
            .find(|(i, g)| !used[*i] && g.contains(&pivot));
        match hit {
            Some((i, g)) => {
                let g = g.clone();
                used[i] = true;
                goal = goal.symmetric_difference(&g).cloned().collect();
            }
            None => return false,
        }
    }
    true
}

/// Whether a single ground target is derivable from a ground term set.
pub fn derivable(target: &Term, term_set: &BTreeSet<Term>) -> bool {
    let known = saturate(term_set);
    synthesizable(target, &known)
}

/// Grounds the leftover free variables of a solved sequence with the
/// attacker's own name; a simple constraint accepts any derivable value,
/// and the attacker constant is always available.
fn ground_leftovers(t: &Term) -> Term {
    t.rename_vars(&|_: &Var| Var::new("__grounded", crate::sort::Sort::Agent))
        .subst_grounded()
}

trait SubstGrounded {
    fn subst_grounded(&self) -> Term;
}

impl SubstGrounded for Term {
    fn subst_grounded(&self) -> Term {
        match self {
            Term::Variable(v) if v.name == "__grounded" => attacker(),
            Term::Zero | Term::Constant(_) | Term::Variable(_) => self.clone(),
            Term::Sequence(es) => {
                Term::seq(es.iter().map(|e| e.subst_grounded()).collect())
            }
            Term::PEnc(p, k) => Term::penc(p.subst_grounded(), k.subst_grounded()),
            Term::SEnc(p, k) => Term::senc(p.subst_grounded(), k.subst_grounded()),
            Term::Pk(a) => Term::pk(a.subst_grounded()),
            Term::Sh(a, b) => Term::sh(a.subst_grounded(), b.subst_grounded()),
            Term::Hash(b) => Term::hash(b.subst_grounded()),
            Term::Sig(b, k) => Term::sig(b.subst_grounded(), k.subst_grounded()),
            Term::Xor(parts) => {
                Term::xor(parts.iter().map(|p| p.subst_grounded()).collect())
            }
        }
    }
}

/// Validates a solver solution against a constraint sequence: after
/// applying the substitution and grounding leftover variables with the
/// attacker constant, every constraint target must be derivable from its
/// term set. Returns the first failing constraint, if any.
pub fn validate_solution(cs: &ConstraintSeq, solution: &Substitution) -> Result<(), String> {
    for c in &cs.constraints {
        let target = ground_leftovers(&solution.apply(&c.target));
        let term_set: BTreeSet<Term> =
            c.term_set.iter().map(|t| ground_leftovers(&solution.apply(t))).collect();
        if !derivable(&target, &term_set) {
            return Err(format!("target {target} not derivable from its term set"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
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

    #[test]
    fn projection_and_attacker_decryption() {
        let set: BTreeSet<Term> = [
            Term::penc(Term::seq(vec![Term::tag(3), nb()]), Term::pk(attacker())),
            a(),
        ]
        .into_iter()
        .collect();
        assert!(derivable(&nb(), &set));
        assert!(!derivable(&na(), &set));
    }

    #[test]
    fn symmetric_decryption_needs_the_key() {
        let k = Term::cst("k", Sort::Key);
        let set: BTreeSet<Term> = [Term::senc(nb(), k.clone())].into_iter().collect();
        assert!(!derivable(&nb(), &set));
        let set2: BTreeSet<Term> =
            [Term::senc(nb(), k.clone()), k.clone()].into_iter().collect();
        assert!(derivable(&nb(), &set2));
    }

    #[test]
    fn honest_encryptions_stay_closed() {
        let set: BTreeSet<Term> =
            [Term::penc(nb(), Term::pk(b())), Term::pk(b())].into_iter().collect();
        assert!(!derivable(&nb(), &set));
        // but the encryption itself can be rebuilt
        assert!(derivable(&Term::penc(nb(), Term::pk(b())), &set));
    }

    #[test]
    fn xor_combination_and_peeling() {
        let set: BTreeSet<Term> = [Term::xor(vec![na(), nb()]), nb()].into_iter().collect();
        assert!(derivable(&na(), &set));
        assert!(derivable(&Term::xor(vec![na(), nb()]), &set));
        assert!(derivable(&Term::Zero, &set));
        // na (+) b needs b as well
        assert!(!derivable(&Term::xor(vec![na(), b()]), &set));
        let set2: BTreeSet<Term> = set.into_iter().chain([b()]).collect();
        assert!(derivable(&Term::xor(vec![na(), b()]), &set2));
    }

    #[test]
    fn composed_summands_count() {
        // [4, na] (+) [5, b] from its parts
        let set: BTreeSet<Term> = [Term::tag(4), Term::tag(5), na(), b()].into_iter().collect();
        let goal = Term::xor(vec![
            Term::seq(vec![Term::tag(4), na()]),
            Term::seq(vec![Term::tag(5), b()]),
        ]);
        assert!(derivable(&goal, &set));
    }

    #[test]
    fn keys_are_not_computed() {
        let set: BTreeSet<Term> = [b()].into_iter().collect();
        assert!(!derivable(&Term::pk(b()), &set));
        assert!(!derivable(&Term::sh(a(), b()), &set));
    }

    #[test]
    fn validates_the_attack_solution_shape() {
        use crate::constraints::Constraint;
        // after the attack substitution, b's last reception is
        // {[3, nb]}_pk(eps) and the secret follows by decryption
        let cs = ConstraintSeq::new(vec![Constraint::new(
            nb(),
            [
                Term::penc(Term::seq(vec![Term::tag(3), nb()]), Term::pk(attacker())),
                a(),
            ],
        )]);
        assert!(validate_solution(&cs, &Substitution::new()).is_ok());
    }
}
