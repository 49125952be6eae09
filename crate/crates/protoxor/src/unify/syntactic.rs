//! Syntactic unification with occurs check.
//!
//! Two entry points share one engine:
//!
//! * [`unify_std`] solves problems that are pure in the standard theory
//!   (no xor, no unity) and is the solver the combination algorithm
//!   calls on its split problems;
//! * [`unify_free`] additionally decomposes canonical xor nodes
//!   positionally, treating xor as an uninterpreted constructor. The
//!   tagging checks quantify over syntactic unifiability of renamed
//!   copies, which is exactly this.
//!
//! Shared keys are kept in canonical argument order, but both argument
//! pairings still have to be tried: `sh(a, B) =? sh(b, A)` only unifies
//! through the crossed pairing. Unification is therefore finitary rather
//! than unitary, and the result is a complete set.

use crate::subst::Substitution;
use crate::term::Term;
use crate::unify::{UnificationProblem, UnifierSet, UnifyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum XorMode {
    /// Error out if an xor node or the unity shows up.
    Reject,
    /// Decompose xor positionally like a free constructor.
    Opaque,
}

/// Unification in the standard theory. Input must be std-pure; xor may
/// only appear abstracted away behind fresh variables.
pub fn unify_std(problem: &UnificationProblem) -> Result<UnifierSet, UnifyError> {
    solve_all(problem, XorMode::Reject)
}

/// Free-algebra unification over the whole signature, with xor and the
/// unity treated as uninterpreted syntax on canonical forms.
pub fn unify_free(problem: &UnificationProblem) -> UnifierSet {
    solve_all(problem, XorMode::Opaque).expect("opaque mode accepts every term")
}

fn solve_all(problem: &UnificationProblem, mode: XorMode) -> Result<UnifierSet, UnifyError> {
    let mut out = UnifierSet::new();
    let work: Vec<(Term, Term)> = problem.equations.clone();
    solve(work, Substitution::new(), mode, &mut out)?;
    Ok(out)
}

fn solve(
    mut work: Vec<(Term, Term)>,
    subst: Substitution,
    mode: XorMode,
    out: &mut UnifierSet,
) -> Result<(), UnifyError> {
    let (l, r) = match work.pop() {
        None => {
            out.insert(subst);
            return Ok(());
        }
        Some((l, r)) => (subst.apply(&l), subst.apply(&r)),
    };
    if mode == XorMode::Reject {
        for t in [&l, &r] {
            if matches!(t, Term::Xor(_) | Term::Zero) {
                return Err(UnifyError::ImpureProblem(format!(
                    "xor at the top level of a standard-theory equation: {t}"
                )));
            }
        }
    }
    match (&l, &r) {
        (a, b) if a == b => solve(work, subst, mode, out),
        (Term::Variable(v), t) | (t, Term::Variable(v)) => {
            if t.contains_var(v) {
                // occurs violation: this branch is dead
                return Ok(());
            }
            let subst = subst.bind(v.clone(), t.clone());
            solve(work, subst, mode, out)
        }
        (Term::Sequence(xs), Term::Sequence(ys)) if xs.len() == ys.len() => {
            work.extend(xs.iter().cloned().zip(ys.iter().cloned()));
            solve(work, subst, mode, out)
        }
        (Term::PEnc(p1, k1), Term::PEnc(p2, k2))
        | (Term::SEnc(p1, k1), Term::SEnc(p2, k2))
        | (Term::Sig(p1, k1), Term::Sig(p2, k2)) => {
            work.push((*p1.clone(), *p2.clone()));
            work.push((*k1.clone(), *k2.clone()));
            solve(work, subst, mode, out)
        }
        (Term::Pk(a), Term::Pk(b)) | (Term::Hash(a), Term::Hash(b)) => {
            work.push((*a.clone(), *b.clone()));
            solve(work, subst, mode, out)
        }
        (Term::Sh(a1, b1), Term::Sh(a2, b2)) => {
            // shared keys commute: try both argument pairings
            let mut straight = work.clone();
            straight.push((*a1.clone(), *a2.clone()));
            straight.push((*b1.clone(), *b2.clone()));
            solve(straight, subst.clone(), mode, out)?;
            let mut crossed = work;
            crossed.push((*a1.clone(), *b2.clone()));
            crossed.push((*b1.clone(), *a2.clone()));
            solve(crossed, subst, mode, out)
        }
        (Term::Xor(xs), Term::Xor(ys)) if mode == XorMode::Opaque && xs.len() == ys.len() => {
            work.extend(xs.iter().cloned().zip(ys.iter().cloned()));
            solve(work, subst, mode, out)
        }
        // constant clash, constructor clash, arity clash
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sort::Sort;
    use crate::term::Var;

    fn a() -> Term {
        Term::cst("a", Sort::Agent)
    }
    fn b() -> Term {
        Term::cst("b", Sort::Agent)
    }
    fn av(n: &str) -> Term {
        Term::var(n, Sort::Agent)
    }
    fn nv(n: &str) -> Term {
        Term::var(n, Sort::Nonce)
    }

    fn apply_both(s: &Substitution, p: &UnificationProblem) -> bool {
        p.equations.iter().all(|(l, r)| s.apply(l) == s.apply(r))
    }

    #[test]
    fn decomposes_positionally() {
        let lhs = Term::penc(
            Term::seq(vec![Term::tag(1), nv("NA"), av("A")]),
            Term::pk(av("B")),
        );
        let rhs = Term::penc(
            Term::seq(vec![Term::tag(1), Term::cst("na", Sort::Nonce), a()]),
            Term::pk(b()),
        );
        let p = UnificationProblem::single(lhs, rhs);
        let us = unify_std(&p).unwrap();
        assert_eq!(us.len(), 1);
        let s = us.first().unwrap();
        assert!(apply_both(s, &p));
        assert_eq!(s.get(&Var::new("A", Sort::Agent)), Some(&a()));
    }

    #[test]
    fn shared_key_pairings_are_both_tried() {
        // sh(a, B) =? sh(b, A) only unifies through the crossed pairing,
        // yielding {a/A, b/B}. Brute-force over the two-constant domain
        // confirms there is no other solution shape.
        let p = UnificationProblem::single(
            Term::sh(a(), av("B")),
            Term::sh(b(), av("A")),
        );
        let us = unify_std(&p).unwrap();
        assert_eq!(us.len(), 1);
        let s = us.first().unwrap();
        assert_eq!(s.get(&Var::new("A", Sort::Agent)), Some(&a()));
        assert_eq!(s.get(&Var::new("B", Sort::Agent)), Some(&b()));

        // exhaustive check over {a,b} x {a,b}
        for va in [a(), b()] {
            for vb in [a(), b()] {
                let g = Substitution::from_pairs([
                    (Var::new("A", Sort::Agent), va.clone()),
                    (Var::new("B", Sort::Agent), vb.clone()),
                ]);
                let solves = apply_both(&g, &p);
                let is_instance = us.iter().any(|u| {
                    g.apply(&Term::sh(a(), av("B"))) == g.apply(&u.apply(&Term::sh(a(), av("B"))))
                        && g.apply(&Term::sh(b(), av("A")))
                            == g.apply(&u.apply(&Term::sh(b(), av("A"))))
                });
                assert_eq!(solves, is_instance, "ground point A={va}, B={vb}");
            }
        }
    }

    #[test]
    fn constant_clash_is_not_unifiable() {
        let p = UnificationProblem::single(a(), b());
        assert!(unify_std(&p).unwrap().is_empty());
    }

    #[test]
    fn occurs_check_rejects_cyclic_binding() {
        let p = UnificationProblem::single(
            nv("X"),
            Term::seq(vec![Term::tag(1), nv("X")]),
        );
        assert!(unify_std(&p).unwrap().is_empty());
    }

    #[test]
    fn std_mode_rejects_xor() {
        let p = UnificationProblem::single(Term::xor(vec![a(), nv("X")]), b());
        assert!(matches!(unify_std(&p), Err(UnifyError::ImpureProblem(_))));
    }

    #[test]
    fn free_mode_decomposes_xor_positionally() {
        let p = UnificationProblem::single(
            Term::seq(vec![Term::tag(4), nv("NA")]),
            Term::seq(vec![Term::tag(5), av("B")]),
        );
        assert!(unify_free(&p).is_empty());

        let q = UnificationProblem::single(nv("NA"), av("B"));
        assert_eq!(unify_free(&q).len(), 1);
    }

    #[test]
    fn unifiers_are_sound() {
        let p = UnificationProblem::new(vec![
            (Term::hash(nv("X")), Term::hash(Term::cst("m", Sort::Nonce))),
            (Term::sig(av("A"), Term::pk(av("B"))), Term::sig(a(), Term::pk(b()))),
        ]);
        let us = unify_std(&p).unwrap();
        assert!(!us.is_empty());
        for u in &us {
            assert!(apply_both(u, &p));
        }
    }
}
