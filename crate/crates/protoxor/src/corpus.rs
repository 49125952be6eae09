//! Seeded random generators for the property suites: small mixed
//! unification problems with brute-force ground checking, well-typed
//! instance pairs, and little two-party protocols for the tagging
//! experiments.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::protocol::{Message, Protocol, SessionPlan, StrandPlan};
use crate::sort::Sort;
use crate::subst::Substitution;
use crate::term::{Cst, Term, Var};
use crate::unify::UnificationProblem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn const_atoms() -> Vec<Term> {
    vec![
        Term::cst("a", Sort::Nonce),
        Term::cst("b", Sort::Nonce),
        Term::cst("c", Sort::Nonce),
    ]
}

fn var_atoms(n: usize) -> Vec<Term> {
    ["X", "Y", "Z"].iter().take(n).map(|v| Term::var(*v, Sort::Nonce)).collect()
}

/// A random atom, compound element, or small xor over them.
fn random_side(rng: &mut ChaCha8Rng, vars: &[Term], depth: usize) -> Term {
    let consts = const_atoms();
    let atom = |rng: &mut ChaCha8Rng| -> Term {
        if !vars.is_empty() && rng.gen_bool(0.45) {
            vars.choose(rng).unwrap().clone()
        } else if rng.gen_bool(0.08) {
            Term::Zero
        } else {
            consts.choose(rng).unwrap().clone()
        }
    };
    let element = |rng: &mut ChaCha8Rng| -> Term {
        match rng.gen_range(0..5) {
            0 => Term::seq(vec![Term::tag(rng.gen_range(1..3)), atom(rng)]),
            1 => Term::penc(atom(rng), consts[0].clone()),
            2 => Term::hash(atom(rng)),
            _ => atom(rng),
        }
    };
    match rng.gen_range(0..4) {
        0 if depth > 0 => {
            let n = rng.gen_range(2..=3);
            Term::xor((0..n).map(|_| element(rng)).collect())
        }
        1 if depth > 0 => Term::seq(vec![element(rng), element(rng)]),
        2 if depth > 0 => Term::penc(random_side(rng, vars, depth - 1), consts[1].clone()),
        _ => element(rng),
    }
}

/// A random mixed-theory problem with at most `max_vars` variables.
/// Regenerates until the ground universe stays small enough for
/// exhaustive checking.
pub fn random_mixed_problem(rng: &mut ChaCha8Rng, max_vars: usize) -> UnificationProblem {
    loop {
        let nvars = rng.gen_range(1..=max_vars);
        let vars = var_atoms(nvars);
        let n_eqs = if rng.gen_bool(0.3) { 2 } else { 1 };
        let eqs: Vec<(Term, Term)> = (0..n_eqs)
            .map(|_| (random_side(rng, &vars, 1), random_side(rng, &vars, 1)))
            .collect();
        let p = UnificationProblem::new(eqs);
        let gens = universe_generators(&p);
        let limit = if p.vars().len() >= 3 { 3 } else { 4 };
        if gens.len() <= limit {
            return p;
        }
    }
}

/// Generators of the ground universe: the problem's constants plus its
/// ground compound subterms.
fn universe_generators(p: &UnificationProblem) -> Vec<Term> {
    let mut gens: BTreeSet<Term> = p
        .constants()
        .into_iter()
        .map(Term::Constant)
        .collect();
    for (l, r) in &p.equations {
        for t in l.subterms().into_iter().chain(r.subterms()) {
            if !t.is_atom() && t.vars().is_empty() && !matches!(t, Term::Xor(_)) {
                gens.insert(t);
            }
        }
    }
    gens.into_iter().collect()
}

/// The full xor span of the universe generators, including zero.
pub fn ground_universe(p: &UnificationProblem) -> Vec<Term> {
    let gens = universe_generators(p);
    (0u32..(1 << gens.len()))
        .map(|mask| {
            Term::xor(
                gens.iter()
                    .enumerate()
                    .filter(|(i, _)| mask & (1 << i) != 0)
                    .map(|(_, t)| t.clone())
                    .collect(),
            )
        })
        .collect()
}

/// Every ground substitution over the universe that solves the problem.
pub fn ground_solutions(p: &UnificationProblem, universe: &[Term]) -> Vec<Substitution> {
    let vars: Vec<Var> = p.vars().into_iter().collect();
    let total = universe.len().pow(vars.len() as u32);
    let mut out = Vec::new();
    for mut idx in 0..total {
        let mut picks = Vec::with_capacity(vars.len());
        for _ in 0..vars.len() {
            picks.push(universe[idx % universe.len()].clone());
            idx /= universe.len();
        }
        let g = Substitution::from_pairs(vars.iter().cloned().zip(picks));
        if p.equations.iter().all(|(l, r)| g.apply(l) == g.apply(r)) {
            out.push(g);
        }
    }
    out
}

/// The set of ground instances (as value tuples over `vars`) one
/// unifier generates when its parameters range over the universe.
pub fn instance_tuples(
    unifier: &Substitution,
    vars: &[Var],
    universe: &[Term],
) -> HashSet<Vec<Term>> {
    let mut params: BTreeSet<Var> = BTreeSet::new();
    for x in vars {
        params.extend(unifier.apply(&Term::Variable(x.clone())).vars());
    }
    let params: Vec<Var> = params.into_iter().collect();
    let total = universe.len().pow(params.len() as u32);
    let mut out = HashSet::new();
    for mut idx in 0..total {
        let mut picks = Vec::with_capacity(params.len());
        for _ in 0..params.len() {
            picks.push(universe[idx % universe.len()].clone());
            idx /= universe.len();
        }
        let gamma = Substitution::from_pairs(params.iter().cloned().zip(picks));
        let tuple: Vec<Term> = vars
            .iter()
            .map(|x| gamma.apply(&unifier.apply(&Term::Variable(x.clone()))))
            .collect();
        out.insert(tuple);
    }
    out
}

/// A random standard-theory pattern (no xor) over typed variables.
pub fn random_std_pattern(rng: &mut ChaCha8Rng) -> Term {
    let vars = [
        Term::var("P", Sort::Agent),
        Term::var("Q", Sort::Agent),
        Term::var("R", Sort::Nonce),
        Term::var("S", Sort::Nonce),
    ];
    let leaf = |rng: &mut ChaCha8Rng| -> Term {
        if rng.gen_bool(0.7) {
            vars.choose(rng).unwrap().clone()
        } else {
            Term::tag(rng.gen_range(1..4))
        }
    };
    let inner = |rng: &mut ChaCha8Rng| -> Term {
        match rng.gen_range(0..4) {
            0 => Term::seq(vec![leaf(rng), leaf(rng)]),
            1 => Term::hash(leaf(rng)),
            2 => Term::pk(Term::var("P", Sort::Agent)),
            _ => leaf(rng),
        }
    };
    match rng.gen_range(0..4) {
        0 => Term::penc(Term::seq(vec![inner(rng), inner(rng)]), Term::pk(Term::var("Q", Sort::Agent))),
        1 => Term::senc(inner(rng), Term::sh(Term::var("P", Sort::Agent), Term::var("Q", Sort::Agent))),
        2 => Term::seq(vec![inner(rng), inner(rng), inner(rng)]),
        _ => Term::hash(Term::seq(vec![inner(rng), inner(rng)])),
    }
}

/// A random well-typed substitution on the pattern's variables, mapping
/// every variable to an atom of its own sort (or leaving it alone).
pub fn random_well_typed_subst(rng: &mut ChaCha8Rng, t: &Term, salt: &str) -> Substitution {
    let mut pairs = Vec::new();
    for v in t.vars() {
        match rng.gen_range(0..3) {
            0 => {}
            1 => {
                let sort = match &v.ty {
                    crate::sort::TypeExpr::Atomic(s) => *s,
                    _ => Sort::Text,
                };
                pairs.push((
                    v.clone(),
                    Term::cst(format!("{}{salt}{}", sort.name(), rng.gen_range(0..3)), sort),
                ));
            }
            _ => {
                pairs.push((
                    v.clone(),
                    Term::Variable(Var::with_type(format!("{}{salt}", v.name), v.ty.clone())),
                ));
            }
        }
    }
    Substitution::from_pairs(pairs)
}

/// A small random two-party protocol: one to three messages over agent
/// variables A and B, each an encryption of a short sequence, with a
/// coin-flipped xor inside. Nonces originated by a sender are declared
/// fresh and secret.
pub fn random_protocol(rng: &mut ChaCha8Rng, name: &str) -> Protocol {
    let a = Term::var("A", Sort::Agent);
    let b = Term::var("B", Sort::Agent);
    let nonces = [Term::var("NA", Sort::Nonce), Term::var("NB", Sort::Nonce)];
    let n_msgs = rng.gen_range(1..=3);
    let mut messages = Vec::new();
    let mut used_nonces: BTreeSet<Var> = BTreeSet::new();
    for i in 0..n_msgs {
        let (sender, receiver) = if i % 2 == 0 { ("A", "B") } else { ("B", "A") };
        let my_nonce = &nonces[i % 2];
        if let Term::Variable(v) = my_nonce {
            used_nonces.insert(v.clone());
        }
        let mut parts: Vec<Term> = vec![my_nonce.clone()];
        if rng.gen_bool(0.5) {
            parts.push(if i % 2 == 0 { a.clone() } else { b.clone() });
        }
        if rng.gen_bool(0.7) {
            // an xor of the nonce with an agent or the peer nonce
            let other = if rng.gen_bool(0.5) {
                if i % 2 == 0 {
                    b.clone()
                } else {
                    a.clone()
                }
            } else {
                nonces[(i + 1) % 2].clone()
            };
            if let Term::Variable(v) = &other {
                if v.ty == crate::sort::TypeExpr::Atomic(Sort::Nonce) {
                    used_nonces.insert(v.clone());
                }
            }
            parts.push(Term::xor(vec![my_nonce.clone(), other]));
        }
        let key_owner = if i % 2 == 0 { b.clone() } else { a.clone() };
        let term = if rng.gen_bool(0.75) {
            Term::penc(Term::seq(parts), Term::pk(key_owner))
        } else {
            Term::senc(Term::seq(parts), Term::sh(a.clone(), b.clone()))
        };
        messages.push(Message {
            index: i + 1,
            sender: sender.into(),
            receiver: receiver.into(),
            term,
        });
    }
    // a nonce is fresh (and secret) when some role originates it
    let p = Protocol::from_script(name, messages.clone(), BTreeSet::new(), BTreeSet::new())
        .unwrap();
    let fresh: BTreeSet<Var> = used_nonces
        .iter()
        .filter(|v| p.roles.iter().any(|r| crate::protocol::originates(r, v)))
        .cloned()
        .collect();
    Protocol::from_script(name, messages, fresh.clone(), fresh).unwrap()
}

/// The session plan the experiments run: the initiator role binds only
/// its own name (its peer stays symbolic), every other role is pinned to
/// an honest session.
pub fn experiment_plan(p: &Protocol) -> SessionPlan {
    let agent_vars: Vec<Var> = p
        .vars()
        .into_iter()
        .filter(|v| v.ty == crate::sort::TypeExpr::Atomic(Sort::Agent))
        .collect();
    p.roles
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut bindings: BTreeMap<String, Cst> = BTreeMap::new();
            if i == 0 {
                bindings.insert(
                    r.name.clone(),
                    Cst::new(r.name.to_lowercase(), Sort::Agent),
                );
            } else {
                for v in &agent_vars {
                    bindings
                        .insert(v.name.clone(), Cst::new(v.name.to_lowercase(), Sort::Agent));
                }
            }
            StrandPlan { role: r.name.clone(), bindings }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nut::{check_nut, insert_tags, TagScheme};

    #[test]
    fn generation_is_deterministic() {
        let mk = |seed| {
            let mut r = rng(seed);
            (0..5).map(|i| random_protocol(&mut r, &format!("p{i}"))).collect::<Vec<_>>()
        };
        assert_eq!(mk(7), mk(7));
        assert_ne!(mk(7), mk(8));
    }

    #[test]
    fn tagged_random_protocols_satisfy_the_discipline() {
        let mut r = rng(11);
        for i in 0..20 {
            let p = random_protocol(&mut r, &format!("p{i}"));
            let tagged = insert_tags(&p, TagScheme::ComponentNumbers);
            assert!(check_nut(&tagged).passes(), "protocol {i} failed after tagging");
        }
    }

    #[test]
    fn ground_universe_is_small_and_closed_under_xor() {
        let mut r = rng(3);
        for _ in 0..50 {
            let p = random_mixed_problem(&mut r, 3);
            let u = ground_universe(&p);
            assert!(u.len() <= 16, "universe too large: {}", u.len());
            for x in &u {
                for y in &u {
                    let c = Term::xor(vec![x.clone(), y.clone()]);
                    assert!(u.contains(&c));
                }
            }
        }
    }
}
