//! Attack search over semi-bundles: constraint sequences from node
//! interleavings, secrecy, type-flaw and multi-protocol checks.

use std::collections::{BTreeMap, BTreeSet};

use crate::constraints::{Constraint, ConstraintSeq};
use crate::protocol::{
    instantiate, FreshPool, Protocol, ProtocolError, SemiBundle, SessionPlan, Sign,
};
use crate::solver::{SolveBounds, Solver};
use crate::subst::Substitution;
use crate::term::{Cst, Term, Var};
use crate::unify::BscaConfig;

/// A total order over the bundle's nodes respecting each strand's
/// internal order, as (strand, node) index pairs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Interleaving {
    pub order: Vec<(usize, usize)>,
}

/// Strand shape used for symmetry reduction: two strands are
/// interchangeable when their node lists are equal after normalizing
/// strand-local names (index suffixes and fresh constants) away.
fn strand_shape(bundle: &SemiBundle, s: usize) -> Vec<(Sign, Term)> {
    let strand = &bundle.strands[s];
    let marker = format!("#{}", strand.index);
    let mut fresh_seen: BTreeMap<String, usize> = BTreeMap::new();
    strand
        .nodes
        .iter()
        .map(|n| {
            let renamed = n.term.rename_vars(&|v: &Var| {
                if let Some(base) = v.name.strip_suffix(&marker) {
                    Var::with_type(format!("{base}#local"), v.ty.clone())
                } else {
                    v.clone()
                }
            });
            let renamed = rename_fresh(&renamed, &bundle.fresh_cons, &mut fresh_seen);
            (n.sign, renamed)
        })
        .collect()
}

fn rename_fresh(
    t: &Term,
    fresh: &BTreeSet<Cst>,
    seen: &mut BTreeMap<String, usize>,
) -> Term {
    match t {
        Term::Constant(c) if fresh.contains(c) => {
            let next = seen.len();
            let id = *seen.entry(c.name.clone()).or_insert(next);
            Term::cst(format!("fresh{id}"), c.sort)
        }
        Term::Zero | Term::Constant(_) | Term::Variable(_) => t.clone(),
        Term::Sequence(es) => {
            Term::seq(es.iter().map(|e| rename_fresh(e, fresh, seen)).collect())
        }
        Term::PEnc(p, k) => {
            Term::penc(rename_fresh(p, fresh, seen), rename_fresh(k, fresh, seen))
        }
        Term::SEnc(p, k) => {
            Term::senc(rename_fresh(p, fresh, seen), rename_fresh(k, fresh, seen))
        }
        Term::Pk(a) => Term::pk(rename_fresh(a, fresh, seen)),
        Term::Sh(a, b) => Term::sh(rename_fresh(a, fresh, seen), rename_fresh(b, fresh, seen)),
        Term::Hash(b) => Term::hash(rename_fresh(b, fresh, seen)),
        Term::Sig(b, k) => {
            Term::sig(rename_fresh(b, fresh, seen), rename_fresh(k, fresh, seen))
        }
        Term::Xor(parts) => {
            Term::xor(parts.iter().map(|p| rename_fresh(p, fresh, seen)).collect())
        }
    }
}

/// All node interleavings of the bundle, reduced by strand symmetry:
/// among interchangeable strands, first moves happen in strand order.
pub fn interleavings(bundle: &SemiBundle) -> Vec<Interleaving> {
    let n = bundle.strands.len();
    let shapes: Vec<_> = (0..n).map(|s| strand_shape(bundle, s)).collect();
    // symmetry class of each strand: index of the first strand with the
    // same shape
    let class: Vec<usize> =
        (0..n).map(|s| (0..=s).find(|&t| shapes[t] == shapes[s]).unwrap()).collect();

    let mut out = Vec::new();
    let mut positions = vec![0usize; n];
    let mut current: Vec<(usize, usize)> = Vec::new();
    fn go(
        bundle: &SemiBundle,
        class: &[usize],
        positions: &mut Vec<usize>,
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<Interleaving>,
    ) {
        let n = bundle.strands.len();
        if (0..n).all(|s| positions[s] == bundle.strands[s].nodes.len()) {
            out.push(Interleaving { order: current.clone() });
            return;
        }
        for s in 0..n {
            if positions[s] >= bundle.strands[s].nodes.len() {
                continue;
            }
            // symmetry break: an unstarted strand may only start if every
            // earlier strand of its class has already started
            if positions[s] == 0 {
                let blocked = (0..s)
                    .any(|t| class[t] == class[s] && positions[t] == 0);
                if blocked {
                    continue;
                }
            }
            current.push((s, positions[s]));
            positions[s] += 1;
            go(bundle, class, positions, current, out);
            positions[s] -= 1;
            current.pop();
        }
    }
    go(bundle, &class, &mut positions, &mut current, &mut out);
    out
}

/// Builds the constraint sequence of one interleaving: every receive
/// node becomes a constraint whose term set is the initial knowledge
/// plus everything sent earlier.
pub fn sequence_of(bundle: &SemiBundle, il: &Interleaving) -> ConstraintSeq {
    let mut knowledge: BTreeSet<Term> = bundle.iik.clone();
    let mut constraints = Vec::new();
    for &(s, j) in &il.order {
        let node = &bundle.strands[s].nodes[j];
        match node.sign {
            Sign::Plus => {
                knowledge.insert(node.term.clone());
            }
            Sign::Minus => {
                constraints
                    .push(Constraint { target: node.term.clone(), term_set: knowledge.clone() });
            }
        }
    }
    ConstraintSeq::new(constraints)
}

/// All distinct constraint sequences of the bundle, each with a witness
/// interleaving. Interleavings that produce the same sequence collapse.
pub fn sequences_from(bundle: &SemiBundle) -> Vec<(Interleaving, ConstraintSeq)> {
    let mut seen: BTreeSet<Vec<Constraint>> = BTreeSet::new();
    let mut out = Vec::new();
    for il in interleavings(bundle) {
        let cs = sequence_of(bundle, &il);
        if seen.insert(cs.constraints.clone()) {
            out.push((il, cs));
        }
    }
    out
}

/// Term set for an artificial secrecy constraint: the term set of the
/// last constraint, or, for sequences with no receive nodes, the initial
/// knowledge plus everything sent.
fn secrecy_term_set(bundle: &SemiBundle, cs: &ConstraintSeq) -> BTreeSet<Term> {
    match cs.constraints.last() {
        Some(c) => c.term_set.clone(),
        None => {
            let mut set = bundle.iik.clone();
            for s in &bundle.strands {
                for n in &s.nodes {
                    if n.sign == Sign::Plus {
                        set.insert(n.term.clone());
                    }
                }
            }
            set
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    Secrecy,
    TypeFlaw,
    MultiProtocol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The property holds within the bounds, with nothing truncated.
    Holds,
    /// A definite attack was found.
    Violated,
    /// A bound was hit before the answer was decided.
    Indeterminate,
}

/// One analyzed sequence with its complete (within bounds) solution set.
#[derive(Debug, Clone)]
pub struct Finding {
    /// The tested secret, when the sequence is secrecy-augmented.
    pub secret: Option<Cst>,
    pub interleaving: Interleaving,
    pub sequence: ConstraintSeq,
    pub solutions: BTreeSet<Substitution>,
    pub well_typed: BTreeSet<Substitution>,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct AttackReport {
    pub kind: AttackKind,
    pub protocol: String,
    pub bundle: SemiBundle,
    pub verdict: Verdict,
    /// Sequences with at least one solution (secrecy/multi) or analyzed
    /// for the type-flaw condition.
    pub findings: Vec<Finding>,
    pub truncated: bool,
}

impl AttackReport {
    /// Findings that decide the verdict.
    pub fn decisive(&self) -> Vec<&Finding> {
        match self.kind {
            AttackKind::Secrecy | AttackKind::MultiProtocol => {
                self.findings.iter().filter(|f| !f.solutions.is_empty()).collect()
            }
            AttackKind::TypeFlaw => self
                .findings
                .iter()
                .filter(|f| {
                    !f.solutions.is_empty() && f.well_typed.is_empty() && !f.truncated
                })
                .collect(),
        }
    }
}

fn solve_augmented(
    solver: &mut Solver,
    bundle: &SemiBundle,
    il: &Interleaving,
    cs: &ConstraintSeq,
    secret: &Cst,
) -> Finding {
    let mut augmented = cs.clone();
    augmented.constraints.push(Constraint {
        target: Term::Constant(secret.clone()),
        term_set: secrecy_term_set(bundle, cs),
    });
    let outcome = solver.solve(&augmented);
    let well_typed =
        outcome.solutions.iter().filter(|s| s.is_well_typed()).cloned().collect();
    Finding {
        secret: Some(secret.clone()),
        interleaving: il.clone(),
        sequence: augmented,
        solutions: outcome.solutions,
        well_typed,
        truncated: outcome.truncated,
    }
}

/// Secrecy over an already-instantiated bundle, for the given secrets.
pub fn secrecy_over_bundle(
    bundle: &SemiBundle,
    secrets: &BTreeSet<Cst>,
    bounds: SolveBounds,
    bsca: BscaConfig,
) -> AttackReport {
    let mut solver = Solver::new(bounds, bsca);
    let mut findings = Vec::new();
    let mut truncated = false;
    for (il, cs) in sequences_from(bundle) {
        for secret in secrets {
            let f = solve_augmented(&mut solver, bundle, &il, &cs, secret);
            truncated |= f.truncated;
            if !f.solutions.is_empty() || f.truncated {
                findings.push(f);
            }
        }
    }
    let violated = findings.iter().any(|f| !f.solutions.is_empty());
    let verdict = if violated {
        Verdict::Violated
    } else if truncated {
        Verdict::Indeterminate
    } else {
        Verdict::Holds
    };
    AttackReport {
        kind: AttackKind::Secrecy,
        protocol: bundle.protocol.clone(),
        bundle: bundle.clone(),
        verdict,
        findings,
        truncated,
    }
}

/// Secrecy check: instantiates the plan and tests every secret constant
/// of the bundle against every sequence.
pub fn check_secrecy(
    p: &Protocol,
    plan: &SessionPlan,
    bounds: SolveBounds,
    bsca: BscaConfig,
) -> Result<AttackReport, ProtocolError> {
    let mut pool = FreshPool::new();
    let bundle = instantiate(p, plan, &mut pool)?;
    Ok(secrecy_over_bundle(&bundle, &bundle.sec_cons.clone(), bounds, bsca))
}

/// Type-flaw check: looks for a sequence (base or secrecy-augmented)
/// whose complete solution set is nonempty yet contains no well-typed
/// substitution. Any truncation on a candidate downgrades the verdict
/// to indeterminate, because the negative clause quantifies over the
/// whole solution set.
pub fn check_type_flaw(
    p: &Protocol,
    plan: &SessionPlan,
    bounds: SolveBounds,
    bsca: BscaConfig,
) -> Result<AttackReport, ProtocolError> {
    let mut pool = FreshPool::new();
    let bundle = instantiate(p, plan, &mut pool)?;
    let mut solver = Solver::new(bounds, bsca);
    let mut findings = Vec::new();
    let mut truncated = false;

    for (il, cs) in sequences_from(&bundle) {
        // the base sequence itself
        let outcome = solver.solve(&cs);
        truncated |= outcome.truncated;
        let well_typed =
            outcome.solutions.iter().filter(|s| s.is_well_typed()).cloned().collect();
        let f = Finding {
            secret: None,
            interleaving: il.clone(),
            sequence: cs.clone(),
            solutions: outcome.solutions,
            well_typed,
            truncated: outcome.truncated,
        };
        if !f.solutions.is_empty() || f.truncated {
            findings.push(f);
        }
        // and each secrecy-augmented variant
        for secret in &bundle.sec_cons {
            let f = solve_augmented(&mut solver, &bundle, &il, &cs, secret);
            truncated |= f.truncated;
            if !f.solutions.is_empty() || f.truncated {
                findings.push(f);
            }
        }
    }

    let attack = findings
        .iter()
        .any(|f| !f.solutions.is_empty() && f.well_typed.is_empty() && !f.truncated);
    let verdict = if attack {
        Verdict::Violated
    } else if truncated {
        Verdict::Indeterminate
    } else {
        Verdict::Holds
    };
    Ok(AttackReport {
        kind: AttackKind::TypeFlaw,
        protocol: p.name.clone(),
        bundle,
        verdict,
        findings,
        truncated,
    })
}

#[derive(Debug, Clone)]
pub struct MultiProtocolReport {
    pub isolation: AttackReport,
    pub combination: AttackReport,
    pub verdict: Verdict,
}

/// Multi-protocol check: the first protocol's secrets are tested in
/// isolation and in combination with the second protocol's bundle,
/// under one shared fresh pool. An attack exists when the combination
/// violates secrecy while isolation does not.
pub fn check_multi_protocol(
    p1: &Protocol,
    p2: &Protocol,
    plan1: &SessionPlan,
    plan2: &SessionPlan,
    bounds: SolveBounds,
    bsca: BscaConfig,
) -> Result<MultiProtocolReport, ProtocolError> {
    let mut pool = FreshPool::new();
    let bundle1 = instantiate(p1, plan1, &mut pool)?;
    let bundle2 = instantiate(p2, plan2, &mut pool)?;
    debug_assert!(bundle1.fresh_cons.is_disjoint(&bundle2.fresh_cons));
    let secrets = bundle1.sec_cons.clone();

    let isolation = secrecy_over_bundle(&bundle1, &secrets, bounds, bsca);
    let combined = bundle1.union(bundle2);
    let mut combination = secrecy_over_bundle(&combined, &secrets, bounds, bsca);
    combination.kind = AttackKind::MultiProtocol;

    let verdict = match (combination.verdict, isolation.verdict) {
        (Verdict::Violated, Verdict::Holds) => Verdict::Violated,
        (Verdict::Indeterminate, _) | (_, Verdict::Indeterminate) => Verdict::Indeterminate,
        _ => Verdict::Holds,
    };
    Ok(MultiProtocolReport { isolation, combination, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{check_assumptions, Message, StrandPlan};
    use crate::sort::Sort;
    use std::collections::BTreeMap;

    fn nsl(tagged: bool) -> Protocol {
        let a = Term::var("A", Sort::Agent);
        let b = Term::var("B", Sort::Agent);
        let na = Term::var("NA", Sort::Nonce);
        let nb = Term::var("NB", Sort::Nonce);
        let middle = if tagged {
            Term::xor(vec![
                Term::seq(vec![Term::tag(4), na.clone()]),
                Term::seq(vec![Term::tag(5), b.clone()]),
            ])
        } else {
            Term::xor(vec![na.clone(), b.clone()])
        };
        let m1 = Term::penc(
            Term::seq(vec![Term::tag(1), na.clone(), a.clone()]),
            Term::pk(b.clone()),
        );
        let m2 = Term::penc(
            Term::seq(vec![Term::tag(2), middle, nb.clone()]),
            Term::pk(a.clone()),
        );
        let m3 = Term::penc(Term::seq(vec![Term::tag(3), nb]), Term::pk(b));
        let msgs = vec![
            Message { index: 1, sender: "A".into(), receiver: "B".into(), term: m1 },
            Message { index: 2, sender: "B".into(), receiver: "A".into(), term: m2 },
            Message { index: 3, sender: "A".into(), receiver: "B".into(), term: m3 },
        ];
        let fresh: BTreeSet<Var> =
            [Var::new("NA", Sort::Nonce), Var::new("NB", Sort::Nonce)].into_iter().collect();
        Protocol::from_script(if tagged { "nsl_tagged" } else { "nsl_xor" }, msgs, fresh.clone(), fresh)
            .unwrap()
    }

    /// One initiator strand talking to an unconstrained peer, one
    /// responder strand answering `a`.
    fn golden_plan() -> SessionPlan {
        vec![
            StrandPlan {
                role: "A".into(),
                bindings: [("A".to_string(), Cst::new("a", Sort::Agent))].into_iter().collect(),
            },
            StrandPlan {
                role: "B".into(),
                bindings: [
                    ("A".to_string(), Cst::new("a", Sort::Agent)),
                    ("B".to_string(), Cst::new("b", Sort::Agent)),
                ]
                .into_iter()
                .collect(),
            },
        ]
    }

    #[test]
    fn interleaving_count_is_binomial_before_symmetry() {
        // two distinct strands of two receive nodes each
        let p = {
            let msgs = vec![
                Message {
                    index: 1,
                    sender: "A".into(),
                    receiver: "B".into(),
                    term: Term::var("X", Sort::Nonce),
                },
                Message {
                    index: 2,
                    sender: "A".into(),
                    receiver: "C".into(),
                    term: Term::var("Y", Sort::Nonce),
                },
                Message {
                    index: 3,
                    sender: "A".into(),
                    receiver: "B".into(),
                    term: Term::var("Z", Sort::Nonce),
                },
                Message {
                    index: 4,
                    sender: "A".into(),
                    receiver: "C".into(),
                    term: Term::var("W", Sort::Nonce),
                },
            ];
            Protocol::from_script("two", msgs, BTreeSet::new(), BTreeSet::new()).unwrap()
        };
        let plan: SessionPlan = vec![
            StrandPlan { role: "B".into(), bindings: BTreeMap::new() },
            StrandPlan { role: "C".into(), bindings: BTreeMap::new() },
        ];
        let mut pool = FreshPool::new();
        let bundle = instantiate(&p, &plan, &mut pool).unwrap();
        // strands differ (different variables), so no symmetry collapse
        assert_eq!(interleavings(&bundle).len(), 6); // C(4,2)
    }

    #[test]
    fn symmetric_strands_are_emitted_once() {
        let p = nsl(false);
        let plan: SessionPlan = vec![
            StrandPlan {
                role: "A".into(),
                bindings: [("A".to_string(), Cst::new("a", Sort::Agent))].into_iter().collect(),
            },
            StrandPlan {
                role: "A".into(),
                bindings: [("A".to_string(), Cst::new("a", Sort::Agent))].into_iter().collect(),
            },
        ];
        let mut pool = FreshPool::new();
        let bundle = instantiate(&p, &plan, &mut pool).unwrap();
        let count = interleavings(&bundle).len();
        // interchangeable strands: half of the unreduced interleavings
        let unreduced = binomial(6, 3) * 1; // positions of strand 1's nodes among 6
        assert_eq!(count, unreduced / 2);
    }

    fn binomial(n: usize, k: usize) -> usize {
        (1..=k).fold(1, |acc, i| acc * (n - k + i) / i)
    }

    #[test]
    fn sends_only_bundle_has_the_empty_sequence() {
        let msgs = vec![Message {
            index: 1,
            sender: "A".into(),
            receiver: "B".into(),
            term: Term::cst("m", Sort::Text),
        }];
        let p = Protocol::from_script("send", msgs, BTreeSet::new(), BTreeSet::new()).unwrap();
        let plan: SessionPlan = vec![StrandPlan { role: "A".into(), bindings: BTreeMap::new() }];
        let mut pool = FreshPool::new();
        let bundle = instantiate(&p, &plan, &mut pool).unwrap();
        let seqs = sequences_from(&bundle);
        assert_eq!(seqs.len(), 1);
        assert!(seqs[0].1.constraints.is_empty());
    }

    #[test]
    fn alternating_interleaving_matches_the_handshake_shape() {
        let p = nsl(false);
        let plan = golden_plan();
        let mut pool = FreshPool::new();
        let bundle = instantiate(&p, &plan, &mut pool).unwrap();
        let seqs = sequences_from(&bundle);
        // the alternating interleaving: +a1 -b1 +b2 -a2 +a3 -b3
        let target = seqs.iter().find(|(il, _)| {
            il.order == vec![(0, 0), (1, 0), (1, 1), (0, 1), (0, 2), (1, 2)]
        });
        let (_, cs) = target.expect("alternating interleaving present");
        assert_eq!(cs.constraints.len(), 3);
        // first constraint: b's reception against a's first send + iik
        assert!(cs.constraints[0]
            .term_set
            .iter()
            .any(|t| matches!(t, Term::PEnc(..))));
        // monotone term sets
        for w in cs.constraints.windows(2) {
            assert!(w[0].term_set.is_subset(&w[1].term_set));
        }
    }

    #[test]
    fn untagged_nsl_secrecy_is_violated_with_the_known_substitution() {
        let p = nsl(false);
        let report =
            check_secrecy(&p, &golden_plan(), SolveBounds::default(), BscaConfig::default())
                .unwrap();
        assert_eq!(report.verdict, Verdict::Violated);
        // the violation on b's nonce carries the ill-typed substitution
        // {na (+) b (+) eps / NA, eps / B, nb / NB} up to strand renaming
        let eps = crate::term::attacker();
        let expected_na = Term::xor(vec![
            Term::cst("na1", Sort::Nonce),
            Term::cst("b", Sort::Agent),
            eps.clone(),
        ]);
        let found = report.findings.iter().any(|f| {
            f.secret.as_ref().map(|c| c.name.starts_with("nb")) == Some(true)
                && f.solutions.iter().any(|s| {
                    s.get(&Var::new("NA#2", Sort::Nonce)) == Some(&expected_na)
                        && s.get(&Var::new("B#1", Sort::Agent)) == Some(&eps)
                        && s.get(&Var::new("NB#1", Sort::Nonce))
                            == Some(&Term::cst("nb2", Sort::Nonce))
                })
        });
        assert!(found, "expected substitution not found: {:#?}", report.findings.iter().map(|f| (&f.secret, &f.solutions)).collect::<Vec<_>>());
    }

    #[test]
    fn untagged_nsl_has_a_type_flaw_attack() {
        let p = nsl(false);
        let report =
            check_type_flaw(&p, &golden_plan(), SolveBounds::default(), BscaConfig::default())
                .unwrap();
        assert_eq!(report.verdict, Verdict::Violated);
        assert!(!report.decisive().is_empty());
    }

    #[test]
    fn tagged_nsl_holds_for_both_properties() {
        let p = nsl(true);
        let secrecy =
            check_secrecy(&p, &golden_plan(), SolveBounds::default(), BscaConfig::default())
                .unwrap();
        assert_eq!(secrecy.verdict, Verdict::Holds, "findings: {:?}", secrecy.findings.len());
        let tf =
            check_type_flaw(&p, &golden_plan(), SolveBounds::default(), BscaConfig::default())
                .unwrap();
        assert_eq!(tf.verdict, Verdict::Holds);
    }

    #[test]
    fn findings_are_replayable() {
        let p = nsl(false);
        let report =
            check_secrecy(&p, &golden_plan(), SolveBounds::default(), BscaConfig::default())
                .unwrap();
        let mut solver = Solver::new(SolveBounds::default(), BscaConfig::default());
        for f in report.findings.iter().filter(|f| !f.solutions.is_empty()) {
            let replay = solver.solve(&f.sequence);
            assert_eq!(replay.solutions, f.solutions);
        }
    }

    fn ltk_pair() -> (Protocol, Protocol) {
        // victim: 1. A -> B : {|[1, NA]|}_sh(A, S)
        let a = Term::var("A", Sort::Agent);
        let s = Term::var("S", Sort::Agent);
        let na = Term::var("NA", Sort::Nonce);
        let victim_msg = Message {
            index: 1,
            sender: "A".into(),
            receiver: "B".into(),
            term: Term::senc(
                Term::seq(vec![Term::tag(1), na]),
                Term::sh(a.clone(), s.clone()),
            ),
        };
        let fresh: BTreeSet<Var> = [Var::new("NA", Sort::Nonce)].into_iter().collect();
        let victim =
            Protocol::from_script("victim", vec![victim_msg], fresh.clone(), fresh).unwrap();
        // leaker: 1. A -> S : sh(A, S)
        let leak_msg = Message {
            index: 1,
            sender: "A".into(),
            receiver: "S".into(),
            term: Term::sh(a, s),
        };
        let leaker =
            Protocol::from_script("leaker", vec![leak_msg], BTreeSet::new(), BTreeSet::new())
                .unwrap();
        (victim, leaker)
    }

    #[test]
    fn shared_key_leak_is_a_multi_protocol_attack() {
        let (victim, leaker) = ltk_pair();
        // the leaking protocol violates the readable-key assumption
        assert!(!check_assumptions(&leaker).all_pass());
        let bind = |pairs: &[(&str, &str)]| -> BTreeMap<String, Cst> {
            pairs
                .iter()
                .map(|(v, c)| ((*v).to_string(), Cst::new(*c, Sort::Agent)))
                .collect()
        };
        let plan1: SessionPlan = vec![StrandPlan {
            role: "A".into(),
            bindings: bind(&[("A", "a"), ("S", "s")]),
        }];
        let plan2: SessionPlan = vec![StrandPlan {
            role: "A".into(),
            bindings: bind(&[("A", "a"), ("S", "s")]),
        }];
        let report = check_multi_protocol(
            &victim,
            &leaker,
            &plan1,
            &plan2,
            SolveBounds::default(),
            BscaConfig::default(),
        )
        .unwrap();
        assert_eq!(report.isolation.verdict, Verdict::Holds);
        assert_eq!(report.combination.verdict, Verdict::Violated);
        assert_eq!(report.verdict, Verdict::Violated);
    }

    #[test]
    fn no_send_partner_changes_nothing() {
        let (victim, _) = ltk_pair();
        // a partner protocol with only receive nodes contributes nothing
        let recv_only = Protocol::from_script(
            "listener",
            vec![Message {
                index: 1,
                sender: "X".into(),
                receiver: "Y".into(),
                term: Term::var("M", Sort::Text),
            }],
            BTreeSet::new(),
            BTreeSet::new(),
        )
        .unwrap();
        let plan1: SessionPlan = vec![StrandPlan {
            role: "A".into(),
            bindings: [
                ("A".to_string(), Cst::new("a", Sort::Agent)),
                ("S".to_string(), Cst::new("s", Sort::Agent)),
            ]
            .into_iter()
            .collect(),
        }];
        let plan2: SessionPlan =
            vec![StrandPlan { role: "Y".into(), bindings: BTreeMap::new() }];
        let report = check_multi_protocol(
            &victim,
            &recv_only,
            &plan1,
            &plan2,
            SolveBounds::default(),
            BscaConfig::default(),
        )
        .unwrap();
        assert_eq!(report.verdict, Verdict::Holds);
    }
}
