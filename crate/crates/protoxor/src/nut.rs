//! Static non-unifiability checks on encrypted components, and the tag
//! inserting transformer that establishes them.
//!
//! "Unifiable under some pair of instantiations" is decided by unifying
//! variable-disjoint renamings: two terms have a common instance exactly
//! when their renamed-apart copies unify syntactically.

use std::collections::BTreeMap;
use std::fmt;

use crate::protocol::{Message, Protocol};
use crate::subst::Substitution;
use crate::term::{Cst, Term, Var};
use crate::unify::{unify_free, UnificationProblem};
use crate::sort::Sort;

/// The individual conditions a report can speak about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NutCondition {
    /// No encrypted component unifies with any other non-variable
    /// subterm of the same protocol.
    EncVsSubterm,
    /// No asymmetric encryption key is a free variable.
    KeyNotVariable,
    /// Distinct summands of an xor subterm never unify.
    XorSummands,
    /// No encrypted component of one protocol unifies with one of the
    /// other.
    CrossEnc,
    /// Non-xor summands of xor subterms never unify across protocols.
    CrossXorSummands,
}

impl fmt::Display for NutCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            NutCondition::EncVsSubterm => "encryption-vs-subterm",
            NutCondition::KeyNotVariable => "key-not-variable",
            NutCondition::XorSummands => "xor-summands",
            NutCondition::CrossEnc => "cross-protocol-encryptions",
            NutCondition::CrossXorSummands => "cross-protocol-xor-summands",
        };
        f.write_str(s)
    }
}

/// A failed pair together with the unifier that witnesses it.
#[derive(Debug, Clone)]
pub struct NutWitness {
    pub condition: NutCondition,
    pub left: Term,
    pub right: Term,
    pub unifier: Substitution,
}

#[derive(Debug, Clone)]
pub struct NutReport {
    pub conditions: Vec<(NutCondition, bool)>,
    pub witnesses: Vec<NutWitness>,
}

impl NutReport {
    pub fn passes(&self) -> bool {
        self.conditions.iter().all(|(_, ok)| *ok)
    }
}

fn rename_suffix(t: &Term, suffix: &str) -> Term {
    t.rename_vars(&|v: &Var| Var::with_type(format!("{}{}", v.name, suffix), v.ty.clone()))
}

/// Unifier of variable-disjoint renamings, if any. A nonempty answer
/// means the two terms have a common instance.
fn common_instance(left: &Term, right: &Term) -> Option<(Term, Term, Substitution)> {
    let l = rename_suffix(left, "'1");
    let r = rename_suffix(right, "'2");
    let us = unify_free(&UnificationProblem::single(l.clone(), r.clone()));
    us.into_iter().next().map(|u| (l, r, u))
}

/// Xor subterms of a protocol, as (xor term, summands) pairs.
fn xor_subterms(p: &Protocol) -> Vec<Vec<Term>> {
    p.subterms()
        .into_iter()
        .filter_map(|t| match t {
            Term::Xor(parts) => Some(parts),
            _ => None,
        })
        .collect()
}

/// Checks the within-protocol tagging discipline.
pub fn check_nut(p: &Protocol) -> NutReport {
    let mut witnesses = Vec::new();
    let encs = p.encrypted_subterms();
    let subs = p.subterms();

    // (a) encrypted components against every other non-variable subterm
    let mut ok_a = true;
    for e in &encs {
        for t in &subs {
            if t.is_variable() || t == e {
                continue;
            }
            if let Some((l, r, u)) = common_instance(e, t) {
                ok_a = false;
                witnesses.push(NutWitness {
                    condition: NutCondition::EncVsSubterm,
                    left: l,
                    right: r,
                    unifier: u,
                });
            }
        }
    }

    // (b) asymmetric keys must not be free variables
    let mut ok_b = true;
    for e in &encs {
        if let Term::PEnc(_, k) = e {
            if k.is_variable() {
                ok_b = false;
                witnesses.push(NutWitness {
                    condition: NutCondition::KeyNotVariable,
                    left: e.clone(),
                    right: (**k).clone(),
                    unifier: Substitution::new(),
                });
            }
        }
    }

    // (c) distinct summands of each xor subterm pairwise
    let mut ok_c = true;
    for parts in xor_subterms(p) {
        for (i, s) in parts.iter().enumerate() {
            for t in parts.iter().skip(i + 1) {
                if s == t {
                    continue;
                }
                if let Some((l, r, u)) = common_instance(s, t) {
                    ok_c = false;
                    witnesses.push(NutWitness {
                        condition: NutCondition::XorSummands,
                        left: l,
                        right: r,
                        unifier: u,
                    });
                }
            }
        }
    }

    NutReport {
        conditions: vec![
            (NutCondition::EncVsSubterm, ok_a),
            (NutCondition::KeyNotVariable, ok_b),
            (NutCondition::XorSummands, ok_c),
        ],
        witnesses,
    }
}

/// Checks the cross-protocol tagging discipline.
pub fn check_munut(p1: &Protocol, p2: &Protocol) -> NutReport {
    let mut witnesses = Vec::new();

    // encrypted components across the two protocols
    let mut ok_1 = true;
    for e1 in p1.encrypted_subterms() {
        for e2 in p2.encrypted_subterms() {
            if let Some((l, r, u)) = common_instance(&e1, &e2) {
                ok_1 = false;
                witnesses.push(NutWitness {
                    condition: NutCondition::CrossEnc,
                    left: l,
                    right: r,
                    unifier: u,
                });
            }
        }
    }

    // non-xor summands of xor subterms across the two protocols;
    // canonical xor nodes never nest, so every summand qualifies
    let mut ok_2 = true;
    for parts1 in xor_subterms(p1) {
        for parts2 in xor_subterms(p2) {
            for s in &parts1 {
                for t in &parts2 {
                    if let Some((l, r, u)) = common_instance(s, t) {
                        ok_2 = false;
                        witnesses.push(NutWitness {
                            condition: NutCondition::CrossXorSummands,
                            left: l,
                            right: r,
                            unifier: u,
                        });
                    }
                }
            }
        }
    }

    NutReport {
        conditions: vec![
            (NutCondition::CrossEnc, ok_1),
            (NutCondition::CrossXorSummands, ok_2),
        ],
        witnesses,
    }
}

/// Tagging scheme for [`insert_tags`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagScheme {
    /// Distinct numeric tags per protocol: `1, 2, 3, ...`.
    ComponentNumbers,
    /// Every encryption body additionally starts with the protocol name,
    /// and numeric tags live in the protocol's own namespace, which
    /// keeps distinct protocols mutually non-unifiable.
    ProtocolName,
}

struct Tagger {
    scheme: TagScheme,
    proto: String,
    next: usize,
}

impl Tagger {
    fn alloc(&mut self) -> Term {
        let n = self.next;
        self.next += 1;
        Term::tag(n)
    }

    /// Prefix for an encryption/hash/signature body.
    fn body_prefix(&mut self) -> Vec<Term> {
        match self.scheme {
            TagScheme::ComponentNumbers => vec![self.alloc()],
            TagScheme::ProtocolName => vec![Term::cst(self.proto.clone(), Sort::Tag), self.alloc()],
        }
    }

    fn tag_term(&mut self, t: &Term) -> Term {
        match t {
            Term::Zero | Term::Constant(_) | Term::Variable(_) => t.clone(),
            Term::Sequence(es) => Term::seq(es.iter().map(|e| self.tag_term(e)).collect()),
            Term::PEnc(p, k) => {
                let prefix = self.body_prefix();
                let key = match k.as_ref() {
                    // a variable key gets its own tag wrapper
                    Term::Variable(_) => {
                        let mut kp = self.body_prefix();
                        kp.push((**k).clone());
                        Term::seq(kp)
                    }
                    other => self.tag_term(other),
                };
                Term::penc(self.wrap_body(prefix, p), key)
            }
            Term::SEnc(p, k) => {
                let prefix = self.body_prefix();
                let key = self.tag_term(k);
                Term::senc(self.wrap_body(prefix, p), key)
            }
            Term::Pk(a) => Term::pk(self.tag_term(a)),
            Term::Sh(a, b) => Term::sh(self.tag_term(a), self.tag_term(b)),
            Term::Hash(b) => {
                let prefix = self.body_prefix();
                Term::hash(self.wrap_body(prefix, b))
            }
            Term::Sig(b, k) => {
                let prefix = self.body_prefix();
                let key = self.tag_term(k);
                Term::sig(self.wrap_body(prefix, b), key)
            }
            Term::Xor(parts) => Term::xor(
                parts
                    .iter()
                    .map(|s| {
                        let mut wrapped = self.body_prefix();
                        wrapped.push(self.tag_term(s));
                        Term::seq(wrapped)
                    })
                    .collect(),
            ),
        }
    }

    fn wrap_body(&mut self, mut prefix: Vec<Term>, body: &Term) -> Term {
        let tagged = self.tag_term(body);
        match tagged {
            Term::Sequence(es) => {
                prefix.extend(es);
                Term::seq(prefix)
            }
            other => {
                prefix.push(other);
                Term::seq(prefix)
            }
        }
    }
}

/// Inserts tags so the protocol satisfies [`check_nut`]: every
/// encryption, hash and signature body gets a distinct tag prefix, every
/// xor summand is wrapped as a tagged pair, and variable asymmetric keys
/// are wrapped too. Already-compliant protocols are returned unchanged,
/// which makes the transformation idempotent.
pub fn insert_tags(p: &Protocol, scheme: TagScheme) -> Protocol {
    if check_nut(p).passes() {
        return p.clone();
    }
    let mut tagger = Tagger { scheme, proto: p.name.clone(), next: 1 };
    let messages: Vec<Message> = p
        .messages
        .iter()
        .map(|m| Message {
            index: m.index,
            sender: m.sender.clone(),
            receiver: m.receiver.clone(),
            term: tagger.tag_term(&m.term),
        })
        .collect();
    Protocol::from_script(
        p.name.clone(),
        messages,
        p.fresh_vars.clone(),
        p.secret_vars.clone(),
    )
    .expect("tagging preserves declarations")
}

/// Convenience: the constants a tagging pass added, by name.
pub fn tag_constants(p: &Protocol) -> BTreeMap<String, Cst> {
    p.const_decls
        .iter()
        .filter(|(_, c)| c.sort == Sort::Tag)
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Message;
    use std::collections::BTreeSet;

    fn nsl_untagged() -> Protocol {
        // component numbers 1,2,3 already present, xor summands untagged
        let a = Term::var("A", Sort::Agent);
        let b = Term::var("B", Sort::Agent);
        let na = Term::var("NA", Sort::Nonce);
        let nb = Term::var("NB", Sort::Nonce);
        let m1 = Term::penc(
            Term::seq(vec![Term::tag(1), na.clone(), a.clone()]),
            Term::pk(b.clone()),
        );
        let m2 = Term::penc(
            Term::seq(vec![Term::tag(2), Term::xor(vec![na.clone(), b.clone()]), nb.clone()]),
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
        Protocol::from_script("nsl_xor", msgs, fresh.clone(), fresh).unwrap()
    }

    fn nsl_tagged() -> Protocol {
        // summand tags 4 and 5 added inside message 2
        let a = Term::var("A", Sort::Agent);
        let b = Term::var("B", Sort::Agent);
        let na = Term::var("NA", Sort::Nonce);
        let nb = Term::var("NB", Sort::Nonce);
        let m1 = Term::penc(
            Term::seq(vec![Term::tag(1), na.clone(), a.clone()]),
            Term::pk(b.clone()),
        );
        let m2 = Term::penc(
            Term::seq(vec![
                Term::tag(2),
                Term::xor(vec![
                    Term::seq(vec![Term::tag(4), na.clone()]),
                    Term::seq(vec![Term::tag(5), b.clone()]),
                ]),
                nb.clone(),
            ]),
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
        Protocol::from_script("nsl_xor_tagged", msgs, fresh.clone(), fresh).unwrap()
    }

    #[test]
    fn untagged_summands_fail_the_xor_condition() {
        let report = check_nut(&nsl_untagged());
        assert!(!report.passes());
        let failed: Vec<_> =
            report.conditions.iter().filter(|(_, ok)| !ok).map(|(c, _)| *c).collect();
        assert!(failed.contains(&NutCondition::XorSummands), "failed: {failed:?}");
        // the witness is the free nonce variable against the agent variable
        assert!(report
            .witnesses
            .iter()
            .any(|w| w.condition == NutCondition::XorSummands));
    }

    #[test]
    fn fully_tagged_protocol_passes_all_conditions() {
        let report = check_nut(&nsl_tagged());
        assert!(report.passes(), "witnesses: {:?}", report.witnesses);
    }

    #[test]
    fn variable_asymmetric_key_fails_condition_b() {
        let msg = Message {
            index: 1,
            sender: "A".into(),
            receiver: "B".into(),
            term: Term::penc(Term::tag(1), Term::var("K", Sort::Key)),
        };
        let p = Protocol::from_script("vk", vec![msg], BTreeSet::new(), BTreeSet::new()).unwrap();
        let report = check_nut(&p);
        assert!(report
            .conditions
            .iter()
            .any(|(c, ok)| *c == NutCondition::KeyNotVariable && !ok));
    }

    #[test]
    fn witnesses_really_unify() {
        let report = check_nut(&nsl_untagged());
        for w in &report.witnesses {
            if w.condition == NutCondition::KeyNotVariable {
                continue;
            }
            assert_eq!(w.unifier.apply(&w.left), w.unifier.apply(&w.right));
        }
    }

    #[test]
    fn same_protocol_twice_fails_cross_conditions() {
        let p = nsl_tagged();
        let report = check_munut(&p, &p);
        assert!(report.conditions.iter().any(|(c, ok)| *c == NutCondition::CrossEnc && !ok));
    }

    #[test]
    fn name_tagged_protocols_pass_cross_conditions() {
        let p1 = insert_tags(&nsl_untagged(), TagScheme::ProtocolName);
        let mut q = nsl_untagged();
        q.name = "other".into();
        let q = Protocol::from_script(
            "other",
            q.messages,
            q.fresh_vars,
            q.secret_vars,
        )
        .unwrap();
        let p2 = insert_tags(&q, TagScheme::ProtocolName);
        let report = check_munut(&p1, &p2);
        assert!(report.passes(), "witnesses: {:?}", report.witnesses);
    }

    #[test]
    fn tagging_establishes_the_discipline() {
        let tagged = insert_tags(&nsl_untagged(), TagScheme::ComponentNumbers);
        assert!(check_nut(&tagged).passes());
        // idempotent: a compliant protocol is a fixpoint
        let again = insert_tags(&tagged, TagScheme::ComponentNumbers);
        assert_eq!(again, tagged);
    }

    #[test]
    fn name_scheme_prefixes_bodies_with_the_protocol_name() {
        let tagged = insert_tags(&nsl_untagged(), TagScheme::ProtocolName);
        assert!(check_nut(&tagged).passes());
        for e in tagged.encrypted_subterms() {
            if let Term::PEnc(body, _) = &e {
                match body.as_ref() {
                    Term::Sequence(es) => {
                        assert_eq!(es[0], Term::cst("nsl_xor", Sort::Tag));
                    }
                    other => panic!("untagged body {other}"),
                }
            }
        }
    }
}
