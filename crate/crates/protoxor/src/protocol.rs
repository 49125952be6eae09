//! Roles, strands, protocols and semi-bundles.
//!
//! A protocol is a named set of roles; each role is a strand of signed
//! nodes obtained by projecting the message script onto one agent
//! variable. Semi-bundles instantiate roles with well-typed
//! substitutions, drawing globally fresh constants for the declared
//! fresh variables and renaming role variables apart per strand.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::sort::Sort;
use crate::subst::Substitution;
use crate::term::{attacker, Cst, Term, Var};

/// Direction of a node: `+` sends, `-` receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Node {
    pub sign: Sign,
    pub term: Term,
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sign {
            Sign::Plus => '+',
            Sign::Minus => '-',
        };
        write!(f, "{s}{}", self.term)
    }
}

pub type Strand = Vec<Node>;

/// One message line of a protocol script.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub index: usize,
    pub sender: String,
    pub receiver: String,
    pub term: Term,
}

/// A strand pattern named after the agent variable that plays it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Role {
    pub name: String,
    pub strand: Strand,
}

impl Role {
    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.strand.iter().map(|n| &n.term)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for t in self.terms() {
            out.extend(t.vars());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Protocol {
    pub name: String,
    pub messages: Vec<Message>,
    pub roles: Vec<Role>,
    /// Variables instantiated with fresh constants in every strand.
    pub fresh_vars: BTreeSet<Var>,
    /// Fresh variables whose instantiations must stay secret.
    pub secret_vars: BTreeSet<Var>,
    /// Declared variables by name.
    pub decls: BTreeMap<String, Var>,
    /// Declared constants by name (tags and protocol names).
    pub const_decls: BTreeMap<String, Cst>,
}

impl Protocol {
    /// Derives the role strands from the message script: the sender of a
    /// message gets a `+` node, the receiver a `-` node.
    pub fn from_script(
        name: impl Into<String>,
        messages: Vec<Message>,
        fresh_vars: BTreeSet<Var>,
        secret_vars: BTreeSet<Var>,
    ) -> Result<Protocol, ProtocolError> {
        if !secret_vars.is_subset(&fresh_vars) {
            let v = secret_vars.difference(&fresh_vars).next().unwrap();
            return Err(ProtocolError::SecretNotFresh(v.name.clone()));
        }
        let mut role_names: Vec<String> = Vec::new();
        for m in &messages {
            for who in [&m.sender, &m.receiver] {
                if !role_names.contains(who) {
                    role_names.push(who.clone());
                }
            }
        }
        let roles = role_names
            .into_iter()
            .map(|rn| {
                let strand = messages
                    .iter()
                    .filter_map(|m| {
                        if m.sender == rn {
                            Some(Node { sign: Sign::Plus, term: m.term.clone() })
                        } else if m.receiver == rn {
                            Some(Node { sign: Sign::Minus, term: m.term.clone() })
                        } else {
                            None
                        }
                    })
                    .collect();
                Role { name: rn, strand }
            })
            .collect();
        let mut p = Protocol {
            name: name.into(),
            messages,
            roles,
            fresh_vars,
            secret_vars,
            decls: BTreeMap::new(),
            const_decls: BTreeMap::new(),
        };
        for v in p.vars() {
            p.decls.insert(v.name.clone(), v);
        }
        for c in p.constants() {
            p.const_decls.insert(c.name.clone(), c);
        }
        Ok(p)
    }

    pub fn role(&self, name: &str) -> Option<&Role> {
        self.roles.iter().find(|r| r.name == name)
    }

    pub fn terms(&self) -> impl Iterator<Item = &Term> {
        self.messages.iter().map(|m| &m.term)
    }

    pub fn subterms(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        for t in self.terms() {
            out.extend(t.subterms());
        }
        out
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for t in self.terms() {
            out.extend(t.vars());
        }
        out
    }

    pub fn constants(&self) -> BTreeSet<Cst> {
        let mut out = BTreeSet::new();
        for t in self.terms() {
            out.extend(t.constants());
        }
        out
    }

    /// Long-term shared keys: every `sh(_,_)` subterm.
    pub fn ltkeys(&self) -> BTreeSet<Term> {
        self.subterms().into_iter().filter(|t| matches!(t, Term::Sh(..))).collect()
    }

    /// Encrypted components over the whole protocol.
    pub fn encrypted_subterms(&self) -> BTreeSet<Term> {
        let mut out = BTreeSet::new();
        for t in self.terms() {
            out.extend(t.encrypted_subterms());
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("secret variable {0} is not declared fresh")]
    SecretNotFresh(String),
    #[error("instantiation of {var} with {term} is not well-typed")]
    IllTypedInstantiation { var: String, term: String },
    #[error("role {0} does not exist")]
    NoSuchRole(String),
    #[error("fresh constant {0} collides with an existing constant")]
    FreshReuse(String),
    #[error("cannot bind fresh variable {0} from a session plan")]
    BindsFreshVar(String),
}

/// Which design assumption a check refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Assumption {
    /// Long-term shared keys never appear as interms of protocol terms.
    LtkNotReadable,
    /// Variables occurring inside encryption keys are never readable
    /// elsewhere in the protocol.
    KeyVarNotReadable,
}

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub entries: Vec<(Assumption, bool, Vec<Term>)>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|(_, ok, _)| *ok)
    }
}

/// Checks the two static design assumptions, returning offending
/// subterm witnesses for each failure.
///
/// Both checks quantify over the protocol's message terms: the interm
/// relation already excludes key positions, so a shared key used purely
/// as an encryption key never flags, while one readable from a payload
/// does.
pub fn check_assumptions(p: &Protocol) -> AssumptionReport {
    let subterms = p.subterms();
    let ltkeys = p.ltkeys();

    // no long-term key readable from any message
    let mut ltk_witnesses = Vec::new();
    for m in p.terms() {
        for k in &ltkeys {
            if m.has_interm(k) {
                ltk_witnesses.push(k.clone());
            }
        }
    }
    ltk_witnesses.sort();
    ltk_witnesses.dedup();

    // no variable of an encryption key readable from any message
    let mut keyvar_witnesses = Vec::new();
    for t in &subterms {
        let key = match t {
            Term::PEnc(_, k) | Term::SEnc(_, k) => k,
            _ => continue,
        };
        for v in key.interms() {
            if !v.is_variable() {
                continue;
            }
            for m in p.terms() {
                if m.has_interm(&v) {
                    keyvar_witnesses.push(v.clone());
                }
            }
        }
    }
    keyvar_witnesses.sort();
    keyvar_witnesses.dedup();

    AssumptionReport {
        entries: vec![
            (Assumption::LtkNotReadable, ltk_witnesses.is_empty(), ltk_witnesses),
            (Assumption::KeyVarNotReadable, keyvar_witnesses.is_empty(), keyvar_witnesses),
        ],
    }
}

/// Plan entry: one strand of the given role, with bindings for some of
/// its non-fresh variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrandPlan {
    pub role: String,
    pub bindings: BTreeMap<String, Cst>,
}

/// Session plan: the strands to instantiate, in order.
pub type SessionPlan = Vec<StrandPlan>;

/// Allocator for globally fresh constants, shared across every
/// semi-bundle of one analysis so distinct bundles never reuse a fresh
/// value.
#[derive(Debug, Default)]
pub struct FreshPool {
    counter: usize,
    used: BTreeSet<String>,
}

impl FreshPool {
    pub fn new() -> FreshPool {
        FreshPool::default()
    }

    pub fn reserve(&mut self, name: &str) {
        self.used.insert(name.to_string());
    }

    fn fresh(&mut self, base: &str, sort: Sort) -> Cst {
        loop {
            self.counter += 1;
            let name = format!("{}{}", base, self.counter);
            if self.used.insert(name.clone()) {
                return Cst::new(name, sort);
            }
        }
    }
}

/// One instantiated strand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrandInstance {
    pub protocol: String,
    pub role: String,
    /// 1-based index within the bundle, used for variable renaming and
    /// session labels.
    pub index: usize,
    pub nodes: Strand,
    /// The recorded substitution from the renamed role to this strand.
    pub subst: Substitution,
}

#[derive(Debug, Clone)]
pub struct SemiBundle {
    pub protocol: String,
    pub strands: Vec<StrandInstance>,
    pub fresh_cons: BTreeSet<Cst>,
    pub sec_cons: BTreeSet<Cst>,
    /// Initial attacker knowledge.
    pub iik: BTreeSet<Term>,
}

impl SemiBundle {
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for s in &self.strands {
            for n in &s.nodes {
                out.extend(n.term.vars());
            }
        }
        out
    }

    /// Merges two bundles built from one shared fresh pool. The second
    /// bundle's strands are re-indexed, including the index suffixes
    /// baked into their variable names, so variables of the two bundles
    /// can never collide.
    pub fn union(mut self, other: SemiBundle) -> SemiBundle {
        let offset = self.strands.len();
        for mut s in other.strands {
            let old = s.index;
            let new = old + offset;
            let marker = format!("#{old}");
            let reindex = move |v: &Var| -> Var {
                match v.name.strip_suffix(&marker) {
                    Some(base) => Var::with_type(format!("{base}#{new}"), v.ty.clone()),
                    None => v.clone(),
                }
            };
            s.index = new;
            for n in &mut s.nodes {
                n.term = n.term.rename_vars(&reindex);
            }
            s.subst = s.subst.rename_vars(&reindex);
            self.strands.push(s);
        }
        self.fresh_cons.extend(other.fresh_cons);
        self.sec_cons.extend(other.sec_cons);
        self.iik.extend(other.iik);
        self.protocol = format!("{}+{}", self.protocol, other.protocol);
        self
    }
}

/// Renames a role variable for strand `index`.
pub fn strand_var(v: &Var, index: usize) -> Var {
    Var::with_type(format!("{}#{}", v.name, index), v.ty.clone())
}

/// A role originates a variable when its first occurrence in the strand
/// is in a send node.
pub fn originates(role: &Role, v: &Var) -> bool {
    for node in &role.strand {
        if node.term.contains_var(v) {
            return node.sign == Sign::Plus;
        }
    }
    false
}

/// Instantiates a session plan into a semi-bundle.
///
/// Every strand renames its role variables apart with a strand-index
/// suffix, binds the planned constants (which must be well-typed), and
/// draws fresh constants for the declared fresh variables from `pool`.
/// The attacker's initial knowledge collects the attacker constant, the
/// unity, all tag constants, every planned constant, and the public keys
/// of all known agent constants.
pub fn instantiate(
    p: &Protocol,
    plan: &SessionPlan,
    pool: &mut FreshPool,
) -> Result<SemiBundle, ProtocolError> {
    // fresh names must not collide with anything the protocol or plan mentions
    for c in p.constants() {
        pool.reserve(&c.name);
    }
    for sp in plan {
        for c in sp.bindings.values() {
            pool.reserve(&c.name);
        }
    }

    let mut strands = Vec::new();
    let mut fresh_cons = BTreeSet::new();
    let mut sec_cons = BTreeSet::new();
    let mut agent_cons: BTreeSet<Cst> = BTreeSet::new();
    let mut plan_cons: BTreeSet<Cst> = BTreeSet::new();

    for (i, sp) in plan.iter().enumerate() {
        let index = i + 1;
        let role = p.role(&sp.role).ok_or_else(|| ProtocolError::NoSuchRole(sp.role.clone()))?;
        let mut pairs: Vec<(Var, Term)> = Vec::new();
        for (name, cst) in &sp.bindings {
            let v = p
                .decls
                .get(name)
                .ok_or_else(|| ProtocolError::NoSuchRole(format!("{name} in role {}", sp.role)))?;
            if p.fresh_vars.contains(v) {
                return Err(ProtocolError::BindsFreshVar(name.clone()));
            }
            let term = Term::Constant(cst.clone());
            if term.type_of() != v.ty {
                return Err(ProtocolError::IllTypedInstantiation {
                    var: name.clone(),
                    term: cst.name.clone(),
                });
            }
            if cst.sort == Sort::Agent {
                agent_cons.insert(cst.clone());
            }
            plan_cons.insert(cst.clone());
            pairs.push((strand_var(v, index), term));
        }
        // a strand only originates the fresh variables it sends before
        // ever receiving; the rest stay symbolic
        for v in role.vars() {
            if p.fresh_vars.contains(&v) && originates(role, &v) {
                let base = v.name.to_lowercase().replace(['_', '#'], "");
                let sort = match &v.ty {
                    crate::sort::TypeExpr::Atomic(s) => *s,
                    _ => Sort::Text,
                };
                let c = pool.fresh(&base, sort);
                fresh_cons.insert(c.clone());
                if p.secret_vars.contains(&v) {
                    sec_cons.insert(c.clone());
                }
                pairs.push((strand_var(&v, index), Term::Constant(c)));
            }
        }
        let subst = Substitution::from_pairs(pairs);
        if !subst.is_well_typed() {
            return Err(ProtocolError::IllTypedInstantiation {
                var: "?".into(),
                term: "?".into(),
            });
        }
        let nodes: Strand = role
            .strand
            .iter()
            .map(|n| Node {
                sign: n.sign,
                term: subst.apply(&n.term.rename_vars(&|v| strand_var(v, index))),
            })
            .collect();
        strands.push(StrandInstance {
            protocol: p.name.clone(),
            role: sp.role.clone(),
            index,
            nodes,
            subst,
        });
    }

    let mut iik: BTreeSet<Term> = BTreeSet::new();
    iik.insert(attacker());
    iik.insert(Term::Zero);
    for c in p.constants() {
        if c.sort == Sort::Tag {
            iik.insert(Term::Constant(c));
        }
    }
    iik.extend(plan_cons.iter().cloned().map(Term::Constant));
    agent_cons.insert(Cst::new(crate::term::ATTACKER, Sort::Agent));
    for a in &agent_cons {
        iik.insert(Term::pk(Term::Constant(a.clone())));
    }

    Ok(SemiBundle { protocol: p.name.clone(), strands, fresh_cons, sec_cons, iik })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sort::TypeExpr;

    fn nsl_xor() -> Protocol {
        // 1. A -> B : {[1, NA, A]}_pk(B)
        // 2. B -> A : {[2, NA (+) B, NB]}_pk(A)
        // 3. A -> B : {[3, NB]}_pk(B)
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

    #[test]
    fn roles_are_signed_projections() {
        let p = nsl_xor();
        let ra = p.role("A").unwrap();
        let rb = p.role("B").unwrap();
        assert_eq!(
            ra.strand.iter().map(|n| n.sign).collect::<Vec<_>>(),
            vec![Sign::Plus, Sign::Minus, Sign::Plus]
        );
        assert_eq!(
            rb.strand.iter().map(|n| n.sign).collect::<Vec<_>>(),
            vec![Sign::Minus, Sign::Plus, Sign::Minus]
        );
        assert_eq!(ra.strand[0].term, rb.strand[0].term);
    }

    #[test]
    fn nsl_passes_both_assumptions() {
        let report = check_assumptions(&nsl_xor());
        assert!(report.all_pass(), "{report:?}");
    }

    #[test]
    fn shared_key_in_payload_fails_the_ltk_assumption() {
        // 1. A -> S : sh(A, S)
        let msg = Message {
            index: 1,
            sender: "A".into(),
            receiver: "S".into(),
            term: Term::sh(Term::var("A", Sort::Agent), Term::var("S", Sort::Agent)),
        };
        let p = Protocol::from_script("leaky", vec![msg], BTreeSet::new(), BTreeSet::new())
            .unwrap();
        let report = check_assumptions(&p);
        let (_, ok, witnesses) = &report.entries[0];
        assert!(!ok);
        assert_eq!(
            witnesses[0],
            Term::sh(Term::var("A", Sort::Agent), Term::var("S", Sort::Agent))
        );
    }

    #[test]
    fn variable_key_sent_in_plain_fails_the_key_variable_assumption() {
        // 1. A -> B : {m}_K   2. B -> A : K
        let k = Term::var("K", Sort::Key);
        let msgs = vec![
            Message {
                index: 1,
                sender: "A".into(),
                receiver: "B".into(),
                term: Term::senc(Term::cst("m", Sort::Text), k.clone()),
            },
            Message { index: 2, sender: "B".into(), receiver: "A".into(), term: k.clone() },
        ];
        let p =
            Protocol::from_script("kleak", msgs, BTreeSet::new(), BTreeSet::new()).unwrap();
        let report = check_assumptions(&p);
        let (_, ok, witnesses) = &report.entries[1];
        assert!(!ok);
        assert_eq!(witnesses, &vec![k]);
    }

    #[test]
    fn instantiation_renames_and_draws_fresh_constants() {
        let p = nsl_xor();
        let plan: SessionPlan = vec![
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
        ];
        let mut pool = FreshPool::new();
        let sb = instantiate(&p, &plan, &mut pool).unwrap();
        assert_eq!(sb.strands.len(), 2);
        // strand 1: A bound, B left variable, NA fresh
        let s1 = &sb.strands[0];
        let first = &s1.nodes[0].term;
        assert!(first.vars().contains(&Var::new("B#1", Sort::Agent)));
        assert_eq!(first.vars().len(), 1);
        // strand 2 is fully instantiated on agents
        let s2 = &sb.strands[1];
        assert_eq!(s2.nodes[0].term.vars().iter().filter(|v| v.ty == TypeExpr::Atomic(Sort::Agent)).count(), 0);
        // two fresh nonces, both secret
        assert_eq!(sb.fresh_cons.len(), 2);
        assert_eq!(sb.sec_cons, sb.fresh_cons);
        // iik contains the attacker, the unity, tags, agents, public keys
        assert!(sb.iik.contains(&attacker()));
        assert!(sb.iik.contains(&Term::Zero));
        assert!(sb.iik.contains(&Term::tag(1)));
        assert!(sb.iik.contains(&Term::cst("a", Sort::Agent)));
        assert!(sb.iik.contains(&Term::pk(Term::cst("b", Sort::Agent))));
        assert!(sb.iik.contains(&Term::pk(attacker())));
    }

    #[test]
    fn strand_origin_round_trips() {
        let p = nsl_xor();
        let plan: SessionPlan = vec![StrandPlan {
            role: "B".into(),
            bindings: [("B".to_string(), Cst::new("b", Sort::Agent))].into_iter().collect(),
        }];
        let mut pool = FreshPool::new();
        let sb = instantiate(&p, &plan, &mut pool).unwrap();
        let s = &sb.strands[0];
        let role = p.role(&s.role).unwrap();
        for (node, rnode) in s.nodes.iter().zip(&role.strand) {
            let renamed = rnode.term.rename_vars(&|v| strand_var(v, s.index));
            assert_eq!(node.term, s.subst.apply(&renamed));
            assert_eq!(node.sign, rnode.sign);
        }
    }

    #[test]
    fn instantiation_preserves_types() {
        let p = nsl_xor();
        let plan: SessionPlan = vec![StrandPlan {
            role: "A".into(),
            bindings: [("A".to_string(), Cst::new("a", Sort::Agent))].into_iter().collect(),
        }];
        let mut pool = FreshPool::new();
        let sb = instantiate(&p, &plan, &mut pool).unwrap();
        let role = p.role("A").unwrap();
        for (node, rnode) in sb.strands[0].nodes.iter().zip(&role.strand) {
            assert_eq!(node.term.type_of(), rnode.term.type_of());
        }
    }

    #[test]
    fn ill_typed_plan_is_rejected() {
        let p = nsl_xor();
        let plan: SessionPlan = vec![StrandPlan {
            role: "A".into(),
            bindings: [("A".to_string(), Cst::new("x", Sort::Nonce))].into_iter().collect(),
        }];
        let mut pool = FreshPool::new();
        assert!(matches!(
            instantiate(&p, &plan, &mut pool),
            Err(ProtocolError::IllTypedInstantiation { .. })
        ));
    }

    #[test]
    fn fresh_pools_never_collide_across_bundles() {
        let p = nsl_xor();
        let plan: SessionPlan = vec![StrandPlan { role: "A".into(), bindings: BTreeMap::new() }];
        let mut pool = FreshPool::new();
        let sb1 = instantiate(&p, &plan, &mut pool).unwrap();
        let sb2 = instantiate(&p, &plan, &mut pool).unwrap();
        assert!(sb1.fresh_cons.is_disjoint(&sb2.fresh_cons));
    }

    #[test]
    fn empty_plan_gives_base_knowledge_only() {
        let p = nsl_xor();
        let mut pool = FreshPool::new();
        let sb = instantiate(&p, &vec![], &mut pool).unwrap();
        assert!(sb.strands.is_empty());
        assert!(sb.fresh_cons.is_empty());
        assert!(sb.iik.contains(&attacker()));
    }
}
