//! Disjoint combination of the standard and xor unification algorithms.
//!
//! Mixed problems are solved by purifying terms (maximal alien subterms
//! abstracted behind fresh variables with defining equations), splitting
//! equations by theory, guessing a variable identification partition and
//! a two-way ownership partition, solving each side with its elementary
//! algorithm, and stitching the per-theory unifiers back together along
//! a dependency order. The nondeterministic guesses are enumerated
//! exhaustively and every candidate is verified against the original
//! problem, so the returned set is sound by construction and complete at
//! the scale the enumeration covers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::sort::Sort;
use crate::subst::Substitution;
use crate::term::{Cst, Term, Theory, Var};
use crate::unify::{unify_acun, unify_free, unify_std, UnificationProblem, UnifierSet, UnifyError};

/// Caps on the exhaustive enumeration.
#[derive(Debug, Clone, Copy)]
pub struct BscaConfig {
    /// Maximum number of variables in the input problem.
    pub var_cap: usize,
    /// Hard ceiling on (identification, ownership) branches explored.
    pub branch_cap: usize,
}

impl Default for BscaConfig {
    fn default() -> Self {
        BscaConfig { var_cap: 8, branch_cap: 500_000 }
    }
}

/// An equation both of whose sides are pure in one theory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PurifiedEquation {
    pub lhs: Term,
    pub rhs: Term,
    pub theory: Theory,
}

impl fmt::Display for PurifiedEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let th = match self.theory {
            Theory::Std => "std",
            Theory::Acun => "xor",
        };
        write!(f, "{} =?[{th}] {}", self.lhs, self.rhs)
    }
}

/// A partition of the problem variables; each block is identified with
/// its least member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Identification {
    pub blocks: Vec<Vec<Var>>,
}

impl Identification {
    /// The substitution replacing every variable by its block
    /// representative.
    pub fn representative_subst(&self) -> Substitution {
        let mut pairs = Vec::new();
        for block in &self.blocks {
            let repr = block.iter().min().expect("blocks are nonempty").clone();
            for v in block {
                if *v != repr {
                    pairs.push((v.clone(), Term::Variable(repr.clone())));
                }
            }
        }
        Substitution::from_pairs(pairs)
    }
}

impl fmt::Display for Identification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{{")?;
            for (j, v) in b.iter().enumerate() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", v.name)?;
            }
            write!(f, "}}")?;
        }
        write!(f, "}}")
    }
}

/// Record of one (identification, ownership) branch.
#[derive(Debug, Clone)]
pub struct BscaBranch {
    pub identification: Identification,
    pub gamma3: Vec<PurifiedEquation>,
    pub gamma41: Vec<PurifiedEquation>,
    pub gamma42: Vec<PurifiedEquation>,
    pub v1: BTreeSet<Var>,
    pub v2: BTreeSet<Var>,
    pub gamma51: Vec<PurifiedEquation>,
    pub gamma52: Vec<PurifiedEquation>,
    pub alpha: BTreeMap<Var, Cst>,
    pub beta: BTreeMap<Var, Cst>,
    pub sigma1s: Vec<Substitution>,
    pub sigma2s: Vec<Substitution>,
    /// Dependency orders actually used, one per combined candidate.
    pub orders: Vec<Vec<Var>>,
    /// Verified unifiers contributed by this branch.
    pub combined: Vec<Substitution>,
}

impl BscaBranch {
    /// Whether the split xor problems mention only constants.
    pub fn gamma52_is_ground(&self) -> bool {
        self.gamma52.iter().all(|eq| eq.lhs.vars().is_empty() && eq.rhs.vars().is_empty())
    }
}

/// Full record of a combination run.
#[derive(Debug, Clone)]
pub struct BscaTrace {
    pub gamma2: Vec<PurifiedEquation>,
    pub fresh_defs: BTreeMap<Var, Term>,
    pub branches: Vec<BscaBranch>,
}

const FRESH_VAR_PREFIX: &str = "_v";
const FRESH_CST_PREFIX: &str = "_k";
const PARAM_PREFIX: &str = "_p";

struct Purifier {
    counter: usize,
    memo: BTreeMap<Term, Var>,
    defs: BTreeMap<Var, Term>,
    equations: Vec<PurifiedEquation>,
}

impl Purifier {
    fn fresh(&mut self, t: &Term) -> Var {
        let v = Var::with_type(format!("{FRESH_VAR_PREFIX}{}", self.counter), t.type_of());
        self.counter += 1;
        v
    }

    /// Abstracts every maximal alien subterm of `t` (which must be rooted
    /// in `ambient` or be an atom) behind a fresh variable, recording a
    /// defining equation in the alien's own theory. Equal aliens share
    /// one variable.
    fn purify_term(&mut self, t: &Term, ambient: Theory) -> Term {
        match t.root_theory() {
            None => t.clone(),
            Some(th) if th == ambient => self.rebuild(t, ambient),
            Some(th) => {
                if let Some(v) = self.memo.get(t) {
                    return Term::Variable(v.clone());
                }
                let v = self.fresh(t);
                self.memo.insert(t.clone(), v.clone());
                let pure = self.rebuild(t, th);
                self.defs.insert(v.clone(), t.clone());
                self.equations.push(PurifiedEquation {
                    lhs: Term::Variable(v.clone()),
                    rhs: pure,
                    theory: th,
                });
                Term::Variable(v)
            }
        }
    }

    fn rebuild(&mut self, t: &Term, ambient: Theory) -> Term {
        match t {
            Term::Zero | Term::Constant(_) | Term::Variable(_) => t.clone(),
            Term::Sequence(es) => {
                Term::seq(es.iter().map(|e| self.purify_term(e, ambient)).collect())
            }
            Term::PEnc(p, k) => {
                Term::penc(self.purify_term(p, ambient), self.purify_term(k, ambient))
            }
            Term::SEnc(p, k) => {
                Term::senc(self.purify_term(p, ambient), self.purify_term(k, ambient))
            }
            Term::Pk(a) => Term::pk(self.purify_term(a, ambient)),
            Term::Sh(a, b) => {
                Term::sh(self.purify_term(a, ambient), self.purify_term(b, ambient))
            }
            Term::Hash(b) => Term::hash(self.purify_term(b, ambient)),
            Term::Sig(b, k) => {
                Term::sig(self.purify_term(b, ambient), self.purify_term(k, ambient))
            }
            Term::Xor(parts) => {
                Term::xor(parts.iter().map(|p| self.purify_term(p, ambient)).collect())
            }
        }
    }
}

/// Purifies a mixed problem: afterwards every equation has both sides
/// pure in one theory, with each abstracted alien subterm owning exactly
/// one fresh variable. Returns the purified equation set together with
/// the map from fresh variables to the subterms they stand for.
pub fn purify(problem: &UnificationProblem) -> (Vec<PurifiedEquation>, BTreeMap<Var, Term>) {
    let mut p = Purifier {
        counter: 0,
        memo: BTreeMap::new(),
        defs: BTreeMap::new(),
        equations: Vec::new(),
    };
    let mut main = Vec::new();
    for (l, r) in &problem.equations {
        let lt = l.root_theory();
        let rt = r.root_theory();
        match (lt, rt) {
            (Some(a), Some(b)) if a != b => {
                // both sides compound in different theories: bridge with
                // a fresh variable carrying one equation per theory
                let w = p.fresh(l);
                let lp = p.purify_term(l, a);
                let rp = p.purify_term(r, b);
                main.push(PurifiedEquation { lhs: Term::Variable(w.clone()), rhs: lp, theory: a });
                main.push(PurifiedEquation { lhs: Term::Variable(w), rhs: rp, theory: b });
            }
            _ => {
                let th = lt.or(rt).unwrap_or(Theory::Std);
                let lp = p.purify_term(l, th);
                let rp = p.purify_term(r, th);
                main.push(PurifiedEquation { lhs: lp, rhs: rp, theory: th });
            }
        }
    }
    let mut all = p.equations;
    all.extend(main);
    (all, p.defs)
}

/// Iterator over every set partition of `vars`, in restricted-growth
/// order, each paired with its representative substitution.
pub fn enumerate_identifications(
    vars: &BTreeSet<Var>,
    cap: usize,
) -> Result<impl Iterator<Item = (Identification, Substitution)>, UnifyError> {
    if vars.len() > cap {
        return Err(UnifyError::CapExceeded(format!(
            "{} variables exceed the identification cap {cap}",
            vars.len()
        )));
    }
    let vars: Vec<Var> = vars.iter().cloned().collect();
    Ok(PartitionIter::new(vars).map(|id| {
        let rho = id.representative_subst();
        (id, rho)
    }))
}

/// Restricted-growth-string partition enumeration.
struct PartitionIter {
    vars: Vec<Var>,
    state: Option<Vec<usize>>,
}

impl PartitionIter {
    fn new(vars: Vec<Var>) -> PartitionIter {
        let n = vars.len();
        PartitionIter { vars, state: Some(vec![0; n]) }
    }
}

impl Iterator for PartitionIter {
    type Item = Identification;

    fn next(&mut self) -> Option<Identification> {
        let rgs = self.state.as_ref()?.clone();
        // build partition from the current restricted growth string
        let nblocks = rgs.iter().copied().max().map_or(0, |m| m + 1);
        let mut blocks: Vec<Vec<Var>> = vec![Vec::new(); nblocks.max(usize::from(!rgs.is_empty()))];
        for (i, &b) in rgs.iter().enumerate() {
            blocks[b].push(self.vars[i].clone());
        }
        if rgs.is_empty() {
            blocks.clear();
        }
        // advance
        self.state = next_rgs(&rgs);
        Some(Identification { blocks })
    }
}

fn next_rgs(rgs: &[usize]) -> Option<Vec<usize>> {
    let n = rgs.len();
    if n == 0 {
        return None;
    }
    let mut rgs = rgs.to_vec();
    // prefix maxima
    for i in (1..n).rev() {
        let prefix_max = rgs[..i].iter().copied().max().unwrap_or(0);
        if rgs[i] <= prefix_max {
            rgs[i] += 1;
            for item in rgs.iter_mut().skip(i + 1) {
                *item = 0;
            }
            return Some(rgs);
        }
    }
    None
}

/// Splits an identified problem into per-theory halves, replacing each
/// theory's foreign variables by globally new constants. Returns the two
/// abstracted problem sets together with the abstraction maps.
pub fn split_and_abstract(
    gamma3: &[PurifiedEquation],
    v1: &BTreeSet<Var>,
    v2: &BTreeSet<Var>,
    cst_counter: &mut usize,
) -> (Vec<PurifiedEquation>, Vec<PurifiedEquation>, BTreeMap<Var, Cst>, BTreeMap<Var, Cst>) {
    debug_assert!(v1.is_disjoint(v2));
    let mut fresh_cst = |_v: &Var| {
        let c = Cst::new(format!("{FRESH_CST_PREFIX}{}", *cst_counter), Sort::Text);
        *cst_counter += 1;
        c
    };
    let alpha: BTreeMap<Var, Cst> = v2.iter().map(|v| (v.clone(), fresh_cst(v))).collect();
    let beta: BTreeMap<Var, Cst> = v1.iter().map(|v| (v.clone(), fresh_cst(v))).collect();
    let alpha_subst = Substitution::from_pairs(
        alpha.iter().map(|(v, c)| (v.clone(), Term::Constant(c.clone()))),
    );
    let beta_subst = Substitution::from_pairs(
        beta.iter().map(|(v, c)| (v.clone(), Term::Constant(c.clone()))),
    );
    let mut gamma51 = Vec::new();
    let mut gamma52 = Vec::new();
    for eq in gamma3 {
        match eq.theory {
            Theory::Std => gamma51.push(PurifiedEquation {
                lhs: alpha_subst.apply(&eq.lhs),
                rhs: alpha_subst.apply(&eq.rhs),
                theory: Theory::Std,
            }),
            Theory::Acun => gamma52.push(PurifiedEquation {
                lhs: beta_subst.apply(&eq.lhs),
                rhs: beta_subst.apply(&eq.rhs),
                theory: Theory::Acun,
            }),
        }
    }
    (gamma51, gamma52, alpha, beta)
}

fn unabstract(t: &Term, inverse: &BTreeMap<Cst, Var>) -> Term {
    match t {
        Term::Constant(c) => match inverse.get(c) {
            Some(v) => Term::Variable(v.clone()),
            None => t.clone(),
        },
        Term::Zero | Term::Variable(_) => t.clone(),
        Term::Sequence(es) => Term::seq(es.iter().map(|e| unabstract(e, inverse)).collect()),
        Term::PEnc(p, k) => Term::penc(unabstract(p, inverse), unabstract(k, inverse)),
        Term::SEnc(p, k) => Term::senc(unabstract(p, inverse), unabstract(k, inverse)),
        Term::Pk(a) => Term::pk(unabstract(a, inverse)),
        Term::Sh(a, b) => Term::sh(unabstract(a, inverse), unabstract(b, inverse)),
        Term::Hash(b) => Term::hash(unabstract(b, inverse)),
        Term::Sig(b, k) => Term::sig(unabstract(b, inverse), unabstract(k, inverse)),
        Term::Xor(parts) => Term::xor(parts.iter().map(|p| unabstract(p, inverse)).collect()),
    }
}

/// Stitches per-theory unifiers together along a dependency order: a
/// variable owned by one theory takes its binding from that theory's
/// unifier, with foreign abstraction constants translated back to the
/// variables they stand for and already-combined bindings applied. Fails
/// when the cross-references are cyclic, i.e. no admissible linear order
/// exists.
pub fn combine(
    sigma1: &Substitution,
    sigma2: &Substitution,
    v1: &BTreeSet<Var>,
    v2: &BTreeSet<Var>,
    inverse: &BTreeMap<Cst, Var>,
) -> Result<(Substitution, Vec<Var>), UnifyError> {
    let bind_of = |x: &Var| -> Option<Term> {
        let raw = if v1.contains(x) { sigma1.get(x) } else { sigma2.get(x) };
        raw.map(|t| unabstract(t, inverse))
    };
    let all: Vec<Var> = v1.iter().chain(v2.iter()).cloned().collect();
    let all_set: BTreeSet<Var> = all.iter().cloned().collect();

    // dependency edges: everything a binding mentions must come first
    let mut deps: BTreeMap<Var, BTreeSet<Var>> = BTreeMap::new();
    for x in &all {
        let needed: BTreeSet<Var> = match bind_of(x) {
            Some(t) => t.vars().into_iter().filter(|v| all_set.contains(v) && v != x).collect(),
            None => BTreeSet::new(),
        };
        if let Some(t) = bind_of(x) {
            if t.contains_var(x) && t != Term::Variable(x.clone()) {
                return Err(UnifyError::ImpureProblem(format!(
                    "self-referential binding {t}/{}",
                    x.name
                )));
            }
        }
        deps.insert(x.clone(), needed);
    }

    // Kahn's algorithm with the term order as tie-break; a cycle means
    // no admissible linear order exists for this pair
    let mut order = Vec::with_capacity(all.len());
    let mut remaining: BTreeSet<Var> = all_set.clone();
    while !remaining.is_empty() {
        let ready = remaining
            .iter()
            .find(|x| deps[*x].iter().all(|d| !remaining.contains(d)))
            .cloned();
        match ready {
            Some(x) => {
                remaining.remove(&x);
                order.push(x);
            }
            None => {
                return Err(UnifyError::CapExceeded(
                    "no admissible linear order: cyclic cross-theory bindings".into(),
                ))
            }
        }
    }

    let mut combined = Substitution::new();
    for x in &order {
        if let Some(t) = bind_of(x) {
            let t = combined.apply(&t);
            if t != Term::Variable(x.clone()) {
                combined = combined.compose(&Substitution::singleton(x.clone(), t));
            }
        }
    }
    Ok((combined, order))
}

/// Renames the residual parameter variables of a unifier (those not in
/// `keep`) to a canonical sequence so structurally equal answers
/// deduplicate.
pub fn rename_parameters(s: &Substitution, keep: &BTreeSet<Var>) -> Substitution {
    let mut mapping: BTreeMap<Var, Var> = BTreeMap::new();
    for (_, t) in s.iter() {
        for v in ordered_vars(t) {
            if !keep.contains(&v) && !mapping.contains_key(&v) {
                let fresh = Var::with_type(format!("{PARAM_PREFIX}{}", mapping.len()), v.ty.clone());
                mapping.insert(v, fresh);
            }
        }
    }
    if mapping.is_empty() {
        return s.clone();
    }
    s.rename_vars(&|v: &Var| mapping.get(v).cloned().unwrap_or_else(|| v.clone()))
}

fn ordered_vars(t: &Term) -> Vec<Var> {
    let mut out = Vec::new();
    fn walk(t: &Term, out: &mut Vec<Var>) {
        if let Term::Variable(v) = t {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        for a in t.args() {
            walk(a, out);
        }
    }
    walk(t, &mut out);
    out
}

/// Complete unification in the combined theory.
pub fn unify_sua(problem: &UnificationProblem, config: &BscaConfig) -> Result<UnifierSet, UnifyError> {
    run_bsca(problem, config, None)
}

/// Same as [`unify_sua`] but records every explored branch.
pub fn unify_sua_traced(
    problem: &UnificationProblem,
    config: &BscaConfig,
) -> Result<(UnifierSet, BscaTrace), UnifyError> {
    let mut trace = BscaTrace { gamma2: Vec::new(), fresh_defs: BTreeMap::new(), branches: Vec::new() };
    let out = run_bsca(problem, config, Some(&mut trace))?;
    Ok((out, trace))
}

fn run_bsca(
    problem: &UnificationProblem,
    config: &BscaConfig,
    mut trace: Option<&mut BscaTrace>,
) -> Result<UnifierSet, UnifyError> {
    // fast paths: single-theory problems go straight to their solver
    if problem.equations.iter().all(|(l, r)| l.is_pure(Theory::Std) && r.is_pure(Theory::Std)) {
        return unify_std(problem);
    }
    if problem.equations.iter().all(|(l, r)| l.is_pure(Theory::Acun) && r.is_pure(Theory::Acun)) {
        return unify_acun(problem);
    }

    let original_vars = problem.vars();
    if original_vars.len() > config.var_cap {
        return Err(UnifyError::CapExceeded(format!(
            "{} problem variables exceed the cap {}",
            original_vars.len(),
            config.var_cap
        )));
    }

    let (gamma2, defs) = purify(problem);
    if let Some(t) = trace.as_deref_mut() {
        t.gamma2 = gamma2.clone();
        t.fresh_defs = defs.clone();
    }

    let idvars: Vec<Var> = {
        let mut s = BTreeSet::new();
        for eq in &gamma2 {
            s.extend(eq.lhs.vars());
            s.extend(eq.rhs.vars());
        }
        s.into_iter().collect()
    };

    // merge compatibility: identifying two variables whose standard
    // defining terms cannot unify syntactically can never contribute a
    // unifier, so those partitions are skipped up front
    let std_def: BTreeMap<Var, Term> = gamma2
        .iter()
        .filter(|eq| eq.theory == Theory::Std)
        .filter_map(|eq| match &eq.lhs {
            Term::Variable(v) if defs.contains_key(v) => Some((v.clone(), eq.rhs.clone())),
            _ => None,
        })
        .collect();
    let compatible = |x: &Var, y: &Var| -> bool {
        match (std_def.get(x), std_def.get(y)) {
            (Some(t1), Some(t2)) => {
                !unify_free(&UnificationProblem::single(t1.clone(), t2.clone())).is_empty()
            }
            _ => true,
        }
    };

    let mut result = UnifierSet::new();
    let mut branches_used = 0usize;
    let mut cst_counter = 0usize;

    let mut partitions: Vec<Identification> = Vec::new();
    enumerate_compatible_partitions(&idvars, &compatible, &mut partitions, config.branch_cap)?;

    for identification in partitions {
        let rho = identification.representative_subst();
        let mut gamma3: Vec<PurifiedEquation> = Vec::new();
        for eq in &gamma2 {
            let lhs = rho.apply(&eq.lhs);
            let rhs = rho.apply(&eq.rhs);
            if lhs != rhs {
                gamma3.push(PurifiedEquation { lhs, rhs, theory: eq.theory });
            }
        }
        let gamma41: Vec<PurifiedEquation> =
            gamma3.iter().filter(|e| e.theory == Theory::Std).cloned().collect();
        let gamma42: Vec<PurifiedEquation> =
            gamma3.iter().filter(|e| e.theory == Theory::Acun).cloned().collect();

        // upper-bound prechecks: constant abstraction only restricts
        // solutions, so an unsolvable unabstracted half kills every
        // ownership choice of this identification
        let std_upper = UnificationProblem::new(
            gamma41.iter().map(|e| (e.lhs.clone(), e.rhs.clone())).collect(),
        );
        if unify_std(&std_upper)?.is_empty() {
            continue;
        }
        let acun_upper = UnificationProblem::new(
            gamma42.iter().map(|e| (e.lhs.clone(), e.rhs.clone())).collect(),
        );
        if unify_acun(&acun_upper)?.is_empty() {
            continue;
        }

        let mut std_vars: BTreeSet<Var> = BTreeSet::new();
        for e in &gamma41 {
            std_vars.extend(e.lhs.vars());
            std_vars.extend(e.rhs.vars());
        }
        let mut acun_vars: BTreeSet<Var> = BTreeSet::new();
        for e in &gamma42 {
            acun_vars.extend(e.lhs.vars());
            acun_vars.extend(e.rhs.vars());
        }
        let shared: Vec<Var> = std_vars.intersection(&acun_vars).cloned().collect();
        let std_only: BTreeSet<Var> = std_vars.difference(&acun_vars).cloned().collect();
        let acun_only: BTreeSet<Var> = acun_vars.difference(&std_vars).cloned().collect();

        // a variable used by only one theory is owned by it: giving it
        // away would just constantify it there, producing an instance of
        // the unifier found when it stays a variable
        for mask in 0u64..(1u64 << shared.len()) {
            branches_used += 1;
            if branches_used > config.branch_cap {
                return Err(UnifyError::CapExceeded(format!(
                    "branch enumeration exceeded {}",
                    config.branch_cap
                )));
            }
            let mut v1 = std_only.clone();
            let mut v2 = acun_only.clone();
            for (i, v) in shared.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    v1.insert(v.clone());
                } else {
                    v2.insert(v.clone());
                }
            }

            let (gamma51, gamma52, alpha, beta) =
                split_and_abstract(&gamma3, &v1, &v2, &mut cst_counter);
            let inverse: BTreeMap<Cst, Var> = alpha
                .iter()
                .chain(beta.iter())
                .map(|(v, c)| (c.clone(), v.clone()))
                .collect();

            let p51 = UnificationProblem::new(
                gamma51.iter().map(|e| (e.lhs.clone(), e.rhs.clone())).collect(),
            );
            let sigma1s: Vec<Substitution> = unify_std(&p51)?.into_iter().collect();
            let p52 = UnificationProblem::new(
                gamma52.iter().map(|e| (e.lhs.clone(), e.rhs.clone())).collect(),
            );
            let sigma2s: Vec<Substitution> = unify_acun(&p52)?.into_iter().collect();

            let mut branch = trace.as_deref_mut().map(|_| BscaBranch {
                identification: identification.clone(),
                gamma3: gamma3.clone(),
                gamma41: gamma41.clone(),
                gamma42: gamma42.clone(),
                v1: v1.clone(),
                v2: v2.clone(),
                gamma51: gamma51.clone(),
                gamma52: gamma52.clone(),
                alpha: alpha.clone(),
                beta: beta.clone(),
                sigma1s: sigma1s.clone(),
                sigma2s: sigma2s.clone(),
                orders: Vec::new(),
                combined: Vec::new(),
            });

            for sigma1 in &sigma1s {
                for sigma2 in &sigma2s {
                    let Ok((stitched, order)) = combine(sigma1, sigma2, &v1, &v2, &inverse) else {
                        continue;
                    };
                    let full = rho.compose(&stitched);
                    let restricted = full.restrict(|v| original_vars.contains(v));
                    let sound = problem
                        .equations
                        .iter()
                        .all(|(l, r)| restricted.apply(l) == restricted.apply(r));
                    if sound {
                        let canon = rename_parameters(&restricted, &original_vars);
                        if let Some(b) = branch.as_mut() {
                            b.orders.push(order);
                            b.combined.push(canon.clone());
                        }
                        result.insert(canon);
                    }
                }
            }

            if let (Some(t), Some(b)) = (trace.as_deref_mut(), branch) {
                t.branches.push(b);
            }
        }
    }
    Ok(result)
}

fn enumerate_compatible_partitions(
    vars: &[Var],
    compatible: &impl Fn(&Var, &Var) -> bool,
    out: &mut Vec<Identification>,
    cap: usize,
) -> Result<(), UnifyError> {
    fn go(
        vars: &[Var],
        idx: usize,
        blocks: &mut Vec<Vec<Var>>,
        compatible: &impl Fn(&Var, &Var) -> bool,
        out: &mut Vec<Identification>,
        cap: usize,
    ) -> Result<(), UnifyError> {
        if out.len() > cap {
            return Err(UnifyError::CapExceeded(format!(
                "identification enumeration exceeded {cap}"
            )));
        }
        if idx == vars.len() {
            out.push(Identification { blocks: blocks.clone() });
            return Ok(());
        }
        let v = &vars[idx];
        for i in 0..blocks.len() {
            if blocks[i].iter().all(|w| compatible(v, w)) {
                blocks[i].push(v.clone());
                go(vars, idx + 1, blocks, compatible, out, cap)?;
                blocks[i].pop();
            }
        }
        blocks.push(vec![v.clone()]);
        go(vars, idx + 1, blocks, compatible, out, cap)?;
        blocks.pop();
        Ok(())
    }
    let mut blocks = Vec::new();
    go(vars, 0, &mut blocks, compatible, out, cap)
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
    fn av(n: &str) -> Term {
        Term::var(n, Sort::Agent)
    }
    fn nv(n: &str) -> Term {
        Term::var(n, Sort::Nonce)
    }

    /// The running combination example: {1,na}_pk(B) on one side, the
    /// xor of {1,NB}_pk(a), [2,A] and [2,b] on the other.
    fn mixed_example() -> UnificationProblem {
        let lhs = Term::penc(Term::seq(vec![Term::tag(1), na()]), Term::pk(av("B")));
        let rhs = Term::xor(vec![
            Term::penc(Term::seq(vec![Term::tag(1), nv("NB")]), Term::pk(a())),
            Term::seq(vec![Term::tag(2), av("A")]),
            Term::seq(vec![Term::tag(2), b()]),
        ]);
        UnificationProblem::single(lhs, rhs)
    }

    #[test]
    fn purification_abstracts_each_alien_once() {
        let (gamma2, defs) = purify(&mixed_example());
        // three abstracted aliens plus two equations through the
        // bridging variable: five purified equations in total
        assert_eq!(defs.len(), 3);
        assert_eq!(gamma2.len(), 5);
        assert!(gamma2.iter().all(|eq| {
            let th = eq.theory;
            eq.lhs.is_pure(th) && eq.rhs.is_pure(th)
        }));
        // one std equation binds the bridge to the lhs encryption, one
        // xor equation relates it to the three abstracted summands
        let bridge_std = gamma2.iter().any(|eq| {
            eq.theory == Theory::Std
                && eq.lhs.is_variable()
                && matches!(eq.rhs, Term::PEnc(..))
                && !defs.keys().any(|v| Term::Variable(v.clone()) == eq.lhs)
        });
        let bridge_acun = gamma2.iter().any(|eq| {
            eq.theory == Theory::Acun
                && matches!(&eq.rhs, Term::Xor(parts) if parts.len() == 3
                    && parts.iter().all(Term::is_variable))
        });
        assert!(bridge_std && bridge_acun);
    }

    #[test]
    fn purify_keeps_pure_problems_unchanged() {
        let p = UnificationProblem::single(
            Term::penc(na(), Term::pk(av("B"))),
            Term::penc(nv("X"), Term::pk(b())),
        );
        let (gamma2, defs) = purify(&p);
        assert!(defs.is_empty());
        assert_eq!(gamma2.len(), 1);
        assert_eq!(gamma2[0].theory, Theory::Std);
    }

    #[test]
    fn purify_single_alien() {
        // X =? a (+) {m}_k  becomes  X =? V (+) a  plus  V =? {m}_k
        let enc = Term::penc(Term::cst("m", Sort::Nonce), Term::cst("k", Sort::Key));
        let p = UnificationProblem::single(nv("X"), Term::xor(vec![a(), enc.clone()]));
        let (gamma2, defs) = purify(&p);
        assert_eq!(defs.len(), 1);
        let (v, t) = defs.iter().next().unwrap();
        assert_eq!(t, &enc);
        let main = gamma2.iter().find(|e| e.theory == Theory::Acun).unwrap();
        assert_eq!(main.lhs, nv("X"));
        assert_eq!(main.rhs, Term::xor(vec![a(), Term::Variable(v.clone())]));
    }

    #[test]
    fn identification_counts_are_bell_numbers() {
        let mk = |names: &[&str]| -> BTreeSet<Var> {
            names.iter().map(|n| Var::new(*n, Sort::Nonce)).collect()
        };
        assert_eq!(enumerate_identifications(&mk(&[]), 8).unwrap().count(), 1);
        assert_eq!(enumerate_identifications(&mk(&["Y", "Z"]), 8).unwrap().count(), 2);
        assert_eq!(enumerate_identifications(&mk(&["X", "Y", "Z"]), 8).unwrap().count(), 5);
        assert_eq!(
            enumerate_identifications(&mk(&["U", "V", "W", "X", "Y", "Z"]), 8).unwrap().count(),
            203
        );
        assert!(enumerate_identifications(&mk(&["A", "B", "C"]), 2).is_err());
    }

    #[test]
    fn split_with_everything_owned_by_std_grounds_the_xor_half() {
        let w = Var::new("W", Sort::Nonce);
        let x = Var::new("X", Sort::Nonce);
        let gamma3 = vec![PurifiedEquation {
            lhs: Term::Variable(w.clone()),
            rhs: Term::Variable(x.clone()),
            theory: Theory::Acun,
        }];
        let v1: BTreeSet<Var> = [w, x].into_iter().collect();
        let v2 = BTreeSet::new();
        let mut ctr = 0;
        let (g51, g52, alpha, beta) = split_and_abstract(&gamma3, &v1, &v2, &mut ctr);
        assert!(g51.is_empty());
        assert!(alpha.is_empty());
        assert_eq!(beta.len(), 2);
        assert_eq!(g52.len(), 1);
        assert!(g52[0].lhs.is_constant() && g52[0].rhs.is_constant());
        assert_ne!(g52[0].lhs, g52[0].rhs);
    }

    #[test]
    fn combine_returns_sigma1_when_the_other_side_is_empty() {
        let v1: BTreeSet<Var> = [Var::new("A", Sort::Agent)].into_iter().collect();
        let v2 = BTreeSet::new();
        let sigma1 = Substitution::singleton(Var::new("A", Sort::Agent), b());
        let (c, _) = combine(&sigma1, &Substitution::new(), &v1, &v2, &BTreeMap::new()).unwrap();
        assert_eq!(c, sigma1);
        let (c, _) = combine(
            &Substitution::new(),
            &Substitution::new(),
            &BTreeSet::new(),
            &BTreeSet::new(),
            &BTreeMap::new(),
        )
        .unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn mixed_example_end_to_end() {
        let p = mixed_example();
        let us = unify_sua(&p, &BscaConfig::default()).unwrap();
        assert!(!us.is_empty());
        let expect_a = Var::new("A", Sort::Agent);
        let expect_b = Var::new("B", Sort::Agent);
        let expect_nb = Var::new("NB", Sort::Nonce);
        let found = us.iter().any(|u| {
            u.get(&expect_a) == Some(&b())
                && u.get(&expect_b) == Some(&a())
                && u.get(&expect_nb) == Some(&na())
        });
        assert!(found, "expected {{b/A, a/B, na/NB}} among {us:?}");
        for u in &us {
            for (l, r) in &p.equations {
                assert_eq!(u.apply(l), u.apply(r));
            }
        }
    }

    #[test]
    fn tagged_summands_do_not_unify() {
        // [4,NA] (+) [5,b] =? [4,na] (+) [5,eps] has no unifier
        let lhs = Term::xor(vec![
            Term::seq(vec![Term::tag(4), nv("NA")]),
            Term::seq(vec![Term::tag(5), b()]),
        ]);
        let rhs = Term::xor(vec![
            Term::seq(vec![Term::tag(4), na()]),
            Term::seq(vec![Term::tag(5), crate::term::attacker()]),
        ]);
        let us = unify_sua(&UnificationProblem::single(lhs, rhs), &BscaConfig::default()).unwrap();
        assert!(us.is_empty(), "unexpected unifiers: {us:?}");
    }

    #[test]
    fn untagged_summands_unify_with_the_type_flaw() {
        let lhs = Term::xor(vec![nv("NA"), b()]);
        let rhs = Term::xor(vec![na(), crate::term::attacker()]);
        let us = unify_sua(&UnificationProblem::single(lhs, rhs), &BscaConfig::default()).unwrap();
        let expected = Term::xor(vec![na(), b(), crate::term::attacker()]);
        assert!(us.iter().any(|u| u.get(&Var::new("NA", Sort::Nonce)) == Some(&expected)));
    }

    #[test]
    fn identity_problem_unifies_trivially() {
        let t = Term::penc(Term::xor(vec![na(), b()]), Term::pk(a()));
        let us =
            unify_sua(&UnificationProblem::single(t.clone(), t), &BscaConfig::default()).unwrap();
        assert!(us.contains(&Substitution::new()));
    }

    #[test]
    fn trace_contains_the_all_std_ownership_branch() {
        let p = mixed_example();
        let (_, trace) = unify_sua_traced(&p, &BscaConfig::default()).unwrap();
        // the branch where the xor half goes fully ground and fails:
        // singleton identification except {Y,Z}, every variable owned by
        // the standard side
        let found = trace.branches.iter().any(|br| {
            br.v2.is_empty()
                && !br.gamma52.is_empty()
                && br.gamma52_is_ground()
                && br.sigma2s.is_empty()
        });
        assert!(found, "no ground-failure branch recorded");
    }
}
