//! Rendering of analysis results, as plain text or a stable structured
//! (JSON) form. Structured output is byte-identical across runs for
//! identical inputs: all collections are ordered and field names fixed.

use serde_json::{json, Map, Value};

use crate::attack::{AttackKind, AttackReport, Finding, MultiProtocolReport, Verdict};
use crate::nut::NutReport;
use crate::protocol::{Protocol, SemiBundle, Sign};
use crate::solver::SolveOutcome;
use crate::subst::Substitution;
use crate::term::ATTACKER;
use crate::unify::{UnificationProblem, UnifierSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Structured,
}

fn subst_json(s: &Substitution) -> Value {
    let mut m = Map::new();
    for (v, t) in s.iter() {
        m.insert(v.name.clone(), Value::String(t.to_string()));
    }
    Value::Object(m)
}

fn verdict_str(v: Verdict) -> &'static str {
    match v {
        Verdict::Holds => "holds",
        Verdict::Violated => "violated",
        Verdict::Indeterminate => "indeterminate",
    }
}

pub fn render_unifiers(p: &UnificationProblem, us: &UnifierSet, fmt: Format) -> String {
    match fmt {
        Format::Text => {
            let mut out = format!("problem: {p}\n");
            if us.is_empty() {
                out.push_str("no unifiers\n");
            } else {
                out.push_str(&format!("{} unifier(s):\n", us.len()));
                for u in us {
                    out.push_str(&format!("  {u}\n"));
                }
            }
            out
        }
        Format::Structured => {
            let v = json!({
                "command": "unify",
                "equations": p.equations.iter()
                    .map(|(l, r)| format!("{l} = {r}"))
                    .collect::<Vec<_>>(),
                "unifiers": us.iter().map(subst_json).collect::<Vec<_>>(),
                "unifiable": !us.is_empty(),
            });
            format!("{}\n", serde_json::to_string_pretty(&v).unwrap())
        }
    }
}

pub fn render_nut(command: &str, protocol: &str, r: &NutReport, fmt: Format) -> String {
    match fmt {
        Format::Text => {
            let mut out = format!("{command} on {protocol}:\n");
            for (c, ok) in &r.conditions {
                out.push_str(&format!("  {c}: {}\n", if *ok { "pass" } else { "FAIL" }));
            }
            for w in &r.witnesses {
                out.push_str(&format!(
                    "  witness [{}]: {} ~ {} under {}\n",
                    w.condition, w.left, w.right, w.unifier
                ));
            }
            out.push_str(&format!("result: {}\n", if r.passes() { "pass" } else { "fail" }));
            out
        }
        Format::Structured => {
            let v = json!({
                "command": command,
                "protocol": protocol,
                "conditions": r.conditions.iter().map(|(c, ok)| json!({
                    "name": c.to_string(),
                    "pass": ok,
                })).collect::<Vec<_>>(),
                "witnesses": r.witnesses.iter().map(|w| json!({
                    "condition": w.condition.to_string(),
                    "left": w.left.to_string(),
                    "right": w.right.to_string(),
                    "unifier": subst_json(&w.unifier),
                })).collect::<Vec<_>>(),
                "pass": r.passes(),
            });
            format!("{}\n", serde_json::to_string_pretty(&v).unwrap())
        }
    }
}

pub fn render_solve(outcome: &SolveOutcome, fmt: Format) -> String {
    match fmt {
        Format::Text => {
            let mut out = String::new();
            if outcome.solutions.is_empty() {
                out.push_str(if outcome.truncated {
                    "no solution found within bounds (search truncated)\n"
                } else {
                    "not satisfiable\n"
                });
            } else {
                out.push_str(&format!("{} solution(s):\n", outcome.solutions.len()));
                for s in &outcome.solutions {
                    out.push_str(&format!("  {s}\n"));
                }
                if outcome.truncated {
                    out.push_str("(search truncated: the set may be incomplete)\n");
                }
            }
            out
        }
        Format::Structured => {
            let v = json!({
                "command": "solve",
                "solutions": outcome.solutions.iter().map(subst_json).collect::<Vec<_>>(),
                "satisfiable": !outcome.solutions.is_empty(),
                "truncated": outcome.truncated,
                "states_explored": outcome.states_explored,
            });
            format!("{}\n", serde_json::to_string_pretty(&v).unwrap())
        }
    }
}

const SESSION_LABELS: &[&str] = &["α", "β", "γ", "δ", "ζ", "η", "θ"];

fn session_label(i: usize) -> String {
    SESSION_LABELS.get(i).map_or_else(|| format!("s{}", i + 1), |s| (*s).to_string())
}

/// Renders one finding as a message trace in session notation: each
/// strand is a session, sends go to the intruder, receives come from it,
/// and `i(x)` marks the intruder speaking for `x`.
pub fn render_trace(
    protocols: &[&Protocol],
    bundle: &SemiBundle,
    finding: &Finding,
    solution: &Substitution,
) -> String {
    let mut out = String::new();
    for &(si, nj) in &finding.interleaving.order {
        let strand = &bundle.strands[si];
        let proto = protocols.iter().find(|p| p.name == strand.protocol);
        // recover the message this node projects
        let (msg_no, peer_role, is_send) = match proto {
            Some(p) => {
                let mine: Vec<&crate::protocol::Message> = p
                    .messages
                    .iter()
                    .filter(|m| m.sender == strand.role || m.receiver == strand.role)
                    .collect();
                match mine.get(nj) {
                    Some(m) if m.sender == strand.role => (m.index, m.receiver.clone(), true),
                    Some(m) => (m.index, m.sender.clone(), false),
                    None => (nj + 1, "?".into(), strand.nodes[nj].sign == Sign::Plus),
                }
            }
            None => (nj + 1, "?".into(), strand.nodes[nj].sign == Sign::Plus),
        };
        let resolve = |role_var: &str| -> String {
            let v = crate::protocol::strand_var(
                &crate::term::Var::new(role_var, crate::sort::Sort::Agent),
                strand.index,
            );
            let t = solution.apply(&strand.subst.apply(&crate::term::Term::Variable(v)));
            match t {
                crate::term::Term::Constant(c) => c.name,
                other => format!("?{other}"),
            }
        };
        let own = resolve(&strand.role);
        let peer = resolve(&peer_role);
        let intruder =
            if peer == ATTACKER { "i".to_string() } else { format!("i({peer})") };
        let term = solution.apply(&strand.nodes[nj].term);
        let label = session_label(si);
        if is_send {
            out.push_str(&format!("Msg {label}.{msg_no}. {own} -> {intruder} : {term}\n"));
        } else {
            out.push_str(&format!("Msg {label}.{msg_no}. {intruder} -> {own} : {term}\n"));
        }
    }
    out
}

fn finding_json(
    protocols: &[&Protocol],
    bundle: &SemiBundle,
    f: &Finding,
) -> Value {
    json!({
        "secret": f.secret.as_ref().map(|c| c.name.clone()),
        "interleaving": f.interleaving.order.iter()
            .map(|(s, n)| json!([s, n]))
            .collect::<Vec<_>>(),
        "constraints": f.sequence.constraints.iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>(),
        "solutions": f.solutions.iter().map(subst_json).collect::<Vec<_>>(),
        "well_typed_solutions": f.well_typed.iter().map(subst_json).collect::<Vec<_>>(),
        "truncated": f.truncated,
        "trace": f.solutions.first()
            .map(|s| render_trace(protocols, bundle, f, s))
            .unwrap_or_default()
            .lines().map(Value::from).collect::<Vec<_>>(),
    })
}

fn kind_str(k: AttackKind) -> &'static str {
    match k {
        AttackKind::Secrecy => "secrecy",
        AttackKind::TypeFlaw => "type-flaw",
        AttackKind::MultiProtocol => "multi-protocol",
    }
}

pub fn attack_report_json(
    protocols: &[&Protocol],
    bundle: &SemiBundle,
    r: &AttackReport,
) -> Value {
    json!({
        "kind": kind_str(r.kind),
        "protocol": r.protocol,
        "verdict": verdict_str(r.verdict),
        "truncated": r.truncated,
        "findings": r.findings.iter()
            .map(|f| finding_json(protocols, bundle, f))
            .collect::<Vec<_>>(),
    })
}

pub fn render_attack_text(
    protocols: &[&Protocol],
    bundle: &SemiBundle,
    r: &AttackReport,
) -> String {
    let mut out = format!(
        "{} check on {}: {}\n",
        kind_str(r.kind),
        r.protocol,
        verdict_str(r.verdict)
    );
    for f in r.decisive() {
        match (&f.secret, r.kind) {
            (Some(c), _) => out.push_str(&format!("  secret {} is derivable\n", c.name)),
            (None, _) => out.push_str("  sequence satisfiable only ill-typed\n"),
        }
        for s in &f.solutions {
            let tag = if s.is_well_typed() { "well-typed" } else { "ill-typed" };
            out.push_str(&format!("    solution ({tag}): {s}\n"));
        }
        if let Some(s) = f.solutions.first() {
            for line in render_trace(protocols, bundle, f, s).lines() {
                out.push_str(&format!("    {line}\n"));
            }
        }
    }
    if r.verdict == Verdict::Indeterminate {
        out.push_str("  (bounds were hit; the verdict is open)\n");
    }
    out
}

pub fn render_multi(
    protocols: &[&Protocol],
    iso_bundle: &SemiBundle,
    comb_bundle: &SemiBundle,
    r: &MultiProtocolReport,
    fmt: Format,
) -> String {
    match fmt {
        Format::Text => {
            let mut out = String::new();
            out.push_str(&render_attack_text(protocols, iso_bundle, &r.isolation));
            out.push_str(&render_attack_text(protocols, comb_bundle, &r.combination));
            out.push_str(&format!("multi-protocol verdict: {}\n", verdict_str(r.verdict)));
            out
        }
        Format::Structured => {
            let v = json!({
                "command": "multi",
                "isolation": attack_report_json(protocols, iso_bundle, &r.isolation),
                "combination": attack_report_json(protocols, comb_bundle, &r.combination),
                "verdict": verdict_str(r.verdict),
            });
            format!("{}\n", serde_json::to_string_pretty(&v).unwrap())
        }
    }
}
