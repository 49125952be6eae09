//! Command-line front end.
//!
//! Exit status: 0 when the checked property holds, 1 when an attack or
//! violation was found, 2 when bounds left the verdict open, 3 on input
//! errors.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::attack::{check_multi_protocol, check_secrecy, check_type_flaw, Verdict};
use crate::dsl;
use crate::nut::{check_munut, check_nut, insert_tags, TagScheme};
use crate::protocol::{Protocol, SessionPlan, StrandPlan};
use crate::report::{self, Format};
use crate::solver::{SolveBounds, Solver};
use crate::sort::{Sort, TypeExpr};
use crate::term::Cst;
use crate::unify::{unify_sua, BscaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliFormat {
    Text,
    Structured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CliScheme {
    ComponentNumbers,
    ProtocolName,
}

#[derive(Debug, Parser)]
#[command(
    name = "protoxor",
    about = "Symbolic protocol analysis under exclusive-or: unification, attack search, tagging checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Solver bounds as `RULE_APPS,BRANCHES`.
    #[arg(long, global = true, default_value = "64,100000")]
    pub bounds: String,

    /// Cap on the variables of a combined unification problem.
    #[arg(long, global = true, default_value_t = 8)]
    pub bsca_cap: usize,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = CliFormat::Text)]
    pub format: CliFormat,

    /// Session plan, e.g. `A[A=a]; B[A=a, B=b]`. One entry per strand.
    #[arg(long, global = true)]
    pub sessions: Option<String>,

    /// Session plan for the second protocol of `multi`.
    #[arg(long, global = true)]
    pub sessions2: Option<String>,

    /// Seed for randomized corpus generation.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Also write the rendered attack trace to this file.
    #[arg(long, global = true)]
    pub trace_file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the complete unifier set of an equation document.
    Unify { file: PathBuf },
    /// Check the within-protocol tagging discipline.
    CheckNut { file: PathBuf },
    /// Check the cross-protocol tagging discipline of two protocols.
    CheckMunut { file1: PathBuf, file2: PathBuf },
    /// Insert tags and print the transformed protocol.
    Tag {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = CliScheme::ComponentNumbers)]
        scheme: CliScheme,
    },
    /// Solve a constraint-sequence document.
    Solve { file: PathBuf },
    /// Search for secrecy violations and type-flaw attacks.
    Attack { file: PathBuf },
    /// Check a protocol pair for multi-protocol attacks.
    Multi { file1: PathBuf, file2: PathBuf },
}

/// Bounds and knobs shared by every subcommand.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub bounds: SolveBounds,
    pub bsca: BscaConfig,
    pub format: Format,
    pub seed: u64,
    pub sessions: Option<String>,
    pub sessions2: Option<String>,
    pub trace_file: Option<PathBuf>,
}

impl RunConfig {
    fn from_cli(cli: &Cli) -> Result<RunConfig, String> {
        let parts: Vec<&str> = cli.bounds.split(',').collect();
        let (apps, branches) = match parts.as_slice() {
            [a, b] => (
                a.trim().parse::<usize>().map_err(|e| e.to_string())?,
                b.trim().parse::<usize>().map_err(|e| e.to_string())?,
            ),
            _ => return Err("--bounds expects `RULE_APPS,BRANCHES`".into()),
        };
        if apps == 0 || branches == 0 || cli.bsca_cap == 0 {
            return Err("bounds must be positive".into());
        }
        Ok(RunConfig {
            bounds: SolveBounds { max_rule_apps: apps, max_branches: branches },
            bsca: BscaConfig { var_cap: cli.bsca_cap, ..BscaConfig::default() },
            format: match cli.format {
                CliFormat::Text => Format::Text,
                CliFormat::Structured => Format::Structured,
            },
            seed: cli.seed,
            sessions: cli.sessions.clone(),
            sessions2: cli.sessions2.clone(),
            trace_file: cli.trace_file.clone(),
        })
    }
}

/// Default plan: one strand per role, every non-fresh agent variable
/// bound to its lowercased name (an honest session between named
/// agents).
pub fn default_plan(p: &Protocol) -> SessionPlan {
    p.roles
        .iter()
        .map(|r| {
            let mut bindings = BTreeMap::new();
            for v in p.vars() {
                if v.ty == TypeExpr::Atomic(Sort::Agent) && !p.fresh_vars.contains(&v) {
                    bindings.insert(v.name.clone(), Cst::new(v.name.to_lowercase(), Sort::Agent));
                }
            }
            StrandPlan { role: r.name.clone(), bindings }
        })
        .collect()
}

fn plan_for(p: &Protocol, sessions: &Option<String>) -> Result<SessionPlan, String> {
    match sessions {
        Some(s) => dsl::parse_plan(p, s).map_err(|e| e.to_string()),
        None => Ok(default_plan(p)),
    }
}

fn read(path: &PathBuf) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))
}

fn load_protocol(path: &PathBuf) -> Result<Protocol, String> {
    dsl::parse_protocol(&read(path)?).map_err(|e| e.to_string())
}

fn verdict_exit(v: Verdict) -> i32 {
    match v {
        Verdict::Holds => 0,
        Verdict::Violated => 1,
        Verdict::Indeterminate => 2,
    }
}

/// Runs one subcommand; returns the exit status and the report text.
pub fn run_subcommand(cmd: &Command, cfg: &RunConfig) -> Result<(i32, String), String> {
    match cmd {
        Command::Unify { file } => {
            let (problem, _env) = dsl::parse_unify_doc(&read(file)?).map_err(|e| e.to_string())?;
            let us = unify_sua(&problem, &cfg.bsca).map_err(|e| e.to_string())?;
            Ok((0, report::render_unifiers(&problem, &us, cfg.format)))
        }
        Command::CheckNut { file } => {
            let p = load_protocol(file)?;
            let r = check_nut(&p);
            let exit = i32::from(!r.passes());
            Ok((exit, report::render_nut("check-nut", &p.name, &r, cfg.format)))
        }
        Command::CheckMunut { file1, file2 } => {
            let p1 = load_protocol(file1)?;
            let p2 = load_protocol(file2)?;
            let r = check_munut(&p1, &p2);
            let exit = i32::from(!r.passes());
            let label = format!("{}+{}", p1.name, p2.name);
            Ok((exit, report::render_nut("check-munut", &label, &r, cfg.format)))
        }
        Command::Tag { file, scheme } => {
            let p = load_protocol(file)?;
            let scheme = match scheme {
                CliScheme::ComponentNumbers => TagScheme::ComponentNumbers,
                CliScheme::ProtocolName => TagScheme::ProtocolName,
            };
            let tagged = insert_tags(&p, scheme);
            Ok((0, dsl::print_protocol(&tagged)))
        }
        Command::Solve { file } => {
            let (cs, _env) = dsl::parse_solve_doc(&read(file)?).map_err(|e| e.to_string())?;
            let mut solver = Solver::new(cfg.bounds, cfg.bsca);
            let outcome = solver.solve(&cs);
            let exit = if !outcome.solutions.is_empty() {
                1
            } else if outcome.truncated {
                2
            } else {
                0
            };
            Ok((exit, report::render_solve(&outcome, cfg.format)))
        }
        Command::Attack { file } => {
            let p = load_protocol(file)?;
            let plan = plan_for(&p, &cfg.sessions)?;
            let secrecy =
                check_secrecy(&p, &plan, cfg.bounds, cfg.bsca).map_err(|e| e.to_string())?;
            let type_flaw =
                check_type_flaw(&p, &plan, cfg.bounds, cfg.bsca).map_err(|e| e.to_string())?;
            let exit = match (secrecy.verdict, type_flaw.verdict) {
                (Verdict::Violated, _) | (_, Verdict::Violated) => 1,
                (Verdict::Indeterminate, _) | (_, Verdict::Indeterminate) => 2,
                _ => 0,
            };
            let protos = [&p];
            let text = match cfg.format {
                Format::Text => format!(
                    "{}{}",
                    report::render_attack_text(&protos, &secrecy.bundle, &secrecy),
                    report::render_attack_text(&protos, &type_flaw.bundle, &type_flaw)
                ),
                Format::Structured => {
                    let v = serde_json::json!({
                        "command": "attack",
                        "protocol": p.name,
                        "secrecy": report::attack_report_json(&protos, &secrecy.bundle, &secrecy),
                        "type_flaw": report::attack_report_json(&protos, &type_flaw.bundle, &type_flaw),
                        "exit": exit,
                    });
                    format!("{}\n", serde_json::to_string_pretty(&v).unwrap())
                }
            };
            if let Some(path) = &cfg.trace_file {
                let mut trace = String::new();
                for f in secrecy.decisive() {
                    if let Some(s) = f.solutions.first() {
                        trace.push_str(&report::render_trace(&protos, &secrecy.bundle, f, s));
                        trace.push('\n');
                    }
                }
                std::fs::write(path, trace).map_err(|e| e.to_string())?;
            }
            Ok((exit, text))
        }
        Command::Multi { file1, file2 } => {
            let p1 = load_protocol(file1)?;
            let p2 = load_protocol(file2)?;
            let plan1 = plan_for(&p1, &cfg.sessions)?;
            let plan2 = plan_for(&p2, &cfg.sessions2)?;
            let r = check_multi_protocol(&p1, &p2, &plan1, &plan2, cfg.bounds, cfg.bsca)
                .map_err(|e| e.to_string())?;
            let exit = verdict_exit(r.verdict);
            let protos = [&p1, &p2];
            let text = report::render_multi(
                &protos,
                &r.isolation.bundle.clone(),
                &r.combination.bundle.clone(),
                &r,
                cfg.format,
            );
            Ok((exit, text))
        }
    }
}

/// Entry point for the binary: parses arguments, runs, prints, and
/// returns the exit status.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let cfg = match RunConfig::from_cli(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 3;
        }
    };
    match run_subcommand(&cli.command, &cfg) {
        Ok((code, text)) => {
            print!("{text}");
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            3
        }
    }
}
