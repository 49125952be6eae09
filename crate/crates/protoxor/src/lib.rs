//! Symbolic analysis of cryptographic protocols that use exclusive-or.
//!
//! The crate models protocol messages as terms kept canonical modulo the
//! algebraic laws of xor, unifies them syntactically, over the xor
//! theory, and in the disjoint combination of both, searches for attacks
//! by reducing symbolic constraint sequences, and statically checks the
//! tagging disciplines that rule type-flaw and multi-protocol attacks
//! out.
//!
//! Start with the runnable examples (`cargo run --example nsl_attack`)
//! or the `protoxor` command-line tool.

pub mod attack;
pub mod cli;
pub mod constraints;
pub mod corpus;
pub mod dsl;
pub mod nut;
pub mod oracle;
pub mod protocol;
pub mod report;
pub mod solver;
pub mod sort;
pub mod subst;
pub mod term;
pub mod unify;

pub use sort::{OpTag, Sort, TypeExpr};
pub use subst::Substitution;
pub use term::{attacker, Cst, Term, Theory, Var};
