//! Atomic sorts and structural types.
//!
//! Every variable and constant carries a type. Atoms have atomic sorts;
//! compound terms have constructed types that mirror the term shape, so
//! `[1, NA, A]` under `pk(B)` has the type
//! `penc(sequence(tag, nonce, agent), pk(agent))`.

use std::fmt;

use serde::Serialize;

/// Sort of an atomic value.
///
/// `Zero` is reserved for the xor unity and is never declared in a
/// protocol description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sort {
    Agent,
    Nonce,
    Key,
    Tag,
    Number,
    Text,
    Zero,
}

impl Sort {
    pub fn name(self) -> &'static str {
        match self {
            Sort::Agent => "agent",
            Sort::Nonce => "nonce",
            Sort::Key => "key",
            Sort::Tag => "tag",
            Sort::Number => "number",
            Sort::Text => "text",
            Sort::Zero => "zero",
        }
    }

    /// Parses a sort keyword as it appears in protocol declarations.
    pub fn parse(s: &str) -> Option<Sort> {
        Some(match s {
            "agent" => Sort::Agent,
            "nonce" => Sort::Nonce,
            "key" => Sort::Key,
            "tag" => Sort::Tag,
            "number" => Sort::Number,
            "text" => Sort::Text,
            _ => return None,
        })
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Constructor label used in constructed types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OpTag {
    Sequence,
    PEnc,
    SEnc,
    Pk,
    Sh,
    Hash,
    Sig,
    Xor,
}

impl OpTag {
    pub fn name(self) -> &'static str {
        match self {
            OpTag::Sequence => "sequence",
            OpTag::PEnc => "penc",
            OpTag::SEnc => "senc",
            OpTag::Pk => "pk",
            OpTag::Sh => "sh",
            OpTag::Hash => "hash",
            OpTag::Sig => "sig",
            OpTag::Xor => "xor",
        }
    }
}

/// Structural type of a term: the constructor applied to argument types.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeExpr {
    Atomic(Sort),
    Constructed(OpTag, Vec<TypeExpr>),
}

impl TypeExpr {
    pub fn is_atomic(&self) -> bool {
        matches!(self, TypeExpr::Atomic(_))
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Atomic(s) => write!(f, "{s}"),
            TypeExpr::Constructed(op, args) => {
                write!(f, "{}(", op.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}
