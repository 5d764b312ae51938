use std::fmt;

use crate::telement::Tick;

/// Byte offset plus line/column of a token in query text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("semiring tag mismatch: expected {expected}, found {found}")]
    TagMismatch {
        expected: &'static str,
        found: &'static str,
    },
    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
    #[error("invalid time domain [{min}, {max})")]
    InvalidDomain { min: Tick, max: Tick },
    #[error("invalid interval [{begin}, {end}) in domain [{min}, {max})")]
    InvalidInterval {
        begin: Tick,
        end: Tick,
        min: Tick,
        max: Tick,
    },
    #[error("tick {tick} outside domain [{min}, {max})")]
    TickOutOfDomain { tick: Tick, min: Tick, max: Tick },
    #[error("operands use different semirings")]
    SpecMismatch,
    #[error("operands use different time domains")]
    DomainMismatch,
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("duplicate attribute `{0}` in output schema")]
    DuplicateAttribute(String),
    #[error("union-incompatible inputs: {0}")]
    UnionIncompatible(String),
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("{0} is not supported for the set semiring")]
    UnsupportedSemiring(&'static str),
    #[error("aggregate {func} requires a numeric argument, `{attr}` is {ty}")]
    NonNumericAggregate {
        func: &'static str,
        attr: String,
        ty: String,
    },
    #[error("malformed row: {0}")]
    MalformedRow(String),
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: Position, msg: String },
    #[error("{path}: row {row}: {msg}")]
    Csv {
        path: String,
        row: usize,
        msg: String,
    },
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
