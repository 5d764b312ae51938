//! Annotation domains: commutative semirings with a natural order and a
//! monus. Two instances are supported, `B` (set semantics) and `N`
//! (multiset semantics). Dispatch happens on a runtime tag so one engine can
//! serve both.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SemiringKind {
    /// `(B, or, and, false, true)`
    Set,
    /// `(N, +, *, 0, 1)`
    Bag,
}

impl SemiringKind {
    fn tag(self) -> &'static str {
        match self {
            SemiringKind::Set => "bool",
            SemiringKind::Bag => "nat",
        }
    }
}

/// A single annotation. The variant must agree with the [`SemiringSpec`] used
/// to combine it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SemiringValue {
    Bool(bool),
    Nat(u64),
}

impl SemiringValue {
    fn tag(self) -> &'static str {
        match self {
            SemiringValue::Bool(_) => "bool",
            SemiringValue::Nat(_) => "nat",
        }
    }

    /// Multiplicity under bag semantics; `true` counts once.
    pub fn multiplicity(self) -> u64 {
        match self {
            SemiringValue::Bool(b) => u64::from(b),
            SemiringValue::Nat(n) => n,
        }
    }
}

impl fmt::Display for SemiringValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemiringValue::Bool(b) => write!(f, "{b}"),
            SemiringValue::Nat(n) => write!(f, "{n}"),
        }
    }
}

/// Operation table of the active semiring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SemiringSpec {
    kind: SemiringKind,
}

impl SemiringSpec {
    pub const SET: SemiringSpec = SemiringSpec {
        kind: SemiringKind::Set,
    };
    pub const BAG: SemiringSpec = SemiringSpec {
        kind: SemiringKind::Bag,
    };

    pub fn new(kind: SemiringKind) -> Self {
        SemiringSpec { kind }
    }

    pub fn kind(self) -> SemiringKind {
        self.kind
    }

    pub fn is_bag(self) -> bool {
        self.kind == SemiringKind::Bag
    }

    pub fn zero(self) -> SemiringValue {
        match self.kind {
            SemiringKind::Set => SemiringValue::Bool(false),
            SemiringKind::Bag => SemiringValue::Nat(0),
        }
    }

    pub fn one(self) -> SemiringValue {
        match self.kind {
            SemiringKind::Set => SemiringValue::Bool(true),
            SemiringKind::Bag => SemiringValue::Nat(1),
        }
    }

    pub fn is_zero(self, k: SemiringValue) -> bool {
        k == self.zero()
    }

    /// Checks that `k` carries this semiring's tag.
    pub fn check(self, k: SemiringValue) -> Result<()> {
        match (self.kind, k) {
            (SemiringKind::Set, SemiringValue::Bool(_))
            | (SemiringKind::Bag, SemiringValue::Nat(_)) => Ok(()),
            _ => Err(Error::TagMismatch {
                expected: self.kind.tag(),
                found: k.tag(),
            }),
        }
    }

    /// Lifts a multiplicity into the semiring: any nonzero count is `true`
    /// under set semantics.
    pub fn from_multiplicity(self, n: u64) -> SemiringValue {
        match self.kind {
            SemiringKind::Set => SemiringValue::Bool(n > 0),
            SemiringKind::Bag => SemiringValue::Nat(n),
        }
    }

    pub fn add(self, k: SemiringValue, k2: SemiringValue) -> Result<SemiringValue> {
        self.binary(k, k2, |a, b| Ok(a || b), |a, b| {
            a.checked_add(b).ok_or(Error::Overflow("semiring addition"))
        })
    }

    pub fn mul(self, k: SemiringValue, k2: SemiringValue) -> Result<SemiringValue> {
        self.binary(k, k2, |a, b| Ok(a && b), |a, b| {
            a.checked_mul(b)
                .ok_or(Error::Overflow("semiring multiplication"))
        })
    }

    /// Truncating minus: the smallest `k''` with `k <= k2 + k''`.
    pub fn monus(self, k: SemiringValue, k2: SemiringValue) -> Result<SemiringValue> {
        self.binary(k, k2, |a, b| Ok(a && !b), |a, b| Ok(a.saturating_sub(b)))
    }

    /// Natural order: `k <= k2` iff some `k''` has `k + k'' = k2`.
    pub fn natural_leq(self, k: SemiringValue, k2: SemiringValue) -> Result<bool> {
        self.check(k)?;
        self.check(k2)?;
        Ok(match (k, k2) {
            (SemiringValue::Bool(a), SemiringValue::Bool(b)) => !a || b,
            (SemiringValue::Nat(a), SemiringValue::Nat(b)) => a <= b,
            _ => unreachable!("tags checked above"),
        })
    }

    fn binary(
        self,
        k: SemiringValue,
        k2: SemiringValue,
        on_bool: impl FnOnce(bool, bool) -> Result<bool>,
        on_nat: impl FnOnce(u64, u64) -> Result<u64>,
    ) -> Result<SemiringValue> {
        self.check(k)?;
        self.check(k2)?;
        match (k, k2) {
            (SemiringValue::Bool(a), SemiringValue::Bool(b)) => on_bool(a, b).map(SemiringValue::Bool),
            (SemiringValue::Nat(a), SemiringValue::Nat(b)) => on_nat(a, b).map(SemiringValue::Nat),
            _ => unreachable!("tags checked above"),
        }
    }
}

impl fmt::Display for SemiringSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SemiringKind::Set => f.write_str("set"),
            SemiringKind::Bag => f.write_str("bag"),
        }
    }
}
