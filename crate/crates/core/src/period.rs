//! The period semiring: coalesced temporal elements with pointwise addition,
//! multiplication and monus followed by coalescing.

use std::fmt;

use crate::error::{Error, Result};
use crate::semiring::{SemiringSpec, SemiringValue};
use crate::telement::{Interval, TemporalElement, Tick, TimeDomain};

/// A temporal element in normal form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PeriodValue(TemporalElement);

impl PeriodValue {
    /// Coalesces `element`.
    pub fn new(element: &TemporalElement) -> Result<Self> {
        element.coalesce().map(PeriodValue)
    }

    pub fn zero(spec: SemiringSpec, domain: TimeDomain) -> Self {
        PeriodValue(TemporalElement::empty(spec, domain))
    }

    /// `one` over the whole domain.
    pub fn one(spec: SemiringSpec, domain: TimeDomain) -> Self {
        PeriodValue::constant(spec, domain, domain.full(), spec.one())
    }

    /// `value` over `interval`, zero elsewhere.
    pub fn constant(
        spec: SemiringSpec,
        domain: TimeDomain,
        interval: Interval,
        value: SemiringValue,
    ) -> Self {
        let support = if spec.is_zero(value) {
            Vec::new()
        } else {
            vec![(interval, value)]
        };
        PeriodValue(TemporalElement::from_sorted_unchecked(spec, domain, support))
    }

    pub fn element(&self) -> &TemporalElement {
        &self.0
    }

    pub fn into_element(self) -> TemporalElement {
        self.0
    }

    pub fn spec(&self) -> SemiringSpec {
        self.0.spec()
    }

    pub fn domain(&self) -> TimeDomain {
        self.0.domain()
    }

    pub fn support(&self) -> &[(Interval, SemiringValue)] {
        self.0.support()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn timeslice(&self, t: Tick) -> Result<SemiringValue> {
        self.0.timeslice(t)
    }

    /// Value at `t`, found by binary search over the disjoint support.
    pub(crate) fn value_at(&self, t: Tick) -> SemiringValue {
        let support = self.0.support();
        let idx = support.partition_point(|(i, _)| i.end() <= t);
        match support.get(idx) {
            Some((i, v)) if i.contains(t) => *v,
            _ => self.spec().zero(),
        }
    }

    fn check_compatible(&self, other: &PeriodValue) -> Result<()> {
        if self.spec() != other.spec() {
            return Err(Error::SpecMismatch);
        }
        if self.domain() != other.domain() {
            return Err(Error::DomainMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &PeriodValue) -> Result<PeriodValue> {
        self.check_compatible(other)?;
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.is_zero() {
            return Ok(other.clone());
        }
        PeriodValue::new(&add_pointwise(&self.0, &other.0)?)
    }

    /// Adds any number of values with a single coalesce at the end.
    pub fn sum<'a>(
        spec: SemiringSpec,
        domain: TimeDomain,
        values: impl IntoIterator<Item = &'a PeriodValue>,
    ) -> Result<PeriodValue> {
        let mut pairs = Vec::new();
        let mut count = 0usize;
        let mut last = None;
        for v in values {
            if v.spec() != spec {
                return Err(Error::SpecMismatch);
            }
            if v.domain() != domain {
                return Err(Error::DomainMismatch);
            }
            pairs.extend_from_slice(v.support());
            count += 1;
            last = Some(v);
        }
        match (count, last) {
            (0, _) => Ok(PeriodValue::zero(spec, domain)),
            (1, Some(v)) => Ok(v.clone()),
            _ => PeriodValue::new(&TemporalElement::new(spec, domain, pairs)?),
        }
    }

    pub fn mul(&self, other: &PeriodValue) -> Result<PeriodValue> {
        self.check_compatible(other)?;
        let spec = self.spec();
        // both supports are sorted and disjoint, so a merge finds every
        // overlapping pair
        let (a, b) = (self.support(), other.support());
        let (mut i, mut j) = (0, 0);
        let mut pieces = Vec::new();
        while i < a.len() && j < b.len() {
            let (ia, va) = a[i];
            let (ib, vb) = b[j];
            if let Some(common) = ia.intersect(&ib) {
                let v = spec.mul(va, vb)?;
                if !spec.is_zero(v) {
                    pieces.push((common, v));
                }
            }
            if ia.end() <= ib.end() {
                i += 1;
            } else {
                j += 1;
            }
        }
        let raw = TemporalElement::from_sorted_unchecked(spec, self.domain(), pieces);
        PeriodValue::new(&raw)
    }

    /// Pointwise truncating minus, computed on the pieces cut by both
    /// operands' interval boundaries.
    pub fn monus(&self, other: &PeriodValue) -> Result<PeriodValue> {
        self.check_compatible(other)?;
        if other.is_zero() || self.is_zero() {
            return Ok(self.clone());
        }
        let spec = self.spec();
        let b = other.support();
        let mut j = 0;
        let mut pieces = Vec::new();
        let mut push = |begin: Tick, end: Tick, v: SemiringValue| {
            if !spec.is_zero(v) {
                pieces.push((Interval::new_unchecked(begin, end), v));
            }
        };
        for &(ia, va) in self.support() {
            let mut cursor = ia.begin();
            while cursor < ia.end() {
                while j < b.len() && b[j].0.end() <= cursor {
                    j += 1;
                }
                match b.get(j) {
                    Some(&(ib, vb)) if ib.begin() <= cursor => {
                        let end = ia.end().min(ib.end());
                        push(cursor, end, spec.monus(va, vb)?);
                        cursor = end;
                    }
                    Some(&(ib, _)) => {
                        let end = ia.end().min(ib.begin());
                        push(cursor, end, va);
                        cursor = end;
                    }
                    None => {
                        push(cursor, ia.end(), va);
                        cursor = ia.end();
                    }
                }
            }
        }
        let raw = TemporalElement::from_sorted_unchecked(spec, self.domain(), pieces);
        PeriodValue::new(&raw)
    }
}

impl fmt::Display for PeriodValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Pointwise sum without coalescing: the union of both supports, values of
/// identical intervals added.
pub fn add_pointwise(a: &TemporalElement, b: &TemporalElement) -> Result<TemporalElement> {
    if a.spec() != b.spec() {
        return Err(Error::SpecMismatch);
    }
    if a.domain() != b.domain() {
        return Err(Error::DomainMismatch);
    }
    TemporalElement::new(
        a.spec(),
        a.domain(),
        a.support().iter().chain(b.support()).copied(),
    )
}

/// Pointwise product without coalescing: every pair of support intervals
/// contributes the product of their values on their intersection.
pub fn mul_pointwise(a: &TemporalElement, b: &TemporalElement) -> Result<TemporalElement> {
    if a.spec() != b.spec() {
        return Err(Error::SpecMismatch);
    }
    if a.domain() != b.domain() {
        return Err(Error::DomainMismatch);
    }
    let spec = a.spec();
    let mut pairs = Vec::new();
    for (ia, va) in a.support() {
        for (ib, vb) in b.support() {
            if let Some(common) = ia.intersect(ib) {
                pairs.push((common, spec.mul(*va, *vb)?));
            }
        }
    }
    TemporalElement::new(spec, a.domain(), pairs)
}
