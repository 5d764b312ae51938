//! Intervals over a finite integer time domain and temporal K-elements: the
//! annotation history of one tuple as a map from intervals to semiring values.
//!
//! Overlapping intervals are allowed in a general element; their values sum
//! at every tick they share. [`TemporalElement::coalesce`] produces the unique
//! normal form: disjoint maximal intervals with constant, nonzero values where
//! touching intervals carry different values.

use std::fmt;

use crate::error::{Error, Result};
use crate::semiring::{SemiringSpec, SemiringValue};

/// Discrete time point.
pub type Tick = i64;

/// Half-open range `[min, max)` of ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TimeDomain {
    min: Tick,
    max: Tick,
}

impl TimeDomain {
    pub fn new(min: Tick, max: Tick) -> Result<Self> {
        if min >= max {
            return Err(Error::InvalidDomain { min, max });
        }
        Ok(TimeDomain { min, max })
    }

    pub fn min(&self) -> Tick {
        self.min
    }

    pub fn max(&self) -> Tick {
        self.max
    }

    /// Number of ticks.
    pub fn len(&self) -> u64 {
        self.max.abs_diff(self.min)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: Tick) -> bool {
        self.min <= t && t < self.max
    }

    pub fn ticks(&self) -> std::ops::Range<Tick> {
        self.min..self.max
    }

    pub fn check_tick(&self, t: Tick) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::TickOutOfDomain {
                tick: t,
                min: self.min,
                max: self.max,
            })
        }
    }

    /// The whole domain as one interval.
    pub fn full(&self) -> Interval {
        Interval {
            begin: self.min,
            end: self.max,
        }
    }

    pub fn check_interval(&self, i: Interval) -> Result<()> {
        if self.min <= i.begin && i.end <= self.max {
            Ok(())
        } else {
            Err(Error::InvalidInterval {
                begin: i.begin,
                end: i.end,
                min: self.min,
                max: self.max,
            })
        }
    }
}

impl fmt::Display for TimeDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.min, self.max)
    }
}

/// Nonempty half-open interval `[begin, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    begin: Tick,
    end: Tick,
}

impl Interval {
    pub fn new(begin: Tick, end: Tick) -> Result<Self> {
        if begin >= end {
            return Err(Error::InvalidInterval {
                begin,
                end,
                min: begin,
                max: end,
            });
        }
        Ok(Interval { begin, end })
    }

    /// Caller guarantees `begin < end`.
    pub(crate) fn new_unchecked(begin: Tick, end: Tick) -> Self {
        debug_assert!(begin < end, "empty interval [{begin}, {end})");
        Interval { begin, end }
    }

    pub fn begin(&self) -> Tick {
        self.begin
    }

    pub fn end(&self) -> Tick {
        self.end
    }

    pub fn len(&self) -> u64 {
        self.end.abs_diff(self.begin)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: Tick) -> bool {
        self.begin <= t && t < self.end
    }

    pub fn overlaps(&self, other: &Interval) -> bool {
        self.begin < other.end && other.begin < self.end
    }

    /// `self` ends exactly where `other` begins, or the other way round.
    pub fn is_adjacent(&self, other: &Interval) -> bool {
        self.end == other.begin || other.end == self.begin
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let begin = self.begin.max(other.begin);
        let end = self.end.min(other.end);
        (begin < end).then_some(Interval { begin, end })
    }

    /// Smallest interval covering both; only a set union when they overlap or
    /// touch.
    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            begin: self.begin.min(other.begin),
            end: self.end.max(other.end),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.begin, self.end)
    }
}

/// A finite map from intervals to nonzero semiring values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TemporalElement {
    spec: SemiringSpec,
    domain: TimeDomain,
    // sorted by interval, keys unique, values nonzero
    support: Vec<(Interval, SemiringValue)>,
}

impl TemporalElement {
    pub fn empty(spec: SemiringSpec, domain: TimeDomain) -> Self {
        TemporalElement {
            spec,
            domain,
            support: Vec::new(),
        }
    }

    /// Builds an element from interval/value pairs. Pairs that name the same
    /// interval are added together and zero values are dropped.
    pub fn new(
        spec: SemiringSpec,
        domain: TimeDomain,
        pairs: impl IntoIterator<Item = (Interval, SemiringValue)>,
    ) -> Result<Self> {
        let mut support: Vec<(Interval, SemiringValue)> = Vec::new();
        for (interval, value) in pairs {
            spec.check(value)?;
            domain.check_interval(interval)?;
            support.push((interval, value));
        }
        support.sort_by_key(|(i, _)| *i);
        let mut merged: Vec<(Interval, SemiringValue)> = Vec::with_capacity(support.len());
        for (interval, value) in support {
            match merged.last_mut() {
                Some((last, acc)) if *last == interval => *acc = spec.add(*acc, value)?,
                _ => merged.push((interval, value)),
            }
        }
        merged.retain(|(_, v)| !spec.is_zero(*v));
        Ok(TemporalElement {
            spec,
            domain,
            support: merged,
        })
    }

    /// Convenience constructor for bag elements from `(begin, end, count)`.
    pub fn from_counts(domain: TimeDomain, entries: &[(Tick, Tick, u64)]) -> Result<Self> {
        let pairs = entries
            .iter()
            .map(|&(b, e, n)| Ok((Interval::new(b, e)?, SemiringValue::Nat(n))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(SemiringSpec::BAG, domain, pairs)
    }

    /// Caller guarantees sorted unique intervals inside the domain and nonzero
    /// values of the right tag.
    pub(crate) fn from_sorted_unchecked(
        spec: SemiringSpec,
        domain: TimeDomain,
        support: Vec<(Interval, SemiringValue)>,
    ) -> Self {
        debug_assert!(support.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(support.iter().all(|(_, v)| !spec.is_zero(*v)));
        TemporalElement {
            spec,
            domain,
            support,
        }
    }

    pub fn spec(&self) -> SemiringSpec {
        self.spec
    }

    pub fn domain(&self) -> TimeDomain {
        self.domain
    }

    pub fn support(&self) -> &[(Interval, SemiringValue)] {
        &self.support
    }

    pub fn into_support(self) -> Vec<(Interval, SemiringValue)> {
        self.support
    }

    /// True when no interval carries a nonzero value.
    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    /// Value at tick `t`: the sum of the values of all intervals containing
    /// it.
    pub fn timeslice(&self, t: Tick) -> Result<SemiringValue> {
        self.domain.check_tick(t)?;
        self.support
            .iter()
            .filter(|(i, _)| i.contains(t))
            .try_fold(self.spec.zero(), |acc, (_, v)| self.spec.add(acc, *v))
    }

    /// Partitions the domain at every interval endpoint and returns the
    /// (constant) value of each piece, zero pieces included.
    pub fn segments(&self) -> Result<Vec<(Interval, SemiringValue)>> {
        let mut events: Vec<(Tick, i128)> = Vec::with_capacity(self.support.len() * 2 + 2);
        events.push((self.domain.min, 0));
        events.push((self.domain.max, 0));
        for (i, v) in &self.support {
            let n = i128::from(v.multiplicity());
            events.push((i.begin, n));
            events.push((i.end, -n));
        }
        events.sort_unstable_by_key(|(t, _)| *t);

        let mut out = Vec::with_capacity(events.len());
        let mut running: i128 = 0;
        let mut idx = 0;
        while idx < events.len() {
            let t = events[idx].0;
            while idx < events.len() && events[idx].0 == t {
                running += events[idx].1;
                idx += 1;
            }
            if idx < events.len() {
                let next = events[idx].0;
                out.push((Interval::new_unchecked(t, next), self.running_value(running)?));
            }
        }
        Ok(out)
    }

    fn running_value(&self, running: i128) -> Result<SemiringValue> {
        debug_assert!(running >= 0);
        if self.spec.is_bag() {
            u64::try_from(running)
                .map(SemiringValue::Nat)
                .map_err(|_| Error::Overflow("temporal element sum"))
        } else {
            Ok(SemiringValue::Bool(running > 0))
        }
    }

    /// Maximal intervals of constant value covering the whole domain.
    fn constant_runs(&self) -> Result<Vec<(Interval, SemiringValue)>> {
        let mut runs: Vec<(Interval, SemiringValue)> = Vec::new();
        for (interval, value) in self.segments()? {
            match runs.last_mut() {
                Some((last, v)) if *v == value => *last = last.hull(&interval),
                _ => runs.push((interval, value)),
            }
        }
        Ok(runs)
    }

    /// `tMin` followed by every tick whose value differs from the previous
    /// tick's.
    pub fn changepoints(&self) -> Result<Vec<Tick>> {
        Ok(self
            .constant_runs()?
            .into_iter()
            .map(|(i, _)| i.begin)
            .collect())
    }

    /// Intervals between consecutive changepoints, the last one closed by
    /// `tMax`.
    pub fn change_intervals(&self) -> Result<Vec<Interval>> {
        Ok(self.constant_runs()?.into_iter().map(|(i, _)| i).collect())
    }

    /// The normal form of this element.
    pub fn coalesce(&self) -> Result<TemporalElement> {
        let support = self
            .constant_runs()?
            .into_iter()
            .filter(|(_, v)| !self.spec.is_zero(*v))
            .collect();
        Ok(TemporalElement {
            spec: self.spec,
            domain: self.domain,
            support,
        })
    }

    /// Disjoint support, no zero values, touching intervals differ.
    pub fn is_normalized(&self) -> bool {
        self.support.iter().all(|(_, v)| !self.spec.is_zero(*v))
            && self.support.windows(2).all(|w| {
                let (a, va) = w[0];
                let (b, vb) = w[1];
                a.end <= b.begin && (a.end < b.begin || va != vb)
            })
    }

    /// Agreement at every tick.
    pub fn snapshot_eq(&self, other: &TemporalElement) -> Result<bool> {
        if self.spec != other.spec {
            return Err(Error::SpecMismatch);
        }
        if self.domain != other.domain {
            return Err(Error::DomainMismatch);
        }
        Ok(self.coalesce()? == other.coalesce()?)
    }
}

impl fmt::Display for TemporalElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (n, (i, v)) in self.support.iter().enumerate() {
            if n > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{i} -> {v}")?;
        }
        f.write_str("}")
    }
}
