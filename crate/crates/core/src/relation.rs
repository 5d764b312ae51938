//! Tuples, K-relations and their temporal counterparts.
//!
//! Three levels describe the same temporal database:
//!
//! * [`SnapshotKDatabase`]: one [`KRelation`] per tick,
//! * [`PeriodKRelation`]: each tuple annotated with a coalesced
//!   [`PeriodValue`],
//! * [`SqlPeriodRelation`]: a bag of rows carrying a begin/end pair.
//!
//! [`PeriodKRelation::from_snapshots`] / [`PeriodKRelation::to_snapshots`] map
//! between the first two, [`period_enc`] / [`period_enc_inv`] between the last
//! two.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, Zero};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::period::PeriodValue;
use crate::semiring::{SemiringSpec, SemiringValue};
use crate::telement::{Interval, TemporalElement, Tick, TimeDomain};

/// Exact rational number.
pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DataType {
    Int,
    Rational,
    Str,
}

impl DataType {
    pub fn is_numeric(self) -> bool {
        matches!(self, DataType::Int | DataType::Rational)
    }

    /// Whether values of the two types can be compared or unioned.
    pub fn compatible(self, other: DataType) -> bool {
        self == other || (self.is_numeric() && other.is_numeric())
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataType::Int => "int",
            DataType::Rational => "rational",
            DataType::Str => "str",
        })
    }
}

impl std::str::FromStr for DataType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "int" => Ok(DataType::Int),
            "rational" | "rat" | "decimal" => Ok(DataType::Rational),
            "str" | "string" | "text" => Ok(DataType::Str),
            other => Err(Error::TypeMismatch(format!("unknown type `{other}`"))),
        }
    }
}

/// A scalar attribute value.
///
/// Equality is structural, so `Null == Null`; that is what grouping uses.
/// Predicates go through [`Value::sql_cmp`], under which `Null` compares
/// with nothing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Null,
    Int(i64),
    Rat(Rational),
    Str(String),
}

impl Value {
    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }

    pub fn data_type(&self) -> Option<DataType> {
        match self {
            Value::Null => None,
            Value::Int(_) => Some(DataType::Int),
            Value::Rat(_) => Some(DataType::Rational),
            Value::Str(_) => Some(DataType::Str),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_rational(&self) -> Option<Rational> {
        match self {
            Value::Int(i) => Some(Rational::from_integer(i128::from(*i))),
            Value::Rat(r) => Some(*r),
            _ => None,
        }
    }

    /// Comparison as used by predicates: `None` when either side is `Null`
    /// or the types are not comparable.
    pub fn sql_cmp(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (a, b) => Some(a.as_rational()?.cmp(&b.as_rational()?)),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Int(_) | Value::Rat(_) => 1,
            Value::Str(_) => 2,
        }
    }
}

/// Total order for canonical output: `Null` first, then numbers by value,
/// then strings. Numerically equal `Int`/`Rat` pairs order `Int` first.
impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            (Value::Null, Value::Null) => Ordering::Equal,
            (a, b) if a.rank() == 1 && b.rank() == 1 => {
                let (x, y) = (a.as_rational().unwrap(), b.as_rational().unwrap());
                x.cmp(&y).then_with(|| {
                    matches!(b, Value::Int(_)).cmp(&matches!(a, Value::Int(_)))
                })
            }
            (a, b) => a.rank().cmp(&b.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Rat(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Value::Rat(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Value::Str(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_owned())
    }
}

impl From<Rational> for Value {
    fn from(r: Rational) -> Self {
        Value::Rat(r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Attribute {
    pub name: String,
    pub ty: DataType,
}

impl Attribute {
    pub fn new(name: impl Into<String>, ty: DataType) -> Self {
        Attribute {
            name: name.into(),
            ty,
        }
    }
}

/// Ordered list of uniquely named, typed attributes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Schema {
    attrs: Vec<Attribute>,
}

impl Schema {
    pub fn new(attrs: Vec<Attribute>) -> Result<Self> {
        for (i, a) in attrs.iter().enumerate() {
            if attrs[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::DuplicateAttribute(a.name.clone()));
            }
        }
        Ok(Schema { attrs })
    }

    /// Shorthand for tests and examples: `Schema::of(&[("name", DataType::Str)])`.
    pub fn of(attrs: &[(&str, DataType)]) -> Result<Self> {
        Schema::new(attrs.iter().map(|(n, t)| Attribute::new(*n, *t)).collect())
    }

    pub fn attrs(&self) -> &[Attribute] {
        &self.attrs
    }

    pub fn arity(&self) -> usize {
        self.attrs.len()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.attrs.iter().map(|a| a.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attrs.iter().position(|a| a.name == name)
    }

    pub fn resolve(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::UnknownAttribute(name.to_owned()))
    }

    /// Checks arity and value types.
    pub fn check_tuple(&self, tuple: &Tuple) -> Result<()> {
        if tuple.arity() != self.arity() {
            return Err(Error::MalformedRow(format!(
                "tuple {tuple} has arity {}, schema expects {}",
                tuple.arity(),
                self.arity()
            )));
        }
        for (v, a) in tuple.values().iter().zip(&self.attrs) {
            if let Some(ty) = v.data_type() {
                if ty != a.ty {
                    return Err(Error::TypeMismatch(format!(
                        "value {v} in column `{}` of type {}",
                        a.name, a.ty
                    )));
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, a) in self.attrs.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}: {}", a.name, a.ty)?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Tuple(Vec<Value>);

impl Tuple {
    pub fn new(values: Vec<Value>) -> Self {
        Tuple(values)
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn into_values(self) -> Vec<Value> {
        self.0
    }

    pub fn get(&self, i: usize) -> &Value {
        &self.0[i]
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn concat(&self, other: &Tuple) -> Tuple {
        let mut values = Vec::with_capacity(self.arity() + other.arity());
        values.extend_from_slice(&self.0);
        values.extend_from_slice(&other.0);
        Tuple(values)
    }

    pub fn project(&self, indices: &[usize]) -> Tuple {
        Tuple(indices.iter().map(|&i| self.0[i].clone()).collect())
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// Builds a tuple from anything convertible into [`Value`]s.
#[macro_export]
macro_rules! tuple {
    ($($v:expr),* $(,)?) => {
        $crate::relation::Tuple::new(vec![$($crate::relation::Value::from($v)),*])
    };
}

/// A finite map from tuples to nonzero annotations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KRelation {
    schema: Schema,
    spec: SemiringSpec,
    tuples: BTreeMap<Tuple, SemiringValue>,
}

impl KRelation {
    pub fn empty(schema: Schema, spec: SemiringSpec) -> Self {
        KRelation {
            schema,
            spec,
            tuples: BTreeMap::new(),
        }
    }

    pub fn from_pairs(
        schema: Schema,
        spec: SemiringSpec,
        pairs: impl IntoIterator<Item = (Tuple, SemiringValue)>,
    ) -> Result<Self> {
        let mut r = KRelation::empty(schema, spec);
        for (t, k) in pairs {
            r.add(t, k)?;
        }
        Ok(r)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn spec(&self) -> SemiringSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Annotation of `t`, zero when absent.
    pub fn get(&self, t: &Tuple) -> SemiringValue {
        self.tuples.get(t).copied().unwrap_or(self.spec.zero())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Tuple, SemiringValue)> {
        self.tuples.iter().map(|(t, k)| (t, *k))
    }

    /// Adds `k` to the annotation of `t`.
    pub fn add(&mut self, t: Tuple, k: SemiringValue) -> Result<()> {
        self.schema.check_tuple(&t)?;
        self.spec.check(k)?;
        if self.spec.is_zero(k) {
            return Ok(());
        }
        match self.tuples.get_mut(&t) {
            Some(acc) => *acc = self.spec.add(*acc, k)?,
            None => {
                self.tuples.insert(t, k);
            }
        }
        Ok(())
    }

    pub(crate) fn insert_unchecked(&mut self, t: Tuple, k: SemiringValue) {
        if !self.spec.is_zero(k) {
            self.tuples.insert(t, k);
        }
    }

    pub(crate) fn entry_add(&mut self, t: Tuple, k: SemiringValue) -> Result<()> {
        if self.spec.is_zero(k) {
            return Ok(());
        }
        match self.tuples.get_mut(&t) {
            Some(acc) => *acc = self.spec.add(*acc, k)?,
            None => {
                self.tuples.insert(t, k);
            }
        }
        Ok(())
    }

    pub fn retain(&mut self, f: impl FnMut(&Tuple, &mut SemiringValue) -> bool) {
        self.tuples.retain(f);
    }
}

impl fmt::Display for KRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {{", self.schema)?;
        for (i, (t, k)) in self.tuples.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t} -> {k}")?;
        }
        f.write_str("}")
    }
}

/// Snapshot semantics database: one K-relation per relation name and tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotKDatabase {
    domain: TimeDomain,
    spec: SemiringSpec,
    relations: BTreeMap<String, (Schema, Vec<KRelation>)>,
}

impl SnapshotKDatabase {
    pub fn new(domain: TimeDomain, spec: SemiringSpec) -> Self {
        SnapshotKDatabase {
            domain,
            spec,
            relations: BTreeMap::new(),
        }
    }

    pub fn domain(&self) -> TimeDomain {
        self.domain
    }

    pub fn spec(&self) -> SemiringSpec {
        self.spec
    }

    /// Registers a relation given its snapshot at every tick of the domain,
    /// in tick order.
    pub fn insert(&mut self, name: impl Into<String>, schema: Schema, snapshots: Vec<KRelation>) -> Result<()> {
        if snapshots.len() as u64 != self.domain.len() {
            return Err(Error::MalformedRow(format!(
                "{} snapshots for a domain of {} ticks",
                snapshots.len(),
                self.domain.len()
            )));
        }
        for s in &snapshots {
            if s.spec() != self.spec {
                return Err(Error::SpecMismatch);
            }
            if s.schema() != &schema {
                return Err(Error::UnionIncompatible(format!(
                    "snapshot schema {} differs from {}",
                    s.schema(),
                    schema
                )));
            }
        }
        self.relations.insert(name.into(), (schema, snapshots));
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    /// The snapshot of `name` at `t`.
    pub fn snapshot(&self, name: &str, t: Tick) -> Result<&KRelation> {
        self.domain.check_tick(t)?;
        let (_, snaps) = self
            .relations
            .get(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_owned()))?;
        Ok(&snaps[(t - self.domain.min()) as usize])
    }

    /// Encodes relation `name` as a period K-relation.
    pub fn encode(&self, name: &str) -> Result<PeriodKRelation> {
        let (schema, snaps) = self
            .relations
            .get(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_owned()))?;
        PeriodKRelation::from_snapshots(schema.clone(), self.spec, self.domain, snaps)
    }

    /// Decodes period K-relations into a snapshot database.
    pub fn decode<'a>(
        relations: impl IntoIterator<Item = (&'a str, &'a PeriodKRelation)>,
        domain: TimeDomain,
        spec: SemiringSpec,
    ) -> Result<Self> {
        let mut db = SnapshotKDatabase::new(domain, spec);
        for (name, r) in relations {
            if r.domain() != domain {
                return Err(Error::DomainMismatch);
            }
            db.insert(name, r.schema().clone(), r.to_snapshots())?;
        }
        Ok(db)
    }
}

/// Tuples annotated with coalesced, nonzero temporal elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodKRelation {
    schema: Schema,
    spec: SemiringSpec,
    domain: TimeDomain,
    tuples: BTreeMap<Tuple, PeriodValue>,
}

impl PeriodKRelation {
    pub fn empty(schema: Schema, spec: SemiringSpec, domain: TimeDomain) -> Self {
        PeriodKRelation {
            schema,
            spec,
            domain,
            tuples: BTreeMap::new(),
        }
    }

    /// Builds a relation from tuple/element pairs, adding the elements of
    /// repeated tuples.
    pub fn from_elements(
        schema: Schema,
        spec: SemiringSpec,
        domain: TimeDomain,
        pairs: impl IntoIterator<Item = (Tuple, TemporalElement)>,
    ) -> Result<Self> {
        let mut r = PeriodKRelation::empty(schema, spec, domain);
        for (t, e) in pairs {
            if e.spec() != spec {
                return Err(Error::SpecMismatch);
            }
            if e.domain() != domain {
                return Err(Error::DomainMismatch);
            }
            r.schema.check_tuple(&t)?;
            r.add(t, PeriodValue::new(&e)?)?;
        }
        Ok(r)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn spec(&self) -> SemiringSpec {
        self.spec
    }

    pub fn domain(&self) -> TimeDomain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn get(&self, t: &Tuple) -> Option<&PeriodValue> {
        self.tuples.get(t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Tuple, &PeriodValue)> {
        self.tuples.iter()
    }

    /// Adds `v` to the annotation of `t`, dropping the tuple if the result is
    /// empty.
    pub fn add(&mut self, t: Tuple, v: PeriodValue) -> Result<()> {
        if v.is_zero() {
            return Ok(());
        }
        match self.tuples.get_mut(&t) {
            Some(acc) => *acc = acc.add(&v)?,
            None => {
                self.tuples.insert(t, v);
            }
        }
        Ok(())
    }

    pub(crate) fn insert_unchecked(&mut self, t: Tuple, v: PeriodValue) {
        if !v.is_zero() {
            self.tuples.insert(t, v);
        }
    }

    pub(crate) fn with_schema(mut self, schema: Schema) -> Self {
        self.schema = schema;
        self
    }

    /// Every tuple's element is in normal form and nonempty.
    pub fn is_normalized(&self) -> bool {
        self.tuples
            .values()
            .all(|v| !v.is_zero() && v.element().is_normalized())
    }

    /// The snapshot at `t`.
    pub fn timeslice(&self, t: Tick) -> Result<KRelation> {
        self.domain.check_tick(t)?;
        let mut out = KRelation::empty(self.schema.clone(), self.spec);
        for (tuple, v) in &self.tuples {
            out.insert_unchecked(tuple.clone(), v.value_at(t));
        }
        Ok(out)
    }

    /// Snapshots at every tick, in tick order.
    pub fn to_snapshots(&self) -> Vec<KRelation> {
        let mut out: Vec<KRelation> = self
            .domain
            .ticks()
            .map(|_| KRelation::empty(self.schema.clone(), self.spec))
            .collect();
        let min = self.domain.min();
        for (tuple, v) in &self.tuples {
            for (interval, k) in v.support() {
                for t in interval.begin()..interval.end() {
                    out[(t - min) as usize].insert_unchecked(tuple.clone(), *k);
                }
            }
        }
        out
    }

    /// Encodes a sequence of snapshots, one per tick of `domain`: every
    /// tuple's per-tick annotations become singleton intervals, then
    /// coalesce.
    pub fn from_snapshots(
        schema: Schema,
        spec: SemiringSpec,
        domain: TimeDomain,
        snapshots: &[KRelation],
    ) -> Result<Self> {
        if snapshots.len() as u64 != domain.len() {
            return Err(Error::MalformedRow(format!(
                "{} snapshots for a domain of {} ticks",
                snapshots.len(),
                domain.len()
            )));
        }
        let mut histories: BTreeMap<&Tuple, Vec<(Interval, SemiringValue)>> = BTreeMap::new();
        for (t, snap) in domain.ticks().zip(snapshots) {
            if snap.spec() != spec {
                return Err(Error::SpecMismatch);
            }
            for (tuple, k) in snap.iter() {
                histories
                    .entry(tuple)
                    .or_default()
                    .push((Interval::new_unchecked(t, t + 1), k));
            }
        }
        let mut out = PeriodKRelation::empty(schema, spec, domain);
        for (tuple, pieces) in histories {
            let element = TemporalElement::from_sorted_unchecked(spec, domain, pieces);
            out.insert_unchecked(tuple.clone(), PeriodValue::new(&element)?);
        }
        Ok(out)
    }
}

impl fmt::Display for PeriodKRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} over {}", self.schema, self.domain)?;
        for (t, v) in &self.tuples {
            writeln!(f, "  {t} -> {v}")?;
        }
        Ok(())
    }
}

/// One distinct row of a SQL period relation together with its number of
/// duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PeriodRow {
    pub tuple: Tuple,
    pub interval: Interval,
    pub mult: u64,
}

impl PeriodRow {
    pub fn new(tuple: Tuple, interval: Interval, mult: u64) -> Self {
        PeriodRow {
            tuple,
            interval,
            mult,
        }
    }

    /// Validates the raw begin/end columns.
    pub fn from_ticks(tuple: Tuple, begin: Tick, end: Tick, mult: u64) -> Result<Self> {
        if begin >= end {
            return Err(Error::MalformedRow(format!(
                "row {tuple} has begin {begin} >= end {end}"
            )));
        }
        Ok(PeriodRow::new(tuple, Interval::new_unchecked(begin, end), mult))
    }

    pub fn begin(&self) -> Tick {
        self.interval.begin()
    }

    pub fn end(&self) -> Tick {
        self.interval.end()
    }
}

/// A multiset of rows, each valid over `[begin, end)`. Stored as distinct
/// rows with multiplicities, sorted by tuple then interval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlPeriodRelation {
    schema: Schema,
    domain: TimeDomain,
    rows: Vec<PeriodRow>,
}

impl SqlPeriodRelation {
    pub fn empty(schema: Schema, domain: TimeDomain) -> Self {
        SqlPeriodRelation {
            schema,
            domain,
            rows: Vec::new(),
        }
    }

    /// Validates and canonicalizes `rows`: identical rows are merged and
    /// zero multiplicities dropped.
    pub fn new(schema: Schema, domain: TimeDomain, rows: Vec<PeriodRow>) -> Result<Self> {
        Self::new_with(schema, domain, rows, Execution::default())
    }

    pub fn new_with(
        schema: Schema,
        domain: TimeDomain,
        rows: Vec<PeriodRow>,
        exec: Execution,
    ) -> Result<Self> {
        for r in &rows {
            schema.check_tuple(&r.tuple)?;
            domain
                .check_interval(r.interval)
                .map_err(|e| Error::MalformedRow(format!("row {}: {e}", r.tuple)))?;
        }
        Ok(Self::from_rows_unchecked(schema, domain, rows, exec))
    }

    /// Canonicalizes rows that are known to fit the schema and domain.
    pub(crate) fn from_rows_unchecked(
        schema: Schema,
        domain: TimeDomain,
        mut rows: Vec<PeriodRow>,
        exec: Execution,
    ) -> Self {
        let sorted = rows
            .windows(2)
            .all(|w| (&w[0].tuple, w[0].interval) < (&w[1].tuple, w[1].interval));
        if !sorted {
            exec::sort_unstable(exec, &mut rows);
            let mut merged: Vec<PeriodRow> = Vec::with_capacity(rows.len());
            for r in rows {
                match merged.last_mut() {
                    Some(last) if last.tuple == r.tuple && last.interval == r.interval => {
                        last.mult += r.mult
                    }
                    _ => merged.push(r),
                }
            }
            rows = merged;
        }
        rows.retain(|r| r.mult > 0);
        SqlPeriodRelation {
            schema,
            domain,
            rows,
        }
    }

    /// Shorthand for tests: rows of `(tuple, begin, end)` with multiplicity 1
    /// each, duplicates accumulating.
    pub fn from_triples(
        schema: Schema,
        domain: TimeDomain,
        triples: impl IntoIterator<Item = (Tuple, Tick, Tick)>,
    ) -> Result<Self> {
        let rows = triples
            .into_iter()
            .map(|(t, b, e)| PeriodRow::from_ticks(t, b, e, 1))
            .collect::<Result<Vec<_>>>()?;
        Self::new(schema, domain, rows)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn domain(&self) -> TimeDomain {
        self.domain
    }

    pub fn rows(&self) -> &[PeriodRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<PeriodRow> {
        self.rows
    }

    /// Number of distinct rows.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of rows counting duplicates.
    pub fn total_rows(&self) -> u64 {
        self.rows.iter().map(|r| r.mult).sum()
    }

    /// Index ranges of maximal runs of rows sharing a tuple.
    pub fn tuple_groups(&self) -> Vec<std::ops::Range<usize>> {
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=self.rows.len() {
            if i == self.rows.len() || self.rows[i].tuple != self.rows[start].tuple {
                groups.push(start..i);
                start = i;
            }
        }
        groups
    }

    /// Multiset snapshot at `t`.
    pub fn timeslice(&self, t: Tick) -> Result<KRelation> {
        self.domain.check_tick(t)?;
        let mut out = KRelation::empty(self.schema.clone(), SemiringSpec::BAG);
        for r in self.rows.iter().filter(|r| r.interval.contains(t)) {
            out.entry_add(r.tuple.clone(), SemiringValue::Nat(r.mult))?;
        }
        Ok(out)
    }
}

impl fmt::Display for SqlPeriodRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} over {}", self.schema, self.domain)?;
        for r in &self.rows {
            writeln!(f, "  {} {} x{}", r.tuple, r.interval, r.mult)?;
        }
        Ok(())
    }
}

/// One row per support interval of every tuple, with the interval's count as
/// multiplicity. Defined for bag relations only.
pub fn period_enc(r: &PeriodKRelation) -> Result<SqlPeriodRelation> {
    if !r.spec().is_bag() {
        return Err(Error::UnsupportedSemiring("the SQL period encoding"));
    }
    let mut rows = Vec::new();
    for (tuple, v) in r.iter() {
        for (interval, k) in v.support() {
            rows.push(PeriodRow::new(tuple.clone(), *interval, k.multiplicity()));
        }
    }
    Ok(SqlPeriodRelation {
        schema: r.schema().clone(),
        domain: r.domain(),
        rows,
    })
}

/// Gathers each tuple's rows into a temporal element and coalesces it.
pub fn period_enc_inv(s: &SqlPeriodRelation) -> Result<PeriodKRelation> {
    period_enc_inv_with(s, Execution::default())
}

pub fn period_enc_inv_with(s: &SqlPeriodRelation, exec: Execution) -> Result<PeriodKRelation> {
    let spec = SemiringSpec::BAG;
    let domain = s.domain();
    let groups = s.tuple_groups();
    let values = exec::map(exec, &groups, |range| {
        let rows = &s.rows()[range.clone()];
        let pieces = rows
            .iter()
            .map(|r| (r.interval, SemiringValue::Nat(r.mult)))
            .collect();
        let element = TemporalElement::from_sorted_unchecked(spec, domain, pieces);
        PeriodValue::new(&element).map(|v| (rows[0].tuple.clone(), v))
    });
    let mut out = PeriodKRelation::empty(s.schema().clone(), spec, domain);
    for entry in values {
        let (tuple, value) = entry?;
        out.insert_unchecked(tuple, value);
    }
    Ok(out)
}

/// Sum of a bag of rational values; `None` for an empty bag.
pub(crate) fn checked_rational_sum(
    values: impl IntoIterator<Item = (Rational, u64)>,
) -> Result<Option<Rational>> {
    let mut acc: Option<Rational> = None;
    for (v, n) in values {
        let term = v
            .checked_mul(&Rational::from_integer(i128::from(n)))
            .ok_or(Error::Overflow("rational sum"))?;
        let base = acc.unwrap_or_else(Rational::zero);
        acc = Some(base.checked_add(&term).ok_or(Error::Overflow("rational sum"))?);
    }
    Ok(acc)
}
