use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::relation::{period_enc, period_enc_inv_with, PeriodKRelation, Schema, SqlPeriodRelation};
use crate::semiring::SemiringSpec;
use crate::telement::TimeDomain;

/// Anything a [`Database`] can hold.
pub trait Stored {
    fn schema(&self) -> &Schema;
    fn domain(&self) -> TimeDomain;
    fn spec(&self) -> SemiringSpec;
}

impl Stored for PeriodKRelation {
    fn schema(&self) -> &Schema {
        PeriodKRelation::schema(self)
    }
    fn domain(&self) -> TimeDomain {
        PeriodKRelation::domain(self)
    }
    fn spec(&self) -> SemiringSpec {
        PeriodKRelation::spec(self)
    }
}

impl Stored for SqlPeriodRelation {
    fn schema(&self) -> &Schema {
        SqlPeriodRelation::schema(self)
    }
    fn domain(&self) -> TimeDomain {
        SqlPeriodRelation::domain(self)
    }
    fn spec(&self) -> SemiringSpec {
        SemiringSpec::BAG
    }
}

/// Named relations sharing one time domain and semiring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Database<R> {
    domain: TimeDomain,
    spec: SemiringSpec,
    relations: BTreeMap<String, R>,
}

pub type PeriodDatabase = Database<PeriodKRelation>;
pub type SqlDatabase = Database<SqlPeriodRelation>;

impl<R: Stored> Database<R> {
    pub fn new(domain: TimeDomain, spec: SemiringSpec) -> Self {
        Database {
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

    pub fn insert(&mut self, name: impl Into<String>, relation: R) -> Result<()> {
        if relation.domain() != self.domain {
            return Err(Error::DomainMismatch);
        }
        if relation.spec() != self.spec {
            return Err(Error::SpecMismatch);
        }
        self.relations.insert(name.into(), relation);
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, relation: R) -> Result<Self> {
        self.insert(name, relation)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Result<&R> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_owned()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &R)> {
        self.relations.iter().map(|(n, r)| (n.as_str(), r))
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn catalog(&self) -> Catalog {
        Catalog {
            spec: self.spec,
            schemas: self
                .relations
                .iter()
                .map(|(n, r)| (n.clone(), r.schema().clone()))
                .collect(),
        }
    }
}

impl PeriodDatabase {
    /// Encodes every relation as a SQL period relation.
    pub fn to_sql(&self) -> Result<SqlDatabase> {
        let mut out = SqlDatabase::new(self.domain, self.spec);
        if !self.spec.is_bag() {
            return Err(Error::UnsupportedSemiring("the SQL period encoding"));
        }
        for (name, r) in &self.relations {
            out.insert(name.clone(), period_enc(r)?)?;
        }
        Ok(out)
    }
}

impl SqlDatabase {
    pub fn to_period(&self, exec: Execution) -> Result<PeriodDatabase> {
        let mut out = PeriodDatabase::new(self.domain, self.spec);
        for (name, r) in &self.relations {
            out.insert(name.clone(), period_enc_inv_with(r, exec)?)?;
        }
        Ok(out)
    }
}

/// Relation schemas plus the semiring, as needed to validate queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    spec: SemiringSpec,
    schemas: BTreeMap<String, Schema>,
}

impl Catalog {
    pub fn new(spec: SemiringSpec) -> Self {
        Catalog {
            spec,
            schemas: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: impl Into<String>, schema: Schema) -> Self {
        self.schemas.insert(name.into(), schema);
        self
    }

    pub fn spec(&self) -> SemiringSpec {
        self.spec
    }

    pub fn schema(&self, name: &str) -> Result<&Schema> {
        self.schemas
            .get(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_owned()))
    }
}
