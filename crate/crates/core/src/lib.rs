//! Snapshot-semantics query evaluation over interval-timestamped set and
//! multiset relations.
//!
//! Queries are ordinary relational algebra ([`algebra::QueryAst`]). They are
//! evaluated so that the result at every tick equals the non-temporal query
//! over the database snapshot at that tick. Three evaluators are provided:
//!
//! * [`algebra::eval_logical`] works on [`relation::PeriodKRelation`]s using
//!   the period semiring ([`period::PeriodValue`]),
//! * [`physical::eval_physical`] runs a rewritten plan over
//!   [`relation::SqlPeriodRelation`]s, the begin/end row encoding,
//! * [`oracle::oracle_eval`] evaluates the query tick by tick and is the
//!   reference for differential testing.

pub mod algebra;
pub mod bench;
pub mod database;
pub mod dsl;
pub mod error;
pub mod exec;
pub mod gen;
pub mod oracle;
pub mod period;
pub mod physical;
pub mod relation;
pub mod semiring;
pub mod telement;

pub use error::{Error, Result};
pub use exec::Execution;
