//! Library side of the `periodk` command: CSV loading, canonical output and
//! the subcommand implementations, kept here so they can be tested without
//! spawning a process.

pub mod csvio;

use std::collections::BTreeMap;
use std::io::Write;

use periodk::algebra::{run_logical, QueryAst};
use periodk::bench::run_scaling;
use periodk::database::{PeriodDatabase, SqlDatabase};
use periodk::gen::Bounds;
use periodk::oracle::{differential_check_with, oracle_eval, standard_evaluators};
use periodk::physical::{coalesce_op_with, compile, eval_physical_with, split_op_with, RewriteOptions};
use periodk::relation::{DataType, PeriodKRelation, SqlPeriodRelation, Tuple};
use periodk::semiring::{SemiringSpec, SemiringValue};
use periodk::telement::{Interval, TemporalElement, Tick, TimeDomain};
use periodk::{Error, Execution, Result};

use csvio::{OutputOptions, RawTable, TableBinding};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Physical,
    Logical,
    Oracle,
}

/// Tables as read from disk, before a domain is fixed.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub tables: Vec<RawTable>,
}

impl Inputs {
    /// Reads every binding, applying `types` (relation name to column types).
    pub fn read(bindings: &[TableBinding], types: &BTreeMap<String, BTreeMap<String, DataType>>) -> Result<Inputs> {
        let mut tables = Vec::with_capacity(bindings.len());
        for b in bindings {
            if tables.iter().any(|t: &RawTable| t.binding.name == b.name) {
                return Err(Error::Csv {
                    path: b.path.display().to_string(),
                    row: 0,
                    msg: format!("relation `{}` is bound twice", b.name),
                });
            }
            let mut b = b.clone();
            if let Some(t) = types.get(&b.name) {
                b.types.extend(t.iter().map(|(c, ty)| (c.clone(), *ty)));
            }
            tables.push(csvio::read_table(&b)?);
        }
        for name in types.keys() {
            if !bindings.iter().any(|b| &b.name == name) {
                return Err(Error::UnknownRelation(name.clone()));
            }
        }
        Ok(Inputs { tables })
    }

    /// `[tmin, tmax)`, with missing bounds taken from the data.
    pub fn domain(&self, tmin: Option<Tick>, tmax: Option<Tick>) -> Result<TimeDomain> {
        let mut range: Option<(Tick, Tick)> = None;
        for t in &self.tables {
            if let Some((b, e)) = t.tick_range()? {
                range = Some(match range {
                    None => (b, e),
                    Some((lo, hi)) => (lo.min(b), hi.max(e)),
                });
            }
        }
        let (lo, hi) = range.unwrap_or((0, 1));
        let min = tmin.unwrap_or(lo);
        let max = tmax.unwrap_or(hi.max(min + 1));
        TimeDomain::new(min, max)
    }

    pub fn sql_database(&self, domain: TimeDomain) -> Result<SqlDatabase> {
        let mut db = SqlDatabase::new(domain, SemiringSpec::BAG);
        for t in &self.tables {
            db.insert(t.binding.name.clone(), t.into_relation(domain)?)?;
        }
        Ok(db)
    }
}

/// Decodes a bag database, collapsing multiplicities to presence under set
/// semantics.
pub fn period_database(sql: &SqlDatabase, spec: SemiringSpec, exec: Execution) -> Result<PeriodDatabase> {
    let bag = sql.to_period(exec)?;
    if spec.is_bag() {
        return Ok(bag);
    }
    let mut out = PeriodDatabase::new(bag.domain(), spec);
    for (name, r) in bag.iter() {
        let pairs = r
            .iter()
            .map(|(t, v)| {
                let pieces = v.support().iter().map(|(i, _)| (*i, SemiringValue::Bool(true)));
                Ok((t.clone(), TemporalElement::new(spec, r.domain(), pieces)?))
            })
            .collect::<Result<Vec<_>>>()?;
        out.insert(name, PeriodKRelation::from_elements(r.schema().clone(), spec, r.domain(), pairs)?)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    pub spec: SemiringSpec,
    pub mode: Mode,
    pub rewrite: RewriteOptions,
    pub exec: Execution,
}

/// Result of a query in normal form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    Sql(SqlPeriodRelation),
    Period(PeriodKRelation),
}

impl Answer {
    /// Rows in canonical order: tuple values ascending, then begin.
    pub fn rows(&self) -> Vec<(&Tuple, Interval, u64)> {
        match self {
            Answer::Sql(r) => r.rows().iter().map(|row| (&row.tuple, row.interval, row.mult)).collect(),
            Answer::Period(r) => r
                .iter()
                .flat_map(|(t, v)| v.support().iter().map(move |(i, k)| (t, *i, k.multiplicity())))
                .collect(),
        }
    }

    pub fn schema(&self) -> &periodk::relation::Schema {
        match self {
            Answer::Sql(r) => r.schema(),
            Answer::Period(r) => r.schema(),
        }
    }

    pub fn write(&self, out: impl Write, opts: &OutputOptions) -> Result<()> {
        csvio::write_rows(out, self.schema(), self.rows(), opts)
    }
}

pub fn evaluate(query: &QueryAst, inputs: &Inputs, domain: TimeDomain, cfg: &EvalConfig) -> Result<Answer> {
    let sql = inputs.sql_database(domain)?;
    match cfg.mode {
        Mode::Physical => {
            if !cfg.spec.is_bag() {
                return Err(Error::UnsupportedSemiring("physical evaluation"));
            }
            let plan = compile(query, &sql.catalog(), cfg.rewrite)?;
            let result = eval_physical_with(&plan, &sql, cfg.exec)?;
            // A bare scan is not coalesced by the plan itself.
            Ok(Answer::Sql(coalesce_op_with(&result, cfg.exec)?))
        }
        Mode::Logical => Ok(Answer::Period(run_logical(query, &period_database(&sql, cfg.spec, cfg.exec)?)?)),
        Mode::Oracle => Ok(Answer::Period(oracle_eval(query, &period_database(&sql, cfg.spec, cfg.exec)?)?)),
    }
}

/// Coalesces one loaded relation.
pub fn coalesce_table(inputs: &Inputs, name: &str, domain: TimeDomain, exec: Execution) -> Result<SqlPeriodRelation> {
    let db = inputs.sql_database(domain)?;
    coalesce_op_with(db.get(name)?, exec)
}

/// Splits `left` at the endpoints of `left` and `right` rows agreeing on
/// `group`.
pub fn split_tables(
    inputs: &Inputs,
    left: &str,
    right: &str,
    group: &[String],
    domain: TimeDomain,
    exec: Execution,
) -> Result<SqlPeriodRelation> {
    let db = inputs.sql_database(domain)?;
    let (l, r) = (db.get(left)?, db.get(right)?);
    let group = group
        .iter()
        .map(|g| l.schema().resolve(g))
        .collect::<Result<Vec<_>>>()?;
    split_op_with(l, r, &group, exec)
}

/// Writes the snapshot at `t` as plain rows, one per copy.
pub fn write_snapshot(out: impl Write, answer: &Answer, t: Tick, opts: &OutputOptions) -> Result<()> {
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = answer.schema().names().collect();
    if opts.with_multiplicity {
        header.push("mult");
    }
    w.write_record(&header).map_err(io)?;
    for (tuple, interval, mult) in answer.rows() {
        if !interval.contains(t) {
            continue;
        }
        let mut fields: Vec<String> = tuple
            .values()
            .iter()
            .map(|v| csvio::render_value(v, opts.precision))
            .collect();
        let copies = if opts.with_multiplicity {
            fields.push(mult.to_string());
            1
        } else {
            mult
        };
        for _ in 0..copies {
            w.write_record(&fields).map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Runs the differential check and prints one line per failing seed plus a
/// summary. Returns the number of failures.
pub fn oracle_check(out: &mut impl Write, seeds: u64, spec: SemiringSpec, exec: Execution) -> Result<usize> {
    let bounds = Bounds { spec, ..Bounds::default() };
    let reports = differential_check_with(0..seeds, &bounds, &standard_evaluators(), exec);
    let failures: Vec<_> = reports.iter().filter(|r| !r.passed()).collect();
    for r in &failures {
        write!(out, "{r}")?;
    }
    writeln!(out, "{} of {} instances agree with the oracle", reports.len() - failures.len(), reports.len())?;
    Ok(failures.len())
}

/// Prints a timing table for the coalesce operator and the fitted growth
/// exponent.
pub fn bench(out: &mut impl Write, sizes: &[usize], repeats: usize, exec: Execution) -> Result<()> {
    let report = run_scaling(sizes, repeats, exec, 42);
    writeln!(out, "rows,mean_s,stddev_s,min_s")?;
    for m in &report.measurements {
        writeln!(out, "{},{:.6},{:.6},{:.6}", m.rows, m.mean_secs(), m.stddev_secs(), m.min_secs())?;
    }
    match report.exponent {
        Some(e) => writeln!(out, "growth exponent: {e:.3}")?,
        None => writeln!(out, "growth exponent: n/a")?,
    }
    Ok(())
}
