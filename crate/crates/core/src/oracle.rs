//! Reference semantics: evaluate the query as an ordinary query over each
//! snapshot of the database, one tick at a time.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use crate::algebra::{validate, AggFunc, BoundAgg, LogicalEvaluator, Plan, PlanNode, QueryAst};
use crate::database::PeriodDatabase;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::gen::{Bounds, Instance};
use crate::physical::{compile, eval_physical_with, RewriteOptions};
use crate::relation::{period_enc_inv_with, KRelation, PeriodKRelation, Rational, Tuple, Value};
use crate::semiring::SemiringSpec;
use crate::telement::Tick;

/// Evaluates a validated plan over one snapshot per relation.
pub fn snapshot_eval(
    plan: &Plan,
    db: &BTreeMap<String, KRelation>,
    spec: SemiringSpec,
) -> Result<KRelation> {
    let mut out = KRelation::empty(plan.schema.clone(), spec);
    match &plan.node {
        PlanNode::Rel(name) => {
            let r = db.get(name).ok_or_else(|| Error::UnknownRelation(name.clone()))?;
            for (t, k) in r.iter() {
                out.add(t.clone(), k)?;
            }
        }
        PlanNode::Select { pred, input } => {
            for (t, k) in snapshot_eval(input, db, spec)?.iter() {
                if pred.eval(t) {
                    out.add(t.clone(), k)?;
                }
            }
        }
        PlanNode::Project { exprs, input } => {
            for (t, k) in snapshot_eval(input, db, spec)?.iter() {
                let values = exprs.iter().map(|e| e.eval(t)).collect();
                out.add(Tuple::new(values), k)?;
            }
        }
        PlanNode::Join { pred, left, right } => {
            let left = snapshot_eval(left, db, spec)?;
            let right = snapshot_eval(right, db, spec)?;
            for (l, lk) in left.iter() {
                for (r, rk) in right.iter() {
                    let t = l.concat(r);
                    if pred.eval(&t) {
                        out.add(t, spec.mul(lk, rk)?)?;
                    }
                }
            }
        }
        PlanNode::Union { left, right } => {
            for side in [left, right] {
                for (t, k) in snapshot_eval(side, db, spec)?.iter() {
                    out.add(t.clone(), k)?;
                }
            }
        }
        PlanNode::Diff { left, right } => {
            let right = snapshot_eval(right, db, spec)?;
            for (t, k) in snapshot_eval(left, db, spec)?.iter() {
                out.add(t.clone(), spec.monus(k, right.get(t))?)?;
            }
        }
        PlanNode::Agg { group, agg, input } => {
            if !spec.is_bag() {
                return Err(Error::UnsupportedSemiring("aggregation"));
            }
            let input = snapshot_eval(input, db, spec)?;
            // materialize the bag, one entry per duplicate
            let mut groups: BTreeMap<Tuple, Vec<&Tuple>> = BTreeMap::new();
            if group.is_empty() {
                groups.insert(Tuple::default(), Vec::new());
            }
            for (t, k) in input.iter() {
                let rows = groups.entry(t.project(group)).or_default();
                rows.extend(std::iter::repeat_n(t, k.multiplicity() as usize));
            }
            for (key, rows) in groups {
                let mut values = key.into_values();
                values.push(sql_aggregate(agg, &rows)?);
                out.add(Tuple::new(values), spec.one())?;
            }
        }
    }
    Ok(out)
}

fn sql_aggregate(agg: &BoundAgg, rows: &[&Tuple]) -> Result<Value> {
    let Some(col) = agg.arg else {
        return Ok(Value::Int(rows.len() as i64));
    };
    let values: Vec<&Value> = rows.iter().map(|t| t.get(col)).filter(|v| !v.is_null()).collect();
    if agg.func == AggFunc::Count {
        return Ok(Value::Int(values.len() as i64));
    }
    if values.is_empty() {
        return Ok(Value::Null);
    }
    let numbers = || {
        values.iter().map(|v| {
            v.as_rational()
                .ok_or_else(|| Error::TypeMismatch(format!("non-numeric value {v}")))
        })
    };
    match agg.func {
        AggFunc::Count => unreachable!(),
        AggFunc::Sum => {
            let mut total = Rational::from_integer(0);
            for n in numbers() {
                total += n?;
            }
            Ok(match values[0] {
                Value::Int(_) => Value::Int(total.to_integer() as i64),
                _ => Value::Rat(total),
            })
        }
        AggFunc::Avg => {
            let mut total = Rational::from_integer(0);
            for n in numbers() {
                total += n?;
            }
            Ok(Value::Rat(total / Rational::from_integer(values.len() as i128)))
        }
        AggFunc::Min => Ok((*values.iter().min().expect("nonempty")).clone()),
        AggFunc::Max => Ok((*values.iter().max().expect("nonempty")).clone()),
    }
}

/// Evaluates `ast` at every tick of the database's domain and encodes the
/// per-tick results as a period relation.
pub fn oracle_eval(ast: &QueryAst, db: &PeriodDatabase) -> Result<PeriodKRelation> {
    let plan = validate(ast, &db.catalog())?;
    let spec = db.spec();
    let domain = db.domain();
    let mut snapshots = Vec::with_capacity(domain.len() as usize);
    for t in domain.ticks() {
        let mut slice = BTreeMap::new();
        for (name, r) in db.iter() {
            slice.insert(name.to_owned(), r.timeslice(t)?);
        }
        snapshots.push(snapshot_eval(&plan, &slice, spec)?);
    }
    PeriodKRelation::from_snapshots(plan.schema, spec, domain, &snapshots)
}

/// Anything that evaluates a query over a period database.
pub trait Evaluator: Sync {
    fn name(&self) -> String;
    fn eval(&self, ast: &QueryAst, db: &PeriodDatabase) -> Result<PeriodKRelation>;
    /// Whether the evaluator handles this semiring at all.
    fn supports(&self, spec: SemiringSpec) -> bool {
        let _ = spec;
        true
    }
}

pub struct Oracle;

impl Evaluator for Oracle {
    fn name(&self) -> String {
        "oracle".into()
    }
    fn eval(&self, ast: &QueryAst, db: &PeriodDatabase) -> Result<PeriodKRelation> {
        oracle_eval(ast, db)
    }
}

impl Evaluator for LogicalEvaluator {
    fn name(&self) -> String {
        "logical".into()
    }
    fn eval(&self, ast: &QueryAst, db: &PeriodDatabase) -> Result<PeriodKRelation> {
        let plan = validate(ast, &db.catalog())?;
        LogicalEvaluator::eval(self, &plan, db)
    }
}

/// Encodes the database as SQL period relations, runs the rewritten plan
/// and decodes the result.
#[derive(Debug, Clone, Copy, Default)]
pub struct PhysicalEvaluator {
    pub options: RewriteOptions,
    pub exec: Execution,
}

impl Evaluator for PhysicalEvaluator {
    fn name(&self) -> String {
        format!(
            "physical(pull_up={}, fused={})",
            self.options.pull_up, self.options.fused
        )
    }
    fn eval(&self, ast: &QueryAst, db: &PeriodDatabase) -> Result<PeriodKRelation> {
        let sql = db.to_sql()?;
        let plan = compile(ast, &sql.catalog(), self.options)?;
        period_enc_inv_with(&eval_physical_with(&plan, &sql, self.exec)?, self.exec)
    }
    fn supports(&self, spec: SemiringSpec) -> bool {
        spec.is_bag()
    }
}

/// The logical evaluator plus the physical one under every rewrite option.
pub fn standard_evaluators() -> Vec<Box<dyn Evaluator>> {
    let mut out: Vec<Box<dyn Evaluator>> = vec![Box::new(LogicalEvaluator::default())];
    for pull_up in [true, false] {
        for fused in [true, false] {
            out.push(Box::new(PhysicalEvaluator {
                options: RewriteOptions { pull_up, fused },
                exec: Execution::Sequential,
            }));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub evaluator: String,
    /// First tick whose snapshots differ. `None` when the results differ only
    /// in representation, or when an evaluator failed.
    pub tick: Option<Tick>,
    pub expected: Option<KRelation>,
    pub actual: Option<KRelation>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub seed: u64,
    pub query: String,
    pub mismatch: Option<Mismatch>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.mismatch.is_none()
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Some(m) = &self.mismatch else {
            return write!(f, "seed {}: ok", self.seed);
        };
        writeln!(f, "seed {}: {} disagrees with the oracle", self.seed, m.evaluator)?;
        writeln!(f, "  query: {}", self.query)?;
        if let Some(e) = &m.error {
            writeln!(f, "  error: {e}")?;
        }
        if let Some(t) = m.tick {
            writeln!(f, "  first differing tick: {t}")?;
        }
        if let (Some(exp), Some(act)) = (&m.expected, &m.actual) {
            writeln!(f, "  expected: {exp}")?;
            writeln!(f, "  actual:   {act}")?;
        }
        Ok(())
    }
}

/// Runs every evaluator on one instance and compares against the oracle.
pub fn check_instance(inst: &Instance, evaluators: &[Box<dyn Evaluator>]) -> OracleReport {
    let query = inst.query.to_string();
    let report = |mismatch| OracleReport {
        seed: inst.seed,
        query: query.clone(),
        mismatch,
    };
    let failure = |evaluator: String, error: String| Mismatch {
        evaluator,
        tick: None,
        expected: None,
        actual: None,
        error: Some(error),
    };
    let expected = match oracle_eval(&inst.query, &inst.db) {
        Ok(r) => r,
        Err(e) => return report(Some(failure("oracle".into(), e.to_string()))),
    };
    for ev in evaluators.iter().filter(|e| e.supports(inst.db.spec())) {
        let actual = match ev.eval(&inst.query, &inst.db) {
            Ok(r) => r,
            Err(e) => return report(Some(failure(ev.name(), e.to_string()))),
        };
        if actual == expected {
            continue;
        }
        let mut m = Mismatch {
            evaluator: ev.name(),
            tick: None,
            expected: None,
            actual: None,
            error: None,
        };
        for t in inst.db.domain().ticks() {
            let (e, a) = (expected.timeslice(t), actual.timeslice(t));
            if let (Ok(e), Ok(a)) = (e, a) {
                if e != a {
                    m.tick = Some(t);
                    m.expected = Some(e);
                    m.actual = Some(a);
                    break;
                }
            }
        }
        if m.tick.is_none() {
            m.error = Some("results agree per tick but are not in normal form".into());
        }
        return report(Some(m));
    }
    report(None)
}

/// Checks `seeds` random instances with the standard evaluators.
pub fn differential_check(seeds: Range<u64>, bounds: &Bounds) -> Vec<OracleReport> {
    differential_check_with(seeds, bounds, &standard_evaluators(), Execution::default())
}

/// One report per seed, sorted by seed. Seeds run in parallel under
/// [`Execution::Parallel`].
pub fn differential_check_with(
    seeds: Range<u64>,
    bounds: &Bounds,
    evaluators: &[Box<dyn Evaluator>],
    exec: Execution,
) -> Vec<OracleReport> {
    let seeds: Vec<u64> = seeds.collect();
    let mut reports = exec::map(exec, &seeds, |&seed| match Instance::generate(seed, bounds) {
        Ok(inst) => check_instance(&inst, evaluators),
        Err(e) => OracleReport {
            seed,
            query: String::new(),
            mismatch: Some(Mismatch {
                evaluator: "generator".into(),
                tick: None,
                expected: None,
                actual: None,
                error: Some(e.to_string()),
            }),
        },
    });
    reports.sort_by_key(|r| r.seed);
    reports
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{AggArg, CmpOp, Operand, Predicate, ProjExpr};
    use crate::period::PeriodValue;
    use crate::relation::{DataType, Schema};
    use crate::telement::{TemporalElement, TimeDomain};
    use crate::tuple;

    fn snapshot(schema: &Schema, rows: &[(Tuple, u64)]) -> KRelation {
        let mut r = KRelation::empty(schema.clone(), SemiringSpec::BAG);
        for (t, n) in rows {
            r.add(t.clone(), SemiringSpec::BAG.from_multiplicity(*n)).unwrap();
        }
        r
    }

    #[test]
    fn join_projection_multiplies_and_sums() {
        let works = Schema::of(&[("name", DataType::Str), ("skill", DataType::Str)]).unwrap();
        let assign = Schema::of(&[("mach", DataType::Str), ("req", DataType::Str)]).unwrap();
        let mut db = BTreeMap::new();
        db.insert(
            "works".to_owned(),
            snapshot(&works, &[(tuple!["Pete", "SP"], 1), (tuple!["Bob", "SP"], 1), (tuple!["Alice", "NS"], 1)]),
        );
        db.insert(
            "assign".to_owned(),
            snapshot(&assign, &[(tuple!["M1", "SP"], 4), (tuple!["M2", "NS"], 5)]),
        );
        let cat = crate::database::Catalog::new(SemiringSpec::BAG)
            .with("works", works)
            .with("assign", assign);
        let q = QueryAst::project(
            vec![ProjExpr::Attr("mach".into())],
            QueryAst::join(
                Predicate::cmp(CmpOp::Eq, "skill", Operand::Attr("req".into())),
                QueryAst::rel("works"),
                QueryAst::rel("assign"),
            ),
        );
        let out = snapshot_eval(&validate(&q, &cat).unwrap(), &db, SemiringSpec::BAG).unwrap();
        assert_eq!(out.get(&tuple!["M1"]), SemiringSpec::BAG.from_multiplicity(8));
        assert_eq!(out.get(&tuple!["M2"]), SemiringSpec::BAG.from_multiplicity(5));
    }

    fn works_db() -> PeriodDatabase {
        let dom = TimeDomain::new(0, 24).unwrap();
        let schema = Schema::of(&[("name", DataType::Str), ("skill", DataType::Str)]).unwrap();
        let elem = |e: &[(i64, i64, u64)]| TemporalElement::from_counts(dom, e).unwrap();
        let works = PeriodKRelation::from_elements(
            schema,
            SemiringSpec::BAG,
            dom,
            [
                (tuple!["Ann", "SP"], elem(&[(3, 10, 1), (18, 20, 1)])),
                (tuple!["Joe", "NS"], elem(&[(8, 16, 1)])),
                (tuple!["Sam", "SP"], elem(&[(8, 16, 1)])),
            ],
        )
        .unwrap();
        PeriodDatabase::new(dom, SemiringSpec::BAG).with("works", works).unwrap()
    }

    #[test]
    fn onduty_at_eight() {
        let db = works_db();
        let q = QueryAst::agg(
            vec![],
            AggFunc::Count,
            AggArg::Star,
            QueryAst::select(
                Predicate::cmp(CmpOp::Eq, "skill", Operand::Lit(Value::str("SP"))),
                QueryAst::rel("works"),
            ),
        );
        let plan = validate(&q, &db.catalog()).unwrap();
        let slice: BTreeMap<_, _> = [("works".to_owned(), db.get("works").unwrap().timeslice(8).unwrap())].into();
        let out = snapshot_eval(&plan, &slice, SemiringSpec::BAG).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.get(&tuple![2]), SemiringSpec::BAG.one());

        let full = oracle_eval(&q, &db).unwrap();
        assert_eq!(full, crate::algebra::run_logical(&q, &db).unwrap());
    }

    #[test]
    fn identity_query_returns_the_relation() {
        let db = works_db();
        assert_eq!(&oracle_eval(&QueryAst::rel("works"), &db).unwrap(), db.get("works").unwrap());
    }

    #[test]
    fn empty_snapshot_gives_empty_result() {
        let schema = Schema::of(&[("a", DataType::Int)]).unwrap();
        let cat = crate::database::Catalog::new(SemiringSpec::BAG).with("r", schema.clone());
        let db: BTreeMap<_, _> = [("r".to_owned(), KRelation::empty(schema, SemiringSpec::BAG))].into();
        let q = QueryAst::diff(
            QueryAst::select(Predicate::cmp(CmpOp::Gt, "a", Operand::Lit(Value::Int(1))), QueryAst::rel("r")),
            QueryAst::rel("r"),
        );
        let out = snapshot_eval(&validate(&q, &cat).unwrap(), &db, SemiringSpec::BAG).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn small_differential_run() {
        let reports = differential_check(0..60, &Bounds::default());
        assert_eq!(reports.len(), 60);
        for r in &reports {
            assert!(r.passed(), "{r}");
        }
        let set = Bounds {
            spec: SemiringSpec::SET,
            ..Bounds::default()
        };
        for r in differential_check(0..60, &set) {
            assert!(r.passed(), "{r}");
        }
    }

    #[test]
    fn single_tick_domain() {
        let bounds = Bounds {
            max_ticks: 1,
            ..Bounds::default()
        };
        for r in differential_check(0..40, &bounds) {
            assert!(r.passed(), "{r}");
        }
    }

    fn broken_monus(a: &PeriodValue, _b: &PeriodValue) -> Result<PeriodValue> {
        Ok(a.clone())
    }

    #[test]
    fn broken_monus_is_detected() {
        let evaluators: Vec<Box<dyn Evaluator>> = vec![Box::new(LogicalEvaluator { monus: broken_monus })];
        let reports = differential_check_with(0..300, &Bounds::default(), &evaluators, Execution::default());
        let failures: Vec<_> = reports.iter().filter(|r| !r.passed()).collect();
        assert!(!failures.is_empty());
        assert!(failures.iter().all(|r| r.mismatch.as_ref().unwrap().tick.is_some()));
    }

    #[test]
    fn reports_are_deterministic() {
        let a = differential_check(0..20, &Bounds::default());
        let b = differential_check_with(0..20, &Bounds::default(), &standard_evaluators(), Execution::Sequential);
        assert_eq!(a, b);
    }
}
