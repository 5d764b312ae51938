//! Acceptance checks, one line per criterion. Runs without the test harness
//! so the verdicts are always printed.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use periodk::algebra::{run_logical, AggFunc, BoundAgg};
use periodk::bench::run_scaling;
use periodk::dsl::parse_query;
use periodk::gen::Bounds;
use periodk::oracle::{differential_check_with, standard_evaluators, Evaluator, Oracle};
use periodk::period::PeriodValue;
use periodk::physical::{coalesce_op, run_physical, split_agg_sweep, split_diff_count, split_op, RewriteOptions};
use periodk::relation::{
    period_enc, period_enc_inv, DataType, PeriodKRelation, Rational, Schema, SnapshotKDatabase, SqlPeriodRelation, Value,
};
use periodk::semiring::{SemiringSpec, SemiringValue};
use periodk::telement::{Interval, TemporalElement, Tick, TimeDomain};
use periodk::{tuple, Execution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed > limit {
        return Err(format!("took {elapsed:.2?}, limit {limit:?}"));
    }
    Ok(())
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn row(values: Vec<Value>, b: Tick, e: Tick, m: u64) -> (Vec<Value>, Tick, Tick, u64) {
    (values, b, e, m)
}

fn s(x: &str) -> Value {
    Value::str(x)
}

fn running_example() -> Outcome {
    let start = Instant::now();
    let db = works_db();
    let period_db = db.to_period(Execution::default()).map_err(e)?;
    let onduty = parse_query(ONDUTY).map_err(e)?;
    let skillreq = parse_query(SKILLREQ).map_err(e)?;
    let expected_onduty: Vec<_> = [(0, 0, 3), (0, 16, 18), (0, 20, 24), (1, 3, 8), (1, 10, 16), (1, 18, 20), (2, 8, 10)]
        .into_iter()
        .map(|(n, b, e)| row(vec![Value::Int(n)], b, e, 1))
        .collect();
    let expected_skillreq = vec![
        row(vec![s("NS")], 3, 8, 1),
        row(vec![s("SP")], 6, 8, 1),
        row(vec![s("SP")], 10, 12, 1),
    ];
    for (q, expected) in [(&onduty, &expected_onduty), (&skillreq, &expected_skillreq)] {
        for opts in [RewriteOptions::default(), RewriteOptions { pull_up: false, fused: false }] {
            let got = run_physical(q, &db, opts).map_err(e)?;
            check!(&listing(&got) == expected, "physical {q}: {got}");
            let logical = run_logical(q, &period_db).map_err(e)?;
            check!(period_enc(&logical).map_err(e)? == got, "logical {q}: {logical}");
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok("7 onduty rows and 3 skillreq rows".into())
}

fn operator_goldens() -> Outcome {
    let start = Instant::now();
    let dom = day();
    let mach = Schema::of(&[("mach", DataType::Str)]).map_err(e)?;
    let machines = |rows: &[(&str, Tick, Tick)]| {
        SqlPeriodRelation::from_triples(mach.clone(), dom, rows.iter().map(|&(m, b, e)| (tuple![m], b, e)))
    };
    let active_schema = Schema::of(&[("mach", DataType::Str), ("consum", DataType::Int)]).map_err(e)?;
    let active = |rows: &[(&str, i64, Tick, Tick)]| {
        SqlPeriodRelation::from_triples(
            active_schema.clone(),
            dom,
            rows.iter().map(|&(m, c, b, e)| (tuple![m, c], b, e)),
        )
    };

    let r = machines(&[("M1", 1, 5), ("M1", 1, 10), ("M1", 5, 7), ("M2", 2, 6), ("M2", 3, 6)]).map_err(e)?;
    let out = coalesce_op(&r).map_err(e)?;
    let want = vec![
        row(vec![s("M1")], 1, 7, 2),
        row(vec![s("M1")], 7, 10, 1),
        row(vec![s("M2")], 2, 3, 1),
        row(vec![s("M2")], 3, 6, 2),
    ];
    check!(listing(&out) == want && out.total_rows() == 6, "bag coalesce: {out}");

    let r = machines(&[("M1", 1, 7), ("M1", 4, 9), ("M2", 2, 8)]).map_err(e)?;
    let out = split_op(&r, &r, &[0]).map_err(e)?;
    let want = vec![
        row(vec![s("M1")], 1, 4, 1),
        row(vec![s("M1")], 4, 7, 2),
        row(vec![s("M1")], 7, 9, 1),
        row(vec![s("M2")], 2, 8, 1),
    ];
    check!(listing(&out) == want && out.total_rows() == 5, "split: {out}");

    let r = active(&[("M1", 10, 1, 5), ("M1", 20, 1, 5), ("M1", 40, 3, 6), ("M1", 40, 5, 6)]).map_err(e)?;
    let avg = BoundAgg {
        func: AggFunc::Avg,
        arg: Some(1),
        arg_type: Some(DataType::Int),
    };
    let schema = Schema::of(&[("mach", DataType::Str), ("avg_consum", DataType::Rational)]).map_err(e)?;
    let out = split_agg_sweep(&[0], &avg, false, &r, schema).map_err(e)?;
    let rat = |n, d| Value::Rat(Rational::new(n, d));
    let want = vec![
        row(vec![s("M1"), rat(15, 1)], 1, 3, 1),
        row(vec![s("M1"), rat(70, 3)], 3, 5, 1),
        row(vec![s("M1"), rat(40, 1)], 5, 6, 1),
    ];
    check!(listing(&out) == want, "avg sweep: {out}");

    let l = active(&[("M1", 20, 1, 5), ("M1", 40, 1, 7), ("M1", 40, 1, 9)]).map_err(e)?;
    let r = active(&[("M1", 20, 2, 6), ("M1", 40, 3, 9)]).map_err(e)?;
    let out = split_diff_count(&l, &r).map_err(e)?;
    let want = vec![
        row(vec![s("M1"), Value::Int(20)], 1, 2, 1),
        row(vec![s("M1"), Value::Int(40)], 1, 3, 2),
        row(vec![s("M1"), Value::Int(40)], 3, 7, 1),
    ];
    check!(listing(&out) == want && out.total_rows() == 4, "split difference: {out}");
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok("coalesce 6, split 5, avg 3, difference 4 rows".into())
}

fn pv(spec: SemiringSpec, pieces: &[(Tick, Tick, u64)]) -> Result<PeriodValue, String> {
    let pairs = pieces
        .iter()
        .map(|&(b, end, n)| Ok((Interval::new(b, end).map_err(e)?, lift(spec, n))))
        .collect::<Result<Vec<_>, String>>()?;
    PeriodValue::new(&TemporalElement::new(spec, day(), pairs).map_err(e)?).map_err(e)
}

fn support(v: &PeriodValue) -> Vec<(Tick, Tick, SemiringValue)> {
    v.support().iter().map(|(i, k)| (i.begin(), i.end(), *k)).collect()
}

fn worked_elements() -> Outcome {
    let bag = SemiringSpec::BAG;
    let set = SemiringSpec::SET;
    let n = pv(bag, &[(3, 10, 1), (3, 13, 1)])?;
    check!(support(&n) == [(3, 10, nat(2)), (10, 13, nat(1))], "N-coalesce: {n}");
    let b = pv(set, &[(3, 10, 1), (3, 13, 1)])?;
    check!(support(&b) == [(3, 13, SemiringValue::Bool(true))], "B-coalesce: {b}");

    let sp = pv(bag, &[(3, 10, 1), (18, 20, 1)])?;
    let sam = pv(bag, &[(8, 16, 1)])?;
    let sum = sp.add(&sam).map_err(e)?;
    check!(
        support(&sum) == [(3, 8, nat(1)), (8, 10, nat(2)), (10, 16, nat(1)), (18, 20, nat(1))],
        "projection sum: {sum}"
    );

    let assigned = pv(bag, &[(3, 6, 1), (6, 12, 2), (12, 14, 1)])?;
    let diff = assigned.monus(&sum).map_err(e)?;
    check!(support(&diff) == [(6, 8, nat(1)), (10, 12, nat(1))], "monus: {diff}");

    let raw = TemporalElement::new(
        bag,
        day(),
        [(Interval::new(0, 5).map_err(e)?, nat(2)), (Interval::new(4, 5).map_err(e)?, nat(1))],
    )
    .map_err(e)?;
    let at4 = raw.timeslice(4).map_err(e)?;
    check!(at4 == nat(3), "slice at 4: {at4}");
    Ok("coalesce N and B, projection sum, monus, slice".into())
}

fn differential() -> Outcome {
    let start = Instant::now();
    let mut evaluators: Vec<Box<dyn Evaluator>> = standard_evaluators();
    evaluators.push(Box::new(Oracle));
    let reports = differential_check_with(0..1000, &Bounds::default(), &evaluators, Execution::default());
    let failed: Vec<_> = reports.iter().filter(|r| !r.passed()).collect();
    if let Some(first) = failed.first() {
        return Err(format!("{} of 1000 instances disagree; first:\n{first}", failed.len()));
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("1000 bag instances, {} evaluators, {:.1?}", evaluators.len(), start.elapsed()))
}

fn laws() -> Outcome {
    let start = Instant::now();
    let domain = TimeDomain::new(-4, 20).map_err(e)?;
    for spec in [SemiringSpec::BAG, SemiringSpec::SET] {
        let mut rng = ChaCha8Rng::seed_from_u64(if spec.is_bag() { 5 } else { 6 });
        for i in 0..10_000 {
            let mut next = || random_element(&mut rng, spec, domain, 5);
            let (a, b, c) = (next(), next(), next());
            check_laws(&a, &b, &c).map_err(|msg| format!("{spec:?} triple {i}: {msg}"))?;
        }
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("10000 triples per semiring, {:.1?}", start.elapsed()))
}

fn scaling() -> Outcome {
    let report = run_scaling(&[10_000, 100_000, 1_000_000], 3, Execution::default(), 42);
    let exponent = report.exponent.ok_or("no exponent")?;
    let table: Vec<String> = report
        .measurements
        .iter()
        .map(|m| format!("{}: {:.4}s", m.rows, m.min_secs()))
        .collect();
    let largest = report.measurements.last().ok_or("no measurements")?;
    check!(exponent.le(&1.3), "growth exponent {exponent:.3} ({})", table.join(", "));
    check!(largest.runs.iter().all(|d| d.as_secs_f64() < 30.0), "1M rows too slow ({})", table.join(", "));
    Ok(format!("exponent {exponent:.3} ({})", table.join(", ")))
}

fn round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..1000 {
        let spec = if i % 2 == 0 { SemiringSpec::BAG } else { SemiringSpec::SET };
        let domain = TimeDomain::new(rng.gen_range(-3..3), rng.gen_range(3..20)).map_err(e)?;
        let r = random_relation(&mut rng, spec, domain);
        if spec.is_bag() {
            let back = period_enc_inv(&period_enc(&r).map_err(e)?).map_err(e)?;
            check!(back == r, "instance {i}: period encoding does not round trip");
        }
        let snaps = r.to_snapshots();
        let back = PeriodKRelation::from_snapshots(r.schema().clone(), spec, domain, &snaps).map_err(e)?;
        check!(back == r, "instance {i}: snapshot encoding does not round trip");

        let (schema, snaps) = random_snapshots(&mut rng, spec, domain);
        let mut db = SnapshotKDatabase::new(domain, spec);
        db.insert("r", schema, snaps).map_err(e)?;
        let encoded = db.encode("r").map_err(e)?;
        let decoded = SnapshotKDatabase::decode([("r", &encoded)], domain, spec).map_err(e)?;
        check!(decoded == db, "instance {i}: snapshot database does not round trip");
    }
    Ok("1000 relations, both encodings".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("running example", running_example),
        ("operator goldens", operator_goldens),
        ("worked temporal elements", worked_elements),
        ("differential suite", differential),
        ("law suite", laws),
        ("coalesce scaling", scaling),
        ("round trips", round_trips),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(msg) => {
                failures += 1;
                println!("criterion {}: FAIL  {name}: {msg}", i + 1);
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
