//! Helpers shared by the integration tests. Pointwise arithmetic here works
//! on plain per-tick vectors, independent of the library's interval code.
#![allow(dead_code)]

use periodk::database::SqlDatabase;
use periodk::relation::{DataType, KRelation, PeriodKRelation, Schema, SqlPeriodRelation, Tuple, Value};
use periodk::semiring::{SemiringSpec, SemiringValue};
use periodk::telement::{Interval, TemporalElement, Tick, TimeDomain};
use periodk::tuple;
use rand::Rng;

pub fn day() -> TimeDomain {
    TimeDomain::new(0, 24).unwrap()
}

pub fn works() -> SqlPeriodRelation {
    SqlPeriodRelation::from_triples(
        Schema::of(&[("name", DataType::Str), ("skill", DataType::Str)]).unwrap(),
        day(),
        [
            (tuple!["Ann", "SP"], 3, 10),
            (tuple!["Joe", "NS"], 8, 16),
            (tuple!["Sam", "SP"], 8, 16),
            (tuple!["Ann", "SP"], 18, 20),
        ],
    )
    .unwrap()
}

pub fn assign() -> SqlPeriodRelation {
    SqlPeriodRelation::from_triples(
        Schema::of(&[("mach", DataType::Str), ("skill", DataType::Str)]).unwrap(),
        day(),
        [
            (tuple!["M1", "SP"], 3, 12),
            (tuple!["M2", "SP"], 6, 14),
            (tuple!["M3", "NS"], 3, 16),
        ],
    )
    .unwrap()
}

pub fn works_db() -> SqlDatabase {
    SqlDatabase::new(day(), SemiringSpec::BAG)
        .with("works", works())
        .unwrap()
        .with("assign", assign())
        .unwrap()
}

pub const ONDUTY: &str = r#"(agg () (count *) (select (cmp = skill "SP") (rel works)))"#;
pub const SKILLREQ: &str = "(diff (project (skill) (rel assign)) (project (skill) (rel works)))";

/// `(values..., begin, end, mult)` rows of a SQL period relation.
pub fn listing(r: &SqlPeriodRelation) -> Vec<(Vec<Value>, Tick, Tick, u64)> {
    r.rows()
        .iter()
        .map(|row| (row.tuple.values().to_vec(), row.begin(), row.end(), row.mult))
        .collect()
}

pub fn nat(n: u64) -> SemiringValue {
    SemiringValue::Nat(n)
}

pub fn lift(spec: SemiringSpec, n: u64) -> SemiringValue {
    if spec.is_bag() {
        SemiringValue::Nat(n)
    } else {
        SemiringValue::Bool(n > 0)
    }
}

pub fn count(k: SemiringValue) -> u64 {
    match k {
        SemiringValue::Nat(n) => n,
        SemiringValue::Bool(b) => u64::from(b),
    }
}

/// Per-tick plus, times and monus on counts, collapsing to 0/1 for sets.
pub fn plus(spec: SemiringSpec, a: u64, b: u64) -> u64 {
    if spec.is_bag() {
        a + b
    } else {
        u64::from(a > 0 || b > 0)
    }
}

pub fn times(spec: SemiringSpec, a: u64, b: u64) -> u64 {
    if spec.is_bag() {
        a * b
    } else {
        u64::from(a > 0 && b > 0)
    }
}

pub fn minus(a: u64, b: u64) -> u64 {
    a.saturating_sub(b)
}

/// Value of `e` at every tick of its domain, summing overlapping pieces.
pub fn pointwise(e: &TemporalElement) -> Vec<u64> {
    let spec = e.spec();
    let d = e.domain();
    let mut out = vec![0u64; d.len() as usize];
    for (i, k) in e.support() {
        for t in i.begin()..i.end() {
            let slot = &mut out[(t - d.min()) as usize];
            *slot = plus(spec, *slot, count(*k));
        }
    }
    out
}

/// The normal form by definition: maximal runs of equal nonzero values.
pub fn runs(spec: SemiringSpec, domain: TimeDomain, values: &[u64]) -> Vec<(Interval, SemiringValue)> {
    let mut out = Vec::new();
    let mut start = 0usize;
    for i in 1..=values.len() {
        if i == values.len() || values[i] != values[start] {
            if values[start] != 0 {
                let b = domain.min() + start as Tick;
                let e = domain.min() + i as Tick;
                out.push((Interval::new(b, e).unwrap(), lift(spec, values[start])));
            }
            start = i;
        }
    }
    out
}

pub fn zip(a: &[u64], b: &[u64], f: impl Fn(u64, u64) -> u64) -> Vec<u64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

/// An element built from `(begin, length, count)` pieces, clipped to the
/// domain; pieces may overlap.
pub fn element(spec: SemiringSpec, domain: TimeDomain, pieces: &[(Tick, Tick, u64)]) -> TemporalElement {
    let pairs = pieces.iter().filter_map(|&(b, len, n)| {
        let b = b.clamp(domain.min(), domain.max() - 1);
        let e = (b + len.max(1)).min(domain.max());
        Some((Interval::new(b, e).ok()?, lift(spec, n)))
    });
    TemporalElement::new(spec, domain, pairs).unwrap()
}

pub fn random_element(rng: &mut impl Rng, spec: SemiringSpec, domain: TimeDomain, max_pieces: usize) -> TemporalElement {
    let n = rng.gen_range(0..=max_pieces);
    let span = domain.len() as Tick;
    let pieces: Vec<_> = (0..n)
        .map(|_| {
            let b = domain.min() + rng.gen_range(0..span);
            (b, rng.gen_range(1..=span), rng.gen_range(1..=3))
        })
        .collect();
    element(spec, domain, &pieces)
}

/// A relation over `(a int, b str)` with a few tuples and random histories.
pub fn random_relation(rng: &mut impl Rng, spec: SemiringSpec, domain: TimeDomain) -> PeriodKRelation {
    let schema = Schema::of(&[("a", DataType::Int), ("b", DataType::Str)]).unwrap();
    let n = rng.gen_range(0..=5);
    let pairs: Vec<(Tuple, TemporalElement)> = (0..n)
        .map(|_| {
            let t = tuple![rng.gen_range(0..3i64), ["x", "y"][rng.gen_range(0..2)]];
            (t, random_element(rng, spec, domain, 4))
        })
        .collect();
    PeriodKRelation::from_elements(schema, spec, domain, pairs).unwrap()
}

/// One snapshot per tick, each with a few random tuples.
pub fn random_snapshots(rng: &mut impl Rng, spec: SemiringSpec, domain: TimeDomain) -> (Schema, Vec<KRelation>) {
    let schema = Schema::of(&[("a", DataType::Int)]).unwrap();
    let snaps = domain
        .ticks()
        .map(|_| {
            let mut r = KRelation::empty(schema.clone(), spec);
            for _ in 0..rng.gen_range(0..3) {
                r.add(tuple![rng.gen_range(0..3i64)], lift(spec, rng.gen_range(1..3))).unwrap();
            }
            r
        })
        .collect();
    (schema, snaps)
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Every period semiring law, the coalesce-push equalities and the per-tick
/// homomorphism for one triple of (possibly unnormalized) elements.
pub fn check_laws(a: &TemporalElement, b: &TemporalElement, c: &TemporalElement) -> Result<(), String> {
    use periodk::period::{add_pointwise, mul_pointwise, PeriodValue};

    let spec = a.spec();
    let domain = a.domain();
    let err = |e: periodk::Error| e.to_string();
    let (pa, pb, pc) = (pointwise(a), pointwise(b), pointwise(c));
    let (ka, kb, kc) = (
        PeriodValue::new(a).map_err(err)?,
        PeriodValue::new(b).map_err(err)?,
        PeriodValue::new(c).map_err(err)?,
    );
    ensure!(ka.support() == runs(spec, domain, &pa).as_slice(), "coalesce({a}) = {ka}");
    ensure!(kc.support() == runs(spec, domain, &pc).as_slice(), "coalesce({c}) = {kc}");
    ensure!(PeriodValue::new(ka.element()).map_err(err)? == ka, "coalesce is not idempotent on {ka}");

    let add = |x: &PeriodValue, y: &PeriodValue| x.add(y).map_err(err);
    let mul = |x: &PeriodValue, y: &PeriodValue| x.mul(y).map_err(err);
    let zero = PeriodValue::zero(spec, domain);
    let one = PeriodValue::one(spec, domain);

    let sum = add(&ka, &kb)?;
    let prod = mul(&ka, &kb)?;
    let diff = ka.monus(&kb).map_err(err)?;
    ensure!(sum.support() == runs(spec, domain, &zip(&pa, &pb, |x, y| plus(spec, x, y))).as_slice(), "{ka} + {kb} = {sum}");
    ensure!(prod.support() == runs(spec, domain, &zip(&pa, &pb, |x, y| times(spec, x, y))).as_slice(), "{ka} * {kb} = {prod}");
    ensure!(diff.support() == runs(spec, domain, &zip(&pa, &pb, minus)).as_slice(), "{ka} - {kb} = {diff}");

    ensure!(sum == add(&kb, &ka)?, "addition does not commute");
    ensure!(prod == mul(&kb, &ka)?, "multiplication does not commute");
    ensure!(add(&sum, &kc)? == add(&ka, &add(&kb, &kc)?)?, "addition is not associative");
    ensure!(mul(&prod, &kc)? == mul(&ka, &mul(&kb, &kc)?)?, "multiplication is not associative");
    ensure!(add(&ka, &zero)? == ka, "zero is not neutral");
    ensure!(mul(&ka, &one)? == ka, "one is not neutral");
    ensure!(mul(&ka, &zero)? == zero, "zero does not annihilate");
    ensure!(
        mul(&ka, &add(&kb, &kc)?)? == add(&prod, &mul(&ka, &kc)?)?,
        "multiplication does not distribute"
    );

    // coalesce-push on the raw operands
    let c_of = |e: &TemporalElement| PeriodValue::new(e).map_err(err);
    ensure!(c_of(&add_pointwise(a, b).map_err(err)?)? == sum, "C(a + b) differs from C(C(a) + C(b))");
    ensure!(c_of(&mul_pointwise(a, b).map_err(err)?)? == prod, "C(a * b) differs from C(C(a) * C(b))");

    for (i, t) in domain.ticks().enumerate() {
        let at = |v: &PeriodValue| v.timeslice(t).map(count).map_err(err);
        ensure!(at(&ka)? == pa[i], "slice of {ka} at {t}");
        ensure!(at(&sum)? == plus(spec, pa[i], pb[i]), "slice of sum at {t}");
        ensure!(at(&prod)? == times(spec, pa[i], pb[i]), "slice of product at {t}");
        ensure!(at(&diff)? == minus(pa[i], pb[i]), "slice of monus at {t}");
    }
    Ok(())
}
