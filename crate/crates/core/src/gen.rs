//! Random databases and well-typed queries for differential testing.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::algebra::{agg_column_name, AggArg, AggFunc, CmpOp, Operand, Predicate, ProjExpr, QueryAst};
use crate::database::PeriodDatabase;
use crate::error::Result;
use crate::period::PeriodValue;
use crate::relation::{Attribute, DataType, PeriodKRelation, Rational, Schema, Tuple, Value};
use crate::semiring::{SemiringSpec, SemiringValue};
use crate::telement::{Interval, TemporalElement, TimeDomain};

/// Size limits for generated instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub max_relations: usize,
    pub max_tuples: usize,
    /// Largest number of ticks in the time domain.
    pub max_ticks: u64,
    pub max_mult: u64,
    pub max_depth: usize,
    pub spec: SemiringSpec,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_relations: 3,
            max_tuples: 4,
            max_ticks: 16,
            max_mult: 3,
            max_depth: 3,
            spec: SemiringSpec::BAG,
        }
    }
}

/// A database together with a query that validates against it.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub db: PeriodDatabase,
    pub query: QueryAst,
}

impl Instance {
    pub fn generate(seed: u64, bounds: &Bounds) -> Result<Instance> {
        let mut g = Generator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            bounds: *bounds,
            next_name: 0,
            relations: Vec::new(),
        };
        let db = g.database()?;
        let query = g.query(bounds.max_depth).0;
        Ok(Instance { seed, db, query })
    }
}

struct Generator {
    rng: ChaCha8Rng,
    bounds: Bounds,
    next_name: usize,
    relations: Vec<(String, Schema)>,
}

const STRINGS: [&str; 3] = ["a", "b", "c"];

impl Generator {
    fn fresh(&mut self) -> String {
        self.next_name += 1;
        format!("c{}", self.next_name)
    }

    fn value(&mut self, ty: DataType) -> Value {
        match ty {
            DataType::Int => Value::Int(self.rng.gen_range(0..3)),
            DataType::Str => Value::str(*STRINGS.choose(&mut self.rng).expect("nonempty")),
            DataType::Rational => Value::Rat(Rational::new(self.rng.gen_range(0..6), 2)),
        }
    }

    fn database(&mut self) -> Result<PeriodDatabase> {
        let ticks = self.rng.gen_range(1..=self.bounds.max_ticks.max(1)) as i64;
        let min = self.rng.gen_range(-3..=3);
        let domain = TimeDomain::new(min, min + ticks)?;
        let spec = self.bounds.spec;
        let mut db = PeriodDatabase::new(domain, spec);
        let count = self.rng.gen_range(1..=self.bounds.max_relations.max(1));
        for r in 0..count {
            let arity = self.rng.gen_range(1..=3);
            let attrs = (0..arity)
                .map(|_| {
                    let ty = if self.rng.gen_bool(0.5) { DataType::Int } else { DataType::Str };
                    Attribute::new(self.fresh(), ty)
                })
                .collect();
            let schema = Schema::new(attrs)?;
            let mut rel = PeriodKRelation::empty(schema.clone(), spec, domain);
            for _ in 0..self.rng.gen_range(0..=self.bounds.max_tuples) {
                let tuple = Tuple::new(schema.attrs().iter().map(|a| self.value(a.ty)).collect());
                let element = self.element(spec, domain)?;
                rel.add(tuple, PeriodValue::new(&element)?)?;
            }
            let name = format!("r{r}");
            db.insert(name.clone(), rel)?;
            self.relations.push((name, schema));
        }
        Ok(db)
    }

    fn element(&mut self, spec: SemiringSpec, domain: TimeDomain) -> Result<TemporalElement> {
        let mut pieces = Vec::new();
        for _ in 0..self.rng.gen_range(1..=2) {
            let b = self.rng.gen_range(domain.min()..domain.max());
            let e = self.rng.gen_range(b + 1..=domain.max());
            let v = if spec.is_bag() {
                SemiringValue::Nat(self.rng.gen_range(1..=self.bounds.max_mult.max(1)))
            } else {
                SemiringValue::Bool(true)
            };
            pieces.push((Interval::new(b, e)?, v));
        }
        TemporalElement::new(spec, domain, pieces)
    }

    /// A query of at most `depth` nested operators and its output schema.
    fn query(&mut self, depth: usize) -> (QueryAst, Schema) {
        if depth == 0 || self.rng.gen_bool(0.2) {
            let (name, schema) = self.relations.choose(&mut self.rng).expect("one relation").clone();
            return (QueryAst::rel(name), schema);
        }
        let ops: &[u8] = if self.bounds.spec.is_bag() { &[0, 1, 2, 3, 4, 5] } else { &[0, 1, 2, 3, 4] };
        match *ops.choose(&mut self.rng).expect("nonempty") {
            0 => {
                let (input, schema) = self.query(depth - 1);
                let pred = self.predicate(&schema, 2);
                (QueryAst::select(pred, input), schema)
            }
            1 => {
                let (input, schema) = self.query(depth - 1);
                self.project(input, &schema)
            }
            2 => {
                let (left, ls) = self.query(depth - 1);
                let clash = |rs: &Schema| rs.names().any(|n| ls.index_of(n).is_some());
                let Some((right, rs)) = self.operand(depth, &clash) else {
                    return self.fallback(left, ls);
                };
                let (right, rs) = if clash(&rs) { self.rename_all(right, &rs) } else { (right, rs) };
                let mut attrs = ls.attrs().to_vec();
                attrs.extend_from_slice(rs.attrs());
                let schema = Schema::new(attrs).expect("fresh names");
                let pred = if self.rng.gen_bool(0.3) {
                    Predicate::always()
                } else {
                    self.predicate(&schema, 1)
                };
                (QueryAst::join(pred, left, right), schema)
            }
            op @ (3 | 4) => {
                let (left, ls) = self.query(depth - 1);
                let mismatch = |rs: &Schema| !same_types(rs, &ls);
                let Some((right, rs)) = self.operand(depth, &mismatch) else {
                    return self.fallback(left, ls);
                };
                let right = if mismatch(&rs) { self.coerce(right, &rs, &ls) } else { right };
                let q = if op == 3 {
                    QueryAst::union(left, right)
                } else {
                    QueryAst::diff(left, right)
                };
                (q, ls)
            }
            _ => {
                let (input, schema) = self.query(depth - 1);
                self.aggregate(input, &schema)
            }
        }
    }

    /// Right operand of a binary operator at `depth`. If `needs_wrap` holds
    /// for its schema, a projection will be put on top, so it must fit in one
    /// less level. `None` when no operand fits.
    fn operand(
        &mut self,
        depth: usize,
        needs_wrap: &dyn Fn(&Schema) -> bool,
    ) -> Option<(QueryAst, Schema)> {
        let (q, s) = self.query(depth - 1);
        if !needs_wrap(&s) || q.depth() + 1 < depth {
            return Some((q, s));
        }
        if depth >= 2 {
            return Some(self.query(depth - 2));
        }
        let fits: Vec<(String, Schema)> = self
            .relations
            .iter()
            .filter(|(_, s)| !needs_wrap(s))
            .cloned()
            .collect();
        fits.choose(&mut self.rng)
            .map(|(name, s)| (QueryAst::rel(name.clone()), s.clone()))
    }

    fn fallback(&mut self, input: QueryAst, schema: Schema) -> (QueryAst, Schema) {
        let pred = self.predicate(&schema, 1);
        (QueryAst::select(pred, input), schema)
    }

    fn literal_for(&mut self, ty: DataType) -> Value {
        // numeric columns can hold rationals after an average
        if ty == DataType::Rational && self.rng.gen_bool(0.5) {
            return Value::Int(self.rng.gen_range(0..3));
        }
        self.value(ty)
    }

    fn predicate(&mut self, schema: &Schema, depth: usize) -> Predicate {
        if depth > 0 && self.rng.gen_bool(0.2) {
            let parts = (0..self.rng.gen_range(0..=2))
                .map(|_| self.predicate(schema, depth - 1))
                .collect();
            return if self.rng.gen_bool(0.5) {
                Predicate::And(parts)
            } else {
                Predicate::Or(parts)
            };
        }
        let attrs = schema.attrs();
        let left = attrs.choose(&mut self.rng).expect("nonempty schema").clone();
        let op = *CmpOp::ALL.choose(&mut self.rng).expect("nonempty");
        let partners: Vec<&Attribute> = attrs
            .iter()
            .filter(|a| a.name != left.name && a.ty.compatible(left.ty))
            .collect();
        let right = if !partners.is_empty() && self.rng.gen_bool(0.4) {
            Operand::Attr(partners.choose(&mut self.rng).expect("nonempty").name.clone())
        } else {
            Operand::Lit(self.literal_for(left.ty))
        };
        Predicate::cmp(op, left.name, right)
    }

    fn project(&mut self, input: QueryAst, schema: &Schema) -> (QueryAst, Schema) {
        let mut picked: Vec<&Attribute> = schema
            .attrs()
            .iter()
            .filter(|_| self.rng.gen_bool(0.6))
            .collect();
        if picked.is_empty() {
            picked.push(schema.attrs().choose(&mut self.rng).expect("nonempty"));
        }
        let mut exprs = Vec::new();
        let mut attrs = Vec::new();
        for a in picked {
            if self.rng.gen_bool(0.25) {
                let to = self.fresh();
                exprs.push(ProjExpr::Rename {
                    from: a.name.clone(),
                    to: to.clone(),
                });
                attrs.push(Attribute::new(to, a.ty));
            } else {
                exprs.push(ProjExpr::Attr(a.name.clone()));
                attrs.push(a.clone());
            }
        }
        if self.rng.gen_bool(0.15) {
            let ty = if self.rng.gen_bool(0.5) { DataType::Int } else { DataType::Str };
            let name = self.fresh();
            exprs.push(ProjExpr::Const {
                value: self.value(ty),
                name: name.clone(),
            });
            attrs.push(Attribute::new(name, ty));
        }
        (QueryAst::project(exprs, input), Schema::new(attrs).expect("distinct names"))
    }

    fn rename_all(&mut self, input: QueryAst, schema: &Schema) -> (QueryAst, Schema) {
        let mut exprs = Vec::new();
        let mut attrs = Vec::new();
        for a in schema.attrs() {
            let to = self.fresh();
            exprs.push(ProjExpr::Rename {
                from: a.name.clone(),
                to: to.clone(),
            });
            attrs.push(Attribute::new(to, a.ty));
        }
        (QueryAst::project(exprs, input), Schema::new(attrs).expect("fresh names"))
    }

    /// Projects `input` onto columns typed like `target`, using constants
    /// where no column of the right type exists.
    fn coerce(&mut self, input: QueryAst, schema: &Schema, target: &Schema) -> QueryAst {
        let mut exprs = Vec::new();
        for t in target.attrs() {
            let same: Vec<&Attribute> = schema.attrs().iter().filter(|a| a.ty == t.ty).collect();
            let to = self.fresh();
            match same.choose(&mut self.rng) {
                Some(a) => exprs.push(ProjExpr::Rename {
                    from: a.name.clone(),
                    to,
                }),
                None => exprs.push(ProjExpr::Const {
                    value: self.value(t.ty),
                    name: to,
                }),
            }
        }
        QueryAst::project(exprs, input)
    }

    fn aggregate(&mut self, input: QueryAst, schema: &Schema) -> (QueryAst, Schema) {
        let numeric: Vec<&Attribute> = schema.attrs().iter().filter(|a| a.ty.is_numeric()).collect();
        let func = *AggFunc::ALL.choose(&mut self.rng).expect("nonempty");
        let (func, arg, arg_ty) = match func {
            AggFunc::Sum | AggFunc::Avg if !numeric.is_empty() => {
                let a = numeric.choose(&mut self.rng).expect("nonempty");
                (func, AggArg::Attr(a.name.clone()), a.ty)
            }
            AggFunc::Min | AggFunc::Max => {
                let a = schema.attrs().choose(&mut self.rng).expect("nonempty");
                (func, AggArg::Attr(a.name.clone()), a.ty)
            }
            _ if self.rng.gen_bool(0.6) => (AggFunc::Count, AggArg::Star, DataType::Int),
            _ => {
                let a = schema.attrs().choose(&mut self.rng).expect("nonempty");
                (AggFunc::Count, AggArg::Attr(a.name.clone()), a.ty)
            }
        };
        let out_name = agg_column_name(func, &arg);
        let out_ty = match func {
            AggFunc::Count => DataType::Int,
            AggFunc::Avg => DataType::Rational,
            _ => arg_ty,
        };
        let group: Vec<Attribute> = schema
            .attrs()
            .iter()
            .filter(|a| a.name != out_name && self.rng.gen_bool(0.35))
            .cloned()
            .collect();
        let mut attrs = group.clone();
        attrs.push(Attribute::new(out_name, out_ty));
        let names = group.into_iter().map(|a| a.name).collect();
        (QueryAst::agg(names, func, arg, input), Schema::new(attrs).expect("distinct names"))
    }
}

fn same_types(a: &Schema, b: &Schema) -> bool {
    a.arity() == b.arity() && a.attrs().iter().zip(b.attrs()).all(|(x, y)| x.ty == y.ty)
}
