//! Relational algebra queries: the AST, validation into a typed [`Plan`], and
//! evaluation over period K-relations.
//!
//! Every operator maps to period-semiring arithmetic on annotations:
//! selection keeps or drops an annotation, projection and union add, join
//! multiplies and difference applies the monus. Aggregation is evaluated on
//! the intervals where the input is constant.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::database::{Catalog, PeriodDatabase};
use crate::error::{Error, Result};
use crate::period::PeriodValue;
use crate::relation::{
    checked_rational_sum, Attribute, DataType, PeriodKRelation, Rational, Schema, Tuple, Value,
};
use crate::semiring::SemiringValue;
use crate::telement::{Interval, TemporalElement, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CmpOp> {
        CmpOp::ALL.into_iter().find(|op| op.symbol() == s)
    }

    pub fn test(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Attr(String),
    Lit(Value),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    Cmp {
        op: CmpOp,
        left: String,
        right: Operand,
    },
    /// Empty conjunction is true.
    And(Vec<Predicate>),
    /// Empty disjunction is false.
    Or(Vec<Predicate>),
}

impl Predicate {
    pub fn cmp(op: CmpOp, left: impl Into<String>, right: Operand) -> Self {
        Predicate::Cmp {
            op,
            left: left.into(),
            right,
        }
    }

    pub fn always() -> Self {
        Predicate::And(Vec::new())
    }
}

/// One output column of a projection.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ProjExpr {
    Attr(String),
    Rename { from: String, to: String },
    Const { value: Value, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub const ALL: [AggFunc; 5] = [AggFunc::Count, AggFunc::Sum, AggFunc::Avg, AggFunc::Min, AggFunc::Max];

    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Count => "count",
            AggFunc::Sum => "sum",
            AggFunc::Avg => "avg",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
        }
    }

    pub fn from_name(s: &str) -> Option<AggFunc> {
        AggFunc::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AggArg {
    Star,
    Attr(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum QueryAst {
    Rel(String),
    Select {
        pred: Predicate,
        input: Box<QueryAst>,
    },
    Project {
        exprs: Vec<ProjExpr>,
        input: Box<QueryAst>,
    },
    Join {
        pred: Predicate,
        left: Box<QueryAst>,
        right: Box<QueryAst>,
    },
    Union {
        left: Box<QueryAst>,
        right: Box<QueryAst>,
    },
    Diff {
        left: Box<QueryAst>,
        right: Box<QueryAst>,
    },
    Agg {
        group: Vec<String>,
        func: AggFunc,
        arg: AggArg,
        input: Box<QueryAst>,
    },
}

impl QueryAst {
    pub fn rel(name: impl Into<String>) -> Self {
        QueryAst::Rel(name.into())
    }

    pub fn select(pred: Predicate, input: QueryAst) -> Self {
        QueryAst::Select {
            pred,
            input: Box::new(input),
        }
    }

    pub fn project(exprs: Vec<ProjExpr>, input: QueryAst) -> Self {
        QueryAst::Project {
            exprs,
            input: Box::new(input),
        }
    }

    pub fn join(pred: Predicate, left: QueryAst, right: QueryAst) -> Self {
        QueryAst::Join {
            pred,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn union(left: QueryAst, right: QueryAst) -> Self {
        QueryAst::Union {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn diff(left: QueryAst, right: QueryAst) -> Self {
        QueryAst::Diff {
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn agg(group: Vec<String>, func: AggFunc, arg: AggArg, input: QueryAst) -> Self {
        QueryAst::Agg {
            group,
            func,
            arg,
            input: Box::new(input),
        }
    }

    /// Number of operator nodes along the longest path to a leaf.
    pub fn depth(&self) -> usize {
        match self {
            QueryAst::Rel(_) => 0,
            QueryAst::Select { input, .. }
            | QueryAst::Project { input, .. }
            | QueryAst::Agg { input, .. } => 1 + input.depth(),
            QueryAst::Join { left, right, .. }
            | QueryAst::Union { left, right }
            | QueryAst::Diff { left, right } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// Renders a literal the way the query parser reads it back.
pub fn render_literal(v: &Value) -> String {
    match v {
        Value::Null => "null".to_owned(),
        Value::Int(i) => i.to_string(),
        Value::Rat(r) if r.is_integer() => format!("{}/1", r.numer()),
        Value::Rat(r) => format!("{}/{}", r.numer(), r.denom()),
        Value::Str(s) => {
            let mut out = String::with_capacity(s.len() + 2);
            out.push('"');
            for c in s.chars() {
                if c == '"' || c == '\\' {
                    out.push('\\');
                }
                out.push(c);
            }
            out.push('"');
            out
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Cmp { op, left, right } => {
                write!(f, "(cmp {} {left} ", op.symbol())?;
                match right {
                    Operand::Attr(a) => write!(f, "{a})"),
                    Operand::Lit(v) => write!(f, "{})", render_literal(v)),
                }
            }
            Predicate::And(ps) | Predicate::Or(ps) => {
                f.write_str(if matches!(self, Predicate::And(_)) { "(and" } else { "(or" })?;
                for p in ps {
                    write!(f, " {p}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryAst::Rel(name) => write!(f, "(rel {name})"),
            QueryAst::Select { pred, input } => write!(f, "(select {pred} {input})"),
            QueryAst::Project { exprs, input } => {
                f.write_str("(project (")?;
                for (i, e) in exprs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    match e {
                        ProjExpr::Attr(a) => f.write_str(a)?,
                        ProjExpr::Rename { from, to } => write!(f, "(-> {from} {to})")?,
                        ProjExpr::Const { value, name } => {
                            write!(f, "(-> {} {name})", render_literal(value))?
                        }
                    }
                }
                write!(f, ") {input})")
            }
            QueryAst::Join { pred, left, right } => write!(f, "(join {pred} {left} {right})"),
            QueryAst::Union { left, right } => write!(f, "(union {left} {right})"),
            QueryAst::Diff { left, right } => write!(f, "(diff {left} {right})"),
            QueryAst::Agg {
                group,
                func,
                arg,
                input,
            } => {
                write!(f, "(agg ({}) ({} ", group.join(" "), func.name())?;
                match arg {
                    AggArg::Star => f.write_str("*")?,
                    AggArg::Attr(a) => f.write_str(a)?,
                }
                write!(f, ") {input})")
            }
        }
    }
}

/// Column reference or literal after name resolution.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoundOperand {
    Col(usize),
    Lit(Value),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoundPredicate {
    Cmp {
        op: CmpOp,
        left: usize,
        right: BoundOperand,
    },
    And(Vec<BoundPredicate>),
    Or(Vec<BoundPredicate>),
}

impl BoundPredicate {
    /// Any comparison involving `Null` is false.
    pub fn eval(&self, t: &Tuple) -> bool {
        match self {
            BoundPredicate::Cmp { op, left, right } => {
                let rhs = match right {
                    BoundOperand::Col(i) => t.get(*i),
                    BoundOperand::Lit(v) => v,
                };
                t.get(*left).sql_cmp(rhs).is_some_and(|ord| op.test(ord))
            }
            BoundPredicate::And(ps) => ps.iter().all(|p| p.eval(t)),
            BoundPredicate::Or(ps) => ps.iter().any(|p| p.eval(t)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BoundExpr {
    Col(usize),
    Const(Value),
}

impl BoundExpr {
    pub fn eval(&self, t: &Tuple) -> Value {
        match self {
            BoundExpr::Col(i) => t.get(*i).clone(),
            BoundExpr::Const(v) => v.clone(),
        }
    }
}

/// Evaluates projection expressions over `t`.
pub fn project_tuple(exprs: &[BoundExpr], t: &Tuple) -> Tuple {
    Tuple::new(exprs.iter().map(|e| e.eval(t)).collect())
}

/// Aggregate function with its argument column; `arg == None` is `count(*)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundAgg {
    pub func: AggFunc,
    pub arg: Option<usize>,
    /// Type of the argument column, when there is one.
    pub arg_type: Option<DataType>,
}

impl BoundAgg {
    /// Result over a bag of rows given as tuple/multiplicity pairs. Empty
    /// input gives 0 for counts and `Null` otherwise; `Null` arguments are
    /// skipped.
    pub fn apply<'a>(&self, rows: impl IntoIterator<Item = (&'a Tuple, u64)>) -> Result<Value> {
        let Some(col) = self.arg else {
            let n: u64 = rows.into_iter().map(|(_, m)| m).sum();
            return count_value(n);
        };
        let values = rows
            .into_iter()
            .map(|(t, m)| (t.get(col), m))
            .filter(|(v, _)| !v.is_null());
        match self.func {
            AggFunc::Count => count_value(values.map(|(_, m)| m).sum()),
            AggFunc::Sum | AggFunc::Avg => {
                let mut count: u64 = 0;
                let mut pairs = Vec::new();
                for (v, m) in values {
                    let r = v.as_rational().ok_or_else(|| Error::NonNumericAggregate {
                        func: self.func.name(),
                        attr: format!("#{col}"),
                        ty: v.data_type().map_or("null".into(), |t| t.to_string()),
                    })?;
                    count += m;
                    pairs.push((r, m));
                }
                let Some(sum) = checked_rational_sum(pairs)? else {
                    return Ok(Value::Null);
                };
                if self.func == AggFunc::Avg {
                    Ok(Value::Rat(sum / Rational::from_integer(i128::from(count))))
                } else {
                    numeric_value(sum, self.arg_type)
                }
            }
            AggFunc::Min => Ok(values.map(|(v, _)| v).min().cloned().unwrap_or(Value::Null)),
            AggFunc::Max => Ok(values.map(|(v, _)| v).max().cloned().unwrap_or(Value::Null)),
        }
    }

    pub fn output_type(&self) -> DataType {
        match self.func {
            AggFunc::Count => DataType::Int,
            AggFunc::Avg => DataType::Rational,
            AggFunc::Sum | AggFunc::Min | AggFunc::Max => self.arg_type.unwrap_or(DataType::Int),
        }
    }
}

pub(crate) fn count_value(n: u64) -> Result<Value> {
    i64::try_from(n)
        .map(Value::Int)
        .map_err(|_| Error::Overflow("count"))
}

/// Converts an exact sum back to the column's type.
pub(crate) fn numeric_value(sum: Rational, ty: Option<DataType>) -> Result<Value> {
    if ty == Some(DataType::Int) {
        debug_assert!(sum.is_integer());
        i64::try_from(sum.to_integer())
            .map(Value::Int)
            .map_err(|_| Error::Overflow("sum"))
    } else {
        Ok(Value::Rat(sum))
    }
}

/// A validated query with resolved column positions and output schemas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    pub node: PlanNode,
    pub schema: Schema,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanNode {
    Rel(String),
    Select {
        pred: BoundPredicate,
        input: Box<Plan>,
    },
    Project {
        exprs: Vec<BoundExpr>,
        input: Box<Plan>,
    },
    Join {
        pred: BoundPredicate,
        left: Box<Plan>,
        right: Box<Plan>,
    },
    Union {
        left: Box<Plan>,
        right: Box<Plan>,
    },
    Diff {
        left: Box<Plan>,
        right: Box<Plan>,
    },
    Agg {
        group: Vec<usize>,
        agg: BoundAgg,
        input: Box<Plan>,
    },
}

/// Name of the aggregate output column.
pub fn agg_column_name(func: AggFunc, arg: &AggArg) -> String {
    match arg {
        AggArg::Star => func.name().to_owned(),
        AggArg::Attr(a) => format!("{}_{a}", func.name()),
    }
}

/// Resolves names, checks types and computes output schemas.
pub fn validate(ast: &QueryAst, catalog: &Catalog) -> Result<Plan> {
    match ast {
        QueryAst::Rel(name) => Ok(Plan {
            node: PlanNode::Rel(name.clone()),
            schema: catalog.schema(name)?.clone(),
        }),
        QueryAst::Select { pred, input } => {
            let input = validate(input, catalog)?;
            let pred = bind_predicate(pred, &input.schema)?;
            Ok(Plan {
                schema: input.schema.clone(),
                node: PlanNode::Select {
                    pred,
                    input: Box::new(input),
                },
            })
        }
        QueryAst::Project { exprs, input } => {
            let input = validate(input, catalog)?;
            let mut bound = Vec::with_capacity(exprs.len());
            let mut attrs = Vec::with_capacity(exprs.len());
            for e in exprs {
                match e {
                    ProjExpr::Attr(a) => {
                        let i = input.schema.resolve(a)?;
                        bound.push(BoundExpr::Col(i));
                        attrs.push(input.schema.attrs()[i].clone());
                    }
                    ProjExpr::Rename { from, to } => {
                        let i = input.schema.resolve(from)?;
                        bound.push(BoundExpr::Col(i));
                        attrs.push(Attribute::new(to.clone(), input.schema.attrs()[i].ty));
                    }
                    ProjExpr::Const { value, name } => {
                        let ty = value.data_type().ok_or_else(|| {
                            Error::TypeMismatch(format!("constant column `{name}` cannot be null"))
                        })?;
                        bound.push(BoundExpr::Const(value.clone()));
                        attrs.push(Attribute::new(name.clone(), ty));
                    }
                }
            }
            Ok(Plan {
                schema: Schema::new(attrs)?,
                node: PlanNode::Project {
                    exprs: bound,
                    input: Box::new(input),
                },
            })
        }
        QueryAst::Join { pred, left, right } => {
            let left = validate(left, catalog)?;
            let right = validate(right, catalog)?;
            let attrs = left
                .schema
                .attrs()
                .iter()
                .chain(right.schema.attrs())
                .cloned()
                .collect();
            let schema = Schema::new(attrs)?;
            let pred = bind_predicate(pred, &schema)?;
            Ok(Plan {
                schema,
                node: PlanNode::Join {
                    pred,
                    left: Box::new(left),
                    right: Box::new(right),
                },
            })
        }
        QueryAst::Union { left, right } | QueryAst::Diff { left, right } => {
            let left = validate(left, catalog)?;
            let right = validate(right, catalog)?;
            check_union_compatible(&left.schema, &right.schema)?;
            let schema = left.schema.clone();
            let (left, right) = (Box::new(left), Box::new(right));
            let node = if matches!(ast, QueryAst::Union { .. }) {
                PlanNode::Union { left, right }
            } else {
                PlanNode::Diff { left, right }
            };
            Ok(Plan { node, schema })
        }
        QueryAst::Agg {
            group,
            func,
            arg,
            input,
        } => {
            if !catalog.spec().is_bag() {
                return Err(Error::UnsupportedSemiring("aggregation"));
            }
            let input = validate(input, catalog)?;
            let group_idx = group
                .iter()
                .map(|g| input.schema.resolve(g))
                .collect::<Result<Vec<_>>>()?;
            let (arg_idx, arg_type) = match arg {
                AggArg::Star if *func == AggFunc::Count => (None, None),
                AggArg::Star => {
                    return Err(Error::TypeMismatch(format!(
                        "{}(*) is not defined",
                        func.name()
                    )))
                }
                AggArg::Attr(a) => {
                    let i = input.schema.resolve(a)?;
                    let ty = input.schema.attrs()[i].ty;
                    if matches!(func, AggFunc::Sum | AggFunc::Avg) && !ty.is_numeric() {
                        return Err(Error::NonNumericAggregate {
                            func: func.name(),
                            attr: a.clone(),
                            ty: ty.to_string(),
                        });
                    }
                    (Some(i), Some(ty))
                }
            };
            let agg = BoundAgg {
                func: *func,
                arg: arg_idx,
                arg_type,
            };
            let mut attrs: Vec<Attribute> = group_idx
                .iter()
                .map(|&i| input.schema.attrs()[i].clone())
                .collect();
            attrs.push(Attribute::new(agg_column_name(*func, arg), agg.output_type()));
            Ok(Plan {
                schema: Schema::new(attrs)?,
                node: PlanNode::Agg {
                    group: group_idx,
                    agg,
                    input: Box::new(input),
                },
            })
        }
    }
}

fn check_union_compatible(left: &Schema, right: &Schema) -> Result<()> {
    if left.arity() != right.arity() {
        return Err(Error::UnionIncompatible(format!(
            "arity {} vs {}",
            left.arity(),
            right.arity()
        )));
    }
    for (a, b) in left.attrs().iter().zip(right.attrs()) {
        if a.ty != b.ty {
            return Err(Error::UnionIncompatible(format!(
                "`{}` is {} but `{}` is {}",
                a.name, a.ty, b.name, b.ty
            )));
        }
    }
    Ok(())
}

fn bind_predicate(pred: &Predicate, schema: &Schema) -> Result<BoundPredicate> {
    match pred {
        Predicate::Cmp { op, left, right } => {
            let l = schema.resolve(left)?;
            let lty = schema.attrs()[l].ty;
            let (right, rty) = match right {
                Operand::Attr(a) => {
                    let r = schema.resolve(a)?;
                    (BoundOperand::Col(r), Some(schema.attrs()[r].ty))
                }
                Operand::Lit(v) => (BoundOperand::Lit(v.clone()), v.data_type()),
            };
            if let Some(rty) = rty {
                if !lty.compatible(rty) {
                    return Err(Error::TypeMismatch(format!(
                        "cannot compare `{left}` ({lty}) with {rty}"
                    )));
                }
            }
            Ok(BoundPredicate::Cmp {
                op: *op,
                left: l,
                right,
            })
        }
        Predicate::And(ps) => Ok(BoundPredicate::And(
            ps.iter().map(|p| bind_predicate(p, schema)).collect::<Result<_>>()?,
        )),
        Predicate::Or(ps) => Ok(BoundPredicate::Or(
            ps.iter().map(|p| bind_predicate(p, schema)).collect::<Result<_>>()?,
        )),
    }
}

pub type MonusFn = fn(&PeriodValue, &PeriodValue) -> Result<PeriodValue>;

/// Evaluator over period K-relations. The monus is pluggable so tests can
/// check that a wrong difference is caught.
#[derive(Debug, Clone, Copy)]
pub struct LogicalEvaluator {
    pub monus: MonusFn,
}

impl Default for LogicalEvaluator {
    fn default() -> Self {
        LogicalEvaluator {
            monus: PeriodValue::monus,
        }
    }
}

/// Evaluates `plan` over `db` in the period semiring.
pub fn eval_logical(plan: &Plan, db: &PeriodDatabase) -> Result<PeriodKRelation> {
    LogicalEvaluator::default().eval(plan, db)
}

impl LogicalEvaluator {
    pub fn eval(&self, plan: &Plan, db: &PeriodDatabase) -> Result<PeriodKRelation> {
        let spec = db.spec();
        let domain = db.domain();
        let empty = || PeriodKRelation::empty(plan.schema.clone(), spec, domain);
        match &plan.node {
            PlanNode::Rel(name) => {
                let r = db.get(name)?;
                if r.schema() != &plan.schema {
                    return Err(Error::TypeMismatch(format!(
                        "relation `{name}` has schema {}, plan expects {}",
                        r.schema(),
                        plan.schema
                    )));
                }
                Ok(r.clone())
            }
            PlanNode::Select { pred, input } => {
                let input = self.eval(input, db)?;
                let mut out = empty();
                for (t, v) in input.iter().filter(|(t, _)| pred.eval(t)) {
                    out.insert_unchecked(t.clone(), v.clone());
                }
                Ok(out)
            }
            PlanNode::Project { exprs, input } => {
                let input = self.eval(input, db)?;
                let mut groups: BTreeMap<Tuple, Vec<&PeriodValue>> = BTreeMap::new();
                for (t, v) in input.iter() {
                    groups.entry(project_tuple(exprs, t)).or_default().push(v);
                }
                let mut out = empty();
                for (t, vs) in groups {
                    out.insert_unchecked(t, PeriodValue::sum(spec, domain, vs)?);
                }
                Ok(out)
            }
            PlanNode::Join { pred, left, right } => {
                let left = self.eval(left, db)?;
                let right = self.eval(right, db)?;
                let mut out = empty();
                for (lt, lv) in left.iter() {
                    for (rt, rv) in right.iter() {
                        let t = lt.concat(rt);
                        if pred.eval(&t) {
                            out.insert_unchecked(t, lv.mul(rv)?);
                        }
                    }
                }
                Ok(out)
            }
            PlanNode::Union { left, right } => {
                let left = self.eval(left, db)?;
                let right = self.eval(right, db)?;
                let mut out = left.with_schema(plan.schema.clone());
                for (t, v) in right.iter() {
                    out.add(t.clone(), v.clone())?;
                }
                Ok(out)
            }
            PlanNode::Diff { left, right } => {
                let left = self.eval(left, db)?;
                let right = self.eval(right, db)?;
                let mut out = empty();
                for (t, lv) in left.iter() {
                    let v = match right.get(t) {
                        Some(rv) => (self.monus)(lv, rv)?,
                        None => lv.clone(),
                    };
                    out.insert_unchecked(t.clone(), v);
                }
                Ok(out)
            }
            PlanNode::Agg { group, agg, input } => {
                let input = self.eval(input, db)?;
                eval_agg_logical(group, agg, &input, plan.schema.clone())
            }
        }
    }
}

/// Aggregation over a period bag relation: the input is cut into the
/// intervals between consecutive endpoints, where every tuple's multiplicity
/// is constant, and each piece is aggregated like a snapshot.
pub fn eval_agg_logical(
    group: &[usize],
    agg: &BoundAgg,
    input: &PeriodKRelation,
    schema: Schema,
) -> Result<PeriodKRelation> {
    let spec = input.spec();
    if !spec.is_bag() {
        return Err(Error::UnsupportedSemiring("aggregation"));
    }
    let domain = input.domain();
    let mut points: Vec<Tick> = vec![domain.min(), domain.max()];
    for (_, v) in input.iter() {
        for (i, _) in v.support() {
            points.push(i.begin());
            points.push(i.end());
        }
    }
    points.sort_unstable();
    points.dedup();

    let segments = points.len() - 1;
    let mut bags: Vec<Vec<(&Tuple, u64)>> = vec![Vec::new(); segments];
    for (t, v) in input.iter() {
        for (i, k) in v.support() {
            let first = points.binary_search(&i.begin()).expect("endpoint collected");
            let last = points.binary_search(&i.end()).expect("endpoint collected");
            for bag in &mut bags[first..last] {
                bag.push((t, k.multiplicity()));
            }
        }
    }

    let mut pieces: BTreeMap<Tuple, Vec<(Interval, SemiringValue)>> = BTreeMap::new();
    for (s, bag) in bags.iter().enumerate() {
        let interval = Interval::new_unchecked(points[s], points[s + 1]);
        let mut groups: BTreeMap<Tuple, Vec<(&Tuple, u64)>> = BTreeMap::new();
        if group.is_empty() {
            groups.insert(Tuple::default(), Vec::new());
        }
        for &(t, m) in bag {
            groups.entry(t.project(group)).or_default().push((t, m));
        }
        for (key, rows) in groups {
            let value = agg.apply(rows)?;
            let mut values = key.into_values();
            values.push(value);
            let entry = pieces.entry(Tuple::new(values)).or_default();
            if entry.last().is_some_and(|(i, _)| *i == interval) {
                return Err(Error::Internal(
                    "aggregate produced a duplicate row within one snapshot".into(),
                ));
            }
            entry.push((interval, spec.one()));
        }
    }

    let mut out = PeriodKRelation::empty(schema, spec, domain);
    for (t, support) in pieces {
        let element = TemporalElement::from_sorted_unchecked(spec, domain, support);
        out.insert_unchecked(t, PeriodValue::new(&element)?);
    }
    Ok(out)
}

/// Shorthand used by tests: validates `ast` against `db` and evaluates it.
pub fn run_logical(ast: &QueryAst, db: &PeriodDatabase) -> Result<PeriodKRelation> {
    let plan = validate(ast, &db.catalog())?;
    eval_logical(&plan, db)
}
