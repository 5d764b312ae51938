//! Evaluation over SQL period relations: query rewriting into a plan of
//! interval-aware operators, the coalesce and split operators, and the sweep
//! algorithms that fuse split with aggregation and difference.

use std::collections::HashMap;
use std::fmt;

use num_traits::{CheckedAdd, CheckedMul};

use crate::algebra::{
    count_value, numeric_value, project_tuple, validate, AggFunc, BoundAgg, BoundExpr,
    BoundPredicate, Plan, PlanNode, QueryAst,
};
use crate::database::{Catalog, SqlDatabase};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::relation::{Attribute, DataType, PeriodRow, Rational, Schema, SqlPeriodRelation, Tuple, Value};
use crate::telement::{Interval, Tick};

/// Rewriting switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RewriteOptions {
    /// Keep only the outermost coalesce.
    pub pull_up: bool,
    /// Use the sweep operators for aggregation and difference instead of an
    /// explicit split followed by a plain operator.
    pub fused: bool,
}

impl Default for RewriteOptions {
    fn default() -> Self {
        RewriteOptions {
            pull_up: true,
            fused: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhysicalPlan {
    pub node: PhysicalNode,
    pub schema: Schema,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PhysicalNode {
    Scan(String),
    Select {
        pred: BoundPredicate,
        input: Box<PhysicalPlan>,
    },
    /// Maps the non-temporal columns; intervals pass through.
    Project {
        exprs: Vec<BoundExpr>,
        input: Box<PhysicalPlan>,
    },
    /// Pairs of overlapping rows, valid over the intersection.
    Join {
        pred: BoundPredicate,
        left: Box<PhysicalPlan>,
        right: Box<PhysicalPlan>,
    },
    Union {
        left: Box<PhysicalPlan>,
        right: Box<PhysicalPlan>,
    },
    /// Bag difference on whole rows, intervals included.
    Except {
        left: Box<PhysicalPlan>,
        right: Box<PhysicalPlan>,
    },
    /// Cuts `input` rows at the endpoints of rows in `input` and `reference`
    /// that agree on `group`. No reference means the input against itself.
    Split {
        group: Vec<usize>,
        input: Box<PhysicalPlan>,
        reference: Option<Box<PhysicalPlan>>,
    },
    /// Adds one all-null row spanning the whole domain.
    Pad {
        input: Box<PhysicalPlan>,
    },
    /// Groups on `group` plus the interval.
    Aggregate {
        group: Vec<usize>,
        agg: BoundAgg,
        input: Box<PhysicalPlan>,
    },
    SplitDiff {
        left: Box<PhysicalPlan>,
        right: Box<PhysicalPlan>,
    },
    SplitAgg {
        group: Vec<usize>,
        agg: BoundAgg,
        pad: bool,
        input: Box<PhysicalPlan>,
    },
    Coalesce {
        input: Box<PhysicalPlan>,
    },
}

impl PhysicalPlan {
    fn new(node: PhysicalNode, schema: Schema) -> Self {
        PhysicalPlan { node, schema }
    }

    fn coalesced(self) -> Self {
        let schema = self.schema.clone();
        PhysicalPlan::new(
            PhysicalNode::Coalesce {
                input: Box::new(self),
            },
            schema,
        )
    }

    /// Number of coalesce operators in the plan.
    pub fn coalesce_count(&self) -> usize {
        let own = usize::from(matches!(self.node, PhysicalNode::Coalesce { .. }));
        own + self.children().iter().map(|c| c.coalesce_count()).sum::<usize>()
    }

    pub fn children(&self) -> Vec<&PhysicalPlan> {
        match &self.node {
            PhysicalNode::Scan(_) => vec![],
            PhysicalNode::Select { input, .. }
            | PhysicalNode::Project { input, .. }
            | PhysicalNode::Pad { input }
            | PhysicalNode::Aggregate { input, .. }
            | PhysicalNode::SplitAgg { input, .. }
            | PhysicalNode::Coalesce { input } => vec![input],
            PhysicalNode::Split {
                input, reference, ..
            } => std::iter::once(&**input).chain(reference.as_deref()).collect(),
            PhysicalNode::Join { left, right, .. }
            | PhysicalNode::Union { left, right }
            | PhysicalNode::Except { left, right }
            | PhysicalNode::SplitDiff { left, right } => vec![left, right],
        }
    }

    fn label(&self) -> String {
        let cols = |g: &[usize]| {
            g.iter()
                .map(|i| format!("#{i}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let agg = |a: &BoundAgg| match a.arg {
            Some(i) => format!("{}(#{i})", a.func.name()),
            None => format!("{}(*)", a.func.name()),
        };
        match &self.node {
            PhysicalNode::Scan(name) => format!("scan {name}"),
            PhysicalNode::Select { .. } => "select".into(),
            PhysicalNode::Project { .. } => "project".into(),
            PhysicalNode::Join { .. } => "join overlapping".into(),
            PhysicalNode::Union { .. } => "union all".into(),
            PhysicalNode::Except { .. } => "except all".into(),
            PhysicalNode::Split { group, .. } => format!("split [{}]", cols(group)),
            PhysicalNode::Pad { .. } => "pad null".into(),
            PhysicalNode::Aggregate { group, agg: a, .. } => {
                format!("aggregate [{}] {} by interval", cols(group), agg(a))
            }
            PhysicalNode::SplitDiff { .. } => "split-diff sweep".into(),
            PhysicalNode::SplitAgg {
                group, agg: a, pad, ..
            } => format!(
                "split-agg sweep [{}] {}{}",
                cols(group),
                agg(a),
                if *pad { " padded" } else { "" }
            ),
            PhysicalNode::Coalesce { .. } => "coalesce".into(),
        }
    }

    fn fmt_indented(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        writeln!(f, "{:indent$}{} -> {}", "", self.label(), self.schema, indent = depth * 2)?;
        for c in self.children() {
            c.fmt_indented(f, depth + 1)?;
        }
        Ok(())
    }
}

impl fmt::Display for PhysicalPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_indented(f, 0)
    }
}

/// Validates `ast` and rewrites it for the SQL period encoding. Only the bag
/// semiring has such an encoding.
pub fn compile(ast: &QueryAst, catalog: &Catalog, opts: RewriteOptions) -> Result<PhysicalPlan> {
    if !catalog.spec().is_bag() {
        return Err(Error::UnsupportedSemiring("the SQL period encoding"));
    }
    Ok(rewrite(&validate(ast, catalog)?, opts))
}

/// Rewrites a validated plan into a physical plan. Every operator result is
/// coalesced, or with `pull_up` only the root's. A bare relation reference
/// stays a plain scan.
pub fn rewrite(plan: &Plan, opts: RewriteOptions) -> PhysicalPlan {
    rewrite_node(plan, opts, true)
}

fn rewrite_node(plan: &Plan, opts: RewriteOptions, root: bool) -> PhysicalPlan {
    let schema = plan.schema.clone();
    let child = |p: &Plan| Box::new(rewrite_node(p, opts, false));
    let node = match &plan.node {
        PlanNode::Rel(name) => return PhysicalPlan::new(PhysicalNode::Scan(name.clone()), schema),
        PlanNode::Select { pred, input } => PhysicalNode::Select {
            pred: pred.clone(),
            input: child(input),
        },
        PlanNode::Project { exprs, input } => PhysicalNode::Project {
            exprs: exprs.clone(),
            input: child(input),
        },
        PlanNode::Join { pred, left, right } => PhysicalNode::Join {
            pred: pred.clone(),
            left: child(left),
            right: child(right),
        },
        PlanNode::Union { left, right } => PhysicalNode::Union {
            left: child(left),
            right: child(right),
        },
        PlanNode::Diff { left, right } => {
            let (left, right) = (child(left), child(right));
            if opts.fused {
                PhysicalNode::SplitDiff { left, right }
            } else {
                let all: Vec<usize> = (0..schema.arity()).collect();
                let split = |a: &PhysicalPlan, b: &PhysicalPlan| {
                    Box::new(PhysicalPlan::new(
                        PhysicalNode::Split {
                            group: all.clone(),
                            input: Box::new(a.clone()),
                            reference: Some(Box::new(b.clone())),
                        },
                        a.schema.clone(),
                    ))
                };
                PhysicalNode::Except {
                    left: split(&left, &right),
                    right: split(&right, &left),
                }
            }
        }
        PlanNode::Agg { group, agg, input } => rewrite_agg(group, agg, child(input), opts),
    };
    let out = PhysicalPlan::new(node, schema);
    if root || !opts.pull_up {
        out.coalesced()
    } else {
        out
    }
}

fn rewrite_agg(
    group: &[usize],
    agg: &BoundAgg,
    input: Box<PhysicalPlan>,
    opts: RewriteOptions,
) -> PhysicalNode {
    let (input, group, agg) = if agg.arg.is_none() {
        count_star_input(group, input)
    } else {
        (input, group.to_vec(), *agg)
    };
    if opts.fused {
        return PhysicalNode::SplitAgg {
            pad: group.is_empty(),
            group,
            agg,
            input,
        };
    }
    let schema = input.schema.clone();
    let split = if group.is_empty() {
        PhysicalNode::Split {
            group: vec![],
            input: Box::new(PhysicalPlan::new(
                PhysicalNode::Pad {
                    input: input.clone(),
                },
                schema.clone(),
            )),
            reference: Some(input),
        }
    } else {
        PhysicalNode::Split {
            group: group.clone(),
            input,
            reference: None,
        }
    };
    PhysicalNode::Aggregate {
        group,
        agg,
        input: Box::new(PhysicalPlan::new(split, schema)),
    }
}

/// `count(*)` becomes `count(A)` over the group columns plus a constant
/// column `A = 1`.
fn count_star_input(
    group: &[usize],
    input: Box<PhysicalPlan>,
) -> (Box<PhysicalPlan>, Vec<usize>, BoundAgg) {
    let mut attrs: Vec<Attribute> = group
        .iter()
        .map(|&i| input.schema.attrs()[i].clone())
        .collect();
    let mut name = "one".to_owned();
    while attrs.iter().any(|a| a.name == name) {
        name.insert(0, '_');
    }
    attrs.push(Attribute::new(name, DataType::Int));
    let mut exprs: Vec<BoundExpr> = group.iter().map(|&i| BoundExpr::Col(i)).collect();
    exprs.push(BoundExpr::Const(Value::Int(1)));
    let schema = Schema::new(attrs).expect("names are distinct");
    let projected = PhysicalPlan::new(PhysicalNode::Project { exprs, input }, schema);
    let agg = BoundAgg {
        func: AggFunc::Count,
        arg: Some(group.len()),
        arg_type: Some(DataType::Int),
    };
    (Box::new(projected), (0..group.len()).collect(), agg)
}

/// Evaluates `plan` with the default execution mode.
pub fn eval_physical(plan: &PhysicalPlan, db: &SqlDatabase) -> Result<SqlPeriodRelation> {
    eval_physical_with(plan, db, Execution::default())
}

pub fn eval_physical_with(
    plan: &PhysicalPlan,
    db: &SqlDatabase,
    exec: Execution,
) -> Result<SqlPeriodRelation> {
    if !db.spec().is_bag() {
        return Err(Error::UnsupportedSemiring("the SQL period encoding"));
    }
    Evaluator { db, exec }.eval(plan)
}

/// Compiles and evaluates `ast` over `db`.
pub fn run_physical(ast: &QueryAst, db: &SqlDatabase, opts: RewriteOptions) -> Result<SqlPeriodRelation> {
    let plan = compile(ast, &db.catalog(), opts)?;
    eval_physical(&plan, db)
}

struct Evaluator<'a> {
    db: &'a SqlDatabase,
    exec: Execution,
}

impl Evaluator<'_> {
    fn eval(&self, plan: &PhysicalPlan) -> Result<SqlPeriodRelation> {
        let exec = self.exec;
        let domain = self.db.domain();
        let schema = plan.schema.clone();
        match &plan.node {
            PhysicalNode::Scan(name) => {
                let r = self.db.get(name)?;
                if r.schema() != &plan.schema {
                    return Err(Error::TypeMismatch(format!(
                        "relation `{name}` has schema {}, plan expects {}",
                        r.schema(),
                        plan.schema
                    )));
                }
                Ok(r.clone())
            }
            PhysicalNode::Select { pred, input } => {
                let rows = self.eval(input)?.into_rows();
                let rows = rows.into_iter().filter(|r| pred.eval(&r.tuple)).collect();
                Ok(SqlPeriodRelation::from_rows_unchecked(schema, domain, rows, exec))
            }
            PhysicalNode::Project { exprs, input } => {
                let input = self.eval(input)?;
                let rows = exec::map(exec, input.rows(), |r| {
                    PeriodRow::new(project_tuple(exprs, &r.tuple), r.interval, r.mult)
                });
                Ok(SqlPeriodRelation::from_rows_unchecked(schema, domain, rows, exec))
            }
            PhysicalNode::Join { pred, left, right } => {
                let left = self.eval(left)?;
                let right = self.eval(right)?;
                join_op(pred, &left, &right, schema, exec)
            }
            PhysicalNode::Union { left, right } => {
                let mut rows = self.eval(left)?.into_rows();
                rows.extend(self.eval(right)?.into_rows());
                Ok(SqlPeriodRelation::from_rows_unchecked(schema, domain, rows, exec))
            }
            PhysicalNode::Except { left, right } => {
                // N(L, R) - N(R, L) evaluates L and R once
                if let (
                    PhysicalNode::Split {
                        group: g1,
                        input: l1,
                        reference: Some(r1),
                    },
                    PhysicalNode::Split {
                        group: g2,
                        input: r2,
                        reference: Some(l2),
                    },
                ) = (&left.node, &right.node)
                {
                    if g1 == g2 && l1 == l2 && r1 == r2 {
                        let l = self.eval(l1)?;
                        let r = self.eval(r1)?;
                        let ls = split_op_with(&l, &r, g1, exec)?;
                        let rs = split_op_with(&r, &l, g1, exec)?;
                        return except_op(&ls, &rs);
                    }
                }
                except_op(&self.eval(left)?, &self.eval(right)?)
            }
            PhysicalNode::Split {
                group,
                input,
                reference,
            } => {
                if let (PhysicalNode::Pad { input: padded }, Some(reference)) =
                    (&input.node, reference)
                {
                    if padded == reference {
                        let r = self.eval(reference)?;
                        return split_op_with(&pad(&r), &r, group, exec);
                    }
                }
                let r = self.eval(input)?;
                match reference {
                    Some(other) => split_op_with(&r, &self.eval(other)?, group, exec),
                    None => split_op_with(&r, &r, group, exec),
                }
            }
            PhysicalNode::Pad { input } => Ok(pad(&self.eval(input)?)),
            PhysicalNode::Aggregate { group, agg, input } => {
                aggregate_op(group, agg, &self.eval(input)?, schema, exec)
            }
            PhysicalNode::SplitDiff { left, right } => {
                split_diff_count_with(&self.eval(left)?, &self.eval(right)?, exec)
            }
            PhysicalNode::SplitAgg {
                group,
                agg,
                pad,
                input,
            } => split_agg_sweep_with(group, agg, *pad, &self.eval(input)?, schema, exec),
            PhysicalNode::Coalesce { input } => coalesce_op_with(&self.eval(input)?, exec),
        }
    }
}

fn check_compatible(a: &SqlPeriodRelation, b: &SqlPeriodRelation) -> Result<()> {
    if a.domain() != b.domain() {
        return Err(Error::DomainMismatch);
    }
    let (sa, sb) = (a.schema(), b.schema());
    if sa.arity() != sb.arity() || sa.attrs().iter().zip(sb.attrs()).any(|(x, y)| x.ty != y.ty) {
        return Err(Error::UnionIncompatible(format!("{sa} vs {sb}")));
    }
    Ok(())
}

fn join_op(
    pred: &BoundPredicate,
    left: &SqlPeriodRelation,
    right: &SqlPeriodRelation,
    schema: Schema,
    exec: Execution,
) -> Result<SqlPeriodRelation> {
    if left.domain() != right.domain() {
        return Err(Error::DomainMismatch);
    }
    let matches = exec::map(exec, left.rows(), |l| -> Result<Vec<PeriodRow>> {
        let mut out = Vec::new();
        for r in right.rows() {
            let Some(common) = l.interval.intersect(&r.interval) else {
                continue;
            };
            let t = l.tuple.concat(&r.tuple);
            if pred.eval(&t) {
                let mult = l.mult.checked_mul(r.mult).ok_or(Error::Overflow("join multiplicity"))?;
                out.push(PeriodRow::new(t, common, mult));
            }
        }
        Ok(out)
    });
    let mut rows = Vec::new();
    for m in matches {
        rows.extend(m?);
    }
    Ok(SqlPeriodRelation::from_rows_unchecked(schema, left.domain(), rows, exec))
}

/// Row-level bag difference; rows are equal only if their intervals are.
fn except_op(left: &SqlPeriodRelation, right: &SqlPeriodRelation) -> Result<SqlPeriodRelation> {
    check_compatible(left, right)?;
    let key = |r: &PeriodRow| (r.tuple.clone(), r.interval);
    let minus: HashMap<(Tuple, Interval), u64> = right.rows().iter().map(|r| (key(r), r.mult)).collect();
    let rows = left
        .rows()
        .iter()
        .filter_map(|r| {
            let m = r.mult.saturating_sub(minus.get(&key(r)).copied().unwrap_or(0));
            (m > 0).then(|| PeriodRow::new(r.tuple.clone(), r.interval, m))
        })
        .collect();
    Ok(SqlPeriodRelation::from_rows_unchecked(
        left.schema().clone(),
        left.domain(),
        rows,
        Execution::Sequential,
    ))
}

fn pad(r: &SqlPeriodRelation) -> SqlPeriodRelation {
    let mut rows = r.rows().to_vec();
    let nulls = Tuple::new(vec![Value::Null; r.schema().arity()]);
    rows.push(PeriodRow::new(nulls, r.domain().full(), 1));
    SqlPeriodRelation::from_rows_unchecked(r.schema().clone(), r.domain(), rows, Execution::Sequential)
}

/// Merges each tuple's rows into maximal intervals of constant multiplicity.
pub fn coalesce_op(r: &SqlPeriodRelation) -> Result<SqlPeriodRelation> {
    coalesce_op_with(r, Execution::default())
}

pub fn coalesce_op_with(r: &SqlPeriodRelation, exec: Execution) -> Result<SqlPeriodRelation> {
    let groups = r.tuple_groups();
    let parts = exec::map(exec, &groups, |g| coalesce_group(&r.rows()[g.clone()]));
    let mut rows = Vec::with_capacity(r.len());
    for p in parts {
        rows.extend(p?);
    }
    Ok(SqlPeriodRelation::from_rows_unchecked(
        r.schema().clone(),
        r.domain(),
        rows,
        exec,
    ))
}

/// Sweep over one tuple's rows: +mult at each begin, -mult at each end.
fn coalesce_group(rows: &[PeriodRow]) -> Result<Vec<PeriodRow>> {
    if let [row] = rows {
        return Ok(vec![row.clone()]);
    }
    let mut events: Vec<(Tick, i128)> = Vec::with_capacity(rows.len() * 2);
    for r in rows {
        events.push((r.begin(), i128::from(r.mult)));
        events.push((r.end(), -i128::from(r.mult)));
    }
    events.sort_unstable_by_key(|e| e.0);
    let tuple = &rows[0].tuple;
    let mut out = Vec::new();
    let (mut open, mut start) = (0i128, Tick::MIN);
    let mut i = 0;
    while i < events.len() {
        let t = events[i].0;
        let mut count = open;
        while i < events.len() && events[i].0 == t {
            count += events[i].1;
            i += 1;
        }
        if count != open {
            if open > 0 {
                out.push(emit(tuple, start, t, open)?);
            }
            open = count;
            start = t;
        }
    }
    Ok(out)
}

fn emit(tuple: &Tuple, begin: Tick, end: Tick, mult: i128) -> Result<PeriodRow> {
    let mult = u64::try_from(mult).map_err(|_| Error::Overflow("multiplicity"))?;
    Ok(PeriodRow::new(tuple.clone(), Interval::new_unchecked(begin, end), mult))
}

/// Split operator: every `r1` row is cut at each endpoint of an `r1` or `r2`
/// row with the same values on `group`.
pub fn split_op(r1: &SqlPeriodRelation, r2: &SqlPeriodRelation, group: &[usize]) -> Result<SqlPeriodRelation> {
    split_op_with(r1, r2, group, Execution::default())
}

pub fn split_op_with(
    r1: &SqlPeriodRelation,
    r2: &SqlPeriodRelation,
    group: &[usize],
    exec: Execution,
) -> Result<SqlPeriodRelation> {
    check_compatible(r1, r2)?;
    if let Some(&bad) = group.iter().find(|&&g| g >= r1.schema().arity()) {
        return Err(Error::Internal(format!("split column #{bad} out of range")));
    }
    let mut points: HashMap<Tuple, Vec<Tick>> = HashMap::new();
    for row in r1.rows().iter().chain(r2.rows()) {
        let p = points.entry(row.tuple.project(group)).or_default();
        p.push(row.begin());
        p.push(row.end());
    }
    for p in points.values_mut() {
        p.sort_unstable();
        p.dedup();
    }
    let pieces = exec::map(exec, r1.rows(), |row| {
        let p = &points[&row.tuple.project(group)];
        let lo = p.partition_point(|&x| x <= row.begin());
        let hi = p.partition_point(|&x| x < row.end());
        let mut cuts = Vec::with_capacity(hi - lo + 2);
        cuts.push(row.begin());
        cuts.extend_from_slice(&p[lo..hi]);
        cuts.push(row.end());
        cuts.windows(2)
            .map(|w| PeriodRow::new(row.tuple.clone(), Interval::new_unchecked(w[0], w[1]), row.mult))
            .collect::<Vec<_>>()
    });
    Ok(SqlPeriodRelation::from_rows_unchecked(
        r1.schema().clone(),
        r1.domain(),
        pieces.into_iter().flatten().collect(),
        exec,
    ))
}

/// Plain aggregation grouped on `group` and the interval. Meaningful after a
/// split, where rows of one group have equal or disjoint intervals.
fn aggregate_op(
    group: &[usize],
    agg: &BoundAgg,
    input: &SqlPeriodRelation,
    schema: Schema,
    exec: Execution,
) -> Result<SqlPeriodRelation> {
    let mut keyed: Vec<(Tuple, Interval, usize)> = input
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| (r.tuple.project(group), r.interval, i))
        .collect();
    exec::sort_unstable(exec, &mut keyed);
    let mut rows = Vec::new();
    let mut start = 0;
    while start < keyed.len() {
        let (key, interval, _) = &keyed[start];
        let end = start
            + keyed[start..]
                .iter()
                .take_while(|(k, i, _)| k == key && i == interval)
                .count();
        let bag = keyed[start..end].iter().map(|&(_, _, i)| {
            let r = &input.rows()[i];
            (&r.tuple, r.mult)
        });
        let mut values = key.values().to_vec();
        values.push(agg.apply(bag)?);
        rows.push(PeriodRow::new(Tuple::new(values), *interval, 1));
        start = end;
    }
    Ok(SqlPeriodRelation::from_rows_unchecked(schema, input.domain(), rows, exec))
}

/// Bag difference by sweeping endpoint deltas per tuple, with `r` counted
/// negatively. A segment's multiplicity is the running sum, truncated at 0.
pub fn split_diff_count(l: &SqlPeriodRelation, r: &SqlPeriodRelation) -> Result<SqlPeriodRelation> {
    split_diff_count_with(l, r, Execution::default())
}

pub fn split_diff_count_with(
    l: &SqlPeriodRelation,
    r: &SqlPeriodRelation,
    exec: Execution,
) -> Result<SqlPeriodRelation> {
    check_compatible(l, r)?;
    let mut events: Vec<(&Tuple, Tick, i128)> = Vec::with_capacity(2 * (l.len() + r.len()));
    for row in l.rows() {
        events.push((&row.tuple, row.begin(), i128::from(row.mult)));
        events.push((&row.tuple, row.end(), -i128::from(row.mult)));
    }
    for row in r.rows() {
        events.push((&row.tuple, row.begin(), -i128::from(row.mult)));
        events.push((&row.tuple, row.end(), i128::from(row.mult)));
    }
    exec::sort_unstable(exec, &mut events);
    let groups = group_ranges(&events, |a, b| a.0 == b.0);
    let parts = exec::map(exec, &groups, |g| -> Result<Vec<PeriodRow>> {
        let events = &events[g.clone()];
        let tuple = events[0].0;
        let mut out = Vec::new();
        let mut running = 0i128;
        let mut i = 0;
        while i < events.len() {
            let t = events[i].1;
            while i < events.len() && events[i].1 == t {
                running += events[i].2;
                i += 1;
            }
            if running > 0 {
                if let Some(next) = events.get(i) {
                    out.push(emit(tuple, t, next.1, running)?);
                }
            }
        }
        Ok(out)
    });
    let mut rows = Vec::new();
    for p in parts {
        rows.extend(p?);
    }
    Ok(SqlPeriodRelation::from_rows_unchecked(
        l.schema().clone(),
        l.domain(),
        rows,
        exec,
    ))
}

fn group_ranges<T>(items: &[T], same: impl Fn(&T, &T) -> bool) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=items.len() {
        if i == items.len() || !same(&items[i], &items[start]) {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Running state of one group during the aggregation sweep.
#[derive(Debug, Clone, Copy, Default)]
struct Running {
    rows: i128,
    non_null: i128,
    sum: Rational,
}

impl Running {
    fn apply(&mut self, delta: &Running, sign: i128) -> Result<()> {
        let overflow = || Error::Overflow("aggregate");
        self.rows += sign * delta.rows;
        self.non_null += sign * delta.non_null;
        let d = if sign > 0 { delta.sum } else { -delta.sum };
        self.sum = self.sum.checked_add(&d).ok_or_else(overflow)?;
        Ok(())
    }

    fn value(&self, agg: &BoundAgg) -> Result<Value> {
        let n = u64::try_from(self.non_null).map_err(|_| Error::Internal("negative count".into()))?;
        match agg.func {
            AggFunc::Count => count_value(n),
            _ if n == 0 => Ok(Value::Null),
            AggFunc::Sum => numeric_value(self.sum, agg.arg_type),
            AggFunc::Avg => Ok(Value::Rat(self.sum / Rational::from_integer(self.non_null))),
            AggFunc::Min | AggFunc::Max => unreachable!("min and max are not swept"),
        }
    }
}

/// Aggregation fused with the split. Rows are pre-aggregated per group and
/// interval, then each group's endpoints are swept, adding a row's
/// contribution at its begin and retracting it at its end. `pad` adds an
/// all-null row over the whole domain so every tick gets a result; use it
/// exactly when `group` is empty. Min and max are computed as split
/// followed by plain aggregation.
pub fn split_agg_sweep(
    group: &[usize],
    agg: &BoundAgg,
    pad: bool,
    child: &SqlPeriodRelation,
    schema: Schema,
) -> Result<SqlPeriodRelation> {
    split_agg_sweep_with(group, agg, pad, child, schema, Execution::default())
}

pub fn split_agg_sweep_with(
    group: &[usize],
    agg: &BoundAgg,
    padded: bool,
    child: &SqlPeriodRelation,
    schema: Schema,
    exec: Execution,
) -> Result<SqlPeriodRelation> {
    if matches!(agg.func, AggFunc::Min | AggFunc::Max) || agg.arg.is_none() {
        let input = if padded { pad(child) } else { child.clone() };
        let split = split_op_with(&input, &input, group, exec)?;
        return aggregate_op(group, agg, &split, schema, exec);
    }
    let arg = agg.arg.expect("checked above");
    let domain = child.domain();
    let mut keyed: Vec<(Tuple, Interval, usize)> = child
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| (r.tuple.project(group), r.interval, i))
        .collect();
    exec::sort_unstable(exec, &mut keyed);
    let mut groups = group_ranges(&keyed, |a, b| a.0 == b.0);
    if padded && groups.is_empty() {
        groups.push(0..0);
    }

    let sweep = |range: &std::ops::Range<usize>| -> Result<Vec<PeriodRow>> {
        let rows = &keyed[range.clone()];
        // pre-aggregate rows sharing an interval
        let mut pre: Vec<(Interval, Running)> = Vec::new();
        if padded {
            let null_row = Running {
                rows: 1,
                ..Running::default()
            };
            pre.push((domain.full(), null_row));
        }
        for (_, interval, i) in rows {
            let row = &child.rows()[*i];
            let m = i128::from(row.mult);
            let v = row.tuple.get(arg);
            let mut delta = Running {
                rows: m,
                ..Running::default()
            };
            if !v.is_null() {
                delta.non_null = m;
                if agg.func != AggFunc::Count {
                    let r = v.as_rational().ok_or_else(|| Error::NonNumericAggregate {
                        func: agg.func.name(),
                        attr: format!("#{arg}"),
                        ty: v.data_type().map_or("null".into(), |t| t.to_string()),
                    })?;
                    delta.sum = r
                        .checked_mul(&Rational::from_integer(m))
                        .ok_or(Error::Overflow("aggregate"))?;
                }
            }
            match pre.last_mut() {
                Some((last, acc)) if last == interval => acc.apply(&delta, 1)?,
                _ => pre.push((*interval, delta)),
            }
        }

        let mut events: Vec<(Tick, usize, i128)> = Vec::with_capacity(pre.len() * 2);
        for (idx, (interval, _)) in pre.iter().enumerate() {
            events.push((interval.begin(), idx, 1));
            events.push((interval.end(), idx, -1));
        }
        events.sort_unstable_by_key(|e| e.0);

        let key = rows.first().map_or_else(Tuple::default, |r| r.0.clone());
        let mut out = Vec::new();
        let mut state = Running::default();
        let mut i = 0;
        while i < events.len() {
            let t = events[i].0;
            while i < events.len() && events[i].0 == t {
                let (_, idx, sign) = events[i];
                state.apply(&pre[idx].1, sign)?;
                i += 1;
            }
            if state.rows > 0 {
                if let Some(next) = events.get(i) {
                    let mut values = key.values().to_vec();
                    values.push(state.value(agg)?);
                    out.push(PeriodRow::new(
                        Tuple::new(values),
                        Interval::new_unchecked(t, next.0),
                        1,
                    ));
                }
            }
        }
        Ok(out)
    };

    let parts = exec::map(exec, &groups, sweep);
    let mut rows = Vec::new();
    for p in parts {
        rows.extend(p?);
    }
    Ok(SqlPeriodRelation::from_rows_unchecked(schema, domain, rows, exec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{AggArg, CmpOp, Operand, Predicate, ProjExpr};
    use crate::semiring::SemiringSpec;
    use crate::telement::TimeDomain;
    use crate::tuple;

    fn dom() -> TimeDomain {
        TimeDomain::new(0, 24).unwrap()
    }

    fn active(rows: &[(&str, i64, Tick, Tick)]) -> SqlPeriodRelation {
        SqlPeriodRelation::from_triples(
            Schema::of(&[("mach", DataType::Str), ("consum", DataType::Int)]).unwrap(),
            dom(),
            rows.iter().map(|&(m, c, b, e)| (tuple![m, c], b, e)),
        )
        .unwrap()
    }

    fn machines(rows: &[(&str, Tick, Tick)]) -> SqlPeriodRelation {
        SqlPeriodRelation::from_triples(
            Schema::of(&[("mach", DataType::Str)]).unwrap(),
            dom(),
            rows.iter().map(|&(m, b, e)| (tuple![m], b, e)),
        )
        .unwrap()
    }

    fn listing(r: &SqlPeriodRelation) -> Vec<(String, Tick, Tick, u64)> {
        r.rows()
            .iter()
            .map(|row| {
                let vals: Vec<String> = row
                    .tuple
                    .values()
                    .iter()
                    .map(|v| match v {
                        Value::Str(s) => s.clone(),
                        v => v.to_string(),
                    })
                    .collect();
                (format!("({})", vals.join(", ")), row.begin(), row.end(), row.mult)
            })
            .collect()
    }

    fn works_db() -> SqlDatabase {
        let works = SqlPeriodRelation::from_triples(
            Schema::of(&[("name", DataType::Str), ("skill", DataType::Str)]).unwrap(),
            dom(),
            [
                (tuple!["Ann", "SP"], 3, 10),
                (tuple!["Joe", "NS"], 8, 16),
                (tuple!["Sam", "SP"], 8, 16),
                (tuple!["Ann", "SP"], 18, 20),
            ],
        )
        .unwrap();
        let assign = SqlPeriodRelation::from_triples(
            Schema::of(&[("mach", DataType::Str), ("skill", DataType::Str)]).unwrap(),
            dom(),
            [
                (tuple!["M1", "SP"], 3, 12),
                (tuple!["M2", "SP"], 6, 14),
                (tuple!["M3", "NS"], 3, 16),
            ],
        )
        .unwrap();
        SqlDatabase::new(dom(), SemiringSpec::BAG)
            .with("works", works)
            .unwrap()
            .with("assign", assign)
            .unwrap()
    }

    fn onduty() -> QueryAst {
        QueryAst::agg(
            vec![],
            AggFunc::Count,
            AggArg::Star,
            QueryAst::select(
                Predicate::cmp(CmpOp::Eq, "skill", Operand::Lit(Value::str("SP"))),
                QueryAst::rel("works"),
            ),
        )
    }

    fn skillreq() -> QueryAst {
        let skill = |r| QueryAst::project(vec![ProjExpr::Attr("skill".into())], QueryAst::rel(r));
        QueryAst::diff(skill("assign"), skill("works"))
    }

    fn all_options() -> [RewriteOptions; 4] {
        [(true, true), (true, false), (false, true), (false, false)]
            .map(|(pull_up, fused)| RewriteOptions { pull_up, fused })
    }

    #[test]
    fn bag_coalesce_golden() {
        let r = machines(&[("M1", 1, 5), ("M1", 1, 10), ("M1", 5, 7), ("M2", 2, 6), ("M2", 3, 6)]);
        let out = coalesce_op(&r).unwrap();
        assert_eq!(
            listing(&out),
            [
                ("(M1)".into(), 1, 7, 2),
                ("(M1)".into(), 7, 10, 1),
                ("(M2)".into(), 2, 3, 1),
                ("(M2)".into(), 3, 6, 2),
            ]
        );
        let single = machines(&[("M1", 4, 9)]);
        assert_eq!(coalesce_op(&single).unwrap(), single);
    }

    #[test]
    fn split_golden() {
        let r = machines(&[("M1", 1, 7), ("M1", 4, 9), ("M2", 2, 8)]);
        let out = split_op(&r, &r, &[0]).unwrap();
        assert_eq!(
            listing(&out),
            [
                ("(M1)".into(), 1, 4, 1),
                ("(M1)".into(), 4, 7, 2),
                ("(M1)".into(), 7, 9, 1),
                ("(M2)".into(), 2, 8, 1),
            ]
        );
        assert_eq!(out.total_rows(), 5);
        assert_eq!(split_op(&out, &out, &[0]).unwrap(), out);
    }

    #[test]
    fn split_agg_avg_golden() {
        let r = active(&[("M1", 10, 1, 5), ("M1", 20, 1, 5), ("M1", 40, 3, 6), ("M1", 40, 5, 6)]);
        let schema = Schema::of(&[("mach", DataType::Str), ("avg_consum", DataType::Rational)]).unwrap();
        let agg = BoundAgg {
            func: AggFunc::Avg,
            arg: Some(1),
            arg_type: Some(DataType::Int),
        };
        let out = split_agg_sweep(&[0], &agg, false, &r, schema).unwrap();
        let expected = [
            (Rational::from_integer(15), 1, 3),
            (Rational::new(70, 3), 3, 5),
            (Rational::from_integer(40), 5, 6),
        ];
        let got: Vec<_> = out.rows().iter().map(|r| (r.tuple.clone(), r.begin(), r.end(), r.mult)).collect();
        let want: Vec<_> = expected
            .iter()
            .map(|&(v, b, e)| (tuple!["M1", v], b, e, 1))
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn split_diff_golden() {
        let l = active(&[("M1", 20, 1, 5), ("M1", 40, 1, 7), ("M1", 40, 1, 9)]);
        let r = active(&[("M1", 20, 2, 6), ("M1", 40, 3, 9)]);
        let out = split_diff_count(&l, &r).unwrap();
        assert_eq!(
            listing(&out),
            [
                ("(M1, 20)".into(), 1, 2, 1),
                ("(M1, 40)".into(), 1, 3, 2),
                ("(M1, 40)".into(), 3, 7, 1),
            ]
        );
        assert_eq!(out.total_rows(), 4);
    }

    #[test]
    fn split_diff_with_short_right_interval() {
        let l = active(&[("M1", 20, 1, 5), ("M1", 40, 1, 7), ("M1", 40, 1, 9)]);
        let r = active(&[("M1", 20, 2, 6), ("M1", 40, 3, 5)]);
        let out = split_diff_count(&l, &r).unwrap();
        assert_eq!(
            listing(&out),
            [
                ("(M1, 20)".into(), 1, 2, 1),
                ("(M1, 40)".into(), 1, 3, 2),
                ("(M1, 40)".into(), 3, 5, 1),
                ("(M1, 40)".into(), 5, 7, 2),
                ("(M1, 40)".into(), 7, 9, 1),
            ]
        );
    }

    #[test]
    fn split_diff_against_empty() {
        let l = active(&[("M1", 20, 1, 5), ("M1", 20, 3, 8)]);
        let empty = SqlPeriodRelation::empty(l.schema().clone(), dom());
        let out = coalesce_op(&split_diff_count(&l, &empty).unwrap()).unwrap();
        assert_eq!(out, coalesce_op(&l).unwrap());
    }

    #[test]
    fn count_star_over_empty_relation() {
        let db = SqlDatabase::new(dom(), SemiringSpec::BAG)
            .with("r", machines(&[]))
            .unwrap();
        let q = QueryAst::agg(vec![], AggFunc::Count, AggArg::Star, QueryAst::rel("r"));
        for opts in all_options() {
            let out = run_physical(&q, &db, opts).unwrap();
            assert_eq!(listing(&out), [("(0)".into(), 0, 24, 1)]);
        }
    }

    #[test]
    fn onduty_counts_every_gap() {
        for opts in all_options() {
            let out = run_physical(&onduty(), &works_db(), opts).unwrap();
            assert_eq!(
                listing(&out),
                [
                    ("(0)".into(), 0, 3, 1),
                    ("(0)".into(), 16, 18, 1),
                    ("(0)".into(), 20, 24, 1),
                    ("(1)".into(), 3, 8, 1),
                    ("(1)".into(), 10, 16, 1),
                    ("(1)".into(), 18, 20, 1),
                    ("(2)".into(), 8, 10, 1),
                ],
                "{opts:?}"
            );
        }
    }

    #[test]
    fn skill_requirement_difference() {
        for opts in all_options() {
            let out = run_physical(&skillreq(), &works_db(), opts).unwrap();
            assert_eq!(
                listing(&out),
                [
                    ("(NS)".into(), 3, 8, 1),
                    ("(SP)".into(), 6, 8, 1),
                    ("(SP)".into(), 10, 12, 1),
                ],
                "{opts:?}"
            );
        }
    }

    #[test]
    fn onduty_plan_shape() {
        let db = works_db();
        let literal = RewriteOptions {
            pull_up: true,
            fused: false,
        };
        let plan = compile(&onduty(), &db.catalog(), literal).unwrap();
        let PhysicalNode::Coalesce { input } = &plan.node else {
            panic!("root must coalesce: {plan}")
        };
        let PhysicalNode::Aggregate { group, agg, input } = &input.node else {
            panic!("{plan}")
        };
        assert!(group.is_empty());
        assert_eq!(agg.func, AggFunc::Count);
        assert_eq!(agg.arg, Some(0));
        let PhysicalNode::Split {
            group,
            input,
            reference: Some(reference),
        } = &input.node
        else {
            panic!("{plan}")
        };
        assert!(group.is_empty());
        let PhysicalNode::Pad { input: padded } = &input.node else {
            panic!("{plan}")
        };
        assert_eq!(padded, reference);
        let PhysicalNode::Project { exprs, input } = &padded.node else {
            panic!("{plan}")
        };
        assert_eq!(exprs, &[BoundExpr::Const(Value::Int(1))]);
        assert!(matches!(&input.node, PhysicalNode::Select { input, .. }
            if input.node == PhysicalNode::Scan("works".into())));
        assert_eq!(plan.coalesce_count(), 1);

        let fused = compile(&onduty(), &db.catalog(), RewriteOptions::default()).unwrap();
        let PhysicalNode::Coalesce { input } = &fused.node else {
            panic!("{fused}")
        };
        assert!(matches!(input.node, PhysicalNode::SplitAgg { pad: true, .. }));
    }

    #[test]
    fn pull_up_removes_interior_coalesce() {
        let db = works_db();
        let q = QueryAst::union(skillreq(), skillreq());
        let with = compile(&q, &db.catalog(), RewriteOptions::default()).unwrap();
        let without = compile(
            &q,
            &db.catalog(),
            RewriteOptions {
                pull_up: false,
                fused: true,
            },
        )
        .unwrap();
        assert_eq!(with.coalesce_count(), 1);
        assert_eq!(without.coalesce_count(), 7);
        assert_eq!(eval_physical(&with, &db).unwrap(), eval_physical(&without, &db).unwrap());
    }

    #[test]
    fn bare_relation_is_a_scan() {
        let db = works_db();
        let plan = compile(&QueryAst::rel("works"), &db.catalog(), RewriteOptions::default()).unwrap();
        assert_eq!(plan.node, PhysicalNode::Scan("works".into()));
        assert_eq!(&eval_physical(&plan, &db).unwrap(), db.get("works").unwrap());
    }

    #[test]
    fn set_semiring_is_rejected() {
        let cat = Catalog::new(SemiringSpec::SET).with("r", Schema::of(&[("a", DataType::Int)]).unwrap());
        assert!(matches!(
            compile(&QueryAst::rel("r"), &cat, RewriteOptions::default()),
            Err(Error::UnsupportedSemiring(_))
        ));
    }

    #[test]
    fn incompatible_split_inputs() {
        let a = machines(&[("M1", 1, 3)]);
        let b = active(&[("M1", 1, 3, 4)]);
        assert!(matches!(split_op(&a, &b, &[0]), Err(Error::UnionIncompatible(_))));
        assert!(matches!(split_diff_count(&a, &b), Err(Error::UnionIncompatible(_))));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let rows: Vec<_> = (0..500)
            .map(|i: i64| {
                let m = ["M1", "M2", "M3"][(i % 3) as usize];
                let b = (i * 7) % 20;
                (m, i % 5, b, b + 1 + (i % 4))
            })
            .collect();
        let r = active(&rows);
        for exec in [Execution::Sequential, Execution::Parallel] {
            assert_eq!(coalesce_op_with(&r, exec).unwrap(), coalesce_op(&r).unwrap());
            assert_eq!(split_op_with(&r, &r, &[0], exec).unwrap(), split_op(&r, &r, &[0]).unwrap());
        }
    }
}
