//! Evaluation of bound queries over any row source.
//!
//! NULL follows three-valued logic: comparisons and arithmetic with a NULL
//! operand yield NULL, `AND`/`OR` use Kleene truth tables, and `WHERE` keeps
//! only rows whose predicate is true. Arithmetic faults (division by zero,
//! integer overflow, non-finite results) yield NULL and are counted in
//! `stats.warnings`. Sorting is stable with NULL ordered first, so ties keep
//! the input order.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::time::Instant;

use super::ast::BinaryOp;
use super::plan::{Access, AggFn, AggSpec, Bound, BoundQuery, Plan, Shape, SortKey};
use crate::catalog::{Catalog, DomesticColumn};
use crate::sky::{angular_separation, EquatorialPosition, SkyObject};
use crate::table::{ResultTable, TableStats, Value};
use crate::zone::ZoneIndex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScalarFn {
    /// `CONE(ra, dec, radius)`: the row position lies within `radius`
    /// degrees of the centre (boundary inclusive).
    Cone,
    /// `SEPARATION(ra1, dec1, ra2, dec2)` in degrees.
    Separation,
    Floor,
    Abs,
}

impl ScalarFn {
    pub fn lookup(name: &str) -> Option<ScalarFn> {
        Some(match name {
            "CONE" => ScalarFn::Cone,
            "SEPARATION" => ScalarFn::Separation,
            "FLOOR" => ScalarFn::Floor,
            "ABS" => ScalarFn::Abs,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        match self {
            ScalarFn::Cone => 3,
            ScalarFn::Separation => 4,
            ScalarFn::Floor | ScalarFn::Abs => 1,
        }
    }
}

/// One input row. Slots follow the order defined by the scope the query was
/// bound against.
pub trait RowSource {
    fn slot(&self, i: usize) -> Value;
    fn position(&self) -> Option<EquatorialPosition>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExecOptions {
    /// Maximum rows a result may hold; exceeding it is an error rather than
    /// a silent truncation.
    pub row_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("result exceeds the row cap of {cap}")]
    RowCapExceeded { cap: usize },
}

struct Ctx<'a> {
    row: Option<&'a dyn RowSource>,
    keys: &'a [Value],
    aggs: &'a [Value],
    warnings: &'a Cell<u64>,
}

impl Ctx<'_> {
    fn warn(&self) -> Value {
        self.warnings.set(self.warnings.get() + 1);
        Value::Null
    }
}

/// Evaluates an expression with no row, group, or aggregate references.
pub fn eval_const(b: &Bound) -> Value {
    let warnings = Cell::new(0);
    eval(
        b,
        &Ctx {
            row: None,
            keys: &[],
            aggs: &[],
            warnings: &warnings,
        },
    )
}

fn truth(v: &Value) -> Option<bool> {
    match v {
        Value::Int(i) => Some(*i != 0),
        _ => None,
    }
}

fn boolean(b: bool) -> Value {
    Value::Int(b as i64)
}

fn float_result(x: f64, ctx: &Ctx) -> Value {
    if x.is_finite() {
        Value::Float(x)
    } else {
        ctx.warn()
    }
}

fn eval(b: &Bound, ctx: &Ctx) -> Value {
    match b {
        Bound::Slot(i) => ctx.row.map_or(Value::Null, |r| r.slot(*i)),
        Bound::Lit(v) => v.clone(),
        Bound::GroupKey(i) => ctx.keys[*i].clone(),
        Bound::Agg(i) => ctx.aggs[*i].clone(),
        Bound::Neg(x) => match eval(x, ctx) {
            Value::Int(i) => i.checked_neg().map_or_else(|| ctx.warn(), Value::Int),
            Value::Float(f) => Value::Float(-f),
            _ => Value::Null,
        },
        Bound::Not(x) => match truth(&eval(x, ctx)) {
            Some(t) => boolean(!t),
            None => Value::Null,
        },
        Bound::And(l, r) => {
            let lv = truth(&eval(l, ctx));
            if lv == Some(false) {
                return boolean(false);
            }
            match (lv, truth(&eval(r, ctx))) {
                (_, Some(false)) => boolean(false),
                (Some(true), Some(true)) => boolean(true),
                _ => Value::Null,
            }
        }
        Bound::Or(l, r) => {
            let lv = truth(&eval(l, ctx));
            if lv == Some(true) {
                return boolean(true);
            }
            match (lv, truth(&eval(r, ctx))) {
                (_, Some(true)) => boolean(true),
                (Some(false), Some(false)) => boolean(false),
                _ => Value::Null,
            }
        }
        Bound::Binary(op, l, r) => {
            let lv = eval(l, ctx);
            let rv = eval(r, ctx);
            if lv.is_null() || rv.is_null() {
                return Value::Null;
            }
            if op.is_comparison() {
                compare(*op, &lv, &rv)
            } else {
                arith(*op, &lv, &rv, ctx)
            }
        }
        Bound::Func(f, args) => {
            let vals: Vec<Value> = args.iter().map(|a| eval(a, ctx)).collect();
            if vals.iter().any(Value::is_null) {
                return Value::Null;
            }
            call(*f, &vals, ctx)
        }
    }
}

fn compare(op: BinaryOp, l: &Value, r: &Value) -> Value {
    let ord = match (l, r) {
        (Value::Int(a), Value::Int(b)) => a.cmp(b),
        (Value::Text(a), Value::Text(b)) => a.cmp(b),
        _ => match (l.as_f64(), r.as_f64()) {
            (Some(a), Some(b)) => match a.partial_cmp(&b) {
                Some(o) => o,
                None => return Value::Null,
            },
            _ => return Value::Null,
        },
    };
    boolean(match op {
        BinaryOp::Eq => ord == Ordering::Equal,
        BinaryOp::NotEq => ord != Ordering::Equal,
        BinaryOp::Lt => ord == Ordering::Less,
        BinaryOp::Le => ord != Ordering::Greater,
        BinaryOp::Gt => ord == Ordering::Greater,
        BinaryOp::Ge => ord != Ordering::Less,
        _ => unreachable!("not a comparison"),
    })
}

fn arith(op: BinaryOp, l: &Value, r: &Value, ctx: &Ctx) -> Value {
    if op != BinaryOp::Div {
        if let (Value::Int(a), Value::Int(b)) = (l, r) {
            let res = match op {
                BinaryOp::Add => a.checked_add(*b),
                BinaryOp::Sub => a.checked_sub(*b),
                BinaryOp::Mul => a.checked_mul(*b),
                _ => unreachable!("not arithmetic"),
            };
            return res.map_or_else(|| ctx.warn(), Value::Int);
        }
    }
    let (Some(a), Some(b)) = (l.as_f64(), r.as_f64()) else {
        return Value::Null;
    };
    match op {
        BinaryOp::Add => float_result(a + b, ctx),
        BinaryOp::Sub => float_result(a - b, ctx),
        BinaryOp::Mul => float_result(a * b, ctx),
        BinaryOp::Div if b == 0.0 => ctx.warn(),
        BinaryOp::Div => float_result(a / b, ctx),
        _ => unreachable!("not arithmetic"),
    }
}

fn call(f: ScalarFn, vals: &[Value], ctx: &Ctx) -> Value {
    let num = |i: usize| vals[i].as_f64().unwrap_or(f64::NAN);
    match f {
        ScalarFn::Floor => match &vals[0] {
            Value::Int(i) => Value::Int(*i),
            v => {
                let x = v.as_f64().unwrap_or(f64::NAN).floor();
                // i64 covers [-2^63, 2^63).
                if (i64::MIN as f64..i64::MAX as f64).contains(&x) {
                    Value::Int(x as i64)
                } else {
                    ctx.warn()
                }
            }
        },
        ScalarFn::Abs => match &vals[0] {
            Value::Int(i) => i.checked_abs().map_or_else(|| ctx.warn(), Value::Int),
            v => Value::Float(v.as_f64().unwrap_or(f64::NAN).abs()),
        },
        ScalarFn::Cone => {
            let Some(pos) = ctx.row.and_then(|r| r.position()) else {
                return Value::Null;
            };
            let radius = num(2);
            let Ok(center) = EquatorialPosition::new(num(0), num(1)) else {
                return ctx.warn();
            };
            if !(0.0..=180.0).contains(&radius) {
                return ctx.warn();
            }
            boolean(angular_separation(&pos, &center) <= radius)
        }
        ScalarFn::Separation => {
            match (
                EquatorialPosition::new(num(0), num(1)),
                EquatorialPosition::new(num(2), num(3)),
            ) {
                (Ok(a), Ok(b)) => Value::Float(angular_separation(&a, &b)),
                _ => ctx.warn(),
            }
        }
    }
}

enum AggState {
    Count(i64),
    SumInt { sum: i64, any: bool, overflow: bool },
    SumFloat { sum: f64, any: bool },
    Extreme { best: Option<Value>, max: bool },
    Avg { sum: f64, n: u64 },
}

impl AggState {
    fn new(spec: &AggSpec) -> Self {
        match spec.func {
            AggFn::Count => AggState::Count(0),
            AggFn::Sum if spec.ty == super::plan::SqlType::Int => AggState::SumInt {
                sum: 0,
                any: false,
                overflow: false,
            },
            AggFn::Sum => AggState::SumFloat { sum: 0.0, any: false },
            AggFn::Min => AggState::Extreme { best: None, max: false },
            AggFn::Max => AggState::Extreme { best: None, max: true },
            AggFn::Avg => AggState::Avg { sum: 0.0, n: 0 },
        }
    }

    /// `v` is `None` for `COUNT(*)`.
    fn update(&mut self, v: Option<Value>) {
        if matches!(v, Some(Value::Null)) {
            return;
        }
        match self {
            AggState::Count(n) => *n += 1,
            AggState::SumInt { sum, any, overflow } => {
                if let Some(Value::Int(i)) = v {
                    *any = true;
                    match sum.checked_add(i) {
                        Some(s) => *sum = s,
                        None => *overflow = true,
                    }
                }
            }
            AggState::SumFloat { sum, any } => {
                if let Some(x) = v.and_then(|v| v.as_f64()) {
                    *any = true;
                    *sum += x;
                }
            }
            AggState::Extreme { best, max } => {
                let v = v.expect("MIN/MAX take an argument");
                let replace = match best {
                    None => true,
                    Some(b) => {
                        let ord = v.total_cmp(b);
                        if *max {
                            ord == Ordering::Greater
                        } else {
                            ord == Ordering::Less
                        }
                    }
                };
                if replace {
                    *best = Some(v);
                }
            }
            AggState::Avg { sum, n } => {
                if let Some(x) = v.and_then(|v| v.as_f64()) {
                    *sum += x;
                    *n += 1;
                }
            }
        }
    }

    fn finish(self, warnings: &Cell<u64>) -> Value {
        let warn = || {
            warnings.set(warnings.get() + 1);
            Value::Null
        };
        match self {
            AggState::Count(n) => Value::Int(n),
            AggState::SumInt { overflow: true, .. } => warn(),
            AggState::SumInt { sum, any, .. } => {
                if any {
                    Value::Int(sum)
                } else {
                    Value::Null
                }
            }
            AggState::SumFloat { any: false, .. } => Value::Null,
            AggState::SumFloat { sum, .. } if sum.is_finite() => Value::Float(sum),
            AggState::SumFloat { .. } => warn(),
            AggState::Extreme { best, .. } => best.unwrap_or(Value::Null),
            AggState::Avg { n: 0, .. } => Value::Null,
            AggState::Avg { sum, n } => {
                let mean = sum / n as f64;
                if mean.is_finite() {
                    Value::Float(mean)
                } else {
                    warn()
                }
            }
        }
    }
}

struct GroupKey(Vec<Value>);

impl PartialEq for GroupKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for GroupKey {}

impl PartialOrd for GroupKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GroupKey {
    fn cmp(&self, other: &Self) -> Ordering {
        compare_keys(&self.0, &other.0)
    }
}

fn compare_keys(a: &[Value], b: &[Value]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

fn sort_rows(rows: &mut [(Vec<Value>, Vec<Value>)], order: &[SortKey]) {
    if order.is_empty() {
        return;
    }
    rows.sort_by(|(a, _), (b, _)| {
        for (k, (x, y)) in order.iter().zip(a.iter().zip(b)) {
            let o = x.total_cmp(y);
            let o = if k.descending { o.reverse() } else { o };
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    });
}

/// Runs a bound query over rows supplied in their canonical order.
pub fn run_bound<R: RowSource>(
    q: &BoundQuery,
    rows: impl IntoIterator<Item = R>,
    opts: &ExecOptions,
) -> Result<ResultTable, ExecError> {
    let warnings = Cell::new(0u64);
    let limit = q.limit.map(|l| usize::try_from(l).unwrap_or(usize::MAX));
    let passes = |row: &dyn RowSource| -> bool {
        match &q.filter {
            None => true,
            Some(f) => {
                let ctx = Ctx {
                    row: Some(row),
                    keys: &[],
                    aggs: &[],
                    warnings: &warnings,
                };
                truth(&eval(f, &ctx)) == Some(true)
            }
        }
    };
    let check_cap = |n: usize| match opts.row_cap {
        Some(cap) if n > cap => Err(ExecError::RowCapExceeded { cap }),
        _ => Ok(()),
    };

    let mut out: Vec<(Vec<Value>, Vec<Value>)> = Vec::new();
    match &q.shape {
        Shape::Rows { outputs, order } => {
            for row in rows {
                if !passes(&row) {
                    continue;
                }
                let ctx = Ctx {
                    row: Some(&row),
                    keys: &[],
                    aggs: &[],
                    warnings: &warnings,
                };
                let sort: Vec<Value> = order.iter().map(|k| eval(&k.expr, &ctx)).collect();
                let vals: Vec<Value> = outputs.iter().map(|o| eval(o, &ctx)).collect();
                out.push((sort, vals));
                if order.is_empty() {
                    if limit.is_some_and(|l| out.len() >= l) {
                        break;
                    }
                    if limit.is_none() {
                        check_cap(out.len())?;
                    }
                }
            }
            sort_rows(&mut out, order);
        }
        Shape::Grouped {
            keys,
            aggs,
            outputs,
            order,
        } => {
            let mut groups: BTreeMap<GroupKey, Vec<AggState>> = BTreeMap::new();
            if keys.is_empty() {
                groups.insert(GroupKey(Vec::new()), aggs.iter().map(AggState::new).collect());
            }
            for row in rows {
                if !passes(&row) {
                    continue;
                }
                let ctx = Ctx {
                    row: Some(&row),
                    keys: &[],
                    aggs: &[],
                    warnings: &warnings,
                };
                let key = GroupKey(keys.iter().map(|k| eval(k, &ctx)).collect());
                let states = groups
                    .entry(key)
                    .or_insert_with(|| aggs.iter().map(AggState::new).collect());
                for (state, spec) in states.iter_mut().zip(aggs) {
                    state.update(spec.arg.as_ref().map(|a| eval(a, &ctx)));
                }
            }
            for (key, states) in groups {
                let agg_vals: Vec<Value> = states.into_iter().map(|s| s.finish(&warnings)).collect();
                let ctx = Ctx {
                    row: None,
                    keys: &key.0,
                    aggs: &agg_vals,
                    warnings: &warnings,
                };
                let sort: Vec<Value> = order.iter().map(|k| eval(&k.expr, &ctx)).collect();
                let vals: Vec<Value> = outputs.iter().map(|o| eval(o, &ctx)).collect();
                out.push((sort, vals));
            }
            sort_rows(&mut out, order);
        }
    }
    if let Some(l) = limit {
        out.truncate(l);
    }
    check_cap(out.len())?;
    let rows: Vec<Vec<Value>> = out.into_iter().map(|(_, v)| v).collect();
    let mut table = ResultTable::new(q.columns.clone(), rows).expect("bound query yields a valid table shape");
    table.stats = TableStats {
        row_count: table.rows.len(),
        elapsed_ms: 0,
        warnings: warnings.get(),
    };
    Ok(table)
}

/// A catalog object viewed through the domestic column order.
pub struct ObjectRow<'a> {
    pub object: &'a SkyObject,
    pub columns: &'a [DomesticColumn],
    pub bands: &'a [String],
}

impl RowSource for ObjectRow<'_> {
    fn slot(&self, i: usize) -> Value {
        self.columns[i].value(self.object, self.bands)
    }

    fn position(&self) -> Option<EquatorialPosition> {
        Some(self.object.pos)
    }
}

/// Executes a catalog plan. Candidate rows are visited in `object_id`
/// order whichever access path the plan uses, so both paths produce
/// identical tables.
pub fn execute(
    plan: &Plan,
    catalog: &Catalog,
    index: &ZoneIndex,
    opts: &ExecOptions,
) -> Result<ResultTable, ExecError> {
    let started = Instant::now();
    let mut candidates: Vec<usize> = match &plan.access {
        Access::FullScan => (0..catalog.objects.len()).collect(),
        Access::Cone(cone) => index.cone_search(cone),
    };
    candidates.sort_unstable_by_key(|&i| (catalog.objects[i].object_id, i));
    let columns = catalog.domestic_columns();
    let bands = catalog.bands();
    let rows = candidates.into_iter().map(|i| ObjectRow {
        object: &catalog.objects[i],
        columns: &columns,
        bands,
    });
    let mut table = run_bound(&plan.query, rows, opts)?;
    table.stats.elapsed_ms = started.elapsed().as_millis() as u64;
    Ok(table)
}
