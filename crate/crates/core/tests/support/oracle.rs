//! A slow reference interpreter for catalog queries.
//!
//! It walks the syntax tree directly against each object, with dynamic
//! typing and no planner: every row is visited, every aggregate rescans its
//! group, and angles come from the haversine formula rather than the
//! vector arithmetic the engine uses.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::HashMap;

use skyfed_core::catalog::Catalog;
use skyfed_core::query::ast::{BinaryOp, Expr, Literal, Query, SelectItem, Source, UnaryOp};
use skyfed_core::sky::SkyObject;
use skyfed_core::table::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

pub struct Row {
    values: HashMap<String, Value>,
    ra: f64,
    dec: f64,
}

fn domestic_names(catalog: &Catalog) -> Vec<String> {
    let mut names: Vec<String> = ["object_id", "ra", "dec", "sigma_pos", "class", "extent"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend(catalog.schema.bands.iter().map(|b| format!("mag_{b}")));
    names
}

fn row_of(obj: &SkyObject, catalog: &Catalog) -> Row {
    let mut values = HashMap::new();
    values.insert("object_id".to_string(), Value::Int(obj.object_id as i64));
    values.insert("ra".to_string(), Value::Float(obj.pos.ra_deg()));
    values.insert("dec".to_string(), Value::Float(obj.pos.dec_deg()));
    values.insert("sigma_pos".to_string(), Value::Float(obj.sigma_pos_arcsec));
    values.insert("class".to_string(), Value::Text(obj.class.as_str().to_string()));
    values.insert(
        "extent".to_string(),
        obj.extent_arcsec.map(Value::Float).unwrap_or(Value::Null),
    );
    for b in &catalog.schema.bands {
        let v = obj.mags.get(b).map(|m| Value::Float(*m)).unwrap_or(Value::Null);
        values.insert(format!("mag_{b}"), v);
    }
    Row {
        values,
        ra: obj.pos.ra_deg(),
        dec: obj.pos.dec_deg(),
    }
}

/// Haversine great-circle distance in degrees.
pub fn haversine_deg(ra1: f64, dec1: f64, ra2: f64, dec2: f64) -> f64 {
    let (p1, p2) = (dec1.to_radians(), dec2.to_radians());
    let dp = p2 - p1;
    let dl = (ra2 - ra1).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * h.sqrt().min(1.0).asin().to_degrees()
}

fn valid_position(ra: f64, dec: f64) -> bool {
    ra.is_finite() && (-90.0..=90.0).contains(&dec)
}

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

fn truthy(v: &Value) -> Option<bool> {
    match v {
        Value::Int(i) => Some(*i != 0),
        _ => None,
    }
}

fn b(x: bool) -> Value {
    Value::Int(if x { 1 } else { 0 })
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        Value::Float(x)
    } else {
        Value::Null
    }
}

fn order_values(a: &Value, b: &Value) -> Ordering {
    match (a, b) {
        (Value::Null, Value::Null) => Ordering::Equal,
        (Value::Null, _) => Ordering::Less,
        (_, Value::Null) => Ordering::Greater,
        (Value::Text(x), Value::Text(y)) => x.cmp(y),
        (Value::Text(_), _) => Ordering::Greater,
        (_, Value::Text(_)) => Ordering::Less,
        (Value::Int(x), Value::Int(y)) => x.cmp(y),
        (x, y) => num(x).unwrap().total_cmp(&num(y).unwrap()),
    }
}

fn is_aggregate(name: &str) -> bool {
    matches!(name, "COUNT" | "SUM" | "MIN" | "MAX" | "AVG")
}

fn has_aggregate(e: &Expr) -> bool {
    match e {
        Expr::Call { name, args } => is_aggregate(name) || args.iter().any(has_aggregate),
        Expr::Unary { expr, .. } => has_aggregate(expr),
        Expr::Binary { lhs, rhs, .. } => has_aggregate(lhs) || has_aggregate(rhs),
        _ => false,
    }
}

struct Interp<'a> {
    survey: &'a str,
}

impl Interp<'_> {
    fn column(&self, row: &Row, qualifier: Option<&str>, name: &str) -> Value {
        if let Some(q) = qualifier {
            assert!(q == self.survey || q == "photoobj", "qualifier {q}");
        }
        row.values
            .get(name)
            .cloned()
            .unwrap_or_else(|| panic!("unknown column {name}"))
    }

    fn eval(&self, e: &Expr, row: &Row) -> Value {
        match e {
            Expr::Column(c) => self.column(row, c.qualifier.as_deref(), &c.name),
            Expr::Literal(l) => literal(l),
            Expr::Unary { op, expr } => unary(*op, self.eval(expr, row)),
            Expr::Binary { op, lhs, rhs } => match op {
                BinaryOp::And | BinaryOp::Or => {
                    logic(*op, truthy(&self.eval(lhs, row)), || truthy(&self.eval(rhs, row)))
                }
                _ => binary(*op, self.eval(lhs, row), self.eval(rhs, row)),
            },
            Expr::Call { name, args } => {
                let vals: Vec<Value> = args.iter().map(|a| self.eval(a, row)).collect();
                scalar(name, &vals, Some((row.ra, row.dec)))
            }
            Expr::Star => panic!("bare *"),
        }
    }

    /// Evaluates `e` for a group: sub-expressions equal to a group key take
    /// the key's value, aggregates scan the group's rows.
    fn eval_group(&self, e: &Expr, keys: &[Expr], key_vals: &[Value], rows: &[&Row]) -> Value {
        if let Some(i) = keys.iter().position(|k| k == e) {
            return key_vals[i].clone();
        }
        match e {
            Expr::Literal(l) => literal(l),
            Expr::Unary { op, expr } => unary(*op, self.eval_group(expr, keys, key_vals, rows)),
            Expr::Binary { op, lhs, rhs } => match op {
                BinaryOp::And | BinaryOp::Or => logic(
                    *op,
                    truthy(&self.eval_group(lhs, keys, key_vals, rows)),
                    || truthy(&self.eval_group(rhs, keys, key_vals, rows)),
                ),
                _ => binary(
                    *op,
                    self.eval_group(lhs, keys, key_vals, rows),
                    self.eval_group(rhs, keys, key_vals, rows),
                ),
            },
            Expr::Call { name, args } if is_aggregate(name) => self.aggregate(name, &args[0], rows),
            Expr::Call { name, args } => {
                let vals: Vec<Value> = args
                    .iter()
                    .map(|a| self.eval_group(a, keys, key_vals, rows))
                    .collect();
                scalar(name, &vals, None)
            }
            Expr::Column(c) => panic!("column {c} outside GROUP BY"),
            Expr::Star => panic!("bare *"),
        }
    }

    fn aggregate(&self, name: &str, arg: &Expr, rows: &[&Row]) -> Value {
        if name == "COUNT" && *arg == Expr::Star {
            return Value::Int(rows.len() as i64);
        }
        let vals: Vec<Value> = rows
            .iter()
            .map(|r| self.eval(arg, r))
            .filter(|v| !v.is_null())
            .collect();
        match name {
            "COUNT" => Value::Int(vals.len() as i64),
            "SUM" => {
                if vals.is_empty() {
                    Value::Null
                } else if vals.iter().all(|v| matches!(v, Value::Int(_))) {
                    let mut total: i64 = 0;
                    for v in &vals {
                        match total.checked_add(num(v).unwrap() as i64) {
                            Some(t) => total = t,
                            None => return Value::Null,
                        }
                    }
                    Value::Int(total)
                } else {
                    finite(vals.iter().map(|v| num(v).unwrap()).sum())
                }
            }
            "AVG" => {
                if vals.is_empty() {
                    Value::Null
                } else {
                    let total: f64 = vals.iter().map(|v| num(v).unwrap()).sum();
                    finite(total / vals.len() as f64)
                }
            }
            "MIN" => vals
                .into_iter()
                .reduce(|a, b| if order_values(&b, &a) == Ordering::Less { b } else { a })
                .unwrap_or(Value::Null),
            "MAX" => vals
                .into_iter()
                .reduce(|a, b| if order_values(&b, &a) == Ordering::Greater { b } else { a })
                .unwrap_or(Value::Null),
            other => panic!("aggregate {other}"),
        }
    }
}

fn literal(l: &Literal) -> Value {
    match l {
        Literal::Int(i) => Value::Int(*i),
        Literal::Float(f) => Value::Float(*f),
        Literal::Text(s) => Value::Text(s.clone()),
    }
}

fn unary(op: UnaryOp, v: Value) -> Value {
    match (op, v) {
        (UnaryOp::Neg, Value::Int(i)) => i.checked_neg().map(Value::Int).unwrap_or(Value::Null),
        (UnaryOp::Neg, Value::Float(f)) => Value::Float(-f),
        (UnaryOp::Not, v) => truthy(&v).map(|t| b(!t)).unwrap_or(Value::Null),
        _ => Value::Null,
    }
}

fn logic(op: BinaryOp, l: Option<bool>, r: impl FnOnce() -> Option<bool>) -> Value {
    let r = match (op, l) {
        (BinaryOp::And, Some(false)) => return b(false),
        (BinaryOp::Or, Some(true)) => return b(true),
        _ => r(),
    };
    match op {
        BinaryOp::And => match (l, r) {
            (_, Some(false)) => b(false),
            (Some(true), Some(true)) => b(true),
            _ => Value::Null,
        },
        _ => match (l, r) {
            (_, Some(true)) => b(true),
            (Some(false), Some(false)) => b(false),
            _ => Value::Null,
        },
    }
}

fn binary(op: BinaryOp, l: Value, r: Value) -> Value {
    if l.is_null() || r.is_null() {
        return Value::Null;
    }
    match op {
        BinaryOp::Eq | BinaryOp::NotEq | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
            let ord = match (&l, &r) {
                (Value::Text(x), Value::Text(y)) => x.cmp(y),
                (Value::Int(x), Value::Int(y)) => x.cmp(y),
                _ => match (num(&l), num(&r)) {
                    (Some(x), Some(y)) => match x.partial_cmp(&y) {
                        Some(o) => o,
                        None => return Value::Null,
                    },
                    _ => return Value::Null,
                },
            };
            b(match op {
                BinaryOp::Eq => ord.is_eq(),
                BinaryOp::NotEq => ord.is_ne(),
                BinaryOp::Lt => ord.is_lt(),
                BinaryOp::Le => ord.is_le(),
                BinaryOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            })
        }
        BinaryOp::Div => {
            let (x, y) = (num(&l).unwrap(), num(&r).unwrap());
            if y == 0.0 {
                Value::Null
            } else {
                finite(x / y)
            }
        }
        BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul => {
            if let (Value::Int(x), Value::Int(y)) = (&l, &r) {
                let out = match op {
                    BinaryOp::Add => x.checked_add(*y),
                    BinaryOp::Sub => x.checked_sub(*y),
                    _ => x.checked_mul(*y),
                };
                return out.map(Value::Int).unwrap_or(Value::Null);
            }
            let (x, y) = (num(&l).unwrap(), num(&r).unwrap());
            finite(match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                _ => x * y,
            })
        }
        BinaryOp::And | BinaryOp::Or => unreachable!(),
    }
}

fn scalar(name: &str, vals: &[Value], position: Option<(f64, f64)>) -> Value {
    if vals.iter().any(Value::is_null) {
        return Value::Null;
    }
    let n = |i: usize| num(&vals[i]).unwrap();
    match name {
        "FLOOR" => match &vals[0] {
            Value::Int(i) => Value::Int(*i),
            v => {
                let x = num(v).unwrap().floor();
                if x.is_finite() && x.abs() < 9.2e18 {
                    Value::Int(x as i64)
                } else {
                    Value::Null
                }
            }
        },
        "ABS" => match &vals[0] {
            Value::Int(i) => i.checked_abs().map(Value::Int).unwrap_or(Value::Null),
            v => Value::Float(num(v).unwrap().abs()),
        },
        "SEPARATION" => {
            if valid_position(n(0), n(1)) && valid_position(n(2), n(3)) {
                Value::Float(haversine_deg(n(0), n(1), n(2), n(3)))
            } else {
                Value::Null
            }
        }
        "CONE" => {
            let Some((ra, dec)) = position else {
                return Value::Null;
            };
            if !valid_position(n(0), n(1)) || !(0.0..=180.0).contains(&n(2)) {
                return Value::Null;
            }
            b(haversine_deg(ra, dec, n(0), n(1)) <= n(2))
        }
        other => panic!("function {other}"),
    }
}

/// Runs a single-table query over `catalog`. Rows are visited in ascending
/// object id order.
pub fn run(query: &Query, catalog: &Catalog) -> OracleTable {
    run_on(query, catalog, &rows(catalog))
}

/// The catalog as oracle rows, for reuse across many `run_on` calls.
pub fn rows(catalog: &Catalog) -> Vec<Row> {
    let mut objects: Vec<&SkyObject> = catalog.objects.iter().collect();
    objects.sort_by_key(|o| o.object_id);
    objects.into_iter().map(|o| row_of(o, catalog)).collect()
}

/// `run` over rows prepared by [`rows`] from the same catalog.
pub fn run_on(query: &Query, catalog: &Catalog, rows: &[Row]) -> OracleTable {
    let survey = catalog.schema.survey.as_str();
    match &query.from {
        Source::Table { name, .. } => assert!(name == survey || name == "photoobj"),
        Source::Xmatch { .. } => panic!("oracle runs single-table queries"),
    }
    let interp = Interp { survey };
    let kept: Vec<&Row> = rows
        .iter()
        .filter(|r| match &query.where_clause {
            Some(w) => truthy(&interp.eval(w, r)) == Some(true),
            None => true,
        })
        .collect();

    let mut items: Vec<(Expr, String)> = Vec::new();
    for item in &query.select {
        match item {
            SelectItem::Wildcard => {
                for n in domestic_names(catalog) {
                    items.push((Expr::column(&n), n));
                }
            }
            SelectItem::Expr { expr, alias } => {
                items.push((expr.clone(), alias.clone().unwrap_or_else(|| expr.to_string())));
            }
        }
    }
    let alias_of = |e: &Expr| -> Expr {
        if let Expr::Column(c) = e {
            if c.qualifier.is_none() {
                for item in &query.select {
                    if let SelectItem::Expr { expr, alias: Some(a) } = item {
                        if *a == c.name {
                            return expr.clone();
                        }
                    }
                }
            }
        }
        e.clone()
    };
    let group_exprs: Vec<Expr> = query.group_by.iter().map(alias_of).collect();
    let order: Vec<(Expr, bool)> = query
        .order_by
        .iter()
        .map(|o| (alias_of(&o.expr), o.descending))
        .collect();
    let grouped = !group_exprs.is_empty()
        || items.iter().any(|(e, _)| has_aggregate(e))
        || order.iter().any(|(e, _)| has_aggregate(e));

    // (sort keys, output values)
    let mut out: Vec<(Vec<Value>, Vec<Value>)> = Vec::new();
    if grouped {
        let mut groups: Vec<(Vec<Value>, Vec<&Row>)> = Vec::new();
        for r in &kept {
            let key: Vec<Value> = group_exprs.iter().map(|g| interp.eval(g, r)).collect();
            match groups.iter_mut().find(|(k, _)| {
                k.iter().zip(&key).all(|(a, b)| order_values(a, b) == Ordering::Equal)
            }) {
                Some((_, members)) => members.push(r),
                None => groups.push((key, vec![r])),
            }
        }
        if group_exprs.is_empty() && groups.is_empty() {
            groups.push((Vec::new(), Vec::new()));
        }
        groups.sort_by(|(a, _), (b, _)| {
            a.iter()
                .zip(b)
                .map(|(x, y)| order_values(x, y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        });
        for (key, members) in &groups {
            let sort = order
                .iter()
                .map(|(e, _)| interp.eval_group(e, &group_exprs, key, members))
                .collect();
            let vals = items
                .iter()
                .map(|(e, _)| interp.eval_group(e, &group_exprs, key, members))
                .collect();
            out.push((sort, vals));
        }
    } else {
        for r in &kept {
            let sort = order.iter().map(|(e, _)| interp.eval(e, r)).collect();
            let vals = items.iter().map(|(e, _)| interp.eval(e, r)).collect();
            out.push((sort, vals));
        }
    }
    out.sort_by(|(a, _), (b, _)| {
        for ((x, y), (_, desc)) in a.iter().zip(b).zip(&order) {
            let o = order_values(x, y);
            let o = if *desc { o.reverse() } else { o };
            if o.is_ne() {
                return o;
            }
        }
        Ordering::Equal
    });
    if let Some(limit) = query.limit {
        out.truncate(limit as usize);
    }

    let mut columns: Vec<String> = Vec::new();
    for (_, name) in &items {
        let mut candidate = name.clone();
        let mut n = 2;
        while columns.contains(&candidate) {
            candidate = format!("{name}_{n}");
            n += 1;
        }
        columns.push(candidate);
    }
    OracleTable {
        columns,
        rows: out.into_iter().map(|(_, v)| v).collect(),
    }
}

/// Cell equality with a small tolerance for floats, since the oracle's
/// angle formula differs from the engine's in the last few bits.
pub fn values_match(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Float(x), Value::Float(y)) => (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs())),
        _ => a == b,
    }
}

/// Describes the first difference between two row sets, if any.
pub fn diff_rows(engine: &[Vec<Value>], oracle: &[Vec<Value>]) -> Option<String> {
    if engine.len() != oracle.len() {
        return Some(format!("row count {} vs oracle {}", engine.len(), oracle.len()));
    }
    for (i, (a, b)) in engine.iter().zip(oracle).enumerate() {
        if a.len() != b.len() || !a.iter().zip(b).all(|(x, y)| values_match(x, y)) {
            return Some(format!("row {i}: {a:?} vs oracle {b:?}"));
        }
    }
    None
}
