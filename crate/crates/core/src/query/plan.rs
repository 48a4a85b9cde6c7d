//! Name resolution, type checking, and access-path selection.

use std::collections::HashSet;

use super::ast::*;
use super::exec::{eval_const, ScalarFn};
use crate::catalog::DomesticColumn;
use crate::ingest::CatalogSchema;
use crate::sky::EquatorialPosition;
use crate::table::{Column, Value, ValueKind};
use crate::zone::ConeQuery;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct PlanError {
    pub message: String,
}

impl PlanError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

/// Static type of an expression. Booleans are represented at run time as
/// integer 0/1 (or NULL for unknown).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqlType {
    Int,
    Float,
    Text,
    Bool,
}

impl SqlType {
    pub fn from_kind(kind: ValueKind) -> Self {
        match kind {
            ValueKind::Int => SqlType::Int,
            ValueKind::Float => SqlType::Float,
            ValueKind::Text => SqlType::Text,
        }
    }

    pub fn kind(self) -> ValueKind {
        match self {
            SqlType::Int | SqlType::Bool => ValueKind::Int,
            SqlType::Float => ValueKind::Float,
            SqlType::Text => ValueKind::Text,
        }
    }

    fn is_numeric(self) -> bool {
        matches!(self, SqlType::Int | SqlType::Float)
    }

    fn name(self) -> &'static str {
        match self {
            SqlType::Int => "integer",
            SqlType::Float => "float",
            SqlType::Text => "text",
            SqlType::Bool => "boolean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotInfo {
    pub slot: usize,
    pub ty: SqlType,
    pub nullable: bool,
}

/// The set of columns a query may reference.
pub trait Scope {
    fn resolve(&self, col: &ColumnRef) -> Result<SlotInfo, PlanError>;
    /// Columns produced by `SELECT *`, in order.
    fn wildcard(&self) -> Vec<ColumnRef>;
    /// Whether rows carry a single sky position usable by `CONE`.
    fn has_position(&self) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggFn {
    Count,
    Sum,
    Min,
    Max,
    Avg,
}

impl AggFn {
    fn lookup(name: &str) -> Option<AggFn> {
        Some(match name {
            "COUNT" => AggFn::Count,
            "SUM" => AggFn::Sum,
            "MIN" => AggFn::Min,
            "MAX" => AggFn::Max,
            "AVG" => AggFn::Avg,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Bound {
    Slot(usize),
    Lit(Value),
    Neg(Box<Bound>),
    Not(Box<Bound>),
    And(Box<Bound>, Box<Bound>),
    Or(Box<Bound>, Box<Bound>),
    /// Comparison or arithmetic; `op` is never `And`/`Or`.
    Binary(BinaryOp, Box<Bound>, Box<Bound>),
    Func(ScalarFn, Vec<Bound>),
    GroupKey(usize),
    Agg(usize),
}

impl Bound {
    fn has_slots(&self) -> bool {
        match self {
            Bound::Slot(_) | Bound::GroupKey(_) | Bound::Agg(_) => true,
            Bound::Lit(_) => false,
            Bound::Neg(x) | Bound::Not(x) => x.has_slots(),
            Bound::And(a, b) | Bound::Or(a, b) | Bound::Binary(_, a, b) => a.has_slots() || b.has_slots(),
            // CONE reads the row position even with constant arguments.
            Bound::Func(ScalarFn::Cone, _) => true,
            Bound::Func(_, args) => args.iter().any(Bound::has_slots),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggSpec {
    pub func: AggFn,
    /// `None` for `COUNT(*)`.
    pub arg: Option<Bound>,
    pub ty: SqlType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SortKey {
    pub expr: Bound,
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Rows {
        outputs: Vec<Bound>,
        order: Vec<SortKey>,
    },
    Grouped {
        keys: Vec<Bound>,
        aggs: Vec<AggSpec>,
        outputs: Vec<Bound>,
        order: Vec<SortKey>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundQuery {
    pub columns: Vec<Column>,
    pub filter: Option<Bound>,
    pub shape: Shape,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Access {
    FullScan,
    Cone(ConeQuery),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub access: Access,
    pub query: BoundQuery,
}

/// Columns of one catalog, addressed by domestic column order.
pub struct CatalogScope<'a> {
    names: Vec<&'a str>,
    bands: &'a [String],
}

impl<'a> CatalogScope<'a> {
    pub fn new(schema: &'a CatalogSchema) -> Self {
        Self {
            names: vec![schema.survey.as_str(), "photoobj"],
            bands: &schema.bands,
        }
    }
}

impl Scope for CatalogScope<'_> {
    fn resolve(&self, col: &ColumnRef) -> Result<SlotInfo, PlanError> {
        if let Some(q) = &col.qualifier {
            if !self.names.contains(&q.as_str()) {
                return Err(PlanError::new(format!("unknown table qualifier: {q}")));
            }
        }
        let all = DomesticColumn::all(self.bands.len());
        let slot = all
            .iter()
            .position(|c| c.name(self.bands) == col.name)
            .ok_or_else(|| PlanError::new(format!("unknown column: {col}")))?;
        Ok(SlotInfo {
            slot,
            ty: SqlType::from_kind(all[slot].kind()),
            nullable: all[slot].nullable(),
        })
    }

    fn wildcard(&self) -> Vec<ColumnRef> {
        DomesticColumn::all(self.bands.len())
            .iter()
            .map(|c| ColumnRef::bare(c.name(self.bands)))
            .collect()
    }

    fn has_position(&self) -> bool {
        true
    }
}

/// Plans a query against a single catalog. The first top-level `CONE`
/// conjunct with constant, valid arguments becomes an index scan; the
/// remaining conjuncts stay as the row filter.
pub fn plan_catalog_query(q: &Query, schema: &CatalogSchema) -> Result<Plan, PlanError> {
    match &q.from {
        Source::Table { qualifier, name } => {
            if let Some(qual) = qualifier {
                return Err(PlanError::new(format!("unknown table: {qual}.{name}")));
            }
            if name != &schema.survey && name != "photoobj" {
                return Err(PlanError::new(format!("unknown table: {name}")));
            }
        }
        Source::Xmatch { .. } => {
            return Err(PlanError::new("XMATCH queries must be sent to the portal"));
        }
    }
    let scope = CatalogScope::new(schema);
    // Bind the full query first so errors are reported against the text the
    // user wrote, independent of the access path.
    let full = bind_query(q, &scope)?;

    let Some(where_clause) = &q.where_clause else {
        return Ok(Plan {
            access: Access::FullScan,
            query: full,
        });
    };
    let conjuncts = where_clause.conjuncts();
    let cone = conjuncts
        .iter()
        .enumerate()
        .find_map(|(i, c)| constant_cone(c, &scope).map(|cq| (i, cq)));
    let Some((index, cone)) = cone else {
        return Ok(Plan {
            access: Access::FullScan,
            query: full,
        });
    };
    let mut residual = q.clone();
    residual.where_clause = Expr::and_all(
        conjuncts
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != index)
            .map(|(_, e)| (*e).clone()),
    );
    Ok(Plan {
        access: Access::Cone(cone),
        query: bind_query(&residual, &scope)?,
    })
}

fn constant_cone(e: &Expr, scope: &dyn Scope) -> Option<ConeQuery> {
    let Expr::Call { name, args } = e else {
        return None;
    };
    if name != "CONE" || args.len() != 3 {
        return None;
    }
    let mut vals = [0.0; 3];
    for (v, a) in vals.iter_mut().zip(args) {
        let (b, ty, _) = Binder::row(scope).bind(a).ok()?;
        if !ty.is_numeric() || b.has_slots() {
            return None;
        }
        *v = eval_const(&b).as_f64()?;
    }
    let center = EquatorialPosition::new(vals[0], vals[1]).ok()?;
    ConeQuery::new(center, vals[2]).ok()
}

/// Binds and type-checks a query against `scope`.
pub fn bind_query(q: &Query, scope: &dyn Scope) -> Result<BoundQuery, PlanError> {
    let mut items: Vec<(Expr, String)> = Vec::new();
    let mut aliases: Vec<(String, Expr)> = Vec::new();
    for item in &q.select {
        match item {
            SelectItem::Wildcard => {
                for col in scope.wildcard() {
                    let name = col.to_string();
                    items.push((Expr::Column(col), name));
                }
            }
            SelectItem::Expr { expr, alias } => {
                let name = alias.clone().unwrap_or_else(|| expr.to_string());
                if let Some(a) = alias {
                    aliases.push((a.clone(), expr.clone()));
                }
                items.push((expr.clone(), name));
            }
        }
    }
    let resolve_alias = |e: &Expr| -> Expr {
        if let Expr::Column(ColumnRef {
            qualifier: None,
            name,
        }) = e
        {
            if let Some((_, target)) = aliases.iter().find(|(a, _)| a == name) {
                return target.clone();
            }
        }
        e.clone()
    };

    let filter = match &q.where_clause {
        Some(w) => {
            let (b, ty, _) = Binder::row(scope).context("WHERE").bind(w)?;
            expect_bool(ty, "WHERE clause")?;
            Some(b)
        }
        None => None,
    };

    let group_exprs: Vec<Expr> = q.group_by.iter().map(&resolve_alias).collect();
    let order_exprs: Vec<(Expr, bool)> = q
        .order_by
        .iter()
        .map(|o| (resolve_alias(&o.expr), o.descending))
        .collect();
    let grouped = !group_exprs.is_empty()
        || items.iter().any(|(e, _)| contains_aggregate(e))
        || order_exprs.iter().any(|(e, _)| contains_aggregate(e));

    let mut columns = Vec::with_capacity(items.len());
    let mut seen = HashSet::new();
    let mut add_column = |name: String, ty: SqlType, nullable: bool| {
        let mut unique = name.clone();
        let mut n = 2;
        while !seen.insert(unique.clone()) {
            unique = format!("{name}_{n}");
            n += 1;
        }
        columns.push(Column::new(unique, ty.kind(), nullable));
    };

    let shape = if grouped {
        let mut keys = Vec::new();
        let mut key_info = Vec::new();
        for g in &group_exprs {
            let (b, ty, nullable) = Binder::row(scope).context("GROUP BY").bind(g)?;
            keys.push(b);
            key_info.push((ty, nullable));
        }
        let mut aggs = Vec::new();
        let mut outputs = Vec::new();
        for (e, name) in &items {
            let mut binder = Binder::grouped(scope, &keys, &key_info, &mut aggs);
            let (b, ty, nullable) = binder.bind(e)?;
            outputs.push(b);
            add_column(name.clone(), ty, nullable);
        }
        let mut order = Vec::new();
        for (e, descending) in &order_exprs {
            let mut binder = Binder::grouped(scope, &keys, &key_info, &mut aggs);
            let (b, _, _) = binder.bind(e)?;
            order.push(SortKey {
                expr: b,
                descending: *descending,
            });
        }
        Shape::Grouped {
            keys,
            aggs,
            outputs,
            order,
        }
    } else {
        let mut outputs = Vec::new();
        for (e, name) in &items {
            let (b, ty, nullable) = Binder::row(scope).bind(e)?;
            outputs.push(b);
            add_column(name.clone(), ty, nullable);
        }
        let mut order = Vec::new();
        for (e, descending) in &order_exprs {
            let (b, _, _) = Binder::row(scope).context("ORDER BY").bind(e)?;
            order.push(SortKey {
                expr: b,
                descending: *descending,
            });
        }
        Shape::Rows { outputs, order }
    };

    Ok(BoundQuery {
        columns,
        filter,
        shape,
        limit: q.limit,
    })
}

fn contains_aggregate(e: &Expr) -> bool {
    let mut found = false;
    e.walk(&mut |x| {
        if let Expr::Call { name, .. } = x {
            if AggFn::lookup(name).is_some() {
                found = true;
            }
        }
    });
    found
}

fn expect_bool(ty: SqlType, what: &str) -> Result<(), PlanError> {
    if ty == SqlType::Bool {
        Ok(())
    } else {
        Err(PlanError::new(format!("{what} must be a boolean, found {}", ty.name())))
    }
}

fn expect_numeric(ty: SqlType, what: &str) -> Result<(), PlanError> {
    if ty.is_numeric() {
        Ok(())
    } else {
        Err(PlanError::new(format!("{what} must be numeric, found {}", ty.name())))
    }
}

struct GroupCtx<'b> {
    keys: &'b [Bound],
    key_info: &'b [(SqlType, bool)],
    aggs: &'b mut Vec<AggSpec>,
}

struct Binder<'s, 'b> {
    scope: &'s dyn Scope,
    context: &'static str,
    group: Option<GroupCtx<'b>>,
}

type Typed = (Bound, SqlType, bool);

impl<'s, 'b> Binder<'s, 'b> {
    fn row(scope: &'s dyn Scope) -> Self {
        Self {
            scope,
            context: "this position",
            group: None,
        }
    }

    fn context(mut self, context: &'static str) -> Self {
        self.context = context;
        self
    }

    fn grouped(
        scope: &'s dyn Scope,
        keys: &'b [Bound],
        key_info: &'b [(SqlType, bool)],
        aggs: &'b mut Vec<AggSpec>,
    ) -> Self {
        Self {
            scope,
            context: "this position",
            group: Some(GroupCtx { keys, key_info, aggs }),
        }
    }

    fn bind(&mut self, e: &Expr) -> Result<Typed, PlanError> {
        if self.group.is_some() {
            if !contains_aggregate(e) {
                let (b, ty, nullable) = Binder::row(self.scope).bind(e)?;
                let group = self.group.as_ref().expect("grouped binder");
                if let Some(i) = group.keys.iter().position(|k| *k == b) {
                    let (kty, knull) = group.key_info[i];
                    return Ok((Bound::GroupKey(i), kty, knull));
                }
                if !b.has_slots() {
                    return Ok((b, ty, nullable));
                }
                if let Expr::Column(c) = e {
                    return Err(PlanError::new(format!(
                        "column {c} must appear in GROUP BY or inside an aggregate"
                    )));
                }
            } else if let Expr::Call { name, args } = e {
                if let Some(func) = AggFn::lookup(name) {
                    return self.bind_aggregate(func, name, args);
                }
            }
        }
        self.bind_node(e)
    }

    fn bind_aggregate(&mut self, func: AggFn, name: &str, args: &[Expr]) -> Result<Typed, PlanError> {
        let arg = match args {
            [Expr::Star] if func == AggFn::Count => None,
            [a] => {
                if contains_aggregate(a) {
                    return Err(PlanError::new(format!("aggregate calls cannot be nested in {name}")));
                }
                Some(Binder::row(self.scope).bind(a)?)
            }
            _ => {
                return Err(PlanError::new(format!("{name} takes exactly one argument")));
            }
        };
        let (ty, nullable) = match (func, &arg) {
            (AggFn::Count, _) => (SqlType::Int, false),
            (AggFn::Sum, Some((_, t, _))) => {
                expect_numeric(*t, "SUM argument")?;
                (*t, true)
            }
            (AggFn::Avg, Some((_, t, _))) => {
                expect_numeric(*t, "AVG argument")?;
                (SqlType::Float, true)
            }
            (AggFn::Min | AggFn::Max, Some((_, t, _))) => {
                if *t == SqlType::Bool {
                    return Err(PlanError::new(format!("{name} argument cannot be boolean")));
                }
                (*t, true)
            }
            (_, None) => unreachable!("only COUNT accepts *"),
        };
        let group = self.group.as_mut().expect("grouped binder");
        group.aggs.push(AggSpec {
            func,
            arg: arg.map(|(b, _, _)| b),
            ty,
        });
        Ok((Bound::Agg(group.aggs.len() - 1), ty, nullable))
    }

    fn bind_node(&mut self, e: &Expr) -> Result<Typed, PlanError> {
        match e {
            Expr::Column(c) => {
                let info = self.scope.resolve(c)?;
                Ok((Bound::Slot(info.slot), info.ty, info.nullable))
            }
            Expr::Literal(Literal::Int(i)) => Ok((Bound::Lit(Value::Int(*i)), SqlType::Int, false)),
            Expr::Literal(Literal::Float(x)) => Ok((Bound::Lit(Value::Float(*x)), SqlType::Float, false)),
            Expr::Literal(Literal::Text(s)) => Ok((Bound::Lit(Value::Text(s.clone())), SqlType::Text, false)),
            Expr::Star => Err(PlanError::new("`*` is only allowed as COUNT(*)")),
            Expr::Unary { op: UnaryOp::Neg, expr } => {
                let (b, ty, nullable) = self.bind(expr)?;
                expect_numeric(ty, "operand of unary -")?;
                Ok((Bound::Neg(Box::new(b)), ty, nullable || ty == SqlType::Int))
            }
            Expr::Unary { op: UnaryOp::Not, expr } => {
                let (b, ty, nullable) = self.bind(expr)?;
                expect_bool(ty, "operand of NOT")?;
                Ok((Bound::Not(Box::new(b)), SqlType::Bool, nullable))
            }
            Expr::Binary { op, lhs, rhs } => {
                let (lb, lt, ln) = self.bind(lhs)?;
                let (rb, rt, rn) = self.bind(rhs)?;
                let nullable = ln || rn;
                match op {
                    BinaryOp::And | BinaryOp::Or => {
                        expect_bool(lt, &format!("left operand of {}", op.symbol()))?;
                        expect_bool(rt, &format!("right operand of {}", op.symbol()))?;
                        let b = if *op == BinaryOp::And {
                            Bound::And(Box::new(lb), Box::new(rb))
                        } else {
                            Bound::Or(Box::new(lb), Box::new(rb))
                        };
                        Ok((b, SqlType::Bool, nullable))
                    }
                    _ if op.is_comparison() => {
                        let ok = (lt.is_numeric() && rt.is_numeric())
                            || (lt == SqlType::Text && rt == SqlType::Text);
                        if !ok {
                            return Err(PlanError::new(format!(
                                "cannot compare {} with {}",
                                lt.name(),
                                rt.name()
                            )));
                        }
                        Ok((Bound::Binary(*op, Box::new(lb), Box::new(rb)), SqlType::Bool, nullable))
                    }
                    _ => {
                        expect_numeric(lt, &format!("left operand of {}", op.symbol()))?;
                        expect_numeric(rt, &format!("right operand of {}", op.symbol()))?;
                        let ty = if *op != BinaryOp::Div && lt == SqlType::Int && rt == SqlType::Int {
                            SqlType::Int
                        } else {
                            SqlType::Float
                        };
                        let nullable = nullable || ty == SqlType::Int || *op == BinaryOp::Div;
                        Ok((Bound::Binary(*op, Box::new(lb), Box::new(rb)), ty, nullable))
                    }
                }
            }
            Expr::Call { name, args } => {
                if AggFn::lookup(name).is_some() {
                    return Err(PlanError::new(format!(
                        "aggregate {name} is not allowed in {}",
                        self.context
                    )));
                }
                let func = ScalarFn::lookup(name)
                    .ok_or_else(|| PlanError::new(format!("unknown function: {name}")))?;
                if args.len() != func.arity() {
                    return Err(PlanError::new(format!(
                        "{name} takes {} arguments, got {}",
                        func.arity(),
                        args.len()
                    )));
                }
                if func == ScalarFn::Cone && self.group.is_some() {
                    return Err(PlanError::new("CONE is not allowed in grouped output"));
                }
                if func == ScalarFn::Cone && !self.scope.has_position() {
                    return Err(PlanError::new(
                        "CONE needs a single-catalog row; qualify it with a survey in federated queries",
                    ));
                }
                let mut bound = Vec::with_capacity(args.len());
                let mut arg_ty = SqlType::Float;
                let mut any_null = false;
                for (i, a) in args.iter().enumerate() {
                    let (b, ty, nullable) = self.bind(a)?;
                    expect_numeric(ty, &format!("argument {} of {name}", i + 1))?;
                    arg_ty = ty;
                    any_null |= nullable;
                    bound.push(b);
                }
                let (ty, nullable) = match func {
                    ScalarFn::Cone => (SqlType::Bool, true),
                    ScalarFn::Separation => (SqlType::Float, true),
                    ScalarFn::Floor => (SqlType::Int, true),
                    ScalarFn::Abs => (arg_ty, any_null || arg_ty == SqlType::Int),
                };
                Ok((Bound::Func(func, bound), ty, nullable))
            }
        }
    }
}
