use std::collections::BTreeSet;

use futures::future::try_join_all;

use super::{FedError, Federation};
use crate::node::NodeMetadata;
use crate::query::ast::{BinaryOp, ColumnRef, Expr, MatchMode, Query, SelectItem, Source};
use crate::query::plan::{bind_query, SlotInfo, SqlType};
use crate::query::{parse_query, BoundQuery, PlanError, Scope};
use crate::table::{Column, ValueKind};

/// Name of the per-survey pseudo-column holding the separation from the
/// anchor object in arcseconds (0 for the anchor itself).
pub const SEPARATION_COLUMN: &str = "sep_arcsec";

/// One top-level `WHERE` conjunct, in the two forms the portal needs.
#[derive(Debug, Clone, PartialEq)]
struct Conjunct {
    /// Position in the original `WHERE` clause.
    order: usize,
    /// Unqualified, `CONE` preserved: sent to the owning node.
    node_form: Option<Expr>,
    /// Qualified, `CONE` rewritten to `SEPARATION`: evaluated on tuples.
    portal_form: Expr,
    /// The single survey this conjunct constrains, if any.
    survey: Option<usize>,
}

/// A federated query after name resolution against node metadata.
#[derive(Debug, Clone)]
pub struct FederatedQuery {
    /// Surveys in the order written in `XMATCH(...)`.
    pub surveys: Vec<String>,
    pub metadata: Vec<NodeMetadata>,
    pub k: f64,
    pub max_radius_arcsec: f64,
    pub mode: MatchMode,
    conjuncts: Vec<Conjunct>,
    /// Qualified query without its `WHERE` clause.
    body: Query,
}

impl FederatedQuery {
    /// Node-dialect filter for `survey` (AND of its single-survey conjuncts).
    pub fn node_filter(&self, survey: usize) -> Option<Expr> {
        Expr::and_all(
            self.conjuncts
                .iter()
                .filter(|c| c.survey == Some(survey))
                .filter_map(|c| c.node_form.clone()),
        )
    }
}

#[derive(Debug, Clone)]
pub struct XMatchPlan {
    pub surveys: Vec<String>,
    pub metadata: Vec<NodeMetadata>,
    /// Index into `surveys`.
    pub anchor: usize,
    pub anchor_filter: Option<Expr>,
    /// Remaining surveys in probe order.
    pub chain: Vec<usize>,
    pub k: f64,
    pub max_radius_arcsec: f64,
    pub mode: MatchMode,
    /// Filter applied to match tuples at the portal.
    pub post_filter: Option<Expr>,
    /// Per-survey cardinality estimates used to pick the anchor.
    pub estimates: Vec<u64>,
    pub bound: BoundQuery,
}

/// Columns of a match tuple: each survey's domestic columns followed by its
/// separation pseudo-column, surveys in `XMATCH` order.
pub struct TupleScope<'a> {
    surveys: &'a [String],
    metadata: &'a [NodeMetadata],
}

impl<'a> TupleScope<'a> {
    pub fn new(surveys: &'a [String], metadata: &'a [NodeMetadata]) -> Self {
        Self { surveys, metadata }
    }

    /// Slot offset of each survey's first column.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.metadata
            .iter()
            .map(|m| {
                let start = acc;
                acc += m.columns.len() + 1;
                start
            })
            .collect()
    }
}

impl Scope for TupleScope<'_> {
    fn resolve(&self, col: &ColumnRef) -> Result<SlotInfo, PlanError> {
        let q = col
            .qualifier
            .as_deref()
            .ok_or_else(|| PlanError::new(format!("column {col} must be qualified with a survey")))?;
        let s = self
            .surveys
            .iter()
            .position(|x| x == q)
            .ok_or_else(|| PlanError::new(format!("unknown survey: {q}")))?;
        let base = self.offsets()[s];
        let cols = &self.metadata[s].columns;
        if col.name == SEPARATION_COLUMN {
            return Ok(SlotInfo {
                slot: base + cols.len(),
                ty: SqlType::Float,
                nullable: false,
            });
        }
        let i = cols
            .iter()
            .position(|c| c.name == col.name)
            .ok_or_else(|| PlanError::new(format!("unknown column: {col}")))?;
        Ok(SlotInfo {
            slot: base + i,
            ty: SqlType::from_kind(cols[i].kind),
            nullable: cols[i].nullable,
        })
    }

    fn wildcard(&self) -> Vec<ColumnRef> {
        self.surveys
            .iter()
            .zip(self.metadata)
            .flat_map(|(s, m)| m.columns.iter().map(move |c| ColumnRef::qualified(s, &c.name)))
            .collect()
    }

    fn has_position(&self) -> bool {
        false
    }
}

/// Output columns of a match tuple, as described by [`TupleScope`].
pub fn tuple_columns(surveys: &[String], metadata: &[NodeMetadata]) -> Vec<Column> {
    surveys
        .iter()
        .zip(metadata)
        .flat_map(|(s, m)| {
            m.columns
                .iter()
                .map(move |c| Column::new(format!("{s}.{}", c.name), c.kind, c.nullable))
                .chain(std::iter::once(Column::new(
                    format!("{s}.{SEPARATION_COLUMN}"),
                    ValueKind::Float,
                    false,
                )))
        })
        .collect()
}

/// Pre-order rewrite: `f` may replace a node outright; otherwise children
/// are rewritten.
fn rewrite(e: &Expr, f: &mut impl FnMut(&Expr) -> Result<Option<Expr>, PlanError>) -> Result<Expr, PlanError> {
    if let Some(replacement) = f(e)? {
        return Ok(replacement);
    }
    Ok(match e {
        Expr::Unary { op, expr } => Expr::Unary {
            op: *op,
            expr: Box::new(rewrite(expr, f)?),
        },
        Expr::Binary { op, lhs, rhs } => Expr::binary(*op, rewrite(lhs, f)?, rewrite(rhs, f)?),
        Expr::Call { name, args } => Expr::Call {
            name: name.clone(),
            args: args.iter().map(|a| rewrite(a, f)).collect::<Result<_, _>>()?,
        },
        other => other.clone(),
    })
}

struct Resolver<'a> {
    surveys: &'a [String],
    metadata: &'a [NodeMetadata],
    known: Vec<&'a str>,
}

impl Resolver<'_> {
    fn has_column(&self, s: usize, name: &str) -> bool {
        name == SEPARATION_COLUMN || self.metadata[s].columns.iter().any(|c| c.name == name)
    }

    fn qualify_column(&self, col: &ColumnRef) -> Result<ColumnRef, PlanError> {
        match &col.qualifier {
            Some(q) => {
                let Some(s) = self.surveys.iter().position(|x| x == q) else {
                    if self.known.contains(&q.as_str()) {
                        return Err(PlanError::new(format!(
                            "survey {q} is not part of XMATCH({})",
                            self.surveys.join(", ")
                        )));
                    }
                    return Err(PlanError::new(format!("unknown survey: {q}")));
                };
                if !self.has_column(s, &col.name) {
                    return Err(PlanError::new(format!("unknown column: {col}")));
                }
                Ok(col.clone())
            }
            None => {
                let candidates: Vec<usize> = (0..self.surveys.len())
                    .filter(|&s| self.has_column(s, &col.name))
                    .collect();
                match candidates.as_slice() {
                    [] => Err(PlanError::new(format!("unknown column: {}", col.name))),
                    [s] => Ok(ColumnRef::qualified(&self.surveys[*s], &col.name)),
                    many => Err(PlanError::new(format!(
                        "ambiguous column {}: candidates {}",
                        col.name,
                        many.iter()
                            .map(|&s| format!("{}.{}", self.surveys[s], col.name))
                            .collect::<Vec<_>>()
                            .join(", ")
                    ))),
                }
            }
        }
    }

    /// Qualifies every column; bare names in `aliases` are left alone.
    fn qualify(&self, e: &Expr, aliases: &[String]) -> Result<Expr, PlanError> {
        rewrite(e, &mut |x| match x {
            Expr::Column(c) if c.qualifier.is_none() && aliases.contains(&c.name) => Ok(Some(x.clone())),
            Expr::Column(c) => Ok(Some(Expr::Column(self.qualify_column(c)?))),
            _ => Ok(None),
        })
    }

    /// Rewrites `CONE(ra, dec, r)` into a separation test on the first
    /// survey's position, which tuples can evaluate.
    fn portal_form(&self, e: &Expr) -> Result<Expr, PlanError> {
        let owner = &self.surveys[0];
        rewrite(e, &mut |x| match x {
            Expr::Call { name, args } if name == "CONE" && args.len() == 3 => {
                let args: Vec<Expr> = args.iter().map(|a| self.portal_form(a)).collect::<Result<_, _>>()?;
                let sep = Expr::Call {
                    name: "SEPARATION".into(),
                    args: vec![
                        Expr::Column(ColumnRef::qualified(owner, "ra")),
                        Expr::Column(ColumnRef::qualified(owner, "dec")),
                        args[0].clone(),
                        args[1].clone(),
                    ],
                };
                Ok(Some(Expr::binary(BinaryOp::Le, sep, args[2].clone())))
            }
            _ => Ok(None),
        })
    }
}

fn contains_cone(e: &Expr) -> bool {
    let mut found = false;
    e.walk(&mut |x| {
        if matches!(x, Expr::Call { name, .. } if name == "CONE") {
            found = true;
        }
    });
    found
}

/// Parses portal-dialect text and resolves it against node metadata.
/// Unqualified `CONE(...)` applies to the first survey listed.
pub async fn parse_federated(text: &str, fed: &Federation) -> Result<FederatedQuery, FedError> {
    let ast = parse_query(text)?;
    let (surveys, options) = match &ast.from {
        Source::Xmatch { surveys, options } => (surveys.clone(), options.clone()),
        Source::Table { qualifier: None, name } => (vec![name.clone()], Default::default()),
        Source::Table {
            qualifier: Some(q),
            name,
        } => return Err(PlanError::new(format!("unknown survey: {q}.{name}")).into()),
    };
    let known: Vec<&str> = fed.surveys().collect();
    let mut seen = BTreeSet::new();
    for s in &surveys {
        if !known.contains(&s.as_str()) {
            return Err(PlanError::new(format!("unknown survey: {s}")).into());
        }
        if !seen.insert(s) {
            return Err(PlanError::new(format!("survey {s} listed twice in XMATCH")).into());
        }
    }
    let metadata = try_join_all(surveys.iter().map(|s| fed.metadata(s))).await?;
    let settings = fed.settings();
    let k = options.k.unwrap_or(settings.default_k);
    let max_radius_arcsec = options.max_radius_arcsec.unwrap_or(settings.default_max_radius_arcsec);
    if !(k.is_finite() && k > 0.0) {
        return Err(PlanError::new(format!("k must be positive, got {k}")).into());
    }
    if !(max_radius_arcsec.is_finite() && max_radius_arcsec > 0.0) {
        return Err(PlanError::new(format!("max_radius must be positive, got {max_radius_arcsec}")).into());
    }
    let resolver = Resolver {
        surveys: &surveys,
        metadata: &metadata,
        known,
    };

    let mut conjuncts = Vec::new();
    if let Some(w) = &ast.where_clause {
        for (order, c) in w.conjuncts().into_iter().enumerate() {
            let qualified = resolver.qualify(c, &[])?;
            let mut owners = BTreeSet::new();
            let mut uses_separation = false;
            for col in qualified.columns() {
                let q = col.qualifier.as_deref().expect("qualified");
                owners.insert(surveys.iter().position(|s| s == q).expect("resolved"));
                uses_separation |= col.name == SEPARATION_COLUMN;
            }
            if contains_cone(&qualified) {
                owners.insert(0);
            }
            let survey = match (owners.len(), uses_separation) {
                (1, false) => owners.first().copied(),
                _ => None,
            };
            let node_form = survey.map(|_| {
                qualified.map_columns(&|c| ColumnRef::bare(c.name.clone()))
            });
            conjuncts.push(Conjunct {
                order,
                node_form,
                portal_form: resolver.portal_form(&qualified)?,
                survey,
            });
        }
    }

    let aliases: Vec<String> = ast
        .select
        .iter()
        .filter_map(|item| match item {
            SelectItem::Expr { alias: Some(a), .. } => Some(a.clone()),
            _ => None,
        })
        .collect();
    let mut body = ast.clone();
    body.where_clause = None;
    body.select = ast
        .select
        .iter()
        .map(|item| match item {
            SelectItem::Wildcard => Ok(SelectItem::Wildcard),
            SelectItem::Expr { expr, alias } => Ok(SelectItem::Expr {
                expr: resolver.portal_form(&resolver.qualify(expr, &[])?)?,
                alias: alias.clone(),
            }),
        })
        .collect::<Result<_, PlanError>>()?;
    for g in &mut body.group_by {
        *g = resolver.portal_form(&resolver.qualify(g, &aliases)?)?;
    }
    for o in &mut body.order_by {
        o.expr = resolver.portal_form(&resolver.qualify(&o.expr, &aliases)?)?;
    }

    // Surface binding errors (types, grouping) before any node is queried.
    let scope = TupleScope::new(&surveys, &metadata);
    let mut check = body.clone();
    check.where_clause = Expr::and_all(conjuncts.iter().map(|c| c.portal_form.clone()));
    bind_query(&check, &scope)?;

    Ok(FederatedQuery {
        surveys,
        metadata,
        k,
        max_radius_arcsec,
        mode: options.mode.unwrap_or(MatchMode::All),
        conjuncts,
        body,
    })
}

/// Chooses the anchor (smallest estimated filtered cardinality, ties by
/// `XMATCH` order) and orders the chain by ascending catalog size.
pub async fn plan_xmatch(fq: &FederatedQuery, fed: &Federation) -> Result<XMatchPlan, FedError> {
    let n = fq.surveys.len();
    let estimates: Vec<u64> = if n == 1 {
        vec![fq.metadata[0].object_count as u64]
    } else {
        try_join_all((0..n).map(|s| estimate(fq, fed, s))).await?
    };
    let anchor = (0..n)
        .min_by_key(|&s| (estimates[s], s))
        .expect("at least one survey");
    let mut chain: Vec<usize> = (0..n).filter(|&s| s != anchor).collect();
    chain.sort_by_key(|&s| (fq.metadata[s].object_count, s));
    let mut plan = arrange(fq, anchor, chain)?;
    plan.estimates = estimates;
    tracing::debug!(
        anchor = %plan.surveys[plan.anchor],
        chain = ?plan.chain.iter().map(|&s| plan.surveys[s].as_str()).collect::<Vec<_>>(),
        "planned cross-match"
    );
    Ok(plan)
}

async fn estimate(fq: &FederatedQuery, fed: &Federation, s: usize) -> Result<u64, FedError> {
    let Some(filter) = fq.node_filter(s) else {
        return Ok(fq.metadata[s].object_count as u64);
    };
    let survey = &fq.surveys[s];
    let client = fed.client(survey).expect("validated survey");
    let text = format!("SELECT COUNT(*) FROM photoobj WHERE {filter}");
    let table = client
        .query(&text)
        .await
        .map_err(|e| FedError::from_client(survey, e))?;
    Ok(table
        .rows
        .first()
        .and_then(|r| r.first())
        .and_then(|v| v.as_i64())
        .unwrap_or(0)
        .max(0) as u64)
}

/// Builds a plan with an explicit anchor and chain order.
pub fn arrange(fq: &FederatedQuery, anchor: usize, chain: Vec<usize>) -> Result<XMatchPlan, FedError> {
    let mut post: Vec<&Conjunct> = fq
        .conjuncts
        .iter()
        .filter(|c| c.survey != Some(anchor))
        .collect();
    post.sort_by_key(|c| c.order);
    let mut query = fq.body.clone();
    query.where_clause = Expr::and_all(post.iter().map(|c| c.portal_form.clone()));
    let scope = TupleScope::new(&fq.surveys, &fq.metadata);
    let bound = bind_query(&query, &scope)?;
    Ok(XMatchPlan {
        surveys: fq.surveys.clone(),
        metadata: fq.metadata.clone(),
        anchor,
        anchor_filter: fq.node_filter(anchor),
        chain,
        k: fq.k,
        max_radius_arcsec: fq.max_radius_arcsec,
        mode: fq.mode,
        post_filter: query.where_clause,
        estimates: Vec::new(),
        bound,
    })
}
