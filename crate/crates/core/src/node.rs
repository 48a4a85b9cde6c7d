//! The per-archive engine behind a node: metadata, queries, cone
//! searches, and batch cross-match probes over one immutable catalog.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::query::exec::ObjectRow;
use crate::query::{execute, parse_query, plan_catalog_query, ExecError, ExecOptions, PlanError, QueryError};
use crate::sky::{angular_separation, EquatorialPosition, ARCSEC_PER_DEG};
use crate::table::{Column, ResultTable, TableStats, Value};
use crate::zone::{ConeQuery, ZoneIndex};

pub const DEFAULT_K: f64 = 3.0;
pub const DEFAULT_MAX_RADIUS_ARCSEC: f64 = 30.0;
pub const DEFAULT_ROW_CAP: usize = 100_000;

/// Match radius in arcseconds for two detections with the given errors.
pub fn match_radius_arcsec(k: f64, max_radius_arcsec: f64, sigma_a: f64, sigma_b: f64) -> f64 {
    (k * sigma_a.hypot(sigma_b)).min(max_radius_arcsec)
}

#[derive(Debug, Error)]
pub enum NodeError {
    #[error(transparent)]
    Parse(#[from] QueryError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("{0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

impl NodeError {
    /// Machine-readable code used in the HTTP error envelope.
    pub fn code(&self) -> &'static str {
        match self {
            NodeError::Parse(_) => "parse_error",
            NodeError::Plan(_) => "plan_error",
            NodeError::InvalidParameter(_) => "invalid_parameter",
            NodeError::Exec(ExecError::RowCapExceeded { .. }) => "row_cap_exceeded",
        }
    }

    pub fn offset(&self) -> Option<usize> {
        match self {
            NodeError::Parse(e) => e.offset(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMetadata {
    pub survey: String,
    pub bands: Vec<String>,
    pub columns: Vec<Column>,
    pub object_count: usize,
    pub epoch_mjd: Option<f64>,
    pub zone_height_deg: f64,
    pub max_sigma_arcsec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub probe_id: i64,
    pub ra_deg: f64,
    pub dec_deg: f64,
    pub sigma_arcsec: f64,
}

fn default_k() -> f64 {
    DEFAULT_K
}

fn default_max_radius() -> f64 {
    DEFAULT_MAX_RADIUS_ARCSEC
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XMatchRequest {
    pub positions: Vec<Probe>,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "default_max_radius")]
    pub max_radius_arcsec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub object_id: u64,
    pub separation_arcsec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMatches {
    pub probe_id: i64,
    /// Ascending separation, ties by object id.
    pub matches: Vec<Match>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XMatchResponse {
    /// One entry per probe, in request order.
    pub results: Vec<ProbeMatches>,
    /// Every matched object once, all domestic columns, ordered by id.
    pub objects: ResultTable,
}

pub struct NodeEngine {
    catalog: Catalog,
    index: ZoneIndex,
    row_cap: usize,
    max_sigma_arcsec: f64,
}

impl NodeEngine {
    pub fn new(catalog: Catalog, index: ZoneIndex, row_cap: usize) -> Self {
        let max_sigma_arcsec = catalog
            .objects
            .iter()
            .map(|o| o.sigma_pos_arcsec)
            .fold(0.0, f64::max);
        Self {
            catalog,
            index,
            row_cap,
            max_sigma_arcsec,
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn index(&self) -> &ZoneIndex {
        &self.index
    }

    pub fn row_cap(&self) -> usize {
        self.row_cap
    }

    pub fn metadata(&self) -> NodeMetadata {
        let cols = self.catalog.domestic_columns();
        let bands = self.catalog.bands();
        NodeMetadata {
            survey: self.catalog.survey().to_owned(),
            bands: bands.to_vec(),
            columns: cols
                .iter()
                .map(|c| Column::new(c.name(bands), c.kind(), c.nullable()))
                .collect(),
            object_count: self.catalog.objects.len(),
            epoch_mjd: self.catalog.schema.epoch_mjd,
            zone_height_deg: self.index.zone_height_deg(),
            max_sigma_arcsec: self.max_sigma_arcsec,
        }
    }

    fn options(&self) -> ExecOptions {
        ExecOptions {
            row_cap: Some(self.row_cap),
        }
    }

    pub fn query(&self, text: &str) -> Result<ResultTable, NodeError> {
        let ast = parse_query(text)?;
        let plan = plan_catalog_query(&ast, &self.catalog.schema)?;
        tracing::debug!(access = ?plan.access, "planned node query");
        Ok(execute(&plan, &self.catalog, &self.index, &self.options())?)
    }

    /// All objects within `radius_deg` of the centre, every domestic column,
    /// ordered by object id.
    pub fn cone(&self, ra_deg: f64, dec_deg: f64, radius_deg: f64) -> Result<ResultTable, NodeError> {
        let started = Instant::now();
        let center = EquatorialPosition::new(ra_deg, dec_deg)
            .map_err(|e| NodeError::InvalidParameter(e.to_string()))?;
        let cone = ConeQuery::new(center, radius_deg).map_err(|e| NodeError::InvalidParameter(e.to_string()))?;
        let mut hits = self.index.cone_search(&cone);
        if hits.len() > self.row_cap {
            return Err(ExecError::RowCapExceeded { cap: self.row_cap }.into());
        }
        hits.sort_unstable_by_key(|&i| self.catalog.objects[i].object_id);
        let mut table = self.object_table(hits);
        table.stats.elapsed_ms = started.elapsed().as_millis() as u64;
        Ok(table)
    }

    fn object_table(&self, refs: impl IntoIterator<Item = usize>) -> ResultTable {
        let cols = self.catalog.domestic_columns();
        let bands = self.catalog.bands();
        let rows: Vec<Vec<Value>> = refs
            .into_iter()
            .map(|i| {
                let row = ObjectRow {
                    object: &self.catalog.objects[i],
                    columns: &cols,
                    bands,
                };
                (0..cols.len()).map(|s| crate::query::RowSource::slot(&row, s)).collect()
            })
            .collect();
        let mut table = ResultTable::new(self.metadata().columns, rows).expect("domestic table shape");
        table.stats = TableStats {
            row_count: table.rows.len(),
            ..TableStats::default()
        };
        table
    }

    pub fn xmatch(&self, req: &XMatchRequest) -> Result<XMatchResponse, NodeError> {
        validate_xmatch(req)?;
        let mut results = Vec::with_capacity(req.positions.len());
        let mut matched: BTreeSet<(u64, usize)> = BTreeSet::new();
        let mut total = 0usize;
        for probe in &req.positions {
            let center = EquatorialPosition::new(probe.ra_deg, probe.dec_deg).expect("validated");
            let reach = match_radius_arcsec(req.k, req.max_radius_arcsec, probe.sigma_arcsec, self.max_sigma_arcsec);
            // Widened slightly so rounding in the degree conversion cannot
            // drop a candidate; the exact test below decides.
            let search = ((reach / ARCSEC_PER_DEG) * (1.0 + 1e-9)).min(180.0);
            let cone = ConeQuery::new(center, search).expect("radius within range");
            let mut matches = Vec::new();
            self.index.for_each_in_cone(&cone, |i, _| {
                let obj = &self.catalog.objects[i];
                let sep = angular_separation(&center, &obj.pos) * ARCSEC_PER_DEG;
                let radius = match_radius_arcsec(req.k, req.max_radius_arcsec, probe.sigma_arcsec, obj.sigma_pos_arcsec);
                if sep <= radius {
                    matches.push((Match {
                        object_id: obj.object_id,
                        separation_arcsec: sep,
                    }, i));
                }
            });
            matches.sort_by(|a, b| {
                a.0.separation_arcsec
                    .total_cmp(&b.0.separation_arcsec)
                    .then(a.0.object_id.cmp(&b.0.object_id))
            });
            total += matches.len();
            if total > self.row_cap {
                return Err(ExecError::RowCapExceeded { cap: self.row_cap }.into());
            }
            matched.extend(matches.iter().map(|(m, i)| (m.object_id, *i)));
            results.push(ProbeMatches {
                probe_id: probe.probe_id,
                matches: matches.into_iter().map(|(m, _)| m).collect(),
            });
        }
        let objects = self.object_table(matched.into_iter().map(|(_, i)| i));
        Ok(XMatchResponse { results, objects })
    }
}

pub fn validate_xmatch(req: &XMatchRequest) -> Result<(), NodeError> {
    let bad = |m: String| Err(NodeError::InvalidParameter(m));
    if req.positions.is_empty() {
        return bad("positions must not be empty".into());
    }
    if !(req.k.is_finite() && req.k > 0.0) {
        return bad(format!("k must be positive, got {}", req.k));
    }
    if !(req.max_radius_arcsec.is_finite() && req.max_radius_arcsec > 0.0) {
        return bad(format!("max_radius_arcsec must be positive, got {}", req.max_radius_arcsec));
    }
    for p in &req.positions {
        if let Err(e) = EquatorialPosition::new(p.ra_deg, p.dec_deg) {
            return bad(format!("probe {}: {e}", p.probe_id));
        }
        if !(p.sigma_arcsec.is_finite() && p.sigma_arcsec >= 0.0) {
            return bad(format!("probe {}: sigma_arcsec must be non-negative", p.probe_id));
        }
    }
    Ok(())
}
