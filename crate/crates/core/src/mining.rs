//! Desk-scale mining over a local catalog: grided counts, friends-of-friends
//! clusters, isolated points, and moving-object candidates.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::query::ast::{Query, SelectItem, Source};
use crate::query::{execute, parse_expr, plan_catalog_query, ExecOptions, PlanError, QueryError};
use crate::sky::{angular_separation, ARCSEC_PER_DEG};
use crate::zone::{ConeQuery, IndexError, ZoneIndex};

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("cell size must be a positive number of degrees, got {0}")]
    InvalidCell(f64),
    #[error("invalid separation window [{min}, {max}] arcsec")]
    InvalidWindow { min: f64, max: f64 },
    #[error("radius must be a non-negative number of arcseconds, got {0}")]
    InvalidRadius(f64),
    #[error(transparent)]
    Parse(#[from] QueryError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    cell_deg: f64,
}

impl GridSpec {
    pub fn new(cell_deg: f64) -> Result<Self, MiningError> {
        if cell_deg.is_finite() && cell_deg > 0.0 {
            Ok(Self { cell_deg })
        } else {
            Err(MiningError::InvalidCell(cell_deg))
        }
    }

    pub fn cell_deg(&self) -> f64 {
        self.cell_deg
    }

    /// `(ra cell, dec cell)` with the origin at ra 0, dec -90.
    pub fn cell_of(&self, ra_deg: f64, dec_deg: f64) -> (u32, u32) {
        (
            (ra_deg / self.cell_deg).floor() as u32,
            ((dec_deg + 90.0) / self.cell_deg).floor() as u32,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCell {
    pub ra_cell: u32,
    pub dec_cell: u32,
    pub count: u64,
}

/// Counts objects passing `cut` (a node-dialect boolean expression; `None`
/// counts everything) per grid cell. Empty cells are omitted; cells are
/// ordered by `(ra_cell, dec_cell)`.
pub fn grided_count(catalog: &Catalog, index: &ZoneIndex, grid: GridSpec, cut: Option<&str>) -> Result<Vec<GridCell>, MiningError> {
    let mut counts: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let Some(cut) = cut else {
        for obj in &catalog.objects {
            *counts.entry(grid.cell_of(obj.pos.ra_deg(), obj.pos.dec_deg())).or_default() += 1;
        }
        return Ok(into_cells(counts));
    };
    let query = Query {
        select: vec![
            SelectItem::Expr {
                expr: crate::query::Expr::column("ra"),
                alias: None,
            },
            SelectItem::Expr {
                expr: crate::query::Expr::column("dec"),
                alias: None,
            },
        ],
        from: Source::Table {
            qualifier: None,
            name: "photoobj".into(),
        },
        where_clause: Some(parse_expr(cut)?),
        group_by: Vec::new(),
        order_by: Vec::new(),
        limit: None,
    };
    let plan = plan_catalog_query(&query, &catalog.schema)?;
    let table = execute(&plan, catalog, index, &ExecOptions::default()).expect("no row cap");
    for row in &table.rows {
        let (Some(ra), Some(dec)) = (row[0].as_f64(), row[1].as_f64()) else {
            continue;
        };
        *counts.entry(grid.cell_of(ra, dec)).or_default() += 1;
    }
    Ok(into_cells(counts))
}

fn into_cells(counts: BTreeMap<(u32, u32), u64>) -> Vec<GridCell> {
    counts
        .into_iter()
        .map(|((ra_cell, dec_cell), count)| GridCell {
            ra_cell,
            dec_cell,
            count,
        })
        .collect()
}

fn check_radius(radius_arcsec: f64) -> Result<f64, MiningError> {
    if radius_arcsec.is_finite() && radius_arcsec >= 0.0 {
        Ok(radius_arcsec / ARCSEC_PER_DEG)
    } else {
        Err(MiningError::InvalidRadius(radius_arcsec))
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Cluster id per object id. Ids are dense from 0 and assigned in order of
/// each cluster's smallest object id, so the labeling does not depend on
/// input order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabeling {
    pub labels: BTreeMap<u64, usize>,
    pub cluster_count: usize,
}

impl ClusterLabeling {
    /// Member object ids per cluster, each list ascending.
    pub fn clusters(&self) -> Vec<Vec<u64>> {
        let mut out = vec![Vec::new(); self.cluster_count];
        for (&id, &c) in &self.labels {
            out[c].push(id);
        }
        out
    }
}

/// Single-linkage clusters: connected components of the graph joining
/// objects within `link_radius_arcsec` of each other.
pub fn friends_of_friends(catalog: &Catalog, index: &ZoneIndex, link_radius_arcsec: f64) -> Result<ClusterLabeling, MiningError> {
    let radius = check_radius(link_radius_arcsec)?;
    let n = catalog.objects.len();
    let mut sets = DisjointSet::new(n);
    index.for_each_neighbor_pair(radius, |a, b, _| sets.union(a, b))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by_key(|&i| catalog.objects[i].object_id);
    let mut root_label: HashMap<usize, usize> = HashMap::new();
    let mut labels = BTreeMap::new();
    for i in order {
        let root = sets.find(i);
        let next = root_label.len();
        let label = *root_label.entry(root).or_insert(next);
        labels.insert(catalog.objects[i].object_id, label);
    }
    Ok(ClusterLabeling {
        labels,
        cluster_count: root_label.len(),
    })
}

/// Object ids with at most `max_neighbors` other objects within
/// `radius_arcsec`, ascending.
pub fn isolated_points(
    catalog: &Catalog,
    index: &ZoneIndex,
    radius_arcsec: f64,
    max_neighbors: usize,
) -> Result<Vec<u64>, MiningError> {
    let radius = check_radius(radius_arcsec)?;
    let mut counts = vec![0usize; catalog.objects.len()];
    index.for_each_neighbor_pair(radius, |a, b, _| {
        counts[a] += 1;
        counts[b] += 1;
    })?;
    let mut ids: Vec<u64> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c <= max_neighbors)
        .map(|(i, _)| catalog.objects[i].object_id)
        .collect();
    ids.sort_unstable();
    Ok(ids)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovingCandidate {
    pub id_a: u64,
    pub id_b: u64,
    pub separation_arcsec: f64,
    /// Arcseconds per day, when both detections carry distinct epochs.
    pub rate_arcsec_per_day: Option<f64>,
}

/// Pairs `(a, b)` with `min_sep <= separation <= max_sep` where `a` has no
/// detection in `b_catalog` closer than `min_sep`: the object moved rather
/// than being a static cross-identification. Sorted by `(id_a, id_b)`.
pub fn moving_candidates(
    a_catalog: &Catalog,
    b_catalog: &Catalog,
    b_index: &ZoneIndex,
    min_sep_arcsec: f64,
    max_sep_arcsec: f64,
) -> Result<Vec<MovingCandidate>, MiningError> {
    let valid = min_sep_arcsec.is_finite()
        && max_sep_arcsec.is_finite()
        && min_sep_arcsec >= 0.0
        && min_sep_arcsec < max_sep_arcsec
        && max_sep_arcsec <= 180.0 * ARCSEC_PER_DEG;
    if !valid {
        return Err(MiningError::InvalidWindow {
            min: min_sep_arcsec,
            max: max_sep_arcsec,
        });
    }
    let search = ((max_sep_arcsec / ARCSEC_PER_DEG) * (1.0 + 1e-9)).min(180.0);
    let mut out = Vec::new();
    for a in &a_catalog.objects {
        let cone = ConeQuery::new(a.pos, search)?;
        let mut near = Vec::new();
        let mut vetoed = false;
        b_index.for_each_in_cone(&cone, |i, _| {
            let b = &b_catalog.objects[i];
            let sep = angular_separation(&a.pos, &b.pos) * ARCSEC_PER_DEG;
            if sep < min_sep_arcsec {
                vetoed = true;
            } else if sep <= max_sep_arcsec {
                near.push((b, sep));
            }
        });
        if vetoed {
            continue;
        }
        for (b, sep) in near {
            let rate = match (a.pos.epoch_mjd(), b.pos.epoch_mjd()) {
                (Some(ea), Some(eb)) if ea != eb => Some(sep / (eb - ea).abs()),
                _ => None,
            };
            out.push(MovingCandidate {
                id_a: a.object_id,
                id_b: b.object_id,
                separation_arcsec: sep,
                rate_arcsec_per_day: rate,
            });
        }
    }
    out.sort_by_key(|c| (c.id_a, c.id_b));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_schema;
    use crate::sky::{EquatorialPosition, SkyObject};

    fn catalog(points: &[(u64, f64, f64)], epoch: Option<f64>) -> (Catalog, ZoneIndex) {
        let mut schema = parse_schema(
            r#"{"survey": "m", "bands": ["g"], "sigma_default_arcsec": 0.1,
                "columns": [{"source": "ra", "target": "ra"}, {"source": "dec", "target": "dec"}]}"#,
        )
        .unwrap();
        schema.epoch_mjd = epoch;
        let objects = points
            .iter()
            .map(|&(id, ra, dec)| SkyObject::point(id, EquatorialPosition::with_epoch(ra, dec, epoch).unwrap(), 0.1))
            .collect::<Vec<_>>();
        let index = ZoneIndex::for_objects(&objects, 0.05).unwrap();
        (Catalog::from_objects(schema, objects), index)
    }

    const ARCSEC: f64 = 1.0 / 3600.0;

    #[test]
    fn close_pair_forms_one_cluster() {
        let (cat, idx) = catalog(&[(5, 10.0, 0.0), (2, 10.0 + ARCSEC, 0.0), (9, 50.0, 0.0)], None);
        let fof = friends_of_friends(&cat, &idx, 2.0).unwrap();
        assert_eq!(fof.cluster_count, 2);
        assert_eq!(fof.clusters(), vec![vec![2, 5], vec![9]]);
    }

    #[test]
    fn far_objects_are_singletons_and_isolated() {
        let (cat, idx) = catalog(&[(1, 10.0, 0.0), (2, 20.0, 0.0), (3, 30.0, 0.0)], None);
        assert_eq!(friends_of_friends(&cat, &idx, 5.0).unwrap().cluster_count, 3);
        assert_eq!(isolated_points(&cat, &idx, 5.0, 0).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn dense_pair_is_not_isolated() {
        let (cat, idx) = catalog(&[(1, 10.0, 0.0), (2, 10.0 + ARCSEC, 0.0), (3, 30.0, 0.0)], None);
        assert_eq!(isolated_points(&cat, &idx, 5.0, 0).unwrap(), vec![3]);
        assert_eq!(isolated_points(&cat, &idx, 5.0, 1).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn radius_beyond_zone_height_is_supported() {
        let (cat, idx) = catalog(&[(1, 10.0, 0.0), (2, 10.0, 0.9), (3, 10.0, 3.0)], None);
        assert_eq!(friends_of_friends(&cat, &idx, 3600.0).unwrap().clusters(), vec![vec![1, 2], vec![3]]);
        assert!(matches!(isolated_points(&cat, &idx, -1.0, 0), Err(MiningError::InvalidRadius(_))));
    }

    #[test]
    fn displaced_object_is_a_candidate() {
        let (a, _) = catalog(&[(1, 10.0, 0.0), (2, 100.0, 20.0)], Some(51000.0));
        let (b, b_idx) = catalog(&[(11, 10.0 + 10.0 * ARCSEC, 0.0), (12, 100.0, 20.0)], Some(51002.0));
        let found = moving_candidates(&a, &b, &b_idx, 2.0, 60.0).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!((found[0].id_a, found[0].id_b), (1, 11));
        assert!((found[0].separation_arcsec - 10.0).abs() < 1e-6);
        assert!((found[0].rate_arcsec_per_day.unwrap() - 5.0).abs() < 1e-6);
    }

    #[test]
    fn identical_catalogs_have_no_movers() {
        let (a, idx) = catalog(&[(1, 10.0, 0.0), (2, 10.0 + 20.0 * ARCSEC, 0.0)], None);
        assert!(moving_candidates(&a, &a, &idx, 1.0, 60.0).unwrap().is_empty());
        assert!(matches!(moving_candidates(&a, &a, &idx, 5.0, 5.0), Err(MiningError::InvalidWindow { .. })));
    }

    #[test]
    fn grided_count_with_cut() {
        let (cat, idx) = catalog(&[(1, 5.0, -85.0), (2, 15.0, 0.0), (3, 16.0, 1.0), (4, 355.0, 89.0)], None);
        let grid = GridSpec::new(10.0).unwrap();
        let all = grided_count(&cat, &idx, grid, None).unwrap();
        assert_eq!(all.iter().map(|c| c.count).sum::<u64>(), 4);
        assert_eq!(all[1], GridCell { ra_cell: 1, dec_cell: 9, count: 2 });
        let cut = grided_count(&cat, &idx, grid, Some("ra > 10 AND ra < 100")).unwrap();
        assert_eq!(cut, vec![GridCell { ra_cell: 1, dec_cell: 9, count: 2 }]);
        assert!(grided_count(&cat, &idx, grid, Some("ra > 1000")).unwrap().is_empty());
        assert!(grided_count(&cat, &idx, grid, Some("nope > 1")).is_err());
    }
}
