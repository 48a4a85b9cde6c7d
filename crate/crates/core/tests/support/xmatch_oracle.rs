//! Brute-force cross-match: every anchor against every object of every
//! other survey, with the same radius rule the portal documents.

#![allow(dead_code)]

use skyfed_core::catalog::Catalog;
use skyfed_core::sky::SkyObject;

use super::oracle::haversine_deg;

pub fn radius_arcsec(k: f64, cap: f64, sa: f64, sb: f64) -> f64 {
    (k * (sa * sa + sb * sb).sqrt()).min(cap)
}

pub fn sep_arcsec(a: &SkyObject, b: &SkyObject) -> f64 {
    haversine_deg(a.pos.ra_deg(), a.pos.dec_deg(), b.pos.ra_deg(), b.pos.dec_deg()) * 3600.0
}

/// Matches of `a` in `other`, sorted by (separation, id).
pub fn matches_of<'a>(a: &SkyObject, other: &'a Catalog, k: f64, cap: f64) -> Vec<(&'a SkyObject, f64)> {
    let mut out: Vec<(&SkyObject, f64)> = other
        .objects
        .iter()
        .filter_map(|b| {
            let s = sep_arcsec(a, b);
            (s <= radius_arcsec(k, cap, a.sigma_pos_arcsec, b.sigma_pos_arcsec)).then_some((b, s))
        })
        .collect();
    out.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.object_id.cmp(&y.0.object_id)));
    out
}

/// Id tuples in `catalogs` order. `anchor` indexes `catalogs`; `keep`
/// filters anchors before matching. With `best`, each other survey
/// contributes only its closest match.
pub fn tuples(
    catalogs: &[&Catalog],
    anchor: usize,
    k: f64,
    cap: f64,
    best: bool,
    keep: impl Fn(&SkyObject) -> bool,
) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    for a in catalogs[anchor].objects.iter().filter(|a| keep(a)) {
        let mut partial: Vec<Vec<u64>> = vec![vec![0; catalogs.len()]];
        partial[0][anchor] = a.object_id;
        for (s, cat) in catalogs.iter().enumerate() {
            if s == anchor {
                continue;
            }
            let mut found = matches_of(a, cat, k, cap);
            if best {
                found.truncate(1);
            }
            let mut next = Vec::new();
            for p in &partial {
                for (b, _) in &found {
                    let mut t = p.clone();
                    t[s] = b.object_id;
                    next.push(t);
                }
            }
            partial = next;
        }
        out.extend(partial);
    }
    out.sort();
    out
}
