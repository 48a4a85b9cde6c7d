//! Declination-zone spatial index.
//!
//! The sphere is cut into bands of constant height in declination. Each band
//! keeps its members sorted by right ascension, so a cone search touches only
//! the bands overlapping `[dec - r, dec + r]` and, inside each band, a binary
//! searched RA window. Candidates are always verified with the exact
//! separation, so the window only has to be conservative.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::sky::{separation_of_vectors, EquatorialPosition, SkyObject};

/// Four arcminutes: a few times the largest match radius in typical use.
pub const DEFAULT_ZONE_HEIGHT_DEG: f64 = 4.0 / 60.0;

const SNAPSHOT_MAGIC: &[u8; 8] = b"SKYZONE1";

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("zone height must be in (0, 180], got {0}")]
    InvalidZoneHeight(f64),
    #[error("cone radius must be in [0, 180], got {0}")]
    InvalidRadius(f64),
    #[error("corrupt index snapshot: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeQuery {
    pub center: EquatorialPosition,
    pub radius_deg: f64,
}

impl ConeQuery {
    pub fn new(center: EquatorialPosition, radius_deg: f64) -> Result<Self, IndexError> {
        if !(0.0..=180.0).contains(&radius_deg) {
            return Err(IndexError::InvalidRadius(radius_deg));
        }
        Ok(Self { center, radius_deg })
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Zone {
    /// Indices into the slice the index was built from.
    refs: Vec<u32>,
    ra: Vec<f64>,
    dec: Vec<f64>,
    xyz: Vec<[f64; 3]>,
}

impl Zone {
    fn empty() -> Self {
        Zone {
            refs: Vec::new(),
            ra: Vec::new(),
            dec: Vec::new(),
            xyz: Vec::new(),
        }
    }

    /// Position ranges whose RA lies within `alpha` of `ra_center`, or the
    /// whole zone when `alpha` is `None`.
    fn window(&self, ra_center: f64, alpha: Option<f64>) -> [std::ops::Range<usize>; 2] {
        let len = self.ra.len();
        let Some(alpha) = alpha else {
            return [0..len, 0..0];
        };
        let lower = |x: f64| self.ra.partition_point(|&r| r < x);
        let upper = |x: f64| self.ra.partition_point(|&r| r <= x);
        let (lo, hi) = (ra_center - alpha, ra_center + alpha);
        if lo < 0.0 {
            [0..upper(hi), lower(lo + 360.0)..len]
        } else if hi >= 360.0 {
            [lower(lo)..len, 0..upper(hi - 360.0)]
        } else {
            [lower(lo)..upper(hi), 0..0]
        }
    }
}

/// Largest RA offset (degrees) of any point within `radius_deg` of a center at
/// `dec_deg`, padded slightly; `None` when the cone reaches a pole.
fn ra_half_width(dec_deg: f64, radius_deg: f64) -> Option<f64> {
    if dec_deg.abs() + radius_deg >= 89.999_999 {
        return None;
    }
    let ratio = radius_deg.to_radians().sin() / dec_deg.to_radians().cos();
    if ratio >= 1.0 {
        return None;
    }
    let alpha = ratio.asin().to_degrees() * (1.0 + 1e-9) + 1e-10;
    (alpha < 180.0).then_some(alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZoneIndex {
    zone_height_deg: f64,
    zones: Vec<Zone>,
    object_count: usize,
}

impl ZoneIndex {
    pub fn build(positions: &[EquatorialPosition], zone_height_deg: f64) -> Result<Self, IndexError> {
        if !(zone_height_deg > 0.0 && zone_height_deg <= 180.0) {
            return Err(IndexError::InvalidZoneHeight(zone_height_deg));
        }
        let n_zones = (180.0 / zone_height_deg).ceil() as usize;
        let mut buckets: Vec<Vec<(f64, u32)>> = vec![Vec::new(); n_zones];
        for (i, p) in positions.iter().enumerate() {
            let z = zone_number(p.dec_deg(), zone_height_deg, n_zones);
            buckets[z].push((p.ra_deg(), i as u32));
        }
        let zones = buckets
            .into_iter()
            .map(|mut bucket| {
                bucket.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut zone = Zone::empty();
                for (ra, i) in bucket {
                    let p = &positions[i as usize];
                    zone.refs.push(i);
                    zone.ra.push(ra);
                    zone.dec.push(p.dec_deg());
                    zone.xyz.push(p.to_unit_vector());
                }
                zone
            })
            .collect();
        Ok(Self {
            zone_height_deg,
            zones,
            object_count: positions.len(),
        })
    }

    pub fn for_objects(objects: &[SkyObject], zone_height_deg: f64) -> Result<Self, IndexError> {
        let positions: Vec<EquatorialPosition> = objects.iter().map(|o| o.pos).collect();
        Self::build(&positions, zone_height_deg)
    }

    pub fn zone_height_deg(&self) -> f64 {
        self.zone_height_deg
    }

    pub fn object_count(&self) -> usize {
        self.object_count
    }

    pub fn zone_count(&self) -> usize {
        self.zones.len()
    }

    pub fn zone_of(&self, dec_deg: f64) -> usize {
        zone_number(dec_deg, self.zone_height_deg, self.zones.len())
    }

    /// `(ref, ra_deg)` members of one zone in index order.
    pub fn zone_members(&self, zone: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let z = &self.zones[zone];
        z.refs.iter().zip(&z.ra).map(|(&r, &ra)| (r as usize, ra))
    }

    /// Indices of every object within the cone, in zone order.
    pub fn cone_search(&self, q: &ConeQuery) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_in_cone(q, |i, _| out.push(i));
        out
    }

    /// Calls `f(ref, separation_deg)` for every object within the cone.
    pub fn for_each_in_cone(&self, q: &ConeQuery, mut f: impl FnMut(usize, f64)) {
        let r = q.radius_deg;
        let center = q.center.to_unit_vector();
        if r >= 180.0 {
            for zone in &self.zones {
                for (k, xyz) in zone.xyz.iter().enumerate() {
                    f(zone.refs[k] as usize, separation_of_vectors(xyz, &center));
                }
            }
            return;
        }
        let dec = q.center.dec_deg();
        let z_lo = self.zone_of((dec - r).max(-90.0));
        let z_hi = self.zone_of((dec + r).min(90.0));
        let alpha = ra_half_width(dec, r);
        for zone in &self.zones[z_lo..=z_hi] {
            for range in zone.window(q.center.ra_deg(), alpha) {
                for k in range {
                    let sep = separation_of_vectors(&zone.xyz[k], &center);
                    if sep <= r {
                        f(zone.refs[k] as usize, sep);
                    }
                }
            }
        }
    }

    /// Every unordered pair within `radius_deg`, each reported once as
    /// `(smaller ref, larger ref, separation_deg)`.
    pub fn for_each_neighbor_pair(
        &self,
        radius_deg: f64,
        mut f: impl FnMut(usize, usize, f64),
    ) -> Result<(), IndexError> {
        if !(radius_deg >= 0.0) {
            return Err(IndexError::InvalidRadius(radius_deg));
        }
        // Zones above this one that can hold a partner.
        let span = ((radius_deg / self.zone_height_deg).ceil() as usize).max(1);
        let mut emit = |a: u32, b: u32, sep: f64| {
            let (a, b) = (a as usize, b as usize);
            if a < b {
                f(a, b, sep)
            } else {
                f(b, a, sep)
            }
        };
        for (zi, zone) in self.zones.iter().enumerate() {
            let above = &self.zones[(zi + 1).min(self.zones.len())..(zi + 1 + span).min(self.zones.len())];
            for i in 0..zone.refs.len() {
                let alpha = ra_half_width(zone.dec[i], radius_deg);
                let xi = &zone.xyz[i];
                for range in zone.window(zone.ra[i], alpha) {
                    for j in range.filter(|&j| j > i) {
                        let sep = separation_of_vectors(xi, &zone.xyz[j]);
                        if sep <= radius_deg {
                            emit(zone.refs[i], zone.refs[j], sep);
                        }
                    }
                }
                for next in above {
                    for range in next.window(zone.ra[i], alpha) {
                        for j in range {
                            let sep = separation_of_vectors(xi, &next.xyz[j]);
                            if sep <= radius_deg {
                                emit(zone.refs[i], next.refs[j], sep);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn neighbor_pairs(&self, radius_deg: f64) -> Result<Vec<(usize, usize, f64)>, IndexError> {
        let mut out = Vec::new();
        self.for_each_neighbor_pair(radius_deg, |a, b, s| out.push((a, b, s)))?;
        Ok(out)
    }

    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<(), IndexError> {
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&self.zone_height_deg.to_le_bytes())?;
        w.write_all(&(self.object_count as u64).to_le_bytes())?;
        w.write_all(&(self.zones.len() as u64).to_le_bytes())?;
        for zone in &self.zones {
            w.write_all(&(zone.refs.len() as u64).to_le_bytes())?;
            for k in 0..zone.refs.len() {
                w.write_all(&zone.refs[k].to_le_bytes())?;
                w.write_all(&zone.ra[k].to_le_bytes())?;
                w.write_all(&zone.dec[k].to_le_bytes())?;
                for c in zone.xyz[k] {
                    w.write_all(&c.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self, IndexError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(IndexError::Corrupt("bad magic".into()));
        }
        let zone_height_deg = read_f64(&mut r)?;
        let object_count = read_u64(&mut r)? as usize;
        let n_zones = read_u64(&mut r)? as usize;
        if !(zone_height_deg > 0.0 && zone_height_deg <= 180.0)
            || n_zones != (180.0 / zone_height_deg).ceil() as usize
        {
            return Err(IndexError::Corrupt("zone layout mismatch".into()));
        }
        let mut zones = Vec::with_capacity(n_zones);
        let mut seen = 0usize;
        for _ in 0..n_zones {
            let len = read_u64(&mut r)? as usize;
            seen += len;
            if seen > object_count {
                return Err(IndexError::Corrupt("more members than objects".into()));
            }
            let mut zone = Zone::empty();
            for _ in 0..len {
                let mut idx = [0u8; 4];
                r.read_exact(&mut idx)?;
                zone.refs.push(u32::from_le_bytes(idx));
                zone.ra.push(read_f64(&mut r)?);
                zone.dec.push(read_f64(&mut r)?);
                zone.xyz
                    .push([read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?]);
            }
            zones.push(zone);
        }
        if seen != object_count {
            return Err(IndexError::Corrupt("member count mismatch".into()));
        }
        Ok(Self {
            zone_height_deg,
            zones,
            object_count,
        })
    }
}

fn zone_number(dec_deg: f64, height: f64, n_zones: usize) -> usize {
    let z = ((dec_deg + 90.0) / height).floor();
    (z.max(0.0) as usize).min(n_zones - 1)
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sky::angular_separation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pos(ra: f64, dec: f64) -> EquatorialPosition {
        EquatorialPosition::new(ra, dec).unwrap()
    }

    fn random_sky(n: usize, seed: u64) -> Vec<EquatorialPosition> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let ra = rng.random_range(0.0..360.0);
                let dec = (2.0 * rng.random::<f64>() - 1.0).asin().to_degrees();
                pos(ra, dec)
            })
            .collect()
    }

    fn brute_cone(ps: &[EquatorialPosition], q: &ConeQuery) -> Vec<usize> {
        (0..ps.len())
            .filter(|&i| angular_separation(&ps[i], &q.center) <= q.radius_deg)
            .collect()
    }

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort_unstable();
        v
    }

    #[test]
    fn empty_index() {
        let idx = ZoneIndex::build(&[], 1.0).unwrap();
        assert_eq!(idx.object_count(), 0);
        assert_eq!(idx.zone_count(), 180);
        assert!((0..idx.zone_count()).all(|z| idx.zone_members(z).next().is_none()));
    }

    #[test]
    fn object_at_equator_lands_in_zone_90() {
        let idx = ZoneIndex::build(&[pos(12.0, 0.0)], 1.0).unwrap();
        assert_eq!(idx.zone_members(90).collect::<Vec<_>>(), vec![(0, 12.0)]);
        assert_eq!(idx.zone_of(90.0), 179);
        assert_eq!(idx.zone_of(-90.0), 0);
    }

    #[test]
    fn rejects_bad_heights() {
        assert!(ZoneIndex::build(&[], 0.0).is_err());
        assert!(ZoneIndex::build(&[], -1.0).is_err());
        assert!(ZoneIndex::build(&[], 181.0).is_err());
        assert!(ZoneIndex::build(&[], f64::NAN).is_err());
        assert!(ZoneIndex::build(&[], 180.0).is_ok());
    }

    #[test]
    fn zone_invariants_hold() {
        let ps = random_sky(5000, 1);
        let idx = ZoneIndex::build(&ps, 0.7).unwrap();
        let mut seen = vec![0u32; ps.len()];
        for z in 0..idx.zone_count() {
            let members: Vec<_> = idx.zone_members(z).collect();
            assert!(members.windows(2).all(|w| w[0].1 <= w[1].1));
            for (r, _) in members {
                assert_eq!(idx.zone_of(ps[r].dec_deg()), z);
                seen[r] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn every_object_found_with_zero_radius() {
        let ps = random_sky(10_000, 2);
        let idx = ZoneIndex::build(&ps, DEFAULT_ZONE_HEIGHT_DEG).unwrap();
        for (i, p) in ps.iter().enumerate() {
            let hits = idx.cone_search(&ConeQuery::new(*p, 0.0).unwrap());
            assert!(hits.contains(&i), "object {i} not found");
        }
    }

    #[test]
    fn duplicates_are_all_returned() {
        let ps = vec![pos(5.0, 5.0), pos(5.0, 5.0), pos(5.0, 5.0001)];
        let idx = ZoneIndex::build(&ps, 1.0).unwrap();
        let hits = sorted(idx.cone_search(&ConeQuery::new(ps[0], 0.0).unwrap()));
        assert_eq!(hits, vec![0, 1]);
    }

    #[test]
    fn full_sphere_returns_everything() {
        let ps = random_sky(2000, 3);
        let idx = ZoneIndex::build(&ps, 2.0).unwrap();
        let hits = idx.cone_search(&ConeQuery::new(pos(77.0, -12.0), 180.0).unwrap());
        assert_eq!(sorted(hits), (0..ps.len()).collect::<Vec<_>>());
    }

    #[test]
    fn cones_match_brute_force() {
        let ps = random_sky(20_000, 4);
        let idx = ZoneIndex::build(&ps, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut centers: Vec<EquatorialPosition> = vec![
            pos(0.0, 90.0),
            pos(123.0, -90.0),
            pos(359.9, 0.0),
            pos(0.05, 60.0),
            pos(180.0, 88.0),
        ];
        centers.extend(random_sky(200, 6));
        for c in centers {
            let r = rng.random_range(0.0..5.0);
            let q = ConeQuery::new(c, r).unwrap();
            assert_eq!(sorted(idx.cone_search(&q)), brute_cone(&ps, &q), "cone {c:?} r {r}");
        }
    }

    #[test]
    fn large_cones_match_brute_force() {
        let ps = random_sky(3000, 7);
        let idx = ZoneIndex::build(&ps, 3.0).unwrap();
        for (ra, dec, r) in [(10.0, 10.0, 95.0), (200.0, -40.0, 60.0), (0.0, 0.0, 179.0)] {
            let q = ConeQuery::new(pos(ra, dec), r).unwrap();
            assert_eq!(sorted(idx.cone_search(&q)), brute_cone(&ps, &q));
        }
    }

    #[test]
    fn one_pair_inside_radius() {
        let a = pos(100.0, 20.0);
        let b = a.offset(1.0 / 3600.0, 30.0);
        let idx = ZoneIndex::build(&[a, b], DEFAULT_ZONE_HEIGHT_DEG).unwrap();
        let pairs = idx.neighbor_pairs(2.0 / 3600.0).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!((pairs[0].0, pairs[0].1), (0, 1));
        assert!((pairs[0].2 * 3600.0 - 1.0).abs() < 1e-9);

        let lone = ZoneIndex::build(&[a], DEFAULT_ZONE_HEIGHT_DEG).unwrap();
        assert!(lone.neighbor_pairs(2.0 / 3600.0).unwrap().is_empty());
    }

    #[test]
    fn neighbor_radius_spans_several_zones() {
        let ps = random_sky(400, 21);
        let idx = ZoneIndex::build(&ps, 0.5).unwrap();
        for r in [1.3, 7.0, 60.0] {
            let mut got: Vec<(usize, usize)> = idx.neighbor_pairs(r).unwrap().iter().map(|p| (p.0, p.1)).collect();
            got.sort_unstable();
            let mut want = Vec::new();
            for i in 0..ps.len() {
                for j in i + 1..ps.len() {
                    if angular_separation(&ps[i], &ps[j]) <= r {
                        want.push((i, j));
                    }
                }
            }
            assert_eq!(got, want, "radius {r}");
        }
        assert!(matches!(idx.neighbor_pairs(-1.0), Err(IndexError::InvalidRadius(_))));
    }

    #[test]
    fn clustered_pairs_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let centers = random_sky(40, 9);
        let mut ps = Vec::new();
        for c in &centers {
            for _ in 0..250 {
                let sep = rng.random_range(0.0..0.05);
                ps.push(c.offset(sep, rng.random_range(0.0..360.0)));
            }
        }
        // Straddle the RA seam and sit on the pole.
        for k in 0..50 {
            ps.push(pos(359.999 + k as f64 * 0.00004, 10.0));
            ps.push(pos(k as f64 * 7.0, 89.999));
        }
        let r = 30.0 / 3600.0;
        let idx = ZoneIndex::build(&ps, DEFAULT_ZONE_HEIGHT_DEG).unwrap();
        let mut got: Vec<(usize, usize)> = idx
            .neighbor_pairs(r)
            .unwrap()
            .into_iter()
            .map(|(a, b, _)| (a, b))
            .collect();
        got.sort_unstable();
        let mut want = Vec::new();
        for i in 0..ps.len() {
            for j in i + 1..ps.len() {
                if angular_separation(&ps[i], &ps[j]) <= r {
                    want.push((i, j));
                }
            }
        }
        assert!(!want.is_empty());
        assert_eq!(got, want);
    }

    #[test]
    fn snapshot_round_trips() {
        let ps = random_sky(1000, 10);
        let idx = ZoneIndex::build(&ps, 1.5).unwrap();
        let mut buf = Vec::new();
        idx.write_snapshot(&mut buf).unwrap();
        let back = ZoneIndex::read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back, idx);
        assert!(ZoneIndex::read_snapshot(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(ZoneIndex::read_snapshot(bad.as_slice()).is_err());
    }
}
