//! Deterministic synthetic survey catalogs with planted ground truth.
//!
//! Three surveys in three different native layouts (`sdss`, `first`,
//! `twomass`) share a set of planted coincidences; `sdss_epoch2` is a second
//! visit to the `sdss` sky in which a few objects have moved.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sky::{angular_separation, EquatorialPosition, ARCSEC_PER_DEG};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SDSS_EPOCH_MJD: f64 = 51000.0;
pub const SDSS_EPOCH2_MJD: f64 = 51001.0;
/// Object ids in `sdss_epoch2` are the `sdss` ids plus this offset.
pub const EPOCH2_ID_OFFSET: u64 = 1_000_000_000;
const DEFAULT_COINCIDENCES: usize = 200;
const CLUSTER_SIGMA_ARCSEC: f64 = 20.0;
const FIRST_FLUX_ZERO_MJY: f64 = 3_631_000.0;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    /// Uniformly placed objects per survey.
    pub objects: usize,
    pub seed: u64,
    /// Objects (taken from the end of the uniform `sdss` set) displaced in
    /// `sdss_epoch2`; clamped to `objects`.
    pub movers: usize,
    pub clusters: usize,
    pub cluster_size: usize,
    /// `sdss` objects with counterparts in `first` and `twomass`; defaults
    /// to `min(200, objects)` and is clamped to `objects`.
    pub coincidences: Option<usize>,
    /// Malformed rows interleaved into `sdss.csv`.
    pub bad_rows: usize,
}

impl FixtureSpec {
    pub fn new(objects: usize, seed: u64) -> Self {
        Self {
            objects,
            seed,
            movers: 0,
            clusters: 0,
            cluster_size: 50,
            coincidences: None,
            bad_rows: 0,
        }
    }

    fn coincidence_count(&self) -> usize {
        self.coincidences.unwrap_or(DEFAULT_COINCIDENCES).min(self.objects)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub survey: String,
    /// Relative to the fixture directory.
    pub csv: String,
    pub schema: String,
    /// Data rows written, including malformed ones.
    pub rows: usize,
    pub bad_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mover {
    pub id_a: u64,
    pub id_b: u64,
    pub separation_arcsec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub ra_deg: f64,
    pub dec_deg: f64,
    pub members: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coincidence {
    pub sdss: u64,
    pub first: u64,
    pub twomass: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: FixtureSpec,
    pub catalogs: Vec<CatalogEntry>,
    pub movers: Vec<Mover>,
    pub clusters: Vec<Cluster>,
    pub coincidences: Vec<Coincidence>,
    pub bad_rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureFile {
    pub survey: String,
    pub csv: String,
    pub schema: String,
}

/// A generated fixture held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub files: Vec<FixtureFile>,
    pub manifest: Manifest,
}

impl Fixture {
    pub fn file(&self, survey: &str) -> Option<&FixtureFile> {
        self.files.iter().find(|f| f.survey == survey)
    }

    /// Writes `<survey>/<survey>.csv`, `<survey>/schema.json` and
    /// `manifest.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), FixtureError> {
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| FixtureError::Io { path, source }
        };
        for f in &self.files {
            let sub = dir.join(&f.survey);
            fs::create_dir_all(&sub).map_err(io_err(&sub))?;
            let csv = sub.join(format!("{}.csv", f.survey));
            fs::write(&csv, &f.csv).map_err(io_err(&csv))?;
            let schema = sub.join("schema.json");
            fs::write(&schema, &f.schema).map_err(io_err(&schema))?;
        }
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes") + "\n";
        fs::write(&path, text).map_err(io_err(&path))
    }
}

fn uniform_position(rng: &mut ChaCha8Rng) -> EquatorialPosition {
    let ra = 360.0 * rng.random::<f64>();
    let dec = (2.0 * rng.random::<f64>() - 1.0).asin().to_degrees();
    EquatorialPosition::new(ra, dec).expect("sampled position in range")
}

fn jitter(rng: &mut ChaCha8Rng, pos: &EquatorialPosition, max_arcsec: f64) -> EquatorialPosition {
    let sep = max_arcsec * rng.random::<f64>() / ARCSEC_PER_DEG;
    pos.offset(sep, 360.0 * rng.random::<f64>())
}

fn mag(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let m = rng.random_range(lo..hi);
    (m * 1000.0).round() / 1000.0
}

/// Formats a value for CSV, leaving the cell empty for roughly one in
/// twenty draws.
fn maybe_mag(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> String {
    let m = mag(rng, lo, hi);
    if rng.random_range(0..20) == 0 {
        String::new()
    } else {
        m.to_string()
    }
}

struct SdssRow {
    id: u64,
    pos: EquatorialPosition,
    err: f64,
    mags: [String; 5],
    kind: u8,
}

fn sdss_row(rng: &mut ChaCha8Rng, id: u64, pos: EquatorialPosition) -> SdssRow {
    let err = (rng.random_range(0.05..0.15) * 1000.0_f64).round() / 1000.0;
    let mags = [
        maybe_mag(rng, 18.0, 24.0),
        maybe_mag(rng, 17.0, 23.0),
        maybe_mag(rng, 16.5, 22.5),
        maybe_mag(rng, 16.0, 22.0),
        maybe_mag(rng, 15.5, 21.5),
    ];
    let kind = [3, 6, 9][rng.random_range(0..3)];
    SdssRow {
        id,
        pos,
        err,
        mags,
        kind,
    }
}

fn sdss_line(r: &SdssRow) -> String {
    format!(
        "{},{},{},{},{},{}\n",
        r.id,
        r.pos.ra_deg(),
        r.pos.dec_deg(),
        r.err,
        r.mags.join(","),
        r.kind
    )
}

const SDSS_HEADER: &str = "objID,ra,dec,err_arcsec,u,g,r,i,z,type\n";

fn sdss_schema(survey: &str, epoch: f64) -> String {
    let v = serde_json::json!({
        "survey": survey,
        "bands": ["u", "g", "r", "i", "z"],
        "sigma_default_arcsec": 0.1,
        "epoch_mjd": epoch,
        "columns": [
            {"source": "objID", "target": "object_id"},
            {"source": "ra", "target": "ra", "unit": "deg"},
            {"source": "dec", "target": "dec", "unit": "deg"},
            {"source": "err_arcsec", "target": "sigma_pos", "unit": "arcsec"},
            {"source": "u", "target": "mag:u"},
            {"source": "g", "target": "mag:g"},
            {"source": "r", "target": "mag:r"},
            {"source": "i", "target": "mag:i"},
            {"source": "z", "target": "mag:z"},
            {"source": "type", "target": "class", "class_map": {"3": "GALAXY", "6": "STAR", "9": "QSO"}}
        ]
    });
    serde_json::to_string_pretty(&v).expect("schema serializes") + "\n"
}

fn first_schema() -> String {
    let v = serde_json::json!({
        "survey": "first",
        "bands": ["radio"],
        "sigma_default_arcsec": 1.0,
        "columns": [
            {"source": "id", "target": "object_id"},
            {"source": "ra_h", "target": "ra", "unit": "hours"},
            {"source": "dec", "target": "dec", "unit": "deg"},
            {"source": "flux_mjy", "target": "flux:radio", "unit": "flux", "flux_zero": FIRST_FLUX_ZERO_MJY},
            {"source": "pos_err_deg", "target": "sigma_pos", "unit": "deg"}
        ]
    });
    serde_json::to_string_pretty(&v).expect("schema serializes") + "\n"
}

fn twomass_schema() -> String {
    let v = serde_json::json!({
        "survey": "twomass",
        "bands": ["j", "h", "k"],
        "sigma_default_arcsec": 0.3,
        "epoch_mjd": 51200.0,
        "columns": [
            {"source": "cntr", "target": "object_id"},
            {"source": "ra_rad", "target": "ra", "unit": "rad"},
            {"source": "dec_rad", "target": "dec", "unit": "rad"},
            {"source": "sig_arcsec", "target": "sigma_pos", "unit": "arcsec"},
            {"source": "j_m", "target": "mag:j"},
            {"source": "h_m", "target": "mag:h"},
            {"source": "k_m", "target": "mag:k"}
        ]
    });
    serde_json::to_string_pretty(&v).expect("schema serializes") + "\n"
}

fn bad_line(i: usize, id: u64) -> String {
    match i % 4 {
        0 => format!("{id},abc,10.0,0.1,20,20,20,20,20,6\n"),
        1 => format!("{id},10.0,95.0,0.1,20,20,20,20,20,6\n"),
        2 => format!("{id},10.0,10.0\n"),
        _ => format!("{id},10.0,10.0,-0.1,20,20,20,20,20,6\n"),
    }
}

/// Generates the fixture described by `spec`. Output depends only on
/// `spec`.
pub fn generate(spec: &FixtureSpec) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.objects;
    let movers = spec.movers.min(n);
    let k = spec.coincidence_count();

    // sdss: uniform objects, then cluster members.
    let mut sdss: Vec<SdssRow> = (0..n)
        .map(|i| {
            let pos = uniform_position(&mut rng);
            sdss_row(&mut rng, i as u64 + 1, pos)
        })
        .collect();
    let blob = Normal::new(0.0, CLUSTER_SIGMA_ARCSEC / ARCSEC_PER_DEG).expect("valid sigma");
    let mut clusters = Vec::with_capacity(spec.clusters);
    for _ in 0..spec.clusters {
        let center = uniform_position(&mut rng);
        let mut members = Vec::with_capacity(spec.cluster_size);
        for _ in 0..spec.cluster_size {
            let (dx, dy): (f64, f64) = (blob.sample(&mut rng), blob.sample(&mut rng));
            let pos = center.offset(dx.hypot(dy), dx.atan2(dy).to_degrees());
            let id = sdss.len() as u64 + 1;
            members.push(id);
            sdss.push(sdss_row(&mut rng, id, pos));
        }
        clusters.push(Cluster {
            ra_deg: center.ra_deg(),
            dec_deg: center.dec_deg(),
            members,
        });
    }

    // Second epoch: small jitter for static objects, real motion for movers.
    let mut epoch2 = Vec::with_capacity(sdss.len());
    let mut mover_truth = Vec::with_capacity(movers);
    for (i, row) in sdss.iter().enumerate() {
        let is_mover = i < n && i >= n - movers;
        let pos = if is_mover {
            let sep = rng.random_range(5.0..40.0) / ARCSEC_PER_DEG;
            let moved = row.pos.offset(sep, 360.0 * rng.random::<f64>());
            mover_truth.push(Mover {
                id_a: row.id,
                id_b: row.id + EPOCH2_ID_OFFSET,
                separation_arcsec: angular_separation(&row.pos, &moved) * ARCSEC_PER_DEG,
            });
            moved
        } else {
            jitter(&mut rng, &row.pos, 0.5)
        };
        let mut next = sdss_row(&mut rng, row.id + EPOCH2_ID_OFFSET, pos);
        next.kind = row.kind;
        epoch2.push(next);
    }

    // first and twomass: counterparts of the first k sdss objects, then
    // unrelated uniform objects.
    let mut first = String::from("id,ra_h,dec,flux_mjy,pos_err_deg\n");
    let mut twomass = String::from("cntr,ra_rad,dec_rad,sig_arcsec,j_m,h_m,k_m\n");
    let mut coincidences = Vec::with_capacity(k);
    for i in 0..n {
        let id = i as u64 + 1;
        let (p_first, p_2mass) = if i < k {
            coincidences.push(Coincidence {
                sdss: sdss[i].id,
                first: id,
                twomass: id,
            });
            (jitter(&mut rng, &sdss[i].pos, 1.0), jitter(&mut rng, &sdss[i].pos, 0.3))
        } else {
            (uniform_position(&mut rng), uniform_position(&mut rng))
        };
        let m = mag(&mut rng, 10.0, 20.0);
        let flux = FIRST_FLUX_ZERO_MJY * 10f64.powf(-m / 2.5);
        let err_deg = rng.random_range(0.8..1.2) / ARCSEC_PER_DEG;
        first.push_str(&format!(
            "{id},{},{},{flux},{err_deg}\n",
            p_first.ra_deg() / 15.0,
            p_first.dec_deg()
        ));
        let sig = (rng.random_range(0.25..0.35) * 1000.0_f64).round() / 1000.0;
        let (j, h, kk) = (
            maybe_mag(&mut rng, 10.0, 17.0),
            maybe_mag(&mut rng, 9.5, 16.5),
            maybe_mag(&mut rng, 9.0, 16.0),
        );
        twomass.push_str(&format!(
            "{id},{},{},{sig},{j},{h},{kk}\n",
            p_2mass.ra_deg().to_radians(),
            p_2mass.dec_deg().to_radians()
        ));
    }

    // Malformed rows are spread evenly through sdss.csv.
    let mut sdss_csv = String::from(SDSS_HEADER);
    let total = sdss.len();
    let mut bad_written = 0;
    for (i, row) in sdss.iter().enumerate() {
        while bad_written < spec.bad_rows && bad_written * total <= i * spec.bad_rows {
            sdss_csv.push_str(&bad_line(bad_written, 2_000_000_000 + bad_written as u64));
            bad_written += 1;
        }
        sdss_csv.push_str(&sdss_line(row));
    }
    while bad_written < spec.bad_rows {
        sdss_csv.push_str(&bad_line(bad_written, 2_000_000_000 + bad_written as u64));
        bad_written += 1;
    }
    let mut epoch2_csv = String::from(SDSS_HEADER);
    for row in &epoch2 {
        epoch2_csv.push_str(&sdss_line(row));
    }

    let entry = |survey: &str, rows: usize, bad_rows: usize| CatalogEntry {
        survey: survey.to_owned(),
        csv: format!("{survey}/{survey}.csv"),
        schema: format!("{survey}/schema.json"),
        rows,
        bad_rows,
    };
    let manifest = Manifest {
        spec: spec.clone(),
        catalogs: vec![
            entry("sdss", total + spec.bad_rows, spec.bad_rows),
            entry("sdss_epoch2", epoch2.len(), 0),
            entry("first", n, 0),
            entry("twomass", n, 0),
        ],
        movers: mover_truth,
        clusters,
        coincidences,
        bad_rows: spec.bad_rows,
    };
    let file = |survey: &str, csv: String, schema: String| FixtureFile {
        survey: survey.to_owned(),
        csv,
        schema,
    };
    Fixture {
        files: vec![
            file("sdss", sdss_csv, sdss_schema("sdss", SDSS_EPOCH_MJD)),
            file("sdss_epoch2", epoch2_csv, sdss_schema("sdss_epoch2", SDSS_EPOCH2_MJD)),
            file("first", first, first_schema()),
            file("twomass", twomass, twomass_schema()),
        ],
        manifest,
    }
}
