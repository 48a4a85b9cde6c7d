#![allow(dead_code)]

pub mod oracle;
pub mod querygen;
pub mod xmatch_oracle;

use std::path::PathBuf;
use std::sync::Arc;

use skyfed_core::catalog::Catalog;
use skyfed_core::federation::{Federation, FederationSettings, LocalNodeClient, NodeClient};
use skyfed_core::node::{NodeEngine, DEFAULT_ROW_CAP};
use skyfed_core::fixture::{generate, Fixture, FixtureSpec};
use skyfed_core::ingest::{ingest_reader, parse_schema};
use skyfed_core::zone::{ZoneIndex, DEFAULT_ZONE_HEIGHT_DEG};

/// Objects in the catalog the corpus fixtures were recorded against.
pub const CORPUS_OBJECTS: usize = 2000;
pub const CORPUS_SEED: u64 = 2002;

pub fn load(fixture: &Fixture, survey: &str) -> Catalog {
    let file = fixture.file(survey).expect("survey in fixture");
    let schema = parse_schema(&file.schema).expect("fixture schema");
    ingest_reader(file.csv.as_bytes(), survey, &schema).expect("fixture ingests").0
}

pub fn indexed(catalog: &Catalog) -> ZoneIndex {
    ZoneIndex::for_objects(&catalog.objects, DEFAULT_ZONE_HEIGHT_DEG).expect("index builds")
}

pub fn corpus_catalog() -> (Catalog, ZoneIndex) {
    let mut spec = FixtureSpec::new(CORPUS_OBJECTS, CORPUS_SEED);
    spec.clusters = 2;
    let catalog = load(&generate(&spec), "sdss");
    let index = indexed(&catalog);
    (catalog, index)
}

pub fn docs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs")
}

/// `(name, query text)` for every node-dialect corpus file, in name order.
pub fn corpus() -> Vec<(String, String)> {
    sql_files("queries")
}

/// `(name, query text)` for every portal-dialect corpus file.
pub fn federated_corpus() -> Vec<(String, String)> {
    sql_files("federated")
}

/// Objects per survey in the fixture the federated corpus fixtures were
/// recorded against.
pub const FEDERATED_OBJECTS: usize = 3000;
pub const FEDERATED_SEED: u64 = 31;

fn sql_files(sub: &str) -> Vec<(String, String)> {
    let dir = docs_dir().join(sub);
    let mut out: Vec<(String, String)> = std::fs::read_dir(&dir)
        .expect("corpus directory")
        .filter_map(|e| {
            let path = e.ok()?.path();
            if path.extension()? != "sql" {
                return None;
            }
            let name = path.file_stem()?.to_string_lossy().into_owned();
            Some((name, std::fs::read_to_string(&path).ok()?))
        })
        .collect();
    out.sort();
    out
}

pub fn engine(catalog: &Catalog) -> Arc<NodeEngine> {
    Arc::new(NodeEngine::new(catalog.clone(), indexed(catalog), DEFAULT_ROW_CAP))
}

/// The three coincidence surveys of a fixture, in `sdss, first, twomass`
/// order.
pub fn federation_catalogs(objects: usize, seed: u64, coincidences: usize) -> Vec<Catalog> {
    let mut spec = FixtureSpec::new(objects, seed);
    spec.coincidences = Some(coincidences);
    let fixture = generate(&spec);
    ["sdss", "first", "twomass"].iter().map(|s| load(&fixture, s)).collect()
}

pub fn local_federation(catalogs: &[Catalog], settings: FederationSettings) -> Federation {
    let nodes = catalogs
        .iter()
        .map(|c| {
            let client: Arc<dyn NodeClient> = Arc::new(LocalNodeClient::new(engine(c)));
            (c.schema.survey.clone(), client)
        })
        .collect();
    Federation::new(nodes, settings)
}
