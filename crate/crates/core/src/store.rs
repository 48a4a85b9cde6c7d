//! On-disk layout of an ingested catalog.
//!
//! ```text
//! <dir>/catalog.csv   domestic columns, one row per accepted object
//! <dir>/schema.json   regenerated domestic descriptor
//! <dir>/report.json   provenance and the ingest rejection report
//! <dir>/index.zones   zone index snapshot (rebuilt when stale or absent)
//! ```

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, Provenance};
use crate::ingest::{export_domestic, load_domestic, IngestError, IngestReport};
use crate::zone::{IndexError, ZoneIndex};

pub const REPORT_FILE: &str = "report.json";
pub const INDEX_FILE: &str = "index.zones";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> StoreError {
    StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoreReport {
    pub provenance: Provenance,
    pub ingest: IngestReport,
}

/// Writes the catalog, its report, and a fresh index snapshot into `dir`.
pub fn write_store(
    dir: &Path,
    catalog: &Catalog,
    report: &IngestReport,
    zone_height_deg: f64,
) -> Result<ZoneIndex, StoreError> {
    export_domestic(catalog, dir)?;
    let report_path = dir.join(REPORT_FILE);
    let body = StoreReport {
        provenance: catalog.provenance.clone(),
        ingest: report.clone(),
    };
    let text = serde_json::to_string_pretty(&body).expect("report serializes");
    fs::write(&report_path, text + "\n").map_err(|e| io_err(&report_path, e))?;
    let index = ZoneIndex::for_objects(&catalog.objects, zone_height_deg)?;
    let index_path = dir.join(INDEX_FILE);
    let file = fs::File::create(&index_path).map_err(|e| io_err(&index_path, e))?;
    index.write_snapshot(BufWriter::new(file))?;
    Ok(index)
}

/// Loads a store. The index snapshot is reused when it matches the catalog
/// size and requested zone height; otherwise the index is rebuilt in memory.
pub fn open_store(dir: &Path, zone_height_deg: f64) -> Result<(Catalog, ZoneIndex), StoreError> {
    let (mut catalog, _) = load_domestic(dir)?;
    let report_path = dir.join(REPORT_FILE);
    if report_path.exists() {
        let text = fs::read_to_string(&report_path).map_err(|e| io_err(&report_path, e))?;
        let report: StoreReport = serde_json::from_str(&text).map_err(|source| StoreError::Json {
            path: report_path.display().to_string(),
            source,
        })?;
        catalog.provenance = report.provenance;
    }
    let index_path = dir.join(INDEX_FILE);
    let cached = fs::File::open(&index_path)
        .ok()
        .and_then(|f| ZoneIndex::read_snapshot(BufReader::new(f)).ok())
        .filter(|ix| {
            ix.object_count() == catalog.objects.len() && ix.zone_height_deg() == zone_height_deg
        });
    let index = match cached {
        Some(ix) => ix,
        None => {
            tracing::info!(path = %index_path.display(), "rebuilding zone index");
            ZoneIndex::for_objects(&catalog.objects, zone_height_deg)?
        }
    };
    Ok((catalog, index))
}
