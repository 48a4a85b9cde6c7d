//! Conversion of foreign survey files into the domestic object model.
//!
//! A survey is described by a JSON descriptor naming, for each source column,
//! the domestic field it feeds and the unit it is expressed in. Rows that
//! violate the object model are rejected one by one with a line number and a
//! reason code; only structural problems (unreadable file, missing header
//! column) abort a load.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{self, Read};
use std::path::Path;
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, DomesticColumn, Provenance};
use crate::sky::{flux_to_magnitude, EquatorialPosition, ObjectClass, SkyError, SkyObject};

pub const CATALOG_FILE: &str = "catalog.csv";
pub const SCHEMA_FILE: &str = "schema.json";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Target {
    Ra,
    Dec,
    ObjectId,
    SigmaPos,
    Class,
    Extent,
    Mag(String),
    Flux(String),
}

impl Target {
    /// Domestic field written by this target; `mag:g` and `flux:g` collide.
    fn field_key(&self) -> String {
        match self {
            Target::Mag(b) | Target::Flux(b) => format!("mag_{b}"),
            other => other.to_string(),
        }
    }

    fn default_unit(&self) -> Option<Unit> {
        match self {
            Target::Ra | Target::Dec => Some(Unit::Deg),
            Target::SigmaPos | Target::Extent => Some(Unit::Arcsec),
            Target::Mag(_) => Some(Unit::Mag),
            Target::Flux(_) => Some(Unit::Flux),
            Target::ObjectId | Target::Class => None,
        }
    }

    fn accepts(&self, unit: Unit) -> bool {
        use Unit::*;
        match self {
            Target::Ra => matches!(unit, Deg | Rad | Hours),
            Target::Dec => matches!(unit, Deg | Rad),
            Target::SigmaPos | Target::Extent => matches!(unit, Arcsec | Deg),
            Target::Mag(_) => unit == Mag,
            Target::Flux(_) => unit == Flux,
            Target::ObjectId | Target::Class => false,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Ra => f.write_str("ra"),
            Target::Dec => f.write_str("dec"),
            Target::ObjectId => f.write_str("object_id"),
            Target::SigmaPos => f.write_str("sigma_pos"),
            Target::Class => f.write_str("class"),
            Target::Extent => f.write_str("extent"),
            Target::Mag(b) => write!(f, "mag:{b}"),
            Target::Flux(b) => write!(f, "flux:{b}"),
        }
    }
}

impl FromStr for Target {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "ra" => Target::Ra,
            "dec" => Target::Dec,
            "object_id" => Target::ObjectId,
            "sigma_pos" => Target::SigmaPos,
            "class" => Target::Class,
            "extent" => Target::Extent,
            _ => match s.split_once(':') {
                Some(("mag", b)) if !b.is_empty() => Target::Mag(b.to_owned()),
                Some(("flux", b)) if !b.is_empty() => Target::Flux(b.to_owned()),
                _ => return Err(()),
            },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Deg,
    Rad,
    Hours,
    Arcsec,
    Mag,
    Flux,
}

impl Unit {
    pub fn as_str(&self) -> &'static str {
        match self {
            Unit::Deg => "deg",
            Unit::Rad => "rad",
            Unit::Hours => "hours",
            Unit::Arcsec => "arcsec",
            Unit::Mag => "mag",
            Unit::Flux => "flux",
        }
    }

    fn to_degrees(self, x: f64) -> f64 {
        match self {
            Unit::Rad => x.to_degrees(),
            Unit::Hours => x * 15.0,
            Unit::Arcsec => x / 3600.0,
            _ => x,
        }
    }

    fn to_arcsec(self, x: f64) -> f64 {
        match self {
            Unit::Deg => x * 3600.0,
            _ => x,
        }
    }
}

impl FromStr for Unit {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "deg" => Ok(Unit::Deg),
            "rad" => Ok(Unit::Rad),
            "hours" => Ok(Unit::Hours),
            "arcsec" => Ok(Unit::Arcsec),
            "mag" => Ok(Unit::Mag),
            "flux" => Ok(Unit::Flux),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMapping {
    pub source: String,
    pub target: Target,
    /// `None` only for `object_id` and `class`, which carry no unit.
    pub unit: Option<Unit>,
    pub flux_zero: Option<f64>,
    pub class_map: Option<BTreeMap<String, ObjectClass>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatalogSchema {
    pub survey: String,
    pub bands: Vec<String>,
    pub columns: Vec<ColumnMapping>,
    pub sigma_default_arcsec: f64,
    pub epoch_mjd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaIssue {
    #[error("invalid descriptor: {0}")]
    Malformed(String),
    #[error("invalid survey name: {0:?}")]
    InvalidSurveyName(String),
    #[error("invalid band label: {0:?}")]
    InvalidBand(String),
    #[error("duplicate band: {0}")]
    DuplicateBand(String),
    #[error("sigma_default_arcsec must be positive, got {0}")]
    BadSigmaDefault(f64),
    #[error("unknown target: {0}")]
    UnknownTarget(String),
    #[error("unknown unit: {0}")]
    UnknownUnit(String),
    #[error("incompatible unit {unit} for target {target}")]
    IncompatibleUnit { target: String, unit: String },
    #[error("duplicate target: {0}")]
    DuplicateTarget(String),
    #[error("missing target: {0}")]
    MissingTarget(&'static str),
    #[error("band {band} of target {target} is not declared in bands")]
    UndeclaredBand { target: String, band: String },
    #[error("target {0} requires a positive flux_zero")]
    MissingFluxZero(String),
    #[error("flux_zero is only valid for flux targets, found on {0}")]
    UnexpectedFluxZero(String),
    #[error("target class requires a class_map")]
    MissingClassMap,
    #[error("class_map is only valid for the class target, found on {0}")]
    UnexpectedClassMap(String),
    #[error("class_map entry {key:?} names unknown class {class:?}")]
    UnknownClass { key: String, class: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct SchemaErrors(pub Vec<SchemaIssue>);

impl fmt::Display for SchemaErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "invalid schema: {}", msgs.join("; "))
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error(transparent)]
    Schema(#[from] SchemaErrors),
    #[error("missing header column(s): {}", .0.join(", "))]
    MissingColumns(Vec<String>),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
}

impl IngestError {
    fn io(path: &Path, source: io::Error) -> Self {
        IngestError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchema {
    survey: String,
    bands: Vec<String>,
    sigma_default_arcsec: f64,
    #[serde(default)]
    epoch_mjd: Option<f64>,
    columns: Vec<RawColumn>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawColumn {
    source: String,
    target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flux_zero: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class_map: Option<BTreeMap<String, String>>,
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// Parse and validate a schema descriptor, reporting every problem found.
pub fn parse_schema(descriptor: &str) -> Result<CatalogSchema, SchemaErrors> {
    let raw: RawSchema = serde_json::from_str(descriptor)
        .map_err(|e| SchemaErrors(vec![SchemaIssue::Malformed(e.to_string())]))?;
    let mut issues = Vec::new();

    let survey_ok = !raw.survey.is_empty()
        && raw
            .survey
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_');
    if !survey_ok {
        issues.push(SchemaIssue::InvalidSurveyName(raw.survey.clone()));
    }
    let mut seen_bands = HashSet::new();
    for band in &raw.bands {
        if !is_identifier(band) {
            issues.push(SchemaIssue::InvalidBand(band.clone()));
        } else if !seen_bands.insert(band.as_str()) {
            issues.push(SchemaIssue::DuplicateBand(band.clone()));
        }
    }
    if !(raw.sigma_default_arcsec > 0.0 && raw.sigma_default_arcsec.is_finite()) {
        issues.push(SchemaIssue::BadSigmaDefault(raw.sigma_default_arcsec));
    }

    let mut columns = Vec::new();
    let mut fields = HashSet::new();
    for col in raw.columns {
        let Ok(target) = col.target.parse::<Target>() else {
            issues.push(SchemaIssue::UnknownTarget(col.target.clone()));
            continue;
        };
        let name = target.to_string();
        if !fields.insert(target.field_key()) {
            issues.push(SchemaIssue::DuplicateTarget(name.clone()));
        }
        if let Target::Mag(b) | Target::Flux(b) = &target {
            if !raw.bands.contains(b) {
                issues.push(SchemaIssue::UndeclaredBand {
                    target: name.clone(),
                    band: b.clone(),
                });
            }
        }
        let unit = match &col.unit {
            None => target.default_unit(),
            Some(u) => match u.parse::<Unit>() {
                Err(()) => {
                    issues.push(SchemaIssue::UnknownUnit(u.clone()));
                    None
                }
                Ok(unit) if !target.accepts(unit) => {
                    issues.push(SchemaIssue::IncompatibleUnit {
                        target: name.clone(),
                        unit: u.clone(),
                    });
                    None
                }
                Ok(unit) => Some(unit),
            },
        };
        match (&target, col.flux_zero) {
            (Target::Flux(_), Some(z)) if z > 0.0 && z.is_finite() => {}
            (Target::Flux(_), _) => issues.push(SchemaIssue::MissingFluxZero(name.clone())),
            (_, Some(_)) => issues.push(SchemaIssue::UnexpectedFluxZero(name.clone())),
            (_, None) => {}
        }
        let class_map = match (&target, col.class_map) {
            (Target::Class, Some(map)) => {
                let mut parsed = BTreeMap::new();
                for (key, class) in map {
                    match class.parse::<ObjectClass>() {
                        Ok(c) => {
                            parsed.insert(key, c);
                        }
                        Err(_) => issues.push(SchemaIssue::UnknownClass { key, class }),
                    }
                }
                Some(parsed)
            }
            (Target::Class, None) => {
                issues.push(SchemaIssue::MissingClassMap);
                None
            }
            (_, Some(_)) => {
                issues.push(SchemaIssue::UnexpectedClassMap(name.clone()));
                None
            }
            (_, None) => None,
        };
        columns.push(ColumnMapping {
            source: col.source,
            target,
            unit,
            flux_zero: col.flux_zero,
            class_map,
        });
    }
    for (target, key) in [(Target::Ra, "ra"), (Target::Dec, "dec")] {
        if !columns.iter().any(|c| c.target == target) {
            issues.push(SchemaIssue::MissingTarget(key));
        }
    }

    if issues.is_empty() {
        Ok(CatalogSchema {
            survey: raw.survey,
            bands: raw.bands,
            columns,
            sigma_default_arcsec: raw.sigma_default_arcsec,
            epoch_mjd: raw.epoch_mjd,
        })
    } else {
        Err(SchemaErrors(issues))
    }
}

impl CatalogSchema {
    pub fn to_descriptor(&self) -> serde_json::Value {
        let columns: Vec<RawColumn> = self
            .columns
            .iter()
            .map(|c| RawColumn {
                source: c.source.clone(),
                target: c.target.to_string(),
                unit: c.unit.map(|u| u.as_str().to_owned()),
                flux_zero: c.flux_zero,
                class_map: c.class_map.as_ref().map(|m| {
                    m.iter()
                        .map(|(k, v)| (k.clone(), v.as_str().to_owned()))
                        .collect()
                }),
            })
            .collect();
        serde_json::json!({
            "survey": self.survey,
            "bands": self.bands,
            "sigma_default_arcsec": self.sigma_default_arcsec,
            "epoch_mjd": self.epoch_mjd,
            "columns": columns,
        })
    }

    /// The descriptor of this survey's catalog after normalization: domestic
    /// column names, degrees and arcseconds, identity class table.
    pub fn domestic(&self) -> CatalogSchema {
        let mapping = |source: &str, target: Target, unit: Option<Unit>| ColumnMapping {
            source: source.to_owned(),
            target,
            unit,
            flux_zero: None,
            class_map: None,
        };
        let mut columns = vec![
            mapping("object_id", Target::ObjectId, None),
            mapping("ra", Target::Ra, Some(Unit::Deg)),
            mapping("dec", Target::Dec, Some(Unit::Deg)),
            mapping("sigma_pos", Target::SigmaPos, Some(Unit::Arcsec)),
            ColumnMapping {
                class_map: Some(ObjectClass::ALL.iter().map(|c| (c.as_str().to_owned(), *c)).collect()),
                ..mapping("class", Target::Class, None)
            },
            mapping("extent", Target::Extent, Some(Unit::Arcsec)),
        ];
        for band in &self.bands {
            columns.push(mapping(&format!("mag_{band}"), Target::Mag(band.clone()), Some(Unit::Mag)));
        }
        CatalogSchema {
            survey: self.survey.clone(),
            bands: self.bands.clone(),
            columns,
            sigma_default_arcsec: self.sigma_default_arcsec,
            epoch_mjd: self.epoch_mjd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectCode {
    FieldCount,
    Encoding,
    MissingValue,
    InvalidNumber,
    NonFinite,
    DecOutOfRange,
    InvalidObjectId,
    DuplicateObjectId,
    NonPositiveSigma,
    NegativeExtent,
    NonPositiveFlux,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: u64,
    pub code: RejectCode,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub source: String,
    pub read: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub unmatched_class: usize,
    pub rejections: Vec<Rejection>,
}

struct RowError(RejectCode, String);

fn number(field: &str, what: &str) -> Result<f64, RowError> {
    let x: f64 = field
        .trim()
        .parse()
        .map_err(|_| RowError(RejectCode::InvalidNumber, format!("{what}: not a number: {field:?}")))?;
    if !x.is_finite() {
        return Err(RowError(RejectCode::NonFinite, format!("{what} not finite")));
    }
    Ok(x)
}

struct RowConverter<'a> {
    schema: &'a CatalogSchema,
    /// Header position of each mapping's source column.
    positions: Vec<usize>,
    width: usize,
}

impl RowConverter<'_> {
    fn convert(
        &self,
        record: &csv::StringRecord,
        ordinal: u64,
        unmatched_class: &mut usize,
    ) -> Result<SkyObject, RowError> {
        if record.len() != self.width {
            return Err(RowError(
                RejectCode::FieldCount,
                format!("expected {} fields, found {}", self.width, record.len()),
            ));
        }
        let mut ra = None;
        let mut dec = None;
        let mut object_id = ordinal;
        let mut sigma = self.schema.sigma_default_arcsec;
        let mut class = ObjectClass::Unknown;
        let mut extent = None;
        let mut mags = BTreeMap::new();

        for (mapping, &pos) in self.schema.columns.iter().zip(&self.positions) {
            let field = record[pos].trim();
            if field.is_empty() {
                match mapping.target {
                    Target::Ra | Target::Dec | Target::ObjectId => {
                        return Err(RowError(
                            RejectCode::MissingValue,
                            format!("missing value for {}", mapping.target),
                        ))
                    }
                    _ => continue,
                }
            }
            let unit = mapping.unit.unwrap_or(Unit::Deg);
            match &mapping.target {
                Target::Ra => ra = Some(unit.to_degrees(number(field, "ra")?)),
                Target::Dec => dec = Some(unit.to_degrees(number(field, "dec")?)),
                Target::ObjectId => {
                    object_id = field
                        .parse::<u64>()
                        .ok()
                        .filter(|id| *id <= i64::MAX as u64)
                        .ok_or_else(|| {
                            RowError(RejectCode::InvalidObjectId, format!("invalid object_id {field:?}"))
                        })?;
                }
                Target::SigmaPos => {
                    sigma = unit.to_arcsec(number(field, "sigma_pos")?);
                    if sigma <= 0.0 {
                        return Err(RowError(
                            RejectCode::NonPositiveSigma,
                            format!("sigma_pos must be positive, got {sigma}"),
                        ));
                    }
                }
                Target::Extent => {
                    let e = unit.to_arcsec(number(field, "extent")?);
                    if e < 0.0 {
                        return Err(RowError(
                            RejectCode::NegativeExtent,
                            format!("extent must be non-negative, got {e}"),
                        ));
                    }
                    extent = Some(e);
                }
                Target::Class => {
                    let table = mapping.class_map.as_ref().expect("validated class_map");
                    class = match table.get(field) {
                        Some(c) => *c,
                        None => {
                            *unmatched_class += 1;
                            ObjectClass::Unknown
                        }
                    };
                }
                Target::Mag(band) => {
                    mags.insert(band.clone(), number(field, &mapping.target.to_string())?);
                }
                Target::Flux(band) => {
                    let flux = number(field, &mapping.target.to_string())?;
                    let zero = mapping.flux_zero.expect("validated flux_zero");
                    let m = flux_to_magnitude(flux, zero).map_err(|e| {
                        RowError(RejectCode::NonPositiveFlux, format!("{}: {e}", mapping.target))
                    })?;
                    mags.insert(band.clone(), m);
                }
            }
        }

        let (ra, dec) = (ra.expect("ra mapped"), dec.expect("dec mapped"));
        let pos = EquatorialPosition::with_epoch(ra, dec, self.schema.epoch_mjd).map_err(|e| match e {
            SkyError::DecOutOfRange(d) => {
                RowError(RejectCode::DecOutOfRange, format!("dec out of range: {d}"))
            }
            other => RowError(RejectCode::NonFinite, other.to_string()),
        })?;
        Ok(SkyObject {
            object_id,
            pos,
            sigma_pos_arcsec: sigma,
            mags,
            class,
            extent_arcsec: extent,
        })
    }
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Ingest CSV text from any reader. `source` names the input in the report.
pub fn ingest_reader<R: Read>(
    reader: R,
    source: &str,
    schema: &CatalogSchema,
) -> Result<(Catalog, IngestReport), IngestError> {
    let mut csv = csv::ReaderBuilder::new()
        .flexible(true)
        .has_headers(true)
        .from_reader(reader);
    let header = csv.headers()?.clone();
    let header_names: Vec<&str> = header.iter().map(str::trim).collect();
    let mut missing = Vec::new();
    let mut positions = Vec::new();
    for mapping in &schema.columns {
        match header_names.iter().position(|h| *h == mapping.source) {
            Some(p) => positions.push(p),
            None => missing.push(mapping.source.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(IngestError::MissingColumns(missing));
    }
    let converter = RowConverter {
        schema,
        positions,
        width: header.len(),
    };

    let mut objects: Vec<SkyObject> = Vec::new();
    let mut ids = HashSet::new();
    let mut rejections = Vec::new();
    let mut unmatched_class = 0;
    let mut read = 0usize;
    let mut record = csv::StringRecord::new();
    loop {
        let line = csv.position().line() + 1;
        let outcome = match csv.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                read += 1;
                let line = record.position().map_or(line, |p| p.line());
                (line, converter.convert(&record, read as u64, &mut unmatched_class))
            }
            Err(e) => match e.kind() {
                csv::ErrorKind::Utf8 { pos, .. } => {
                    read += 1;
                    let line = pos.as_ref().map_or(line, |p| p.line());
                    (line, Err(RowError(RejectCode::Encoding, "row is not valid UTF-8".into())))
                }
                _ => return Err(e.into()),
            },
        };
        let (line, result) = outcome;
        let result = result.and_then(|obj| {
            if ids.insert(obj.object_id) {
                Ok(obj)
            } else {
                Err(RowError(
                    RejectCode::DuplicateObjectId,
                    format!("duplicate object_id {}", obj.object_id),
                ))
            }
        });
        match result {
            Ok(obj) => objects.push(obj),
            Err(RowError(code, reason)) => rejections.push(Rejection { line, code, reason }),
        }
    }

    let report = IngestReport {
        source: source.to_owned(),
        read,
        accepted: objects.len(),
        rejected: rejections.len(),
        unmatched_class,
        rejections,
    };
    tracing::debug!(
        source,
        read = report.read,
        accepted = report.accepted,
        rejected = report.rejected,
        "ingested catalog"
    );
    let catalog = Catalog {
        schema: schema.clone(),
        objects,
        provenance: Provenance {
            source: source.to_owned(),
            read: report.read,
            accepted: report.accepted,
            rejected: report.rejected,
            ingested_at: now_unix(),
        },
    };
    Ok((catalog, report))
}

pub fn ingest_csv(path: &Path, schema: &CatalogSchema) -> Result<(Catalog, IngestReport), IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    ingest_reader(io::BufReader::new(file), &name, schema)
}

pub fn load_schema(path: &Path) -> Result<CatalogSchema, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    Ok(parse_schema(&text)?)
}

/// Render a catalog as domestic CSV.
pub fn domestic_csv(catalog: &Catalog) -> String {
    let bands = catalog.bands();
    let cols = catalog.domestic_columns();
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(cols.iter().map(|c| c.name(bands)))
        .expect("in-memory write");
    for obj in &catalog.objects {
        w.write_record(cols.iter().map(|c| match c {
            // Class names round-trip through the identity class table.
            DomesticColumn::Class => obj.class.as_str().to_owned(),
            other => other.value(obj, bands).to_string(),
        }))
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

/// Write `catalog.csv` and a regenerated `schema.json` into `dir`.
pub fn export_domestic(catalog: &Catalog, dir: &Path) -> Result<(), IngestError> {
    fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
    let csv_path = dir.join(CATALOG_FILE);
    fs::write(&csv_path, domestic_csv(catalog)).map_err(|e| IngestError::io(&csv_path, e))?;
    let schema_path = dir.join(SCHEMA_FILE);
    let descriptor = serde_json::to_string_pretty(&catalog.schema.domestic().to_descriptor())
        .expect("descriptor serializes");
    fs::write(&schema_path, descriptor + "\n").map_err(|e| IngestError::io(&schema_path, e))?;
    Ok(())
}

/// Re-ingest a directory written by [`export_domestic`].
pub fn load_domestic(dir: &Path) -> Result<(Catalog, IngestReport), IngestError> {
    let schema = load_schema(&dir.join(SCHEMA_FILE))?;
    ingest_csv(&dir.join(CATALOG_FILE), &schema)
}
