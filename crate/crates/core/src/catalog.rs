//! A loaded catalog and the fixed set of domestic columns every node exposes.

use serde::{Deserialize, Serialize};

use crate::ingest::CatalogSchema;
use crate::sky::SkyObject;
use crate::table::{Value, ValueKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub read: usize,
    pub accepted: usize,
    pub rejected: usize,
    /// Seconds since the Unix epoch.
    pub ingested_at: u64,
}

#[derive(Debug, Clone)]
pub struct Catalog {
    pub schema: CatalogSchema,
    pub objects: Vec<SkyObject>,
    pub provenance: Provenance,
}

impl Catalog {
    /// A catalog assembled in memory rather than ingested from a file.
    pub fn from_objects(schema: CatalogSchema, objects: Vec<SkyObject>) -> Self {
        let n = objects.len();
        Self {
            schema,
            objects,
            provenance: Provenance {
                source: "memory".into(),
                read: n,
                accepted: n,
                rejected: 0,
                ingested_at: 0,
            },
        }
    }

    pub fn survey(&self) -> &str {
        &self.schema.survey
    }

    pub fn bands(&self) -> &[String] {
        &self.schema.bands
    }

    pub fn domestic_columns(&self) -> Vec<DomesticColumn> {
        DomesticColumn::all(self.bands().len())
    }

    pub fn column_names(&self) -> Vec<String> {
        self.domestic_columns()
            .iter()
            .map(|c| c.name(self.bands()))
            .collect()
    }
}

/// A column of the domestic model. `Mag` holds an index into the band list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomesticColumn {
    ObjectId,
    Ra,
    Dec,
    SigmaPos,
    Class,
    Extent,
    Mag(usize),
}

impl DomesticColumn {
    pub fn all(band_count: usize) -> Vec<DomesticColumn> {
        let mut cols = vec![
            DomesticColumn::ObjectId,
            DomesticColumn::Ra,
            DomesticColumn::Dec,
            DomesticColumn::SigmaPos,
            DomesticColumn::Class,
            DomesticColumn::Extent,
        ];
        cols.extend((0..band_count).map(DomesticColumn::Mag));
        cols
    }

    pub fn name(&self, bands: &[String]) -> String {
        match self {
            DomesticColumn::ObjectId => "object_id".into(),
            DomesticColumn::Ra => "ra".into(),
            DomesticColumn::Dec => "dec".into(),
            DomesticColumn::SigmaPos => "sigma_pos".into(),
            DomesticColumn::Class => "class".into(),
            DomesticColumn::Extent => "extent".into(),
            DomesticColumn::Mag(b) => format!("mag_{}", bands[*b]),
        }
    }

    pub fn resolve(name: &str, bands: &[String]) -> Option<DomesticColumn> {
        Self::all(bands.len())
            .into_iter()
            .find(|c| c.name(bands) == name)
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            DomesticColumn::ObjectId => ValueKind::Int,
            DomesticColumn::Class => ValueKind::Text,
            _ => ValueKind::Float,
        }
    }

    pub fn nullable(&self) -> bool {
        matches!(self, DomesticColumn::Extent | DomesticColumn::Mag(_))
    }

    pub fn value(&self, obj: &SkyObject, bands: &[String]) -> Value {
        match self {
            DomesticColumn::ObjectId => Value::Int(obj.object_id as i64),
            DomesticColumn::Ra => Value::Float(obj.pos.ra_deg()),
            DomesticColumn::Dec => Value::Float(obj.pos.dec_deg()),
            DomesticColumn::SigmaPos => Value::Float(obj.sigma_pos_arcsec),
            DomesticColumn::Class => Value::Text(obj.class.as_str().to_owned()),
            DomesticColumn::Extent => obj.extent_arcsec.map_or(Value::Null, Value::Float),
            DomesticColumn::Mag(b) => obj
                .mags
                .get(&bands[*b])
                .map_or(Value::Null, |m| Value::Float(*m)),
        }
    }
}
