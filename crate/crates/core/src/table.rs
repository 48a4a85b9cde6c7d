//! Tabular answers: typed columns, cell values and execution stats.

use std::cmp::Ordering;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Total order used for sorting and grouping: NULL first, then numbers
    /// (ints and floats compared by value), then text.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        fn rank(v: &Value) -> u8 {
            match v {
                Value::Null => 0,
                Value::Int(_) | Value::Float(_) => 1,
                Value::Text(_) => 2,
            }
        }
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            (Value::Int(_) | Value::Float(_), Value::Int(_) | Value::Float(_)) => {
                let (a, b) = (self.as_f64().unwrap(), other.as_f64().unwrap());
                a.total_cmp(&b)
            }
            _ => rank(self).cmp(&rank(other)),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => Ok(()),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    Int,
    Float,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ValueKind,
    pub nullable: bool,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ValueKind, nullable: bool) -> Self {
        Self {
            name: name.into(),
            kind,
            nullable,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TableStats {
    pub row_count: usize,
    /// Wall time of execution. Excluded from [`ResultTable::same_content`].
    pub elapsed_ms: u64,
    /// Row-level evaluation faults turned into NULL (e.g. division by zero).
    #[serde(default)]
    pub warnings: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
    pub stats: TableStats,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("duplicate column name: {0}")]
    DuplicateColumn(String),
    #[error("row {row} has {got} values, expected {expected}")]
    Arity {
        row: usize,
        got: usize,
        expected: usize,
    },
}

impl ResultTable {
    pub fn new(columns: Vec<Column>, rows: Vec<Vec<Value>>) -> Result<Self, TableError> {
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(TableError::DuplicateColumn(c.name.clone()));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(TableError::Arity {
                    row: i,
                    got: row.len(),
                    expected: columns.len(),
                });
            }
        }
        let stats = TableStats {
            row_count: rows.len(),
            ..TableStats::default()
        };
        Ok(Self {
            columns,
            rows,
            stats,
        })
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Equality ignoring timing.
    pub fn same_content(&self, other: &ResultTable) -> bool {
        self.columns == other.columns
            && self.rows == other.rows
            && self.stats.row_count == other.stats.row_count
            && self.stats.warnings == other.stats.warnings
    }

    /// Render as CSV with a header row; NULL becomes an empty field.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Null => s.serialize_none(),
            Value::Int(i) => s.serialize_i64(*i),
            Value::Float(f) if f.is_finite() => s.serialize_f64(*f),
            Value::Float(_) => s.serialize_none(),
            Value::Text(t) => s.serialize_str(t),
        }
    }
}

#[derive(Serialize)]
struct TableOut<'a> {
    columns: &'a [Column],
    rows: &'a [Vec<Value>],
    stats: &'a TableStats,
}

#[derive(Deserialize)]
struct TableIn {
    columns: Vec<Column>,
    rows: Vec<Vec<serde_json::Value>>,
    #[serde(default)]
    stats: TableStats,
}

impl Serialize for ResultTable {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TableOut {
            columns: &self.columns,
            rows: &self.rows,
            stats: &self.stats,
        }
        .serialize(s)
    }
}

fn decode_cell(kind: ValueKind, raw: serde_json::Value) -> Result<Value, String> {
    use serde_json::Value as J;
    match (kind, raw) {
        (_, J::Null) => Ok(Value::Null),
        (ValueKind::Int, J::Number(n)) => n
            .as_i64()
            .map(Value::Int)
            .ok_or_else(|| format!("expected integer, got {n}")),
        (ValueKind::Float, J::Number(n)) => n
            .as_f64()
            .map(Value::Float)
            .ok_or_else(|| format!("expected float, got {n}")),
        (ValueKind::Text, J::String(s)) => Ok(Value::Text(s)),
        (kind, other) => Err(format!("cell {other} does not fit a {kind:?} column")),
    }
}

impl<'de> Deserialize<'de> for ResultTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = TableIn::deserialize(d)?;
        let mut rows = Vec::with_capacity(raw.rows.len());
        for row in raw.rows {
            if row.len() != raw.columns.len() {
                return Err(D::Error::custom("row arity does not match columns"));
            }
            let cells = row
                .into_iter()
                .zip(&raw.columns)
                .map(|(cell, col)| decode_cell(col.kind, cell))
                .collect::<Result<Vec<_>, _>>()
                .map_err(D::Error::custom)?;
            rows.push(cells);
        }
        let mut table = ResultTable::new(raw.columns, rows).map_err(D::Error::custom)?;
        table.stats = raw.stats;
        Ok(table)
    }
}
