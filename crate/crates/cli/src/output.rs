//! Result rendering for stdout and the tables mining commands print.

use std::io::Write;

use clap::ValueEnum;
use skyfed_core::mining::{ClusterLabeling, GridCell, MovingCandidate};
use skyfed_core::table::{Column, ResultTable, Value, ValueKind};

use crate::failure::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub fn emit(table: &ResultTable, format: Format) -> Result<(), Failure> {
    let text = match format {
        Format::Csv => table.to_csv(),
        Format::Json => serde_json::to_string(table).expect("table serializes") + "\n",
    };
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn table(columns: &[(&str, ValueKind, bool)], rows: Vec<Vec<Value>>) -> ResultTable {
    let columns = columns.iter().map(|&(n, k, nullable)| Column::new(n, k, nullable)).collect();
    ResultTable::new(columns, rows).expect("fixed table shape")
}

fn id(v: u64) -> Value {
    Value::Int(v as i64)
}

pub fn grid_table(cells: &[GridCell], cell_deg: f64) -> ResultTable {
    let rows = cells
        .iter()
        .map(|c| {
            vec![
                Value::Int(c.ra_cell.into()),
                Value::Int(c.dec_cell.into()),
                Value::Float(c.ra_cell as f64 * cell_deg),
                Value::Float(c.dec_cell as f64 * cell_deg - 90.0),
                id(c.count),
            ]
        })
        .collect();
    table(
        &[
            ("ra_cell", ValueKind::Int, false),
            ("dec_cell", ValueKind::Int, false),
            ("ra_min", ValueKind::Float, false),
            ("dec_min", ValueKind::Float, false),
            ("count", ValueKind::Int, false),
        ],
        rows,
    )
}

/// One row per member of every cluster with at least `min_size` members,
/// ordered by cluster then object id.
pub fn cluster_table(labels: &ClusterLabeling, min_size: usize) -> ResultTable {
    let rows = labels
        .clusters()
        .into_iter()
        .enumerate()
        .filter(|(_, members)| members.len() >= min_size)
        .flat_map(|(c, members)| {
            let size = members.len();
            members
                .into_iter()
                .map(move |m| vec![Value::Int(c as i64), id(m), Value::Int(size as i64)])
        })
        .collect();
    table(
        &[
            ("cluster", ValueKind::Int, false),
            ("object_id", ValueKind::Int, false),
            ("size", ValueKind::Int, false),
        ],
        rows,
    )
}

pub fn id_table(ids: &[u64]) -> ResultTable {
    table(&[("object_id", ValueKind::Int, false)], ids.iter().map(|&i| vec![id(i)]).collect())
}

pub fn mover_table(found: &[MovingCandidate]) -> ResultTable {
    let rows = found
        .iter()
        .map(|m| {
            vec![
                id(m.id_a),
                id(m.id_b),
                Value::Float(m.separation_arcsec),
                m.rate_arcsec_per_day.map_or(Value::Null, Value::Float),
            ]
        })
        .collect();
    table(
        &[
            ("id_a", ValueKind::Int, false),
            ("id_b", ValueKind::Int, false),
            ("separation_arcsec", ValueKind::Float, false),
            ("rate_arcsec_per_day", ValueKind::Float, true),
        ],
        rows,
    )
}
