//! The catalog query dialect: a small SQL subset with a `CONE` predicate,
//! plus the `XMATCH(...)` source understood by the portal.

pub mod ast;
pub mod exec;
pub mod lexer;
pub mod parser;
pub mod plan;

pub use ast::{Expr, Query};
pub use exec::{execute, run_bound, ExecError, ExecOptions, RowSource};
pub use parser::{parse_expr, parse_query};
pub use plan::{plan_catalog_query, Access, BoundQuery, Plan, PlanError, Scope};

/// Upper bound on query text accepted by the lexer.
pub const MAX_QUERY_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("query text is {size} bytes; the limit is {limit}")]
    TooLarge { size: usize, limit: usize },
    #[error("{message} at offset {offset}")]
    Lex { offset: usize, message: String },
    #[error("expected {}; found {found} at offset {offset}", expected.join(" or "))]
    Parse {
        offset: usize,
        expected: Vec<String>,
        found: String,
    },
}

impl QueryError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            QueryError::TooLarge { .. } => None,
            QueryError::Lex { offset, .. } | QueryError::Parse { offset, .. } => Some(*offset),
        }
    }

    /// The message without the trailing offset, for callers that render
    /// the position themselves.
    pub fn message(&self) -> String {
        match self {
            QueryError::TooLarge { .. } => self.to_string(),
            QueryError::Lex { message, .. } => message.clone(),
            QueryError::Parse { expected, found, .. } => {
                format!("expected {}; found {found}", expected.join(" or "))
            }
        }
    }

    /// Renders the query line containing the error with a caret under the
    /// offending byte.
    pub fn annotate(&self, text: &str) -> String {
        match self.offset() {
            Some(offset) => caret(text, offset, &self.message()),
            None => self.to_string(),
        }
    }
}

/// `message` followed by the line of `text` holding byte `offset` and a
/// caret under that position.
pub fn caret(text: &str, offset: usize, message: &str) -> String {
    let mut offset = offset.min(text.len());
    while !text.is_char_boundary(offset) {
        offset -= 1;
    }
    let line_start = text[..offset].rfind('\n').map_or(0, |i| i + 1);
    let line_end = text[offset..].find('\n').map_or(text.len(), |i| offset + i);
    let line_no = text[..offset].matches('\n').count() + 1;
    let column = text[line_start..offset].chars().count();
    format!(
        "error: {message} (line {line_no}, column {})\n  {}\n  {}^",
        column + 1,
        &text[line_start..line_end],
        " ".repeat(column)
    )
}
