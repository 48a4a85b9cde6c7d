pub mod catalog;
pub mod federation;
pub mod fixture;
pub mod ingest;
pub mod mining;
pub mod node;
pub mod query;
pub mod sky;
pub mod store;
pub mod table;
pub mod zone;
