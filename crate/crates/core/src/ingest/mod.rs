//! Parsing, validation and filtering of line-delimited measurement records.

mod parse;
mod record;
mod stream;

pub use parse::{
    parse_delimited, parse_delimited_with, parse_json, parse_record, Columns, Format, RejectReason,
    Rejection, CANONICAL_COLUMNS,
};
pub use record::MeasurementRecord;
pub use stream::{
    ingest_stream, ingest_with, open_source, write_records, Bounds, IngestError, IngestFilter,
    IngestStats,
};
