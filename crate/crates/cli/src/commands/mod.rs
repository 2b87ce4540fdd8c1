pub mod caption;
pub mod evaluate;
pub mod ingest;
pub mod replay;
pub mod translate;
