//! IO, gateway, file formats, plotting, and command orchestration around
//! the pure pipeline stages in `regolith-core`.

pub mod commands;
pub mod error;
pub mod formats;
pub mod gateway;
pub mod ingest;
pub mod manifest;
pub mod plot;
