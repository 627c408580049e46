//! Configuration, tables, plots and run manifests.

pub mod config;
pub mod manifest;
pub mod svg;
pub mod table;

pub use config::RunConfig;
pub use manifest::Manifest;
pub use svg::{Plot, Series};
pub use table::{Cell, Table};
