//! Study drivers, norms, configuration and file formats used by the command-line tool.

pub mod config;
pub mod fixed_point;
pub mod io;
pub mod norms;
pub mod study;

pub use config::RunConfig;
